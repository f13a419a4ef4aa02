import numpy as np
import pytest
from scipy import stats as sps

from dlshift.errors import ConfigError
from dlshift.stream import AUTHORIZED, REJECT, export_csv
from dlshift.synthgen import GeneratorConfig, config_from_mapping, generate, generate_table, load_config


def auth_counts(table, cfg):
    period = cfg.grid.period_of(table.receiving_time)
    sent = table.inline != REJECT
    auth = sent & (table.bank == AUTHORIZED)
    return period, sent, auth


def test_generated_records_satisfy_invariants(small_txns):
    # Transaction.__post_init__ validates every record
    assert len(small_txns) > 30000
    assert all(t.maturity_time >= t.receiving_time for t in small_txns if t.fraud_flag)


def test_delays_within_lead_time(small_table, small_config):
    g = small_config.grid
    fr = small_table.fraud
    d = g.period_of(small_table.maturity_time[fr]) + 1 - g.period_of(small_table.receiving_time[fr])
    assert d.min() >= 1 and d.max() <= small_config.lead_time


def test_same_seed_identical_bytes(tmp_path):
    cfg = GeneratorConfig(seed=3, periods=6, txns_per_period=500)
    export_csv(generate(cfg), tmp_path / "a.csv")
    export_csv(generate(cfg), tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    other = generate(GeneratorConfig(seed=4, periods=6, txns_per_period=500))
    export_csv(other, tmp_path / "c.csv")
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "c.csv").read_bytes()


def test_delay_support_beyond_lead_time_rejected():
    with pytest.raises(ConfigError):
        generate_table(GeneratorConfig(lead_time=3, maturity_delay_weights=(1, 1, 1, 1)))


def test_no_feedback_authorization_is_flat():
    cfg = GeneratorConfig(seed=11, periods=20, txns_per_period=5000, feedback_gain=0.0, drift=0.0,
                          fraud_volatility=0.0)
    table = generate_table(cfg)
    period, sent, auth = auth_counts(table, cfg)
    scores = np.asarray(cfg.score_support)
    chi2, dof = 0.0, 0
    for s in scores:
        m = sent & (table.risk_score == s)
        a = np.bincount(period[m & auth], minlength=cfg.periods)
        n = np.bincount(period[m], minlength=cfg.periods)
        obs = np.stack([a, n - a])
        c, _, d, _ = sps.chi2_contingency(obs, correction=False)
        chi2 += c
        dof += d
    p = sps.chi2.sf(chi2, dof)
    assert p > 0.01


def test_spike_makes_bank_more_conservative():
    k = 15
    cfg = GeneratorConfig(seed=5, periods=22, txns_per_period=5000, feedback_gain=0.6, spike_period=k,
                          spike_magnitude=0.15)
    table = generate_table(cfg)
    period, sent, auth = auth_counts(table, cfg)
    after = np.isin(period, [k + 1, k + 2, k + 3]) & sent
    before = np.isin(period, [k - 3, k - 2, k - 1]) & sent
    p1, n1 = auth[after].mean(), after.sum()
    p0, n0 = auth[before].mean(), before.sum()
    pooled = (auth[after].sum() + auth[before].sum()) / (n1 + n0)
    z = (p0 - p1) / np.sqrt(pooled * (1 - pooled) * (1 / n0 + 1 / n1))
    assert p1 < p0
    assert sps.norm.sf(z) < 0.01


def test_fraud_rate_converges_without_feedback():
    cfg = GeneratorConfig(seed=2, periods=10, txns_per_period=40000, feedback_gain=0.0, drift=0.0,
                          fraud_volatility=0.0)
    table = generate_table(cfg)
    target = cfg.fraud_rates()
    for i, s in enumerate(cfg.score_support):
        f = table.fraud[table.risk_score == s]
        se = np.sqrt(target[i] * (1 - target[i]) / len(f))
        assert abs(f.mean() - target[i]) < 3 * se


def test_config_file(tmp_path):
    p = tmp_path / "gen.cfg"
    p.write_text("# reference\nseed = 9\nperiods=12\nfeedback_gain = 0.25\nunrelated_key = 1\n")
    cfg = load_config(p)
    assert (cfg.seed, cfg.periods, cfg.feedback_gain) == (9, 12, 0.25)
    with pytest.raises(ConfigError):
        config_from_mapping({"periods": "many"})
    base = GeneratorConfig()
    config_from_mapping({"seed": "1"}, base)
    assert base.seed == 42
