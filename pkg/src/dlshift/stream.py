"""Transaction records, period discretization and maturity-aware splits.

Two representations coexist. :class:`Transaction` is the record-level type
used by ingestion, export and the reference (slow) recomputation paths.
:class:`TransactionTable` holds the same data column-wise in numpy arrays and
backs the vectorized pipelines.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InsufficientHistoryError, InvariantError, ParameterError, SchemaError

WEEK = 7 * 24 * 3600.0
DEFAULT_EPOCH = 1_704_067_200.0  # 2024-01-01T00:00:00Z, a Monday

COLUMNS = (
    "ReceivingTime",
    "RiskScore",
    "InlineDecision",
    "BankDecision",
    "MRDecision",
    "FraudFlag",
    "MaturityTime",
)


class InlineDecision(enum.Enum):
    APPROVE = "Approve"
    REVIEW = "Review"
    REJECT = "Reject"


class BankDecision(enum.Enum):
    AUTHORIZED = "Authorized"
    DECLINED = "Declined"
    NOT_SENT = "NotSent"


class MRDecision(enum.Enum):
    APPROVED = "Approved"
    REJECTED = "Rejected"
    NOT_REVIEWED = "NotReviewed"


# integer codes used by TransactionTable; order follows the enum definitions
INLINE_CODES = {d: i for i, d in enumerate(InlineDecision)}
BANK_CODES = {d: i for i, d in enumerate(BankDecision)}
MR_CODES = {d: i for i, d in enumerate(MRDecision)}
INLINE_FROM_CODE = list(InlineDecision)
BANK_FROM_CODE = list(BankDecision)
MR_FROM_CODE = list(MRDecision)
APPROVE, REVIEW, REJECT = 0, 1, 2
AUTHORIZED, DECLINED, NOT_SENT = 0, 1, 2
MR_APPROVED, MR_REJECTED, NOT_REVIEWED = 0, 1, 2


def invariant_violations(
    inline: InlineDecision,
    bank: BankDecision,
    mr: MRDecision,
    fraud_flag: bool,
    receiving_time: float,
    maturity_time: float | None,
) -> list[str]:
    problems = []
    if (bank is BankDecision.NOT_SENT) != (inline is InlineDecision.REJECT):
        problems.append("bank_decision NotSent must coincide with inline_decision Reject")
    if mr is not MRDecision.NOT_REVIEWED and not (
        inline is InlineDecision.REVIEW and bank is BankDecision.AUTHORIZED
    ):
        problems.append("an MR decision requires inline Review and bank Authorized")
    if fraud_flag:
        if maturity_time is None:
            problems.append("fraud_flag set without maturity_time")
        elif maturity_time < receiving_time:
            problems.append("maturity_time precedes receiving_time")
    elif maturity_time is not None:
        problems.append("maturity_time present on a non-fraud transaction")
    return problems


@dataclass(frozen=True)
class Transaction:
    receiving_time: float
    risk_score: int
    inline_decision: InlineDecision
    bank_decision: BankDecision
    mr_decision: MRDecision
    fraud_flag: bool = False
    maturity_time: float | None = None

    def __post_init__(self):
        problems = invariant_violations(
            self.inline_decision,
            self.bank_decision,
            self.mr_decision,
            self.fraud_flag,
            self.receiving_time,
            self.maturity_time,
        )
        if problems:
            raise InvariantError("; ".join(problems))

    @property
    def finally_approved(self) -> bool:
        if self.bank_decision is not BankDecision.AUTHORIZED:
            return False
        if self.inline_decision is InlineDecision.APPROVE:
            return True
        return self.mr_decision is MRDecision.APPROVED


@dataclass(frozen=True)
class PeriodGrid:
    """Half-open periods ``[epoch + t*length, epoch + (t+1)*length)``."""

    epoch: float = DEFAULT_EPOCH
    period_length: float = WEEK

    def __post_init__(self):
        if not self.period_length > 0:
            raise ParameterError(f"period_length must be positive, got {self.period_length}")

    def period_of(self, ts):
        """Period index of a timestamp (scalar or array)."""
        if np.isscalar(ts):
            return int(math.floor((ts - self.epoch) / self.period_length))
        return np.floor((np.asarray(ts, dtype=float) - self.epoch) / self.period_length).astype(np.int64)

    def start_of(self, t: float) -> float:
        if t == math.inf:
            return math.inf
        return self.epoch + t * self.period_length


@dataclass
class MaturitySplit:
    mature: list[Transaction]
    partial: list[Transaction]
    now: int
    L: int

    def check(self, grid: PeriodGrid) -> None:
        """Raise if a mature fraud label took longer than ``L`` periods."""
        horizon = self.L * grid.period_length
        for txn in self.mature:
            if txn.fraud_flag and txn.maturity_time - txn.receiving_time > horizon:
                raise InvariantError(f"label matured after more than L={self.L} periods: {txn}")


@dataclass
class Reject:
    line: int
    reason: str


@dataclass
class IngestResult:
    transactions: list[Transaction]
    rejects: list[Reject] = field(default_factory=list)

    def __iter__(self):
        # allows ``txns, rejects = ingest(...)``
        yield self.transactions
        yield self.rejects


# ---------------------------------------------------------------------------
# timestamps


def format_timestamp(ts: float) -> str:
    dt = datetime.fromtimestamp(ts, tz=timezone.utc)
    if float(ts).is_integer():
        return dt.strftime("%Y-%m-%dT%H:%M:%SZ")
    return dt.strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def parse_timestamp(text: str) -> float:
    text = text.strip()
    if text.endswith("Z") or text.endswith("z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _parse_bool(text: str) -> bool:
    if text == "True":
        return True
    if text == "False":
        return False
    raise ValueError(f"FraudFlag must be 'True' or 'False', got {text!r}")


# ---------------------------------------------------------------------------
# ingestion / export


def _record_from_row(row: Mapping[str, object]) -> Transaction:
    maturity_raw = row["MaturityTime"]
    if isinstance(row["FraudFlag"], bool):
        fraud = row["FraudFlag"]
    else:
        fraud = _parse_bool(str(row["FraudFlag"]))
    maturity = None
    if maturity_raw not in (None, ""):
        maturity = parse_timestamp(str(maturity_raw))
    score_raw = row["RiskScore"]
    if isinstance(score_raw, float) or (isinstance(score_raw, str) and not score_raw.strip().lstrip("-").isdigit()):
        raise ValueError(f"RiskScore must be an integer, got {score_raw!r}")
    return Transaction(
        receiving_time=parse_timestamp(str(row["ReceivingTime"])),
        risk_score=int(score_raw),
        inline_decision=InlineDecision(row["InlineDecision"]),
        bank_decision=BankDecision(row["BankDecision"]),
        mr_decision=MRDecision(row["MRDecision"]),
        fraud_flag=fraud,
        maturity_time=maturity,
    )


def _is_jsonl(path: Path) -> bool:
    return path.suffix.lower() in {".jsonl", ".ndjson", ".json"}


def ingest(path, schema: Mapping[str, str] | None = None) -> IngestResult:
    """Read a CSV or JSON-lines transaction file.

    ``schema`` maps canonical column names (see :data:`COLUMNS`) to the names
    used in the file; unmapped columns keep their canonical name. Rows that
    fail to parse or violate a record invariant are collected in
    ``result.rejects`` with their 1-based line number. Valid rows come back
    sorted by receiving time.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    mapping = {c: c for c in COLUMNS}
    if schema:
        unknown = set(schema) - set(COLUMNS)
        if unknown:
            raise SchemaError(f"unknown canonical columns in schema: {sorted(unknown)}")
        mapping.update(schema)

    txns: list[Transaction] = []
    rejects: list[Reject] = []
    with path.open(newline="", encoding="utf-8") as fh:
        if _is_jsonl(path):
            rows = []
            header_checked = False
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    rejects.append(Reject(lineno, f"invalid JSON: {exc}"))
                    continue
                if not header_checked:
                    missing = [c for c in COLUMNS if mapping[c] not in obj and c != "MaturityTime"]
                    if missing:
                        raise SchemaError(f"missing required fields: {missing}")
                    header_checked = True
                rows.append((lineno, obj))
        else:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in COLUMNS if mapping[c] not in header]
            if missing:
                raise SchemaError(f"missing required columns: {missing}")
            rows = ((i + 2, r) for i, r in enumerate(reader))
        for lineno, raw in rows:
            try:
                row = {c: raw.get(mapping[c]) for c in COLUMNS}
                txns.append(_record_from_row(row))
            except (ValueError, KeyError, TypeError, OverflowError) as exc:
                rejects.append(Reject(lineno, str(exc)))
    txns.sort(key=lambda t: t.receiving_time)
    return IngestResult(txns, rejects)


def _row_values(txn: Transaction) -> list[str]:
    return [
        format_timestamp(txn.receiving_time),
        str(txn.risk_score),
        txn.inline_decision.value,
        txn.bank_decision.value,
        txn.mr_decision.value,
        "True" if txn.fraud_flag else "False",
        "" if txn.maturity_time is None else format_timestamp(txn.maturity_time),
    ]


def export_csv(txns: Iterable[Transaction], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for txn in txns:
            writer.writerow(_row_values(txn))


def export_jsonl(txns: Iterable[Transaction], path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for txn in txns:
            values = _row_values(txn)
            obj = dict(zip(COLUMNS, values))
            obj["RiskScore"] = txn.risk_score
            obj["MaturityTime"] = values[-1] or None
            fh.write(json.dumps(obj) + "\n")


def write_rejects(rejects: Sequence[Reject], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["line", "reason"])
        for r in rejects:
            writer.writerow([r.line, r.reason])


# ---------------------------------------------------------------------------
# period operations


def discretize(
    txns: Sequence[Transaction], period_length: float = WEEK, epoch: float = DEFAULT_EPOCH
) -> dict[int, list[Transaction]]:
    """Bucket transactions by period index."""
    grid = PeriodGrid(epoch, period_length)
    if txns and min(t.receiving_time for t in txns) < epoch:
        raise ParameterError("epoch is later than the earliest receiving_time")
    buckets: dict[int, list[Transaction]] = {}
    for txn in txns:
        buckets.setdefault(grid.period_of(txn.receiving_time), []).append(txn)
    return dict(sorted(buckets.items()))


def split_maturity(buckets: Mapping[int, Sequence[Transaction]], now: int, L: int) -> MaturitySplit:
    if L < 1:
        raise ParameterError(f"L must be >= 1, got {L}")
    if now <= L:
        raise InsufficientHistoryError(f"now={now} must exceed L={L}")
    mature: list[Transaction] = []
    partial: list[Transaction] = []
    for period in sorted(buckets):
        if period <= now - L:
            mature.extend(buckets[period])
        elif period < now:
            partial.extend(buckets[period])
    return MaturitySplit(mature, partial, now, L)


def as_of_view(
    txns: Sequence[Transaction], observation_period: float, grid: PeriodGrid = PeriodGrid()
) -> list[Transaction]:
    """Labels as they were known at the start of ``observation_period``.

    A fraud flag survives only if its maturity time falls in a period strictly
    before ``observation_period``. Hidden labels also drop their maturity
    time, which was not yet known at that point.
    """
    out = []
    for txn in txns:
        if txn.fraud_flag and not grid.period_of(txn.maturity_time) < observation_period:
            txn = replace(txn, fraud_flag=False, maturity_time=None)
        out.append(txn)
    return out


# ---------------------------------------------------------------------------
# columnar form


@dataclass
class TransactionTable:
    receiving_time: np.ndarray
    risk_score: np.ndarray
    inline: np.ndarray
    bank: np.ndarray
    mr: np.ndarray
    fraud: np.ndarray
    maturity_time: np.ndarray  # NaN where no label

    def __len__(self) -> int:
        return len(self.receiving_time)

    @classmethod
    def from_transactions(cls, txns: Sequence[Transaction]) -> "TransactionTable":
        n = len(txns)
        table = cls(
            receiving_time=np.empty(n, dtype=np.float64),
            risk_score=np.empty(n, dtype=np.int64),
            inline=np.empty(n, dtype=np.int8),
            bank=np.empty(n, dtype=np.int8),
            mr=np.empty(n, dtype=np.int8),
            fraud=np.empty(n, dtype=bool),
            maturity_time=np.full(n, np.nan),
        )
        for i, t in enumerate(txns):
            table.receiving_time[i] = t.receiving_time
            table.risk_score[i] = t.risk_score
            table.inline[i] = INLINE_CODES[t.inline_decision]
            table.bank[i] = BANK_CODES[t.bank_decision]
            table.mr[i] = MR_CODES[t.mr_decision]
            table.fraud[i] = t.fraud_flag
            if t.maturity_time is not None:
                table.maturity_time[i] = t.maturity_time
        return table

    def to_transactions(self) -> list[Transaction]:
        out = []
        for i in range(len(self)):
            fraud = bool(self.fraud[i])
            rt = float(self.receiving_time[i])
            mt = float(self.maturity_time[i]) if fraud else None
            out.append(
                Transaction(
                    rt,
                    int(self.risk_score[i]),
                    INLINE_FROM_CODE[self.inline[i]],
                    BANK_FROM_CODE[self.bank[i]],
                    MR_FROM_CODE[self.mr[i]],
                    fraud,
                    mt,
                )
            )
        return out

    def finally_approved(self) -> np.ndarray:
        auth = self.bank == AUTHORIZED
        return auth & ((self.inline == APPROVE) | (self.mr == MR_APPROVED))

    def label_visible_period(self, grid: PeriodGrid) -> np.ndarray:
        """First observation period at which each fraud label is known.

        Non-fraud rows get a large sentinel.
        """
        vis = np.full(len(self), np.iinfo(np.int64).max // 4, dtype=np.int64)
        m = self.fraud
        vis[m] = grid.period_of(self.maturity_time[m]) + 1
        return vis
