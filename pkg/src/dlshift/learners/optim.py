import numpy as np


def adam(loss_and_grad, theta, epochs, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """Full-batch Adam; returns the final parameters (dict of arrays, updated in place)."""
    m = {k: np.zeros_like(v) for k, v in theta.items()}
    v = {k: np.zeros_like(v) for k, v in theta.items()}
    for step in range(1, epochs + 1):
        _, grad = loss_and_grad(theta)
        c1 = 1.0 - beta1**step
        c2 = 1.0 - beta2**step
        for k, g in grad.items():
            m[k] *= beta1
            m[k] += (1.0 - beta1) * g
            v[k] *= beta2
            v[k] += (1.0 - beta2) * g * g
            theta[k] -= lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + eps)
    return theta
