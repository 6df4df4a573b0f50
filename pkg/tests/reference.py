"""Independent reference implementations used as oracles by the test suite.

Everything in this file is written straight from the defining equations with
no imports from the package under test, so agreement between the two is
meaningful evidence rather than a tautology.
"""
from __future__ import annotations

import math

import numpy as np


def scalar_amsgrad_step(x, m, v, vhat, g, alpha, beta1, beta2):
    """One AMSGrad step on plain Python floats (no bias correction).

    Update order: first moment, second moment, running max, then the
    parameter moves against m scaled by 1/sqrt(vhat).
    """
    m_new = beta1 * m + (1.0 - beta1) * g
    v_new = beta2 * v + (1.0 - beta2) * g * g
    vhat_new = max(vhat, v_new)
    x_new = x - alpha * m_new / math.sqrt(vhat_new)
    return x_new, m_new, v_new, vhat_new


class CentralAmsgrad:
    """Standalone vector AMSGrad loop (no bias correction, vhat floor eps^2).

    Used to check that a single-client federation with one local step per
    round walks exactly the same trajectory as ordinary centralized AMSGrad.
    """

    def __init__(self, x0, alpha, beta1, beta2, epsilon):
        self.x = np.array(x0, dtype=np.float64, copy=True)
        self.m = np.zeros_like(self.x)
        self.v = np.full_like(self.x, epsilon**2)
        self.vhat = np.full_like(self.x, epsilon**2)
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2

    def step(self, g):
        g = np.asarray(g, dtype=np.float64)
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * g
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * g * g
        self.vhat = np.maximum(self.vhat, self.v)
        self.x = self.x - self.alpha * self.m / np.sqrt(self.vhat)
        return self.x


def central_fd_gradient(f, x, h=1e-6):
    """Central finite-difference gradient of a scalar function f at x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        grad[j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return grad


def bisect_lambert_w(target, tol=1e-14, max_iter=200):
    """Solve w * exp(w) = target for w >= 0 by bisection.

    Valid for target >= 0 (the principal branch restricted to nonnegative
    arguments, where w * exp(w) is strictly increasing).
    """
    if target < 0:
        raise ValueError("bisection oracle only handles nonnegative targets")
    if target == 0.0:
        return 0.0
    lo = 0.0
    hi = math.log1p(target) + 1.0  # W(x) <= ln(1+x), padded
    while hi * math.exp(hi) < target:  # safety: widen if the pad was tight
        hi *= 2.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid * math.exp(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def quad_global_minimizer(a_diags, b_vecs):
    """Closed-form minimizer of mean_i 0.5 (x-b_i)' diag(a_i) (x-b_i).

    Solves (sum_i A_i) x = sum_i A_i b_i coordinatewise (all A_i diagonal).
    """
    a_sum = np.sum(np.asarray(a_diags, dtype=np.float64), axis=0)
    ab_sum = np.sum(
        np.asarray(a_diags, dtype=np.float64) * np.asarray(b_vecs, dtype=np.float64),
        axis=0,
    )
    return ab_sum / a_sum


def sgd_quadratic_closed_form(x0, a_diag, b, lr, k):
    """x after k plain-SGD steps on 0.5 (x-b)' diag(a) (x-b), noise-free.

    The recursion x <- x - lr * a * (x - b) contracts each coordinate:
    x_k - b = (1 - lr*a)^k (x_0 - b).
    """
    x0 = np.asarray(x0, dtype=np.float64)
    a = np.asarray(a_diag, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return b + (1.0 - lr * a) ** k * (x0 - b)


def log_floor_exact(t, base):
    """Largest integer p with base**p <= t, by explicit search (t >= 1)."""
    p = 0
    while base ** (p + 1) <= t:
        p += 1
    return p


def sum_log_schedule(k_init, k_alpha, n_rounds):
    """Direct summation of K_t = k_init + floor(log_{k_alpha} t), K_0 = k_init."""
    total = 0
    for t in range(n_rounds):
        if t == 0:
            total += k_init
        else:
            total += k_init + log_floor_exact(t, k_alpha)
    return total


def is_exact_partition(assignment, n_samples):
    """True iff the per-client index lists tile 0..n_samples-1 exactly once."""
    seen = []
    for indices in assignment.values():
        seen.extend(int(j) for j in indices)
    return sorted(seen) == list(range(n_samples))
