"""Client objectives and their gradient oracles.

Three problem families cover the needs of the trainer and its audits:

* ``HetQuadratic`` — per-client diagonal quadratics with additive
  Gaussian gradient noise. Everything about it is closed-form (global
  minimizer, smoothness constant, exact noise variance), which makes it
  the workhorse for convergence and scaling checks.
* ``SyntheticLogistic`` — binary logistic regression on synthetic
  per-client datasets; stochasticity comes from minibatch subsampling
  (drawn with replacement across local steps).
* ``TinyMLP`` — a one-hidden-layer tanh network with squared loss and
  analytic backprop, small enough to validate against central finite
  differences.

All oracles are immutable after construction and take explicit random
streams, so concurrent evaluation across clients is race-free.
"""
from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import params, rng
from .errors import DimensionMismatchError, DomainError
from .params import ParamVector


class GradientOracle(abc.ABC):
    """One client's objective f_i: loss, exact gradient, noisy gradient.

    When ``clip`` is set, every emitted gradient (exact or stochastic)
    is clamped coordinatewise into [−clip, clip], so downstream bounds
    that assume a coordinate cap hold unconditionally.
    """

    def __init__(self, client_id: int, dim: int, sigma: float = 0.0,
                 clip: Optional[float] = None) -> None:
        if dim < 1:
            raise DomainError("dimension must be at least 1")
        if sigma < 0.0:
            raise DomainError("noise level must be nonnegative")
        if clip is not None and clip <= 0.0:
            raise DomainError("clip bound must be positive when set")
        self.client_id = int(client_id)
        self.dim = int(dim)
        self.sigma = float(sigma)
        self.clip = None if clip is None else float(clip)

    def _check_point(self, x: ParamVector) -> ParamVector:
        x = params.as_param(x)
        if x.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"point has length {x.shape[0]}, oracle dimension is {self.dim}"
            )
        return x

    def _clip(self, g: ParamVector) -> ParamVector:
        if self.clip is None:
            return g
        return params.clip_inf(g, self.clip)

    @abc.abstractmethod
    def loss(self, x: ParamVector) -> float:
        """Exact objective value f_i(x)."""

    @abc.abstractmethod
    def _exact_grad(self, x: ParamVector) -> ParamVector:
        """∇f_i(x) without noise or clipping."""

    @abc.abstractmethod
    def _noisy_grad(self, x: ParamVector, stream: np.random.Generator) -> ParamVector:
        """One stochastic gradient draw, before clipping."""

    def full_grad(self, x: ParamVector) -> ParamVector:
        """Exact gradient, clipped when a coordinate cap is configured."""
        return self._clip(self._exact_grad(self._check_point(x)))

    def stoch_grad(self, x: ParamVector, stream: np.random.Generator) -> ParamVector:
        """Unbiased gradient estimate, clipped when a cap is configured."""
        return self._clip(self._noisy_grad(self._check_point(x), stream))


class HetQuadratic(GradientOracle):
    """f_i(x) = ½ (x − b_i)ᵀ A_i (x − b_i) with diagonal SPD A_i.

    The stochastic gradient adds N(0, (σ²/d)·I) noise, so the expected
    squared deviation from the exact gradient is exactly σ².
    """

    def __init__(self, client_id: int, a_diag: ParamVector, b: ParamVector,
                 sigma: float = 0.0, clip: Optional[float] = None) -> None:
        a_diag = params.as_param(a_diag)
        b = params.as_param(b)
        if a_diag.shape != b.shape:
            raise DimensionMismatchError("curvature and offset lengths differ")
        if np.any(a_diag <= 0.0):
            raise DomainError("curvature diagonal must be strictly positive")
        super().__init__(client_id, a_diag.shape[0], sigma, clip)
        self.a_diag = a_diag
        self.b = b

    @property
    def smoothness(self) -> float:
        """Lipschitz constant of the gradient: the largest curvature."""
        return float(self.a_diag.max())

    def loss(self, x: ParamVector) -> float:
        x = self._check_point(x)
        r = x - self.b
        return float(0.5 * np.dot(r, self.a_diag * r))

    def _exact_grad(self, x: ParamVector) -> ParamVector:
        return self.a_diag * (x - self.b)

    def _noisy_grad(self, x: ParamVector, stream: np.random.Generator) -> ParamVector:
        g = self._exact_grad(x)
        if self.sigma > 0.0:
            g = g + (self.sigma / np.sqrt(self.dim)) * stream.standard_normal(self.dim)
        return g


def _sigmoid(s: np.ndarray) -> np.ndarray:
    out = np.empty_like(s)
    pos = s >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    es = np.exp(s[~pos])
    out[~pos] = es / (1.0 + es)
    return out


class SyntheticLogistic(GradientOracle):
    """Binary logistic regression on a fixed per-client dataset.

    Stochastic gradients average ``batch_size`` samples drawn uniformly
    with replacement, which keeps the estimator unbiased for the
    full-dataset gradient.
    """

    def __init__(self, client_id: int, features: np.ndarray, labels: np.ndarray,
                 batch_size: int = 8, clip: Optional[float] = None) -> None:
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.float64)
        if features.ndim != 2:
            raise DimensionMismatchError("features must be a 2-D sample matrix")
        if labels.shape != (features.shape[0],):
            raise DimensionMismatchError("one label per sample required")
        if features.shape[0] < 1:
            raise DomainError("dataset must be nonempty")
        if batch_size < 1:
            raise DomainError("batch size must be at least 1")
        super().__init__(client_id, features.shape[1], 0.0, clip)
        self.features = features
        self.labels = labels
        self.batch_size = int(batch_size)

    def _logits(self, x: ParamVector, rows: np.ndarray) -> np.ndarray:
        return rows @ x

    def loss(self, x: ParamVector) -> float:
        x = self._check_point(x)
        s = self._logits(x, self.features)
        # log(1 + e^s) − y·s evaluated stably for either sign of s
        per_sample = np.maximum(s, 0.0) - self.labels * s + np.log1p(np.exp(-np.abs(s)))
        return float(per_sample.mean())

    def _grad_on(self, x: ParamVector, rows: np.ndarray, ys: np.ndarray) -> ParamVector:
        residual = _sigmoid(self._logits(x, rows)) - ys
        return rows.T @ residual / rows.shape[0]

    def _exact_grad(self, x: ParamVector) -> ParamVector:
        return self._grad_on(x, self.features, self.labels)

    def _noisy_grad(self, x: ParamVector, stream: np.random.Generator) -> ParamVector:
        picks = stream.integers(0, self.features.shape[0], size=self.batch_size)
        return self._grad_on(x, self.features[picks], self.labels[picks])


class TinyMLP(GradientOracle):
    """One-hidden-layer tanh regressor with squared loss.

    The flat parameter vector packs, in order: the input-to-hidden
    weight matrix (row-major), the hidden bias, the hidden-to-output
    weights, and the output bias. Gradients come from analytic
    backpropagation; stochastic draws subsample minibatches with
    replacement.
    """

    MAX_HIDDEN = 16

    def __init__(self, client_id: int, features: np.ndarray, targets: np.ndarray,
                 hidden: int = 8, batch_size: int = 8,
                 clip: Optional[float] = None) -> None:
        features = np.asarray(features, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        if features.ndim != 2:
            raise DimensionMismatchError("features must be a 2-D sample matrix")
        if targets.shape != (features.shape[0],):
            raise DimensionMismatchError("one target per sample required")
        if features.shape[0] < 1:
            raise DomainError("dataset must be nonempty")
        if not 1 <= hidden <= self.MAX_HIDDEN:
            raise DomainError(f"hidden width must lie in [1, {self.MAX_HIDDEN}]")
        if batch_size < 1:
            raise DomainError("batch size must be at least 1")
        in_dim = features.shape[1]
        n_params = hidden * in_dim + hidden + hidden + 1
        super().__init__(client_id, n_params, 0.0, clip)
        self.features = features
        self.targets = targets
        self.hidden = int(hidden)
        self.in_dim = int(in_dim)
        self.batch_size = int(batch_size)

    def _unpack(self, x: ParamVector) -> Tuple[np.ndarray, np.ndarray, np.ndarray, float]:
        h, d_in = self.hidden, self.in_dim
        w1 = x[: h * d_in].reshape(h, d_in)
        b1 = x[h * d_in: h * d_in + h]
        w2 = x[h * d_in + h: h * d_in + 2 * h]
        b2 = float(x[-1])
        return w1, b1, w2, b2

    def _forward(self, x: ParamVector, rows: np.ndarray):
        w1, b1, w2, b2 = self._unpack(x)
        hidden_act = np.tanh(rows @ w1.T + b1)
        preds = hidden_act @ w2 + b2
        return w1, w2, hidden_act, preds

    def _loss_on(self, x: ParamVector, rows: np.ndarray, ys: np.ndarray) -> float:
        _, _, _, preds = self._forward(x, rows)
        return float(0.5 * np.mean((preds - ys) ** 2))

    def loss(self, x: ParamVector) -> float:
        return self._loss_on(self._check_point(x), self.features, self.targets)

    def _grad_on(self, x: ParamVector, rows: np.ndarray, ys: np.ndarray) -> ParamVector:
        n = rows.shape[0]
        _, w2, hidden_act, preds = self._forward(x, rows)
        err = (preds - ys) / n
        d_w2 = hidden_act.T @ err
        d_b2 = err.sum()
        d_hidden = np.outer(err, w2) * (1.0 - hidden_act ** 2)
        d_w1 = d_hidden.T @ rows
        d_b1 = d_hidden.sum(axis=0)
        return np.concatenate([d_w1.ravel(), d_b1, d_w2, [d_b2]])

    def _exact_grad(self, x: ParamVector) -> ParamVector:
        return self._grad_on(x, self.features, self.targets)

    def _noisy_grad(self, x: ParamVector, stream: np.random.Generator) -> ParamVector:
        picks = stream.integers(0, self.features.shape[0], size=self.batch_size)
        return self._grad_on(x, self.features[picks], self.targets[picks])


# ---------------------------------------------------------------------------
# Fleet-level helpers


def global_grad(oracles: Sequence[GradientOracle], x: ParamVector) -> ParamVector:
    """Exact gradient of f = (1/N) Σ f_i at x."""
    if not oracles:
        raise DimensionMismatchError("need at least one oracle")
    return params.mean_of([o.full_grad(x) for o in oracles])


def global_loss(oracles: Sequence[GradientOracle], x: ParamVector) -> float:
    """Value of f = (1/N) Σ f_i at x."""
    if not oracles:
        raise DimensionMismatchError("need at least one oracle")
    return sum(o.loss(x) for o in oracles) / len(oracles)


def quadratic_minimizer(oracles: Sequence[GradientOracle]) -> ParamVector:
    """Closed-form argmin of the averaged diagonal quadratics."""
    if not oracles or not all(isinstance(o, HetQuadratic) for o in oracles):
        raise DomainError("closed-form minimizer needs all-quadratic clients")
    a_sum = params.zeros(oracles[0].dim)
    weighted = params.zeros(oracles[0].dim)
    for o in oracles:
        a_sum = a_sum + o.a_diag
        weighted = weighted + o.a_diag * o.b
    return weighted / a_sum


def smoothness_constant(oracles: Sequence[GradientOracle]) -> float:
    """Largest gradient-Lipschitz constant across quadratic clients."""
    if not oracles or not all(isinstance(o, HetQuadratic) for o in oracles):
        raise DomainError("closed-form smoothness needs all-quadratic clients")
    return max(o.smoothness for o in oracles)


def measure_heterogeneity(oracles: Sequence[GradientOracle], x: ParamVector,
                          probe_count: int = 1, seed: int = 0) -> float:
    """Largest observed ‖∇f(x̃) − ∇f_i(x̃)‖² over probe points x̃.

    Probes are ``x`` itself plus ``probe_count − 1`` unit-Gaussian
    offsets from it, drawn from a dedicated stream so the measurement is
    reproducible. Clipped oracles keep the result at or below 4·d·G∞².
    """
    if probe_count < 1:
        raise DomainError("probe count must be at least 1")
    x = params.as_param(x)
    stream = rng.probe_stream(seed)
    worst = 0.0
    for p in range(probe_count):
        point = x if p == 0 else x + stream.standard_normal(x.shape[0])
        grads = [o.full_grad(point) for o in oracles]
        center = params.mean_of(grads)
        for g in grads:
            diff = center - g
            worst = max(worst, float(np.dot(diff, diff)))
    return worst


# ---------------------------------------------------------------------------
# Dirichlet label partitioning


@dataclass
class Partition:
    """Disjoint assignment of sample indices to clients."""

    assignment: Dict[int, List[int]]
    alpha: float

    def client_sizes(self) -> List[int]:
        return [len(self.assignment[c]) for c in sorted(self.assignment)]


def dirichlet_partition(labels: Sequence[int], n_clients: int, alpha: float,
                        stream: np.random.Generator) -> Partition:
    """Split samples across clients with per-class Dirichlet proportions.

    For each class, proportions p ~ Dir(alpha·1) decide how that class's
    (shuffled) indices are divided. Clients left empty by a skewed draw
    are repaired deterministically: each takes one sample from whichever
    client currently holds the most.
    """
    if n_clients < 1:
        raise DomainError("need at least one client")
    if alpha <= 0.0:
        raise DomainError("concentration alpha must be positive")
    labels = np.asarray(labels)
    n_samples = labels.shape[0]
    if n_samples < n_clients:
        raise DomainError("fewer samples than clients")

    buckets: List[List[int]] = [[] for _ in range(n_clients)]
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        stream.shuffle(idx)
        proportions = stream.dirichlet(np.full(n_clients, alpha))
        cuts = (np.cumsum(proportions)[:-1] * idx.shape[0]).astype(np.int64)
        for cid, chunk in enumerate(np.split(idx, cuts)):
            buckets[cid].extend(int(i) for i in chunk)

    for cid in range(n_clients):
        if not buckets[cid]:
            donor = max(range(n_clients), key=lambda j: len(buckets[j]))
            buckets[cid].append(buckets[donor].pop())

    assignment = {cid: sorted(buckets[cid]) for cid in range(n_clients)}
    return Partition(assignment=assignment, alpha=float(alpha))


def load_delimited(path: str) -> Tuple[np.ndarray, np.ndarray]:
    """Read a labeled dataset: one sample per line, label first.

    Fields may be separated by commas or whitespace. Returns (labels as
    int array, features as float matrix).
    """
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    delimiter = "," if "," in first else None
    data = np.loadtxt(path, delimiter=delimiter, ndmin=2)
    if data.shape[1] < 2:
        raise DomainError("each line needs a label and at least one feature")
    return data[:, 0].astype(np.int64), data[:, 1:]


# ---------------------------------------------------------------------------
# Construction from a declarative spec


@dataclass(frozen=True)
class ObjectiveSpec:
    """Declarative recipe for building one oracle per client.

    ``dim`` is the feature/input dimension; the trainable parameter
    count equals ``dim`` for quadratic and logistic objectives and
    ``hidden·(dim + 2) + 1`` for the MLP.
    """

    kind: str
    dim: int
    sigma: float = 0.0
    clip: Optional[float] = None
    # quadratic curvature/offset ranges
    a_min: float = 0.5
    a_max: float = 2.0
    b_scale: float = 1.0
    # dataset-backed objectives
    n_samples: int = 64
    batch_size: int = 8
    hidden: int = 8

    KINDS = ("het_quadratic", "logistic", "tiny_mlp")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise DomainError(f"unknown objective kind {self.kind!r}")
        if self.dim < 1:
            raise DomainError("dim must be at least 1")
        if self.sigma < 0.0:
            raise DomainError("sigma must be nonnegative")
        if self.clip is not None and self.clip <= 0.0:
            raise DomainError("clip must be positive when set")
        if not 0.0 < self.a_min <= self.a_max:
            raise DomainError("curvature range must satisfy 0 < a_min <= a_max")
        if self.n_samples < 1 or self.batch_size < 1:
            raise DomainError("dataset sizes must be positive")


def make_oracles(spec: ObjectiveSpec, n_clients: int, master_seed: int) -> List[GradientOracle]:
    """Instantiate ``n_clients`` oracles, one deterministic problem each."""
    if n_clients < 1:
        raise DomainError("need at least one client")
    # Shared signal all logistic clients perturb; drawn from its own
    # stream so per-client problem streams stay aligned across kinds.
    w_true = rng.init_stream(master_seed).standard_normal(spec.dim)
    oracles: List[GradientOracle] = []
    for cid in range(n_clients):
        stream = rng.data_stream(master_seed, cid)
        if spec.kind == "het_quadratic":
            a_diag = stream.uniform(spec.a_min, spec.a_max, spec.dim)
            b = spec.b_scale * stream.standard_normal(spec.dim)
            oracles.append(HetQuadratic(cid, a_diag, b, spec.sigma, spec.clip))
        elif spec.kind == "logistic":
            w_i = w_true + spec.b_scale * stream.standard_normal(spec.dim)
            feats = stream.standard_normal((spec.n_samples, spec.dim))
            probs = _sigmoid(feats @ w_i)
            labels = (stream.random(spec.n_samples) < probs).astype(np.float64)
            oracles.append(SyntheticLogistic(cid, feats, labels,
                                             spec.batch_size, spec.clip))
        else:  # tiny_mlp
            feats = stream.standard_normal((spec.n_samples, spec.dim))
            mix = stream.standard_normal(spec.dim)
            targets = np.tanh(feats @ mix) + spec.b_scale * stream.standard_normal(spec.n_samples) * 0.1
            oracles.append(TinyMLP(cid, feats, targets, spec.hidden,
                                   spec.batch_size, spec.clip))
    return oracles
