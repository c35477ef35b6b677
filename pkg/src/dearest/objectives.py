"""Finite-sum objectives split across agents.

An objective is an m x n grid of component functions: agent i holds n
components and its local function is their average; the global function is
the average of the local ones.  The optimizer only ever touches component
gradients (the costed oracle), per-agent batches of them, and full local
gradients; exact global values/gradients exist for diagnostics.

Two concrete instances:

* ``LogisticNCObjective`` -- binary logistic loss with the bounded nonconvex
  regularizer lambda * sum_k x_k^2 / (1 + x_k^2).  Features may be dense
  ndarrays or scipy CSR matrices (one per agent); all evaluation paths are
  overflow-safe.
* ``QuadraticObjective`` -- 0.5 * ||A_ij x - c_ij||^2 with a closed-form
  minimizer, used as an oracle in tests.
"""

from __future__ import annotations

import abc
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

__all__ = [
    "FiniteSumObjective",
    "LogisticNCObjective",
    "QuadraticObjective",
    "make_quadratic",
    "make_synthetic_logistic",
]


class FiniteSumObjective(abc.ABC):
    """Average of m local functions, each an average of n components.

    Subclasses set ``m``, ``n``, ``d`` and implement the component oracle;
    the batched/local/global evaluations have generic implementations here
    and are overridden with vectorized versions where it matters.
    """

    m: int
    n: int
    d: int

    @abc.abstractmethod
    def component_value(self, i: int, j: int, x: np.ndarray) -> float:
        """Value of component j on agent i."""

    @abc.abstractmethod
    def component_grad(self, i: int, j: int, x: np.ndarray) -> np.ndarray:
        """Gradient of component j on agent i."""

    @property
    @abc.abstractmethod
    def smoothness(self) -> float:
        """Upper bound on the average-smoothness constant of the components."""

    @property
    @abc.abstractmethod
    def value_lower_bound(self) -> float:
        """A lower bound on the global infimum (used to bound f(x0) - f*)."""

    def local_value(self, i: int, x: np.ndarray) -> float:
        return float(np.mean([self.component_value(i, j, x) for j in range(self.n)]))

    def local_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        acc = np.zeros(self.d)
        for j in range(self.n):
            acc += self.component_grad(i, j, x)
        return acc / self.n

    def batch_grad_mean(self, i: int, indices: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Mean component gradient over ``indices`` (with multiplicity)."""
        acc = np.zeros(self.d)
        for j in indices:
            acc += self.component_grad(i, int(j), x)
        return acc / len(indices)

    def grad_rows(self, x: np.ndarray) -> np.ndarray:
        """Stack local gradients: row i is grad f_i evaluated at row i of x."""
        return np.stack([self.local_grad(i, x[i]) for i in range(self.m)])

    def global_value(self, x: np.ndarray) -> float:
        return float(np.mean([self.local_value(i, x) for i in range(self.m)]))

    def global_grad(self, x: np.ndarray) -> np.ndarray:
        acc = np.zeros(self.d)
        for i in range(self.m):
            acc += self.local_grad(i, x)
        return acc / self.m


def _regularizer_value(x: np.ndarray, lam: float) -> float:
    return lam * float(np.sum(x * x / (1.0 + x * x)))


def _regularizer_grad(x: np.ndarray, lam: float) -> np.ndarray:
    denom = 1.0 + x * x
    return lam * 2.0 * x / (denom * denom)


def _stable_logistic_loss(z: np.ndarray) -> np.ndarray:
    # log(1 + exp(-z)) without overflow: max(-z, 0) + log1p(exp(-|z|))
    return np.maximum(-z, 0.0) + np.log1p(np.exp(-np.abs(z)))


class LogisticNCObjective(FiniteSumObjective):
    """Binary logistic loss with a bounded nonconvex regularizer.

    Component (i, j) is log(1 + exp(-b_ij * a_ij.x)) + lambda * sum_k
    x_k^2/(1 + x_k^2).  Both terms are nonnegative, so the global infimum is
    >= 0.  Features are per-agent (n, d) arrays, dense or CSR; labels are
    per-agent vectors with entries exactly +1 or -1.
    """

    def __init__(
        self,
        features: Sequence[np.ndarray | sp.spmatrix],
        labels: Sequence[np.ndarray],
        lambda_reg: float,
    ) -> None:
        if len(features) == 0 or len(features) != len(labels):
            raise ValueError("need one feature matrix and one label vector per agent")
        if lambda_reg < 0.0:
            raise ValueError(f"regularization weight must be >= 0, got {lambda_reg}")
        self.m = len(features)
        self.features = [f if sp.issparse(f) else np.asarray(f, dtype=float) for f in features]
        self.labels = [np.asarray(lab, dtype=float).ravel() for lab in labels]
        self.n, self.d = self.features[0].shape
        self.lambda_reg = float(lambda_reg)
        for i, (f, lab) in enumerate(zip(self.features, self.labels)):
            if f.shape != (self.n, self.d):
                raise ValueError(f"agent {i} features have shape {f.shape}, expected {(self.n, self.d)}")
            if lab.shape != (self.n,):
                raise ValueError(f"agent {i} has {lab.shape[0]} labels for {self.n} samples")
            if not np.all(np.abs(lab) == 1.0):
                raise ValueError(f"agent {i} labels must be exactly +1 or -1")
        self._smoothness = self._smoothness_bound()

    def _row(self, i: int, j: int) -> np.ndarray:
        f = self.features[i]
        if sp.issparse(f):
            return np.asarray(f[j].todense()).ravel()
        return f[j]

    def _margins(self, i: int, x: np.ndarray, indices: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        f = self.features[i]
        lab = self.labels[i]
        if indices is not None:
            f = f[indices]
            lab = lab[indices]
        z = lab * np.asarray(f @ x).ravel()
        return z, lab

    def component_value(self, i: int, j: int, x: np.ndarray) -> float:
        z = self.labels[i][j] * float(self._row(i, j) @ x)
        return float(_stable_logistic_loss(np.asarray(z))) + _regularizer_value(x, self.lambda_reg)

    def component_grad(self, i: int, j: int, x: np.ndarray) -> np.ndarray:
        b = self.labels[i][j]
        a = self._row(i, j)
        z = b * float(a @ x)
        return -b * float(expit(-z)) * a + _regularizer_grad(x, self.lambda_reg)

    def local_value(self, i: int, x: np.ndarray) -> float:
        z, _ = self._margins(i, x)
        return float(np.mean(_stable_logistic_loss(z))) + _regularizer_value(x, self.lambda_reg)

    def local_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        z, lab = self._margins(i, x)
        coef = -(lab * expit(-z)) / self.n
        lin = np.asarray(self.features[i].T @ coef).ravel()
        return lin + _regularizer_grad(x, self.lambda_reg)

    def batch_grad_mean(self, i: int, indices: np.ndarray, x: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.intp)
        z, lab = self._margins(i, x, indices)
        coef = -(lab * expit(-z)) / len(indices)
        fsub = self.features[i][indices]
        lin = np.asarray(fsub.T @ coef).ravel()
        return lin + _regularizer_grad(x, self.lambda_reg)

    def _smoothness_bound(self) -> float:
        # Per-component Lipschitz constant: ||a||^2 / 4 from the logistic
        # term (sigmoid curvature peaks at 1/4) plus 2*lambda from the
        # regularizer (|d^2/dx^2 of x^2/(1+x^2)| peaks at 2).
        worst = 0.0
        for f in self.features:
            if sp.issparse(f):
                row_sq = np.asarray(f.multiply(f).sum(axis=1)).ravel()
            else:
                row_sq = np.sum(f * f, axis=1)
            ell = row_sq / 4.0 + 2.0 * self.lambda_reg
            worst = max(worst, float(np.sqrt(np.mean(ell * ell))))
        return worst

    @property
    def smoothness(self) -> float:
        return self._smoothness

    @property
    def value_lower_bound(self) -> float:
        return 0.0


class QuadraticObjective(FiniteSumObjective):
    """Least-squares components 0.5 * ||A_ij x - c_ij||^2.

    Shapes: ``a`` is (m, n, q, d) and ``c`` is (m, n, q).  The global
    minimizer solves the aggregated normal equations and is exposed via
    ``solution()`` for oracle tests.
    """

    def __init__(self, a: np.ndarray, c: np.ndarray) -> None:
        a = np.asarray(a, dtype=float)
        c = np.asarray(c, dtype=float)
        if a.ndim != 4 or c.ndim != 3 or a.shape[:3] != c.shape:
            raise ValueError(f"incompatible shapes a={a.shape}, c={c.shape}")
        self.a = a
        self.c = c
        self.m, self.n, _, self.d = a.shape
        self._smoothness = self._smoothness_bound()
        self._solution: np.ndarray | None = None

    def component_value(self, i: int, j: int, x: np.ndarray) -> float:
        r = self.a[i, j] @ x - self.c[i, j]
        return 0.5 * float(r @ r)

    def component_grad(self, i: int, j: int, x: np.ndarray) -> np.ndarray:
        return self.a[i, j].T @ (self.a[i, j] @ x - self.c[i, j])

    def local_value(self, i: int, x: np.ndarray) -> float:
        r = np.einsum("jqd,d->jq", self.a[i], x) - self.c[i]
        return 0.5 * float(np.sum(r * r)) / self.n

    def local_grad(self, i: int, x: np.ndarray) -> np.ndarray:
        r = np.einsum("jqd,d->jq", self.a[i], x) - self.c[i]
        return np.einsum("jqd,jq->d", self.a[i], r) / self.n

    def batch_grad_mean(self, i: int, indices: np.ndarray, x: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.intp)
        asub = self.a[i, indices]
        r = np.einsum("jqd,d->jq", asub, x) - self.c[i, indices]
        return np.einsum("jqd,jq->d", asub, r) / len(indices)

    def _smoothness_bound(self) -> float:
        worst = 0.0
        for i in range(self.m):
            ell = np.array([np.linalg.norm(self.a[i, j], 2) ** 2 for j in range(self.n)])
            worst = max(worst, float(np.sqrt(np.mean(ell * ell))))
        return worst

    @property
    def smoothness(self) -> float:
        return self._smoothness

    def solution(self) -> np.ndarray:
        """Global minimizer from the aggregated normal equations."""
        if self._solution is None:
            h = np.einsum("ijqd,ijqe->de", self.a, self.a) / (self.m * self.n)
            rhs = np.einsum("ijqd,ijq->d", self.a, self.c) / (self.m * self.n)
            self._solution = np.linalg.solve(h, rhs)
        return self._solution.copy()

    def optimal_value(self) -> float:
        x_star = self.solution()
        return float(np.mean([self.local_value(i, x_star) for i in range(self.m)]))

    @property
    def value_lower_bound(self) -> float:
        return self.optimal_value()


def make_quadratic(m: int, n: int, d: int, seed: int, q: int | None = None) -> QuadraticObjective:
    """Seeded random least-squares objective with well-scaled curvature."""
    if min(m, n, d) < 1:
        raise ValueError(f"dimensions must be positive, got m={m}, n={n}, d={d}")
    q = d if q is None else q
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, n, q, d)) / np.sqrt(d)
    c = rng.standard_normal((m, n, q))
    return QuadraticObjective(a, c)


def make_synthetic_logistic(
    m: int,
    n: int,
    d: int,
    lambda_reg: float,
    seed: int,
    flip_fraction: float = 0.1,
) -> LogisticNCObjective:
    """Gaussian-feature binary classification data from a noisy linear teacher.

    ``flip_fraction`` of the labels are flipped so the problem is not
    separable and keeps curvature at the optimum.
    """
    if min(m, n, d) < 1:
        raise ValueError(f"dimensions must be positive, got m={m}, n={n}, d={d}")
    rng = np.random.default_rng(seed)
    teacher = rng.standard_normal(d)
    teacher /= np.linalg.norm(teacher)
    features, labels = [], []
    for _ in range(m):
        f = rng.standard_normal((n, d))
        lab = np.where(f @ teacher >= 0.0, 1.0, -1.0)
        flips = rng.random(n) < flip_fraction
        lab[flips] = -lab[flips]
        features.append(f)
        labels.append(lab)
    return LogisticNCObjective(features, labels, lambda_reg)
