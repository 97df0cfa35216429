"""Classification-EM fitting of a Gaussian quasi-mixture to the rows of
an augmented Gram matrix.

The loop alternates a hard M-step (component weights, means, covariances
from the current assignment, all with denominator n_k) and a hard E-step
(argmax of weighted log-density) on a fixed input matrix. Scoring happens
afterwards on the cluster-aware matrix rebuilt from the final assignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from .data import GramMatrix
from .errors import EmptyClusterError, SingularCovarianceError
from .hierarchy import ClusterAssignment, canonicalize_labels
from .transform import AugmentedGram, augment_with_clusters

MODEL_DIAGONAL = "diagonal"
MODEL_FULL_RIDGE = "full_ridge"

VARIANCE_FLOOR = 1e-8
RIDGE_MIN = 1e-8
RIDGE_REL_DEFAULT = 1e-6

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class MixtureParams:
    """Weights, means and covariances of a K-component Gaussian mixture.

    ``covariances`` is (K, D) of per-coordinate variances for the diagonal
    model, or (K, D, D) ridged matrices for the full model. ``floored``
    flags components whose raw scatter hit the variance floor in some
    coordinate (zero total scatter for the full model): their density is
    floor-determined rather than data-determined, so a fit whose final
    parameters carry the flag is scored as degenerate. Pair clusters
    always trip it on a cluster-aware matrix because the rebuilt diagonal
    slot of each member duplicates the other member's entry exactly.
    """

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    model: str = MODEL_DIAGONAL
    ridge: Optional[np.ndarray] = None
    floored: Optional[np.ndarray] = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64).copy()
        mu = np.asarray(self.means, dtype=np.float64).copy()
        cov = np.asarray(self.covariances, dtype=np.float64).copy()
        k, d = mu.shape
        if w.shape != (k,):
            raise ValueError("weights must be a K-vector")
        if np.min(w) < 0 or abs(w.sum() - 1.0) >= 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        if self.model == MODEL_DIAGONAL:
            if cov.shape != (k, d):
                raise ValueError("diagonal covariances must be (K, D)")
            if np.min(cov) < VARIANCE_FLOOR:
                raise ValueError("diagonal variance below the floor")
        elif self.model == MODEL_FULL_RIDGE:
            if cov.shape != (k, d, d):
                raise ValueError("full covariances must be (K, D, D)")
            ridge = np.asarray(self.ridge, dtype=np.float64)
            for j in range(k):
                if np.max(np.abs(cov[j] - cov[j].T)) > 1e-10:
                    raise ValueError("covariance not symmetric")
                if np.linalg.eigvalsh(cov[j])[0] < ridge[j] - 1e-12:
                    raise ValueError("covariance smallest eigenvalue below ridge")
        else:
            raise ValueError(f"unknown covariance model {self.model!r}")
        for name, arr in (("weights", w), ("means", mu), ("covariances", cov)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def k(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


@dataclass(frozen=True)
class FitResult:
    """Outcome of one classification-EM fit at a fixed K.

    ``loglik`` is the full mixture quasi log-likelihood evaluated on the
    cluster-aware matrix rebuilt from the final assignment; ``bic`` is
    filled in by model selection (-inf sentinel for degenerate fits, which
    are excluded from the K sweep). ``floor_events`` counts M-steps where
    some variance hit the floor.
    """

    labels: ClusterAssignment
    params: MixtureParams
    loglik: float
    bic: float
    iterations: int
    converged: bool
    degenerate: bool
    floor_events: int = 0

    def __post_init__(self):
        if self.degenerate and self.bic != float("-inf"):
            raise ValueError("degenerate fits must carry bic = -inf")


def component_density_log(row, mean, cov, model: str = MODEL_DIAGONAL) -> float:
    """log of the Gaussian density at ``row`` with normalizing dimension
    D = len(row), computed in log space."""
    x = np.asarray(row, dtype=np.float64)
    mu = np.asarray(mean, dtype=np.float64)
    d = x.shape[0]
    diff = x - mu
    if model == MODEL_DIAGONAL:
        v = np.asarray(cov, dtype=np.float64)
        if np.min(v) <= 0:
            raise SingularCovarianceError("nonpositive diagonal variance")
        logdet = float(np.log(v).sum())
        if not math.isfinite(logdet):
            raise SingularCovarianceError("diagonal log-determinant not finite")
        quad = float((diff * diff / v).sum())
    elif model == MODEL_FULL_RIDGE:
        c = np.asarray(cov, dtype=np.float64)
        try:
            chol = np.linalg.cholesky(c)
        except np.linalg.LinAlgError as exc:
            raise SingularCovarianceError("covariance not positive definite") from exc
        logdet = 2.0 * float(np.log(np.diag(chol)).sum())
        if not math.isfinite(logdet):
            raise SingularCovarianceError("log-determinant not finite")
        sol = np.linalg.solve(chol, diff)
        quad = float((sol * sol).sum())
    else:
        raise ValueError(f"unknown covariance model {model!r}")
    return -0.5 * (d * _LOG_2PI + logdet + quad)


def _log_density_matrix(x: np.ndarray, params: MixtureParams) -> np.ndarray:
    """(N, K) matrix of per-component log densities."""
    n, d = x.shape
    if params.model == MODEL_DIAGONAL:
        v = params.covariances
        logdet = np.log(v).sum(axis=1)
        diff = x[None, :, :] - params.means[:, None, :]
        quad = (diff * diff / v[:, None, :]).sum(axis=-1)
        out = -0.5 * (d * _LOG_2PI + logdet[:, None] + quad)
        return out.T
    out = np.empty((n, params.k))
    for j in range(params.k):
        chol = np.linalg.cholesky(params.covariances[j])
        logdet = 2.0 * np.log(np.diag(chol)).sum()
        sol = np.linalg.solve(chol, (x - params.means[j]).T)
        out[:, j] = -0.5 * (d * _LOG_2PI + logdet + (sol * sol).sum(axis=0))
    return out


def _mstep_arrays(
    x: np.ndarray,
    labels: np.ndarray,
    k: int,
    model: str,
    ridge_rel: float,
) -> MixtureParams:
    n, d = x.shape
    sizes = np.bincount(labels, minlength=k + 1)[1:]
    if (sizes == 0).any():
        empty = int(np.flatnonzero(sizes == 0)[0]) + 1
        raise EmptyClusterError(f"cluster {empty} is empty")
    weights = sizes / n
    means = np.empty((k, d))
    floored = np.zeros(k, dtype=bool)
    if model == MODEL_DIAGONAL:
        cov = np.empty((k, d))
        for j in range(k):
            rows = x[labels == j + 1]
            means[j] = rows.mean(axis=0)
            raw = ((rows - means[j]) ** 2).mean(axis=0)
            floored[j] = bool((raw < VARIANCE_FLOOR).any())
            cov[j] = np.maximum(raw, VARIANCE_FLOOR)
        return MixtureParams(weights, means, cov, model=model, floored=floored)
    if model == MODEL_FULL_RIDGE:
        cov = np.empty((k, d, d))
        ridge = np.empty(k)
        for j in range(k):
            rows = x[labels == j + 1]
            means[j] = rows.mean(axis=0)
            diff = rows - means[j]
            scatter = diff.T @ diff / rows.shape[0]
            tr = float(np.trace(scatter))
            ridge[j] = max(ridge_rel * tr / d, RIDGE_MIN)
            floored[j] = tr <= d * VARIANCE_FLOOR
            cov[j] = scatter + ridge[j] * np.eye(d)
        return MixtureParams(
            weights, means, cov, model=model, ridge=ridge, floored=floored
        )
    raise ValueError(f"unknown covariance model {model!r}")


def mstep(
    m: AugmentedGram,
    labels: ClusterAssignment,
    model: str = MODEL_DIAGONAL,
    ridge_rel: float = RIDGE_REL_DEFAULT,
) -> MixtureParams:
    """Hard M-step: weights n_k/N, within-cluster means and covariances
    (denominator n_k); diagonal variances are floored at 1e-8."""
    return _mstep_arrays(m.values, labels.labels, labels.k, model, ridge_rel)


def _estep_arrays(x: np.ndarray, params: MixtureParams) -> np.ndarray:
    scores = np.log(params.weights)[None, :] + _log_density_matrix(x, params)
    return np.argmax(scores, axis=1).astype(np.int64) + 1


def estep(m: AugmentedGram, params: MixtureParams) -> ClusterAssignment:
    """Hard E-step: assign each row to the argmax component.

    Ties go to the smallest component index. Labels keep the component
    indexing of ``params`` (canonicalization happens once, at the end of
    cem_fit); a component may come back empty.
    """
    return ClusterAssignment(_estep_arrays(m.values, params), params.k)


def classification_loglik(
    x: np.ndarray, params: MixtureParams, labels: np.ndarray
) -> float:
    """Sum of log w_k + log-density of each row under its assigned
    component (the quantity each CEM sweep cannot decrease, floor aside)."""
    dens = _log_density_matrix(np.asarray(x, dtype=np.float64), params)
    idx = np.asarray(labels, dtype=np.int64) - 1
    rows = np.arange(dens.shape[0])
    return float((np.log(params.weights)[idx] + dens[rows, idx]).sum())


def mixture_loglik(x: np.ndarray, params: MixtureParams) -> float:
    """Full mixture quasi log-likelihood via log-sum-exp."""
    scores = np.log(params.weights)[None, :] + _log_density_matrix(
        np.asarray(x, dtype=np.float64), params
    )
    return float(logsumexp(scores, axis=1).sum())


def _reorder_to_canonical(
    raw_labels: np.ndarray, params: MixtureParams
) -> tuple[ClusterAssignment, MixtureParams]:
    """Canonicalize labels and permute components to match."""
    canon, k = canonicalize_labels(raw_labels)
    order = []
    seen = set()
    for v in raw_labels.tolist():
        if v not in seen:
            seen.add(v)
            order.append(v - 1)
    order = np.asarray(order, dtype=np.int64)
    assignment = ClusterAssignment(canon, k)
    params = replace(
        params,
        weights=params.weights[order],
        means=params.means[order],
        covariances=params.covariances[order],
        ridge=None if params.ridge is None else params.ridge[order],
        floored=None if params.floored is None else params.floored[order],
    )
    return assignment, params


def cem_fit(
    g: GramMatrix,
    m: AugmentedGram,
    k: int,
    init: ClusterAssignment,
    max_iter: int = 100,
    model: str = MODEL_DIAGONAL,
    ridge_rel: float = RIDGE_REL_DEFAULT,
) -> FitResult:
    """Run classification EM at a fixed K and score the result.

    The loop runs on the fixed matrix ``m`` until the assignment stops
    changing or ``max_iter`` sweeps elapse. The final assignment then
    rebuilds the cluster-aware matrix from ``g``, a last M-step on it
    yields the reported parameters, and ``loglik`` is the mixture quasi
    log-likelihood of its rows. An E-step that empties a component aborts
    the fit as degenerate, as does a collapsed final component.
    """
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if init.k != k:
        raise ValueError(f"init declares k={init.k}, expected {k}")
    if init.n_objects != m.n_objects:
        raise ValueError("init length does not match M")
    if (init.sizes() == 0).any():
        raise EmptyClusterError("init must have k non-empty clusters")

    x = m.values
    labels = init.labels.copy()
    floor_events = 0
    iterations = 0
    converged = False
    for _ in range(max_iter):
        params = _mstep_arrays(x, labels, k, model, ridge_rel)
        iterations += 1
        if params.floored is not None and params.floored.any():
            floor_events += 1
        new = _estep_arrays(x, params)
        if (np.bincount(new, minlength=k + 1)[1:] == 0).any():
            assignment, params = _reorder_to_canonical(labels, params)
            return FitResult(
                labels=assignment,
                params=params,
                loglik=float("-inf"),
                bic=float("-inf"),
                iterations=iterations,
                converged=False,
                degenerate=True,
                floor_events=floor_events,
            )
        if np.array_equal(new, labels):
            converged = True
            break
        labels = new

    aug_c = augment_with_clusters(g, ClusterAssignment(labels, k))
    final_params = _mstep_arrays(aug_c.values, labels, k, model, ridge_rel)
    loglik = mixture_loglik(aug_c.values, final_params)
    collapsed = bool(final_params.floored is not None and final_params.floored.any())
    assignment, final_params = _reorder_to_canonical(labels, final_params)
    return FitResult(
        labels=assignment,
        params=final_params,
        loglik=loglik,
        bic=float("-inf") if collapsed else float("nan"),
        iterations=iterations,
        converged=converged,
        degenerate=collapsed,
        floor_events=floor_events,
    )
