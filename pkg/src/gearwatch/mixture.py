"""Gaussian mixture fitting by expectation-maximization.

Full-covariance mixtures over the standardized 4-D feature space, with
AIC/BIC scoring, a k sweep, and hard assignment. Operating-mode clusters
are elongated and correlated (power couples to rotor speed), hence full
covariance matrices rather than diagonal ones.

All reductions run over a canonical row ordering in fixed chunks, so a fit
is invariant under permutation of the input records.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cholesky, solve_triangular
from sklearn.base import BaseEstimator

from ._reductions import canonical_order, chunked_gram, chunked_sum
from ._validation import as_float_matrix, require_fitted
from .errors import ModelingError

log = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)

K_RANGE_MIN, K_RANGE_MAX = 1, 25


class _RestartFailed(Exception):
    """One EM restart gave up (repeated component collapse)."""


def n_free_params(k: int, d: int) -> int:
    """Free parameters of a k-component full-covariance mixture in d dims."""
    return (k - 1) + k * d + k * (d * (d + 1) // 2)


def _regularized(cov: np.ndarray, reg_scale: float) -> np.ndarray:
    # keep near-singular components invertible: scaled ridge on the diagonal
    d = cov.shape[0]
    reg = reg_scale * np.trace(cov) / d
    out = cov.copy()
    out[np.diag_indices(d)] += reg
    return out


def _log_densities(Z, means, chols):
    """Per-component Gaussian log density, shape (n, k)."""
    n, d = Z.shape
    eye = np.eye(d)
    out = np.empty((n, len(chols)))
    for j, L in enumerate(chols):
        # right-multiplying by inv(L).T turns the Mahalanobis form into a
        # plain row-norm, one small GEMM per component
        inv_t = solve_triangular(L, eye, lower=True, check_finite=False).T
        v = (Z - means[j]) @ inv_t
        maha = np.einsum("ij,ij->i", v, v)
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        out[:, j] = -0.5 * (d * _LOG_2PI + logdet + maha)
    return out


def _posteriors(log_prob):
    """Row log normalizer and normalized exponentials. Mutates log_prob.

    Hand-rolled log-sum-exp: the shifted exponentials are exactly what the
    responsibilities need, so computing both together does one exp pass
    instead of two.
    """
    top = log_prob.max(axis=1)
    np.subtract(log_prob, top[:, None], out=log_prob)
    np.exp(log_prob, out=log_prob)
    total = log_prob.sum(axis=1)
    lse = top + np.log(total)
    log_prob /= total[:, None]
    return lse, log_prob


class GaussianMixtureEM(BaseEstimator):
    """Full-covariance Gaussian mixture fitted by EM.

    Initialization is k-means++ seeding followed by a fixed number of
    k-means iterations; ``n_restarts`` runs start from seeds derived from
    the master seed by fixed increments and the best final log-likelihood
    wins. Each M-step adds ``reg_scale * trace/d`` to every covariance
    diagonal so near-degenerate clusters (idling rotor speed) stay
    invertible.

    Parameters
    ----------
    k : int
        Number of mixture components.
    seed : int
        Master RNG seed; restart r uses ``seed + r``.
    tol : float
        Relative log-likelihood change below which EM stops.
    max_iter : int
        EM iteration cap per restart.
    n_restarts : int
        Independent initializations to try.
    reg_scale : float
        Covariance ridge, as a fraction of mean diagonal mass.
    kmeans_iters : int
        Refinement iterations after k-means++ seeding.
    max_reseeds : int
        Component-collapse rescues allowed before a restart is abandoned.

    Attributes
    ----------
    weights_ : ndarray of shape (k,)
    means_ : ndarray of shape (k, d)
    covariances_ : ndarray of shape (k, d, d)
    log_likelihood_ : float
        Total data log-likelihood of the winning restart.
    aic_ : float
        ``2 p - 2 log_likelihood`` with p = (k-1) + k d + k d(d+1)/2.
    bic_ : float
        ``p ln(n) - 2 log_likelihood``.
    ll_trace_ : list of float
        Log-likelihood per EM iteration of the winning restart,
        non-decreasing within 1e-9. A component re-seed restarts the trace.
    n_ : int
        Training sample count.
    n_iter_ : int
    converged_ : bool
    restart_log_likelihoods_ : list of float or None
        Final log-likelihood per restart (None where a restart failed).
    """

    def __init__(
        self,
        k: int = 1,
        *,
        seed: int = 0,
        tol: float = 1e-7,
        max_iter: int = 500,
        n_restarts: int = 4,
        reg_scale: float = 1e-6,
        kmeans_iters: int = 10,
        max_reseeds: int = 3,
    ):
        self.k = k
        self.seed = seed
        self.tol = tol
        self.max_iter = max_iter
        self.n_restarts = n_restarts
        self.reg_scale = reg_scale
        self.kmeans_iters = kmeans_iters
        self.max_reseeds = max_reseeds

    # ---------------------------------------------------------------- fit

    def fit(self, X, y=None):
        X = as_float_matrix(X, name="X")
        n, d = X.shape
        if self.k < 1:
            raise ModelingError(f"k must be >= 1, got {self.k}")
        if n < 10 * self.k:
            raise ModelingError(
                f"need at least {10 * self.k} samples for k={self.k}, got {n}"
            )
        Z = X[canonical_order(X)]

        best = None
        restart_lls: list[float | None] = []
        for r in range(self.n_restarts):
            rng = np.random.default_rng(self.seed + r)
            try:
                result = self._fit_once(Z, rng)
            except _RestartFailed as exc:
                log.warning("restart %d failed for k=%d: %s", r, self.k, exc)
                restart_lls.append(None)
                continue
            restart_lls.append(result["log_likelihood"])
            if best is None or result["log_likelihood"] > best["log_likelihood"]:
                best = result
        if best is None:
            raise ModelingError(
                f"EM failed for k={self.k}: all {self.n_restarts} restarts collapsed"
            )

        p = n_free_params(self.k, d)
        ll = best["log_likelihood"]
        self.weights_ = best["weights"]
        self.means_ = best["means"]
        self.covariances_ = best["covariances"]
        self.log_likelihood_ = ll
        self.ll_trace_ = best["trace"]
        self.n_iter_ = best["n_iter"]
        self.converged_ = best["converged"]
        self.n_reseeds_ = best["n_reseeds"]
        self.restart_log_likelihoods_ = restart_lls
        self.n_ = n
        self.d_ = d
        self.n_params_ = p
        self.aic_ = 2.0 * p - 2.0 * ll
        self.bic_ = p * math.log(n) - 2.0 * ll
        return self

    def _fit_once(self, Z, rng):
        n, d = Z.shape
        k = self.k
        # broad fallback covariance used when a component is re-seeded
        gmean = chunked_sum(Z) / n
        gvar = chunked_sum((Z - gmean) ** 2) / n
        # floor keeps the fallback PD even on constant input, so fully
        # degenerate data fails as a typed modeling error, not a LinAlgError
        gvar = np.maximum(gvar, 1e-12)
        global_cov = _regularized(np.diag(gvar), self.reg_scale)

        centers = self._kmeans_init(Z, rng)
        labels = self._nearest(Z, centers)
        resp = np.zeros((n, k))
        resp[np.arange(n), labels] = 1.0

        state = {"n_reseeds": 0}
        weights, means, covs = self._m_step(Z, resp, global_cov, state)

        trace: list[float] = []
        converged = False
        n_iter = 0
        while n_iter < self.max_iter:
            n_iter += 1
            chols = self._chol_all(covs, global_cov, state)
            ll, resp = self._e_step(Z, weights, means, chols)
            trace.append(ll)
            if len(trace) >= 2:
                prev = trace[-2]
                denom = abs(prev) if prev != 0.0 else 1.0
                if abs(ll - prev) / denom < self.tol:
                    converged = True
                    break
            reseeds_before = state["n_reseeds"]
            weights, means, covs = self._m_step(Z, resp, global_cov, state)
            if state["n_reseeds"] > reseeds_before:
                # parameters jumped; the monotone segment starts over
                trace = []
        if not converged:
            chols = self._chol_all(covs, global_cov, state)
            ll, resp = self._e_step(Z, weights, means, chols)
            trace.append(ll)

        return {
            "weights": weights,
            "means": means,
            "covariances": covs,
            "log_likelihood": trace[-1],
            "trace": trace,
            "n_iter": n_iter,
            "converged": converged,
            "n_reseeds": state["n_reseeds"],
        }

    # ------------------------------------------------------- init helpers

    def _kmeans_init(self, Z, rng):
        n, d = Z.shape
        k = self.k
        # greedy k-means++: several distance-weighted candidates per seed,
        # keep the one that shrinks the total potential the most
        n_trials = 2 + int(math.log(k))
        centers = np.empty((k, d))
        centers[0] = Z[rng.integers(n)]
        d2 = np.sum((Z - centers[0]) ** 2, axis=1)
        for j in range(1, k):
            total = d2.sum()
            if total > 0:
                candidates = rng.choice(n, size=n_trials, p=d2 / total)
            else:
                candidates = rng.integers(n, size=n_trials)
            best_idx = None
            best_d2 = None
            best_potential = np.inf
            for idx in candidates:
                cand_d2 = np.minimum(
                    d2, np.sum((Z - Z[idx]) ** 2, axis=1)
                )
                potential = cand_d2.sum()
                if potential < best_potential:
                    best_potential = potential
                    best_idx = idx
                    best_d2 = cand_d2
            centers[j] = Z[best_idx]
            d2 = best_d2

        for _ in range(self.kmeans_iters):
            labels = self._nearest(Z, centers)
            sums = np.empty((k, d))
            for col in range(d):
                sums[:, col] = np.bincount(labels, weights=Z[:, col],
                                           minlength=k)
            counts = np.bincount(labels, minlength=k)
            nonempty = counts > 0
            centers[nonempty] = sums[nonempty] / counts[nonempty, None]
            if not nonempty.all():
                # an empty cluster restarts at the worst-covered point
                d2 = np.min(
                    (
                        np.sum(Z**2, axis=1)[:, None]
                        - 2.0 * Z @ centers[nonempty].T
                        + np.sum(centers[nonempty] ** 2, axis=1)[None, :]
                    ),
                    axis=1,
                )
                far = np.argsort(d2, kind="stable")[::-1]
                for rank, j in enumerate(np.flatnonzero(~nonempty)):
                    centers[j] = Z[far[rank]]
        return centers

    @staticmethod
    def _nearest(Z, centers):
        d2 = (
            np.sum(Z**2, axis=1)[:, None]
            - 2.0 * Z @ centers.T
            + np.sum(centers**2, axis=1)[None, :]
        )
        return np.argmin(d2, axis=1)

    # --------------------------------------------------------- EM pieces

    def _chol_all(self, covs, global_cov, state):
        chols = []
        for j in range(self.k):
            try:
                chols.append(cholesky(covs[j], lower=True, check_finite=False))
            except LinAlgError:
                self._count_reseed(state, f"component {j} covariance not PD")
                covs[j] = global_cov
                chols.append(cholesky(covs[j], lower=True, check_finite=False))
        return chols

    def _e_step(self, Z, weights, means, chols):
        log_prob = _log_densities(Z, means, chols) + np.log(weights)[None, :]
        lse, resp = _posteriors(log_prob)
        ll = float(chunked_sum(lse[:, None])[0])
        return ll, resp

    def _m_step(self, Z, resp, global_cov, state):
        n, d = Z.shape
        k = self.k
        nk = chunked_sum(resp)
        collapsed = np.flatnonzero(nk < 1.0)
        weights = np.empty(k)
        means = np.empty((k, d))
        covs = np.empty((k, d, d))

        moment = chunked_gram(resp, Z)
        for j in range(k):
            if j in collapsed:
                continue
            means[j] = moment[j] / nk[j]
            # uncentered second moment; safe on standardized inputs where
            # means are O(1) and cancellation costs a few digits at most
            weighted = resp[:, j][:, None] * Z
            second = chunked_gram(weighted, Z) / nk[j]
            covs[j] = _regularized(second - np.outer(means[j], means[j]),
                                   self.reg_scale)
            weights[j] = nk[j] / n

        if collapsed.size:
            # re-seed each dead component from the least-claimed point
            max_resp = resp.max(axis=1)
            order = np.argsort(max_resp, kind="stable")
            for rank, j in enumerate(collapsed):
                self._count_reseed(
                    state, f"component {j} mass {nk[j]:.3g} below 1"
                )
                means[j] = Z[order[rank]]
                covs[j] = global_cov
                weights[j] = 1.0 / n
            weights = weights / weights.sum()
        return weights, means, covs

    def _count_reseed(self, state, why):
        state["n_reseeds"] += 1
        log.info("re-seeding: %s (event %d)", why, state["n_reseeds"])
        if state["n_reseeds"] > self.max_reseeds:
            raise _RestartFailed(
                f"more than {self.max_reseeds} component collapses"
            )

    # --------------------------------------------------------- inference

    def predict_proba(self, X) -> np.ndarray:
        """Responsibility of each component for each row; rows sum to 1."""
        require_fitted(self, "weights_")
        X = as_float_matrix(X, n_features=self.d_, name="X")
        chols = [
            cholesky(self.covariances_[j], lower=True, check_finite=False)
            for j in range(self.k)
        ]
        log_prob = _log_densities(X, self.means_, chols) + np.log(self.weights_)
        return _posteriors(log_prob)[1]

    def predict(self, X) -> np.ndarray:
        """Hard component index per row; ties go to the lowest index."""
        return np.argmax(self.predict_proba(X), axis=1)

    def score_samples(self, X) -> np.ndarray:
        require_fitted(self, "weights_")
        X = as_float_matrix(X, n_features=self.d_, name="X")
        chols = [
            cholesky(self.covariances_[j], lower=True, check_finite=False)
            for j in range(self.k)
        ]
        log_prob = _log_densities(X, self.means_, chols) + np.log(self.weights_)
        return _posteriors(log_prob)[0]


def em_fit(X, k: int, seed: int = 0, **em_params) -> GaussianMixtureEM:
    """Fit one mixture; thin functional wrapper over the estimator."""
    return GaussianMixtureEM(k=k, seed=seed, **em_params).fit(X)


def assign(model: GaussianMixtureEM, X) -> tuple[np.ndarray, np.ndarray]:
    """Hard cluster index and responsibility matrix for each row of X."""
    resp = model.predict_proba(X)
    return np.argmax(resp, axis=1), resp


# ------------------------------------------------------------------ sweep


@dataclass
class SweepEntry:
    k: int
    aic: float
    bic: float
    log_likelihood: float


@dataclass
class ModelSweep:
    """Per-k scores plus the selected component count."""

    entries: list[SweepEntry]
    chosen_k: int
    selection_rule: str
    models: dict[int, GaussianMixtureEM] = field(default_factory=dict)

    def chosen_model(self) -> GaussianMixtureEM:
        return self.models[self.chosen_k]


def sweep_k(
    X,
    k_range: tuple[int, int],
    seed: int = 0,
    *,
    selection_rule: str = "min-aic",
    fixed_k: int = 6,
    **em_params,
) -> ModelSweep:
    """Fit one mixture per k in an inclusive range and select one.

    Failed k values are dropped from the sweep with a warning; an empty
    sweep is fatal. Under "min-aic" the lowest AIC wins with ties broken
    toward the lowest k; under "fixed-k" the configured k is selected and
    must have fitted.
    """
    lo, hi = int(k_range[0]), int(k_range[1])
    if not (K_RANGE_MIN <= lo <= hi <= K_RANGE_MAX):
        raise ModelingError(
            f"k range must satisfy {K_RANGE_MIN} <= lo <= hi <= {K_RANGE_MAX}, "
            f"got ({lo}, {hi})"
        )
    if selection_rule not in ("min-aic", "fixed-k"):
        raise ModelingError(f"unknown selection rule {selection_rule!r}")

    entries: list[SweepEntry] = []
    models: dict[int, GaussianMixtureEM] = {}
    for k in range(lo, hi + 1):
        try:
            model = GaussianMixtureEM(k=k, seed=seed, **em_params).fit(X)
        except ModelingError as exc:
            log.warning("k=%d omitted from sweep: %s", k, exc)
            continue
        entries.append(SweepEntry(k, model.aic_, model.bic_, model.log_likelihood_))
        models[k] = model
    if not entries:
        raise ModelingError(f"no k in [{lo}, {hi}] could be fitted")

    if selection_rule == "min-aic":
        chosen = entries[int(np.argmin([e.aic for e in entries]))].k
    else:
        if fixed_k not in models:
            raise ModelingError(
                f"fixed k={fixed_k} is not among the fitted models"
            )
        chosen = fixed_k
    return ModelSweep(entries, chosen, selection_rule, models)
