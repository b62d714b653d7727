"""Finite mixture of ego-network TERGMs fit by EM over pseudolikelihoods.

Each ego contributes the Bernoulli pseudolikelihood of its pooled tie-level
design.  The E-step assigns responsibilities proportional to mixing weight
times the exponentiated ego log-pseudolikelihood (log-sum-exp stabilized);
the M-step refits every cluster by weighted maximum pseudolikelihood over the
concatenated designs, each row weighted by its ego's responsibility.

Model order is scored by BIC = -2 log PL + p ln N with p = G*K + (G - 1)
free parameters (K terms per cluster plus mixing weights) and N the number
of egos; ``select_roles`` searches a G range under a hard cap.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.cluster import KMeans

from .changestats import ModelSpec, design_matrix
from .errors import DataError, EstimationError, IdentifiabilityError
from .estimator import ParameterEstimate, _fit_arrays, weighted_log_pl
from .netdata import EgoSeries
from .rng import child_seed

__all__ = [
    "MixtureFit",
    "RoleAssignment",
    "fit_ego_tergm",
    "initialize",
    "select_roles",
    "assignment_matrix",
    "write_assignment_csv",
    "write_bic_csv",
]

EM_TOL = 1e-6
EM_MAX_ITER = 300
DEGENERATE_MASS = 1e-6  # of N
KMEANS_RESTARTS = 10
EM_RESTARTS = 3
ROLE_CAP = 4


@dataclass(eq=False)
class MixtureFit:
    """One fitted mixture: cluster parameters, weights and responsibilities."""

    n_components: int
    thetas: np.ndarray          # (G, K)
    pis: np.ndarray             # (G,)
    responsibilities: np.ndarray  # (N, G), rows sum to 1
    log_pl: float
    bic: float
    iterations: int
    converged: bool
    ego_ids: tuple[str, ...]
    term_labels: tuple[str, ...]
    degenerate: tuple[int, ...] = ()
    log_pl_trace: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        sums = self.responsibilities.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise EstimationError("responsibility rows do not sum to 1")


@dataclass(frozen=True, eq=False)
class RoleAssignment:
    """Responsibility matrix plus argmax hard labels (ties break low)."""

    ego_ids: tuple[str, ...]
    matrix: np.ndarray
    hard_labels: np.ndarray


class _Prepared:
    """Pooled arrays shared by initialization, EM and model selection."""

    def __init__(self, egos: Sequence[EgoSeries], spec: ModelSpec) -> None:
        if not egos:
            raise DataError("no egos supplied")
        ids = [e.ego_id for e in egos]
        if len(set(ids)) != len(ids):
            raise DataError(f"duplicate ego ids: {sorted(ids)}")
        self.spec = spec
        self.ego_ids = tuple(ids)
        self.designs = [design_matrix(e, spec) for e in egos]
        self.X = np.vstack([d.X for d in self.designs])
        self.y = np.concatenate([d.y for d in self.designs])
        self.owner = np.concatenate([
            np.full(d.n_rows, k, dtype=np.int64) for k, d in enumerate(self.designs)
        ])
        self.n_egos = len(egos)
        self._check_identifiable()
        self._features: np.ndarray | None = None

    def _check_identifiable(self) -> None:
        # a column with no variation across the pooled design cannot separate
        # clusters; at most one constant nonzero column (the edges intercept)
        # is allowed, and an all-zero column is never estimable
        labels = self.spec.labels
        constant = [k for k in range(self.X.shape[1]) if np.ptp(self.X[:, k]) == 0.0]
        offending: list[str] = []
        seen_intercept = False
        for k in constant:
            if self.X[0, k] == 0.0:
                offending.append(labels[k])
            elif seen_intercept:
                offending.append(labels[k])
            else:
                seen_intercept = True
        if offending:
            raise IdentifiabilityError(
                "terms constant across all egos cannot be identified: "
                + ", ".join(repr(s) for s in offending)
            )

    def ego_log_pl(self, theta: np.ndarray) -> np.ndarray:
        """Per-ego log-pseudolikelihood under a single parameter vector."""
        eta = self.X @ theta
        row_ll = -(self.y * np.logaddexp(0.0, -eta)
                   + (1.0 - self.y) * np.logaddexp(0.0, eta))
        return np.bincount(self.owner, weights=row_ll, minlength=self.n_egos)

    def pooled_fit(self) -> ParameterEstimate:
        est = _fit_arrays(self.X, self.y, self.spec.labels)
        if est.dropped_terms:
            raise IdentifiabilityError(
                "terms collinear across the pooled design cannot be identified: "
                + ", ".join(repr(s) for s in est.dropped_terms)
            )
        return est

    def features(self) -> np.ndarray:
        """Standardized per-ego parameter vectors for k-means seeding."""
        if self._features is None:
            pooled = self.pooled_fit()
            rows = np.empty((self.n_egos, len(self.spec.labels)))
            for k, d in enumerate(self.designs):
                try:
                    est = _fit_arrays(d.X, d.y, d.labels)
                except EstimationError:
                    est = None
                if est is None or not est.converged or est.dropped_terms:
                    rows[k] = pooled.theta
                else:
                    rows[k] = est.theta
            mean = rows.mean(axis=0)
            std = rows.std(axis=0)
            std[std == 0.0] = 1.0
            self._features = (rows - mean) / std
        return self._features


def _prepare(egos: Sequence[EgoSeries], spec: ModelSpec,
             prep: _Prepared | None) -> _Prepared:
    if prep is not None:
        return prep
    return _Prepared(egos, spec)


def initialize(
    egos: Sequence[EgoSeries],
    spec: ModelSpec,
    G: int,
    seed: int = 0,
    _prep: _Prepared | None = None,
) -> np.ndarray:
    """Hard one-hot starting responsibilities from k-means on per-ego fits.

    Each ego is summarized by its own MPLE vector (falling back to the pooled
    estimate when the individual fit fails), standardized per term, then
    clustered with G centers and 10 restarts.
    """
    prep = _prepare(egos, spec, _prep)
    N = prep.n_egos
    if not 1 <= G <= N:
        raise EstimationError(f"G={G} outside [1, {N}] for {N} egos")
    if G == 1:
        return np.ones((N, 1))
    feats = prep.features()
    km = KMeans(
        n_clusters=G,
        n_init=KMEANS_RESTARTS,
        random_state=child_seed(seed, 104729) % (2**32),
    )
    with warnings.catch_warnings():
        # duplicate feature rows can collapse centers; labels are still usable
        warnings.simplefilter("ignore")
        hard = km.fit_predict(feats)
    resp = np.zeros((N, G))
    resp[np.arange(N), hard] = 1.0
    return resp


def fit_ego_tergm(
    egos: Sequence[EgoSeries],
    spec: ModelSpec,
    G: int,
    seed: int = 0,
    max_iter: int = EM_MAX_ITER,
    tol: float = EM_TOL,
    _prep: _Prepared | None = None,
) -> MixtureFit:
    """Fit a G-component mixture of ego TERGMs by EM (one restart).

    Stops when the absolute change in mixture log-pseudolikelihood falls
    below ``tol``; clusters whose responsibility mass drops below 1e-6 of N
    are frozen, reported in ``degenerate`` and announced with a warning.
    """
    prep = _prepare(egos, spec, _prep)
    N = prep.n_egos
    K = len(spec.labels)
    if not 1 <= G <= N:
        raise EstimationError(f"G={G} outside [1, {N}] for {N} egos")

    resp = initialize(egos, spec, G, seed=seed, _prep=prep)
    thetas = np.zeros((G, K))
    pis = resp.mean(axis=0)

    def m_step() -> None:
        for g in range(G):
            mass = float(resp[:, g].sum())
            if mass < DEGENERATE_MASS * N:
                # emptied cluster: freeze its parameters instead of fitting
                # against vanishing weights
                continue
            w = resp[prep.owner, g]
            est = _fit_arrays(prep.X, prep.y, spec.labels, weights=w,
                              theta0=thetas[g])
            if est.dropped_terms:
                # rank loss under these weights: keep previous values for the
                # dropped coordinates so the parameter vector stays aligned
                full = thetas[g].copy()
                pos = {lab: i for i, lab in enumerate(spec.labels)}
                for lab, val in zip(est.labels, est.theta):
                    full[pos[lab]] = val
                thetas[g] = full
            else:
                thetas[g] = est.theta

    def e_step() -> float:
        comp = np.column_stack([prep.ego_log_pl(thetas[g]) for g in range(G)])
        with np.errstate(divide="ignore"):
            log_pi = np.log(pis)
        A = log_pi[None, :] + comp
        m = A.max(axis=1)
        ex = np.exp(A - m[:, None])
        denom = ex.sum(axis=1)
        resp[:] = ex / denom[:, None]
        return float((m + np.log(denom)).sum())

    # first M-step from the k-means assignment, then alternate
    m_step()
    ll = e_step()
    trace = [ll]
    converged = False
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        pis = resp.mean(axis=0)
        m_step()
        ll_new = e_step()
        trace.append(ll_new)
        if abs(ll_new - ll) < tol:
            ll = ll_new
            converged = True
            break
        ll = ll_new

    degenerate = tuple(
        g for g in range(G) if float(resp[:, g].sum()) < DEGENERATE_MASS * N
    )
    if degenerate:
        warnings.warn(
            f"mixture with G={G}: clusters {list(degenerate)} are degenerate "
            f"(responsibility mass below {DEGENERATE_MASS:g} of N)",
            stacklevel=2,
        )
    p_free = G * K + (G - 1)
    bic = -2.0 * ll + p_free * np.log(N)
    return MixtureFit(
        n_components=G,
        thetas=thetas,
        pis=pis,
        responsibilities=resp,
        log_pl=ll,
        bic=float(bic),
        iterations=iterations,
        converged=converged,
        ego_ids=prep.ego_ids,
        term_labels=spec.labels,
        degenerate=degenerate,
        log_pl_trace=tuple(trace),
    )


def select_roles(
    egos: Sequence[EgoSeries],
    spec: ModelSpec,
    G_range: tuple[int, int] = (1, ROLE_CAP),
    cap: int = ROLE_CAP,
    seed: int = 0,
) -> tuple[MixtureFit, list[MixtureFit]]:
    """Search role counts by BIC under a hard cap.

    Fits every G in ``G_range`` clamped to [1, min(cap, N)], three seeded EM
    restarts each (best log PL kept), and returns the lowest-BIC fit along
    with the full trace of per-G fits.
    """
    prep = _Prepared(list(egos), spec)
    lo, hi = G_range
    lo = max(1, lo)
    hi = min(hi, cap, prep.n_egos)
    if lo > hi:
        raise EstimationError(
            f"no feasible role counts: range {G_range} with cap {cap} and "
            f"{prep.n_egos} egos"
        )
    fits: list[MixtureFit] = []
    for G in range(lo, hi + 1):
        best: MixtureFit | None = None
        for r in range(EM_RESTARTS):
            fit = fit_ego_tergm(egos, spec, G, seed=child_seed(seed, G, r),
                                _prep=prep)
            if best is None or fit.log_pl > best.log_pl:
                best = fit
        fits.append(best)
    best_fit = min(fits, key=lambda f: (f.bic, f.n_components))
    return best_fit, fits


def assignment_matrix(fit: MixtureFit) -> RoleAssignment:
    """Role assignment from a finished fit (argmax labels, ties break low)."""
    if not fit.converged and not fit.degenerate:
        raise EstimationError(
            "mixture fit did not converge; refusing to derive assignments"
        )
    return RoleAssignment(
        ego_ids=fit.ego_ids,
        matrix=fit.responsibilities.copy(),
        hard_labels=np.argmax(fit.responsibilities, axis=1),
    )


def write_assignment_csv(assignment: RoleAssignment, path: str | Path) -> None:
    G = assignment.matrix.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["ego_id"] + [f"role_{g}" for g in range(G)] + ["hard_label"])
        for k, ego in enumerate(assignment.ego_ids):
            writer.writerow(
                [ego]
                + [repr(float(v)) for v in assignment.matrix[k]]
                + [int(assignment.hard_labels[k])]
            )


def write_bic_csv(fits: Sequence[MixtureFit], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["G", "log_pl", "bic", "converged"])
        for fit in fits:
            writer.writerow([
                fit.n_components,
                repr(float(fit.log_pl)),
                repr(float(fit.bic)),
                int(fit.converged),
            ])
