"""Maximum pseudolikelihood estimation and bootstrapped confidence intervals.

``fit_mple`` maximizes the (weighted) Bernoulli log-pseudolikelihood of a
tie-level design by Newton-Raphson with step-halving.  Confidence intervals
come from percentile bootstraps that resample whole time slices
(``bootstrap_tergm``) or whole egos (``pooled_role_tergm``); replicate
substreams are derived deterministically so parallel and serial execution
agree bitwise.
"""
from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.special import expit

from .changestats import DesignMatrix, ModelSpec, design_matrix
from .errors import EstimationError
from .rng import child_rng

__all__ = [
    "ParameterEstimate",
    "BootstrapResult",
    "fit_mple",
    "bootstrap_tergm",
    "pooled_role_tergm",
    "weighted_log_pl",
    "write_coef_csv",
    "render_coef_text",
]

COEF_CAP = 25.0
MAX_ITER = 100
SCORE_TOL = 1e-8
REL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class ParameterEstimate:
    """A converged (or flagged) pseudolikelihood fit.

    ``theta`` aligns with ``labels`` (terms kept after rank pruning);
    ``dropped_terms`` lists rank-deficient columns removed before fitting.
    """

    theta: np.ndarray
    labels: tuple[str, ...]
    log_pl: float
    converged: bool
    iterations: int
    dropped_terms: tuple[str, ...] = ()
    message: str = ""

    def __post_init__(self) -> None:
        if self.log_pl > 1e-9:
            raise EstimationError(f"log pseudolikelihood {self.log_pl} is positive")
        if len(self.theta) != len(self.labels):
            raise EstimationError("theta and labels lengths disagree")


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    """Point estimate plus percentile bootstrap bands.

    ``replicates`` is (R x p) with NaN rows where a replicate failed to
    converge; failed rows are excluded from the quantiles.  A term is
    significant when 0 lies outside its interval.
    """

    point: ParameterEstimate
    labels: tuple[str, ...]
    replicates: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    significant: np.ndarray
    confidence: float
    n_replicates: int
    n_used: int
    n_obs: int
    unstable: bool

    def __post_init__(self) -> None:
        if np.any(self.ci_low > self.ci_high + 1e-12):
            raise EstimationError("bootstrap interval has ci_low > ci_high")


# ---------------------------------------------------------------------------
# core weighted logistic fit


def weighted_log_pl(X: np.ndarray, y: np.ndarray, w: np.ndarray,
                    theta: np.ndarray) -> float:
    """Weighted Bernoulli log-pseudolikelihood (stable at extreme eta)."""
    eta = X @ theta
    # y*log(p) + (1-y)*log(1-p) = -[y*softplus(-eta) + (1-y)*softplus(eta)]
    return float(-(w * (y * np.logaddexp(0.0, -eta) + (1.0 - y) * np.logaddexp(0.0, eta))).sum())


def _estimable_columns(X: np.ndarray, w: np.ndarray) -> tuple[list[int], list[int]]:
    """Split column indices into (kept, dropped) by rank of the weighted design."""
    K = X.shape[1]
    Xw = X * np.sqrt(w)[:, None]
    norms = np.linalg.norm(Xw, axis=0)
    nonzero = [k for k in range(K) if norms[k] > 0.0]
    dropped = [k for k in range(K) if norms[k] == 0.0]
    if not nonzero:
        return [], dropped
    sub = Xw[:, nonzero]
    r = scipy.linalg.qr(sub, mode="r", pivoting=True)
    R, piv = r[0], r[1]
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return [], sorted(dropped + nonzero)
    tol = diag[0] * max(sub.shape) * np.finfo(float).eps
    rank = int((diag > tol).sum())
    kept = sorted(nonzero[p] for p in piv[:rank])
    dropped += [nonzero[p] for p in piv[rank:]]
    return kept, sorted(dropped)


def _fit_arrays(
    X: np.ndarray,
    y: np.ndarray,
    labels: Sequence[str],
    weights: np.ndarray | None = None,
    theta0: np.ndarray | None = None,
    prune: bool = True,
    max_iter: int = MAX_ITER,
) -> ParameterEstimate:
    m, K = X.shape
    if m == 0:
        raise EstimationError("empty design")
    w = np.ones(m) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (m,):
        raise EstimationError(f"weights shape {w.shape} does not match {m} rows")
    if (w < 0).any():
        raise EstimationError("negative weights")
    if not (w > 0).any():
        raise EstimationError("all weights are zero")

    if prune:
        kept, dropped_idx = _estimable_columns(X, w)
    else:
        kept, dropped_idx = list(range(K)), []
    if not kept:
        raise EstimationError("no estimable terms: all design columns are zero")
    Xk = X[:, kept]
    kept_labels = tuple(labels[k] for k in kept)
    dropped_labels = tuple(labels[k] for k in dropped_idx)

    # one response class with positive weight can only separate
    mass1 = float(w[y == 1.0].sum())
    mass0 = float(w[y == 0.0].sum())
    one_class = mass1 == 0.0 or mass0 == 0.0

    p = len(kept)
    if theta0 is None:
        theta = np.zeros(p)
    else:
        # theta0 aligns with the columns of X; subset to the kept ones
        full = np.asarray(theta0, dtype=float)
        if full.shape != (K,):
            raise EstimationError(f"theta0 shape {full.shape} does not match {K} design columns")
        theta = full[kept].copy()
    ll = weighted_log_pl(Xk, y, w, theta)
    converged = False
    iterations = 0
    for it in range(1, max_iter + 1):
        iterations = it
        eta = Xk @ theta
        prob = expit(eta)
        score = Xk.T @ (w * (y - prob))
        if np.max(np.abs(score)) < SCORE_TOL:
            converged = True
            iterations = it - 1
            break
        wt = w * prob * (1.0 - prob)
        H = Xk.T @ (Xk * wt[:, None])
        try:
            step = np.linalg.solve(H, score)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(H, score, rcond=None)
        t = 1.0
        ll_new = ll
        cand = theta
        for _ in range(40):
            cand = np.clip(theta + t * step, -COEF_CAP, COEF_CAP)
            ll_new = weighted_log_pl(Xk, y, w, cand)
            if ll_new >= ll - 1e-12:
                break
            t /= 2.0
        if ll_new < ll - 1e-12:
            # no improving step found; stay put rather than degrade the fit
            cand, ll_new = theta, ll
        delta = ll_new - ll
        theta = cand
        ll = ll_new
        if abs(delta) < REL_TOL * max(1.0, abs(ll)):
            converged = True
            break

    at_cap = bool(np.any(np.abs(theta) >= COEF_CAP - 1e-9))
    # perfect classification: every positive-weight row sits far on the correct
    # side, so the supremum of the pseudolikelihood is not attained
    margin = ((2.0 * y - 1.0) * (Xk @ theta))[w > 0.0]
    separated = at_cap or bool(margin.min() > 15.0)
    message = ""
    if one_class:
        message = "all response mass in one class; no finite optimum exists"
    elif separated:
        message = (f"complete separation suspected; coefficients bounded by "
                   f"the cap {COEF_CAP:g}")
    elif not converged:
        message = f"no convergence in {max_iter} iterations"
    ok = converged and not separated and not one_class
    return ParameterEstimate(
        theta=theta,
        labels=kept_labels,
        log_pl=min(ll, 0.0),
        converged=ok,
        iterations=iterations,
        dropped_terms=dropped_labels,
        message=message,
    )


def fit_mple(
    design: DesignMatrix,
    weights: np.ndarray | None = None,
    theta0: np.ndarray | None = None,
    max_iter: int = MAX_ITER,
) -> ParameterEstimate:
    """Maximum pseudolikelihood fit of a tie-level design.

    Rank-deficient columns are dropped and reported in ``dropped_terms``.
    Complete separation (or a single response class under the weights) caps
    coefficients at +-25 and flags the fit as non-converged.
    """
    return _fit_arrays(design.X, design.y, design.labels, weights=weights,
                       theta0=theta0, max_iter=max_iter)


# ---------------------------------------------------------------------------
# bootstrap


def _group_rows(keys: np.ndarray, order: Sequence) -> list[np.ndarray]:
    return [np.flatnonzero(keys == k) for k in order]


def _bootstrap(
    X: np.ndarray,
    y: np.ndarray,
    point: ParameterEstimate,
    kept_idx: list[int],
    groups: list[np.ndarray],
    R: int,
    confidence: float,
    seed: int,
    n_obs: int,
    n_jobs: int = 1,
) -> BootstrapResult:
    if not 0.0 < confidence < 1.0:
        raise EstimationError(f"confidence must lie in (0, 1), got {confidence}")
    if R < 1:
        raise EstimationError(f"need at least one replicate, got {R}")
    p = len(point.theta)
    Xk = X[:, kept_idx]
    n_groups = len(groups)
    replicates = np.full((R, p), np.nan)

    def one(r: int) -> np.ndarray | None:
        rng = child_rng(seed, r)
        chosen = rng.integers(0, n_groups, size=n_groups)
        rows = np.concatenate([groups[c] for c in chosen]) if n_groups else np.empty(0, int)
        if rows.size == 0:
            return None
        try:
            est = _fit_arrays(Xk[rows], y[rows], point.labels, theta0=point.theta)
        except EstimationError:
            return None
        if not est.converged or est.dropped_terms:
            return None
        return est.theta

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(one, range(R)))
    else:
        results = [one(r) for r in range(R)]
    for r, theta in enumerate(results):
        if theta is not None:
            replicates[r] = theta

    used = ~np.isnan(replicates[:, 0])
    n_used = int(used.sum())
    if n_used == 0:
        raise EstimationError("every bootstrap replicate failed to converge")
    alpha = (1.0 - confidence) / 2.0
    ci_low = np.quantile(replicates[used], alpha, axis=0)
    ci_high = np.quantile(replicates[used], 1.0 - alpha, axis=0)
    unstable = (R - n_used) > 0.2 * R
    if unstable:
        warnings.warn(
            f"{R - n_used} of {R} bootstrap replicates failed to converge; "
            "intervals flagged unstable",
            stacklevel=3,
        )
    significant = (ci_low > 0.0) | (ci_high < 0.0)
    return BootstrapResult(
        point=point,
        labels=point.labels,
        replicates=replicates,
        ci_low=ci_low,
        ci_high=ci_high,
        significant=significant,
        confidence=confidence,
        n_replicates=R,
        n_used=n_used,
        n_obs=n_obs,
        unstable=unstable,
    )


def _kept_indices(design_labels: Sequence[str], kept_labels: Sequence[str]) -> list[int]:
    pos = {lab: k for k, lab in enumerate(design_labels)}
    return [pos[lab] for lab in kept_labels]


def bootstrap_tergm(
    series,
    spec: ModelSpec,
    R: int = 500,
    confidence: float = 0.95,
    seed: int = 0,
    n_jobs: int = 1,
) -> BootstrapResult:
    """Percentile bootstrap over time slices of a single series.

    The resampling unit is the year: every row of a chosen year enters the
    replicate design together.  Needs at least two slices.
    """
    years = tuple(series.years)
    if len(years) < 2:
        raise EstimationError(
            f"bootstrap needs at least 2 time slices, series has {len(years)}"
        )
    design = design_matrix(series, spec)
    point = fit_mple(design)
    groups = _group_rows(design.years, years)
    kept_idx = _kept_indices(design.labels, point.labels)
    return _bootstrap(design.X, design.y, point, kept_idx, groups, R, confidence,
                      seed, n_obs=design.n_rows, n_jobs=n_jobs)


def pooled_role_tergm(
    egos: Sequence,
    spec: ModelSpec,
    R: int = 500,
    confidence: float = 0.95,
    seed: int = 0,
    n_jobs: int = 1,
) -> BootstrapResult:
    """Pooled fit over the members of one role, bootstrapping whole egos.

    Concatenates the member designs into one pseudolikelihood and resamples
    egos with replacement; ``n_obs`` reports the pooled row count.
    """
    if not egos:
        raise EstimationError("pooled fit needs at least one ego")
    designs = [design_matrix(e, spec) for e in egos]
    X = np.vstack([d.X for d in designs])
    y = np.concatenate([d.y for d in designs])
    owner = np.concatenate([
        np.full(d.n_rows, k, dtype=np.int64) for k, d in enumerate(designs)
    ])
    point = _fit_arrays(X, y, spec.labels)
    groups = _group_rows(owner, range(len(designs)))
    kept_idx = _kept_indices(spec.labels, point.labels)
    return _bootstrap(X, y, point, kept_idx, groups, R, confidence, seed,
                      n_obs=int(X.shape[0]), n_jobs=n_jobs)


# ---------------------------------------------------------------------------
# coefficient tables


def write_coef_csv(result: BootstrapResult, path: str | Path) -> None:
    """Machine-readable coefficient table for one fitted model."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([
            "term", "estimate", "ci_low", "ci_high", "significant",
            "n_obs", "n_replicates_used",
        ])
        for k, lab in enumerate(result.labels):
            writer.writerow([
                lab,
                repr(float(result.point.theta[k])),
                repr(float(result.ci_low[k])),
                repr(float(result.ci_high[k])),
                int(result.significant[k]),
                result.n_obs,
                result.n_used,
            ])


def render_coef_text(columns: Sequence[tuple[str, BootstrapResult]]) -> str:
    """Aligned plain-text coefficient table.

    One column per fitted role; per term an estimate line (starred when 0
    falls outside the interval) and a bracketed percentile interval line,
    then a Num. obs. row and footers for the significance rule and the
    replication count.
    """
    if not columns:
        raise EstimationError("nothing to render")
    term_order: list[str] = []
    for _, res in columns:
        for lab in res.labels:
            if lab not in term_order:
                term_order.append(lab)

    def fmt_est(res: BootstrapResult, lab: str) -> str:
        if lab not in res.labels:
            return ""
        k = res.labels.index(lab)
        star = " *" if res.significant[k] else ""
        return f"{res.point.theta[k]:.2f}{star}"

    def fmt_ci(res: BootstrapResult, lab: str) -> str:
        if lab not in res.labels:
            return ""
        k = res.labels.index(lab)
        return f"[{res.ci_low[k]:.2f}; {res.ci_high[k]:.2f}]"

    left = term_order + ["Num. obs."]
    width0 = max(len(s) for s in left) + 2
    col_cells: list[list[str]] = []
    for name, res in columns:
        cells = [name]
        for lab in term_order:
            cells.append(fmt_est(res, lab))
            cells.append(fmt_ci(res, lab))
        cells.append(str(res.n_obs))
        col_cells.append(cells)
    widths = [max(len(c) for c in cells) + 2 for cells in col_cells]

    lines = []
    header = " " * width0 + "".join(
        cells[0].ljust(w) for cells, w in zip(col_cells, widths)
    )
    lines.append(header.rstrip())
    for t, lab in enumerate(term_order):
        est_line = lab.ljust(width0) + "".join(
            cells[1 + 2 * t].ljust(w) for cells, w in zip(col_cells, widths)
        )
        ci_line = " " * width0 + "".join(
            cells[2 + 2 * t].ljust(w) for cells, w in zip(col_cells, widths)
        )
        lines.append(est_line.rstrip())
        if ci_line.strip():
            lines.append(ci_line.rstrip())
    obs_line = "Num. obs.".ljust(width0) + "".join(
        cells[-1].ljust(w) for cells, w in zip(col_cells, widths)
    )
    lines.append(obs_line.rstrip())
    conf = columns[0][1].confidence
    lines.append(f"* 0 outside the {conf:.0%} bootstrapped confidence interval")
    reps = sorted({res.n_replicates for _, res in columns})
    lines.append(
        f"{reps[0]} replications" if len(reps) == 1
        else "replications: " + ", ".join(str(r) for r in reps)
    )
    return "\n".join(lines) + "\n"
