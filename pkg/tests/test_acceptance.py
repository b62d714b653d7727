"""Release acceptance battery.

Each test exercises one acceptance criterion end to end at its stated size
and tolerance, prints a single machine-greppable summary line of the form

    [criterion N] PASS - detail

to the real stdout (bypassing capture), and fails if any sub-check or the
runtime budget is violated.  Budgets are wall-clock seconds.
"""
from __future__ import annotations

import hashlib
import re
import shutil
import time
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.special import expit, logit
from scipy.stats import chi2
from sklearn.metrics import adjusted_rand_score

from egotergm import changestats as cs
from egotergm.changestats import ModelSpec, change_stat, design_matrix, global_stat
from egotergm.cli.config import load_run_config
from egotergm.cli.main import main
from egotergm.errors import UnsupportedFeatureError
from egotergm.estimator import (
    bootstrap_tergm,
    fit_mple,
    pooled_role_tergm,
    render_coef_text,
    weighted_log_pl,
)
from egotergm.mixture import fit_ego_tergm, select_roles
from egotergm.netdata import (
    DyadYearRecord,
    EgoSeries,
    GraphSlice,
    NodeYearAttrs,
    PeriodDef,
    extract_egos,
    ingest_dyad_years,
)
from egotergm.sampler import SamplerConfig, plant_population, sample_ergm

from conftest import all_graphs, random_slice, series_from_slices, term_battery

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

# statistics that are integer-valued counts; their toggle identity is exact
EXACT = {"edges", "kstar", "triangles", "node_match"}


def _finish(n: int, failures: list[str], detail: str, t0: float, budget: float,
            capsys) -> None:
    elapsed = time.time() - t0
    if elapsed >= budget:
        failures.append(f"runtime {elapsed:.1f}s exceeds {budget:.0f}s budget")
    status = "PASS" if not failures else "FAIL"
    line = (f"[criterion {n}] {status} - {detail} "
            f"({elapsed:.1f}s, budget {budget:.0f}s)")
    with capsys.disabled():
        print(line, flush=True)
    assert not failures, "; ".join(failures)


def _toggle_difference(term, g, i, j):
    on = g.adj.copy()
    on[i, j] = on[j, i] = 1
    off = g.adj.copy()
    off[i, j] = off[j, i] = 0
    return global_stat(term, replace(g, adj=on)) - global_stat(term, replace(g, adj=off))


def _attr_tables(rng, n):
    node_attrs = {
        "regime_democracy": (np.arange(n) % 2).astype(float),
        "cinc": rng.random(n),
        "revisionist": (rng.random(n) < 0.4).astype(float),
    }
    cov = np.triu(rng.random((n, n)), k=1)
    return node_attrs, {"institutionalization": cov + cov.T}


# ---------------------------------------------------------------------------


def test_criterion_1_change_statistic_oracle(capsys):
    t0 = time.time()
    failures: list[str] = []
    terms = term_battery()
    checks = 0
    worst = 0.0

    def run(g):
        nonlocal checks, worst
        n = g.n_nodes
        for i in range(n):
            for j in range(i + 1, n):
                for term in terms:
                    delta = change_stat(term, g, i, j)
                    diff = _toggle_difference(term, g, i, j)
                    checks += 1
                    if term.kind in EXACT:
                        if delta != diff:
                            failures.append(
                                f"{term.label} dyad ({i},{j}): {delta} != {diff}"
                            )
                    else:
                        err = abs(delta - diff)
                        worst = max(worst, err)
                        if err > 1e-12:
                            failures.append(
                                f"{term.label} dyad ({i},{j}): error {err:.2e}"
                            )

    n_exhaustive = 0
    for n in (2, 3, 4):
        node_attrs, dyad_attrs = _attr_tables(np.random.default_rng(10 + n), n)
        nodes = tuple(f"v{k:03d}" for k in range(n))
        for adj in all_graphs(n):
            run(GraphSlice(year=2000, nodes=nodes, adj=adj,
                           node_attrs=node_attrs, dyad_attrs=dyad_attrs))
            n_exhaustive += 1

    rng = np.random.default_rng(42)
    for _ in range(500):
        n = int(rng.integers(2, 7))
        run(random_slice(rng, n, float(rng.uniform(0.1, 0.9)), with_attrs=True))

    _finish(1, failures[:5],
            f"{n_exhaustive} exhaustive + 500 random graphs, {checks} toggle "
            f"checks over {len(terms)} terms, worst weighted error {worst:.1e}",
            t0, budget=60, capsys=capsys)


def test_criterion_2_mple_correctness(capsys):
    t0 = time.time()
    failures: list[str] = []
    rng = np.random.default_rng(7)
    edges_spec = ModelSpec([cs.edges()])

    worst_logit = 0.0
    for _ in range(100):
        n = int(rng.integers(8, 13))
        while True:
            g = random_slice(rng, n, float(rng.uniform(0.2, 0.8)))
            density = g.adj[np.triu_indices(n, 1)].mean()
            if 0.0 < density < 1.0:
                break
        series = series_from_slices([g])
        est = fit_mple(design_matrix(series, edges_spec))
        err = abs(float(est.theta[0]) - float(logit(density)))
        worst_logit = max(worst_logit, err)
        if err > 1e-8:
            failures.append(f"logit mismatch {err:.2e} at density {density:.3f}")

    spec = ModelSpec([cs.edges(), cs.triangles(), cs.abs_diff("cinc")])
    worst_grad = 0.0
    worst_spread = 0.0
    for k in range(20):
        slices = [random_slice(rng, 12, 0.35, year=2000 + t, with_attrs=True)
                  for t in range(4)]
        d = design_matrix(series_from_slices(slices), spec)
        est = fit_mple(d)
        if not est.converged:
            failures.append(f"design {k}: fit not converged ({est.message})")
            continue
        w = np.ones(d.X.shape[0])
        grad = np.empty(est.theta.size)
        h = 1e-5
        for c in range(est.theta.size):
            up, dn = est.theta.copy(), est.theta.copy()
            up[c] += h
            dn[c] -= h
            grad[c] = (weighted_log_pl(d.X, d.y, w, up)
                       - weighted_log_pl(d.X, d.y, w, dn)) / (2 * h)
        worst_grad = max(worst_grad, float(np.max(np.abs(grad))))
        if np.max(np.abs(grad)) > 1e-6:
            failures.append(f"design {k}: fd gradient {np.max(np.abs(grad)):.2e}")

        starts = [np.zeros(3), np.full(3, 2.0), np.full(3, -2.0),
                  np.array([2.0, -2.0, 2.0]), rng.normal(0.0, 1.5, 3)]
        lls = []
        for s in starts:
            r = fit_mple(d, theta0=s)
            if not r.converged:
                failures.append(f"design {k}: restart from {s} failed")
            else:
                lls.append(r.log_pl)
        spread = max(lls) - min(lls) if lls else np.inf
        worst_spread = max(worst_spread, spread)
        if spread > 1e-6:
            failures.append(f"design {k}: restart log-PL spread {spread:.2e}")

    _finish(2, failures[:5],
            f"100 logit checks (worst {worst_logit:.1e}), 20 gradient checks "
            f"(worst {worst_grad:.1e}), 20x5 restarts (worst spread "
            f"{worst_spread:.1e})",
            t0, budget=60, capsys=capsys)


def test_criterion_3_em_ascent_and_normalization(capsys):
    t0 = time.time()
    failures: list[str] = []
    spec = ModelSpec([cs.edges()])
    worst_drop = 0.0
    worst_norm = 0.0
    for s in range(50):
        tpl = SamplerConfig(n_nodes=6, spec=spec, theta=(0.0,), burnin=20,
                            slices=6, seed=3000 + s)
        egos, _ = plant_population(2, [(-2.0,), (-0.5,)], 4, tpl)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fit = fit_ego_tergm(egos, spec, G=2, seed=s)
        trace = np.asarray(fit.log_pl_trace)
        if trace.size < 2:
            failures.append(f"pop {s}: trace has {trace.size} entries")
            continue
        drop = float(np.min(np.diff(trace)))
        worst_drop = min(worst_drop, drop)
        if drop < -1e-9:
            failures.append(f"pop {s}: log-PL decreased by {-drop:.2e}")
        row_err = float(np.max(np.abs(fit.responsibilities.sum(axis=1) - 1.0)))
        pi_err = abs(float(fit.pis.sum()) - 1.0)
        worst_norm = max(worst_norm, row_err, pi_err)
        if row_err > 1e-9 or pi_err > 1e-9:
            failures.append(f"pop {s}: normalization error {max(row_err, pi_err):.2e}")

    _finish(3, failures[:5],
            f"50 populations, worst log-PL step {worst_drop:.1e}, worst "
            f"normalization error {worst_norm:.1e}",
            t0, budget=300, capsys=capsys)


def test_criterion_4_planted_cluster_recovery(capsys):
    t0 = time.time()
    failures: list[str] = []
    spec = ModelSpec([cs.edges()])

    ari_hits = 0
    bic_hits = 0
    for s in range(10):
        tpl = SamplerConfig(n_nodes=12, spec=spec, theta=(0.0,), burnin=30,
                            slices=20, seed=1000 + s)
        egos, labels = plant_population(2, [(-3.0,), (-1.0,)], 10, tpl)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            best, fits = select_roles(egos, spec, G_range=(1, 4), seed=s)
        g2 = next(f for f in fits if f.n_components == 2)
        ari = adjusted_rand_score(labels, np.argmax(g2.responsibilities, axis=1))
        ari_hits += ari >= 0.9
        bic_hits += best.n_components == 2

    control_hits = 0
    for s in range(10):
        tpl = SamplerConfig(n_nodes=12, spec=spec, theta=(0.0,), burnin=30,
                            slices=20, seed=2000 + s)
        egos, _ = plant_population(1, [(-2.0,)], 20, tpl)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            best, _ = select_roles(egos, spec, G_range=(1, 4), seed=s)
        control_hits += best.n_components == 1

    if ari_hits < 9:
        failures.append(f"ARI >= 0.9 in only {ari_hits}/10 seeds")
    if bic_hits < 8:
        failures.append(f"BIC picked G=2 in only {bic_hits}/10 seeds")
    if control_hits < 8:
        failures.append(f"control picked G=1 in only {control_hits}/10 seeds")

    _finish(4, failures,
            f"ARI>=0.9 in {ari_hits}/10, G=2 selected in {bic_hits}/10, "
            f"control G=1 in {control_hits}/10",
            t0, budget=600, capsys=capsys)


def _dyad_independent_series(rng, n, T, theta):
    """Bernoulli slices from an edges + cinc-difference tie model."""
    cv = rng.random(n)
    D = np.abs(cv[:, None] - cv[None, :])
    p = expit(theta[0] + theta[1] * D)
    slices = []
    for t in range(T):
        upper = np.triu(rng.random((n, n)) < p, k=1).astype(np.int8)
        slices.append(GraphSlice(
            year=2000 + t, nodes=tuple(f"v{k:03d}" for k in range(n)),
            adj=upper + upper.T, node_attrs={"cinc": cv}, dyad_attrs={},
        ))
    return EgoSeries.from_slices("egoX", PeriodDef("p", 2000, 2000 + T - 1), slices)


def test_criterion_5_bootstrap_determinism_and_coverage(capsys):
    t0 = time.time()
    failures: list[str] = []
    spec = ModelSpec([cs.edges(), cs.abs_diff("cinc")])
    theta_true = np.array([-1.0, 1.5])

    s = _dyad_independent_series(np.random.default_rng(1), 14, 30, theta_true)
    a = bootstrap_tergm(s, spec, R=500, seed=123)
    b = bootstrap_tergm(s, spec, R=500, seed=123)
    det_year = (np.array_equal(a.replicates, b.replicates, equal_nan=True)
                and np.array_equal(a.ci_low, b.ci_low)
                and np.array_equal(a.ci_high, b.ci_high))
    if not det_year:
        failures.append("year bootstrap not seed-deterministic at R=500")
    egos = [_dyad_independent_series(np.random.default_rng(40 + k), 10, 6, theta_true)
            for k in range(3)]
    for k, e in enumerate(egos):
        object.__setattr__(e, "ego_id", f"ego{k}")
    pa = pooled_role_tergm(egos, spec, R=500, seed=77)
    pb = pooled_role_tergm(egos, spec, R=500, seed=77)
    det_pool = np.array_equal(pa.replicates, pb.replicates, equal_nan=True)
    if not det_pool:
        failures.append("ego bootstrap not seed-deterministic at R=500")

    hits = np.zeros(2, dtype=int)
    for r in range(40):
        series = _dyad_independent_series(np.random.default_rng(5000 + r), 14, 30,
                                          theta_true)
        res = bootstrap_tergm(series, spec, R=500, seed=r)
        hits += ((res.ci_low <= theta_true)
                 & (theta_true <= res.ci_high)).astype(int)
    need = int(np.ceil(0.85 * 40))
    for k, lab in enumerate(spec.labels):
        if hits[k] < need:
            failures.append(f"{lab}: CI covered truth in {hits[k]}/40 < {need}")

    _finish(5, failures,
            f"R=500 runs bitwise repeatable (year and ego units), coverage "
            f"{hits[0]}/40 and {hits[1]}/40 vs floor {need}/40",
            t0, budget=600, capsys=capsys)


def test_criterion_6_sampler_fidelity(capsys):
    t0 = time.time()
    failures: list[str] = []

    cfg = SamplerConfig(n_nodes=10, spec=ModelSpec([cs.edges()]), theta=(0.0,),
                        burnin=30, slices=200, seed=77)
    slices = sample_ergm(cfg)
    iu = np.triu_indices(10, 1)
    density = float(np.mean([s.adj[iu].mean() for s in slices]))
    if not 0.48 <= density <= 0.52:
        failures.append(f"theta=0 mean density {density:.4f} outside 0.5 +- 0.02")

    n, S = 9, 400
    theta = (-0.5, 1.0)
    cfg = SamplerConfig(
        n_nodes=n, spec=ModelSpec([cs.edges(), cs.abs_diff("cinc")]),
        theta=theta, burnin=25, slices=S, seed=99,
        node_attr_values={"cinc": tuple((k % n) / (n - 1) for k in range(n))},
    )
    slices = sample_ergm(cfg)
    cv = slices[0].node_attrs["cinc"]
    iu = np.triu_indices(n, 1)
    D = np.abs(cv[:, None] - cv[None, :])[iu]
    p = expit(theta[0] + theta[1] * D)
    counts = np.sum([s.adj[iu] for s in slices], axis=0)
    stat = float(np.sum((counts - S * p) ** 2 / (S * p * (1.0 - p))))
    pval = float(chi2.sf(stat, df=len(p)))
    if pval <= 0.01:
        failures.append(f"per-dyad chi-square p={pval:.4f} <= 0.01")

    _finish(6, failures,
            f"theta=0 mean density {density:.4f}, per-dyad chi-square "
            f"p={pval:.3f} over {len(p)} dyads x {S} slices",
            t0, budget=120, capsys=capsys)


BASE_TERMS = [
    "Edges", "Alternating K-Stars (0.5)", "Regime Homophily",
    "CINC Difference", "Revisionist Difference",
]
EXPECTED_PERIODS = [
    ("Congress of Vienna", 1816, 1848,
     BASE_TERMS + ["Defensive Commitments", "Alliance Years"]),
    ("Nationalism and Bismarckian", 1849, 1890,
     BASE_TERMS + ["Defensive Commitments", "Alliance Years"]),
    ("Pre-WW1", 1891, 1918,
     BASE_TERMS + ["Defensive Commitments", "Offensive Commitments",
                   "Secret Provisions", "Alliance Years"]),
    ("Interwar", 1919, 1945,
     BASE_TERMS + ["Defensive Commitments", "Offensive Commitments",
                   "Alliance Years"]),
    ("Containment and Bipolar", 1946, 1991, BASE_TERMS + ["Alliance Years"]),
    ("Liberal International", 1992, 2002, BASE_TERMS + ["Alliance Years"]),
]


def test_criterion_7_pipeline_structural_fidelity(capsys):
    t0 = time.time()
    failures: list[str] = []

    # a) threshold: max degree 4 is excluded at min_alters=5, degree 5 is kept
    year = 2000
    dyads = [DyadYearRecord("hub4", f"a{k}", year, defensive=True) for k in range(4)]
    dyads += [DyadYearRecord("hub5", f"b{k}", year, defensive=True) for k in range(5)]
    actors = sorted({r.actor_a for r in dyads} | {r.actor_b for r in dyads})
    nodes = [NodeYearAttrs(a, year, False, 0.1, False) for a in actors]
    net = ingest_dyad_years(dyads, nodes, (year, year))
    ext = extract_egos(net, min_alters=5)
    if [e.ego_id for e in ext.egos] != ["hub5"]:
        failures.append(f"included egos {[e.ego_id for e in ext.egos]} != ['hub5']")
    rec = {x.actor_id: x.max_degree for x in ext.excluded}
    if rec.get("hub4") != 4:
        failures.append(f"hub4 exclusion record {rec.get('hub4')} != 4")

    # b) first-order extraction only
    ego = ext.egos[0]
    if ego.alter_set(year) != frozenset(f"b{k}" for k in range(5)):
        failures.append(f"alters {sorted(ego.alter_set(year))} not the neighbors")
    if ego.slice(year).adj.any():
        failures.append("star alter graph should have no alter-alter ties")
    try:
        extract_egos(net, min_alters=5, order=2)
        failures.append("order=2 extraction did not raise")
    except UnsupportedFeatureError:
        pass

    # c) role count capped at 4 even when the range asks for more
    spec = ModelSpec([cs.edges()])
    tpl = SamplerConfig(n_nodes=8, spec=spec, theta=(0.0,), burnin=20,
                        slices=8, seed=60)
    egos, _ = plant_population(2, [(-2.5,), (-0.8,)], 4, tpl)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        _, fits = select_roles(egos, spec, G_range=(1, 10), seed=0)
    if [f.n_components for f in fits] != [1, 2, 3, 4]:
        failures.append(f"cap violated: fitted G {[f.n_components for f in fits]}")

    # d) the full 1816-2002 span is 187 annual slices
    span_dyads = [DyadYearRecord("A", "B", y, defensive=True,
                                 alliance_years=y - 1816)
                  for y in range(1816, 2003)]
    span_nodes = [NodeYearAttrs(a, y, False, 0.1, False)
                  for a in ("A", "B") for y in range(1816, 2003)]
    full = ingest_dyad_years(span_dyads, span_nodes, (1816, 2002))
    if len(full.years) != 187:
        failures.append(f"span 1816-2002 gave {len(full.years)} slices, not 187")
    if len(PeriodDef("full", 1816, 2002).years) != 187:
        failures.append("PeriodDef year arithmetic broken")

    # e) shipped six-period configuration
    cfg = load_run_config(CONFIG_DIR / "paper_periods.yaml")
    got = [(p.period.name, p.period.start_year, p.period.end_year,
            list(p.spec.labels)) for p in cfg.periods]
    want = [(n, a, b, terms) for n, a, b, terms in EXPECTED_PERIODS]
    if got != want:
        failures.append(f"shipped period table mismatch: {got}")
    if any(p.g_cap != 4 for p in cfg.periods):
        failures.append("period g_cap is not 4 everywhere")
    if cfg.min_alters != 5 or cfg.span != (1816, 2002) or cfg.replications != 500:
        failures.append("shipped globals (min_alters/span/R) drifted")

    # f) coefficient table layout at R=500
    rng = np.random.default_rng(8)
    members = []
    for k in range(3):
        slices = [random_slice(rng, 8, 0.3, year=1900 + t) for t in range(6)]
        s = series_from_slices(slices, ego_id=f"ego{k}")
        members.append(s)
    res = pooled_role_tergm(members, ModelSpec([cs.edges()]), R=500, seed=5)
    text = render_coef_text([("Role 0", res)])
    if "Num. obs." not in text:
        failures.append("table lacks 'Num. obs.' row")
    if "500 replications" not in text:
        failures.append("table lacks '500 replications' note")
    if not re.search(r"\[-?\d+\.\d{2}; -?\d+\.\d{2}\]", text):
        failures.append("table lacks bracketed percentile interval")
    starred = "*" in text.split("Num. obs.")[0].replace("* 0 outside", "")
    if bool(res.significant[0]) != starred:
        failures.append("significance star disagrees with 0-outside-CI rule")

    _finish(7, failures[:5],
            "threshold, first-order, G cap, 187 slices, shipped period table, "
            "table layout all verified",
            t0, budget=120, capsys=capsys)


def _tree_digest(root: Path) -> dict[str, str]:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def test_criterion_8_end_to_end_determinism(tmp_path, monkeypatch, capsys):
    t0 = time.time()
    failures: list[str] = []

    digests = []
    for run in ("first", "second"):
        d = tmp_path / run
        d.mkdir()
        shutil.copy(CONFIG_DIR / "synthetic_demo_sim.yaml", d)
        shutil.copy(CONFIG_DIR / "synthetic_demo.yaml", d)
        monkeypatch.chdir(d)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            for argv in (
                ["simulate", "--config", "synthetic_demo_sim.yaml"],
                ["ingest", "--config", "synthetic_demo.yaml"],
                ["fit", "--config", "synthetic_demo.yaml"],
                ["pooled", "--config", "synthetic_demo.yaml"],
            ):
                code = main(argv)
                if code != 0:
                    failures.append(f"{run} run: {argv[0]} exited {code}")
        digests.append({
            "sim": _tree_digest(d / "sim"),
            "out": _tree_digest(d / "out"),
        })

    n_files = sum(len(v) for v in digests[0].values())
    if digests[0] != digests[1]:
        diffs = [
            f"{tree}/{name}"
            for tree in ("sim", "out")
            for name in set(digests[0][tree]) | set(digests[1][tree])
            if digests[0][tree].get(name) != digests[1][tree].get(name)
        ]
        failures.append(f"trees differ at {sorted(diffs)}")

    _finish(8, failures,
            f"simulate/ingest/fit/pooled repeated under one seed: {n_files} "
            f"files byte-identical across runs",
            t0, budget=900, capsys=capsys)
