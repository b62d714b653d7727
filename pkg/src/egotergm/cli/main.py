"""Entry point: ingest, fit, pooled, simulate and report verbs.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 estimation
failure.  Given the same configuration and seed, every verb writes a
byte-identical output tree (no timestamps, deterministic ordering and float
formatting).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..errors import (
    ConfigError,
    DataError,
    EgoTergmError,
    EstimationError,
)
from ..estimator import pooled_role_tergm, render_coef_text, write_coef_csv
from ..mixture import (
    assignment_matrix,
    select_roles,
    write_assignment_csv,
    write_bic_csv,
)
from ..netdata import (
    EgoExtraction,
    LongitudinalNetwork,
    extract_egos,
    ingest_dyad_years,
    partition,
    read_dyad_csv,
    read_node_csv,
    write_dyad_csv,
    write_node_csv,
)
from ..rng import child_seed
from ..sampler import plant_population, population_records
from .config import (
    RunConfig,
    config_hash,
    load_run_config,
    load_simulate_config,
    slugify,
)

logger = logging.getLogger("egotergm")


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _load_network(cfg: RunConfig) -> LongitudinalNetwork:
    for p in (cfg.dyad_csv, cfg.node_csv):
        if not Path(p).exists():
            raise DataError(f"input file {p} does not exist")
    dyad_rows = read_dyad_csv(cfg.dyad_csv)
    node_rows = read_node_csv(cfg.node_csv)
    return ingest_dyad_years(dyad_rows, node_rows, cfg.span)


def _extract_all(cfg: RunConfig, net: LongitudinalNetwork) -> dict[str, EgoExtraction]:
    nets = partition(net, [p.period for p in cfg.periods])
    out: dict[str, EgoExtraction] = {}
    for pcfg, pnet in zip(cfg.periods, nets):
        out[pcfg.period.name] = extract_egos(
            pnet, min_alters=cfg.min_alters, order=1, period=pcfg.period
        )
    return out


def _select_periods(cfg: RunConfig, chosen: str | None) -> list:
    if chosen is None:
        return list(cfg.periods)
    for pcfg in cfg.periods:
        if pcfg.period.name == chosen:
            return [pcfg]
    raise ConfigError(
        f"unknown period {chosen!r}; configured periods: "
        + ", ".join(p.period.name for p in cfg.periods)
    )


# ---------------------------------------------------------------------------
# verbs


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    out = Path(args.out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    net = _load_network(cfg)

    rows = []
    for year in net.years:
        n = len(net.nodes(year))
        ties = net.n_ties(year)
        density = ties / (n * (n - 1) / 2) if n > 1 else 0.0
        rows.append([year, n, ties, repr(float(density))])
    _write_csv(out / "network_summary.csv", ["year", "n_nodes", "n_ties", "density"], rows)

    extractions = _extract_all(cfg, net)
    excl_rows = []
    for pcfg in cfg.periods:
        ext = extractions[pcfg.period.name]
        for rec in ext.excluded:
            excl_rows.append([pcfg.period.name, rec.actor_id, rec.max_degree])
    _write_csv(out / "exclusions.csv", ["period", "actor", "max_degree"], excl_rows)

    logger.info("ingested %d slices, %d actors", len(net.years), len(net.all_actors()))
    for pcfg in cfg.periods:
        ext = extractions[pcfg.period.name]
        logger.info(
            "period %s: %d egos, %d excluded",
            pcfg.period.name, len(ext.egos), len(ext.excluded),
        )
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    out = Path(args.out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    chosen = _select_periods(cfg, args.period)
    net = _load_network(cfg)
    extractions = _extract_all(cfg, net)

    manifest_periods = {}
    for pcfg in chosen:
        name = pcfg.period.name
        p_idx = [p.period.name for p in cfg.periods].index(name)
        ext = extractions[name]
        if not ext.egos:
            raise DataError(
                f"period {name!r}: no actor reaches min_alters={cfg.min_alters}"
            )
        try:
            best, fits = select_roles(
                ext.egos, pcfg.spec, G_range=pcfg.g_range, cap=pcfg.g_cap,
                seed=child_seed(seed, 5000, p_idx),
            )
        except EstimationError as err:
            raise type(err)(f"period {name!r}: {err}") from err
        slug = slugify(name)
        write_assignment_csv(assignment_matrix(best), out / f"roles_{slug}.csv")
        write_bic_csv(fits, out / f"bic_{slug}.csv")
        param_rows = []
        for g in range(best.n_components):
            for lab, th in zip(best.term_labels, best.thetas[g]):
                param_rows.append([g, repr(float(best.pis[g])), lab, repr(float(th))])
        _write_csv(out / f"params_{slug}.csv", ["role", "pi", "term", "theta"], param_rows)
        manifest_periods[name] = {
            "n_egos": len(ext.egos),
            "n_excluded": len(ext.excluded),
            "selected_G": best.n_components,
            "bic": float(best.bic),
            "log_pl": float(best.log_pl),
            "converged": bool(best.converged),
            "degenerate_roles": list(best.degenerate),
        }
        logger.info("period %s: selected G=%d (BIC %.2f)", name, best.n_components, best.bic)

    manifest = {
        "command": "fit",
        "config_hash": config_hash(args.config),
        "seed": seed,
        "versions": {
            "egotergm": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "periods": manifest_periods,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return 0


def _read_roles_csv(path: Path) -> dict[str, int]:
    if not path.exists():
        raise DataError(f"fit artifact {path} is missing; run the fit verb first")
    out: dict[str, int] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            out[row["ego_id"]] = int(row["hard_label"])
    return out


def cmd_pooled(args: argparse.Namespace) -> int:
    cfg = load_run_config(args.config)
    if cfg.pooled is None:
        raise ConfigError("configuration has no 'pooled' section")
    seed = cfg.seed if args.seed is None else args.seed
    R = cfg.replications if args.replications is None else args.replications
    if R < 1:
        raise ConfigError(f"replications must be >= 1, got {R}")
    jobs = args.jobs or 1
    out = Path(args.out or cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    chosen = _select_periods(cfg, args.period)
    net = _load_network(cfg)
    extractions = _extract_all(cfg, net)

    egos_by_period = {
        name: {e.ego_id: e for e in ext.egos} for name, ext in extractions.items()
    }
    labels_by_period = {
        pcfg.period.name: _read_roles_csv(out / f"roles_{slugify(pcfg.period.name)}.csv")
        for pcfg in chosen
    }

    def fit_group(label: str, members: list, group_seed: int):
        if not members:
            logger.info("pooled group %s: no members, skipped", label)
            return None
        if len(members) == 1:
            logger.warning("pooled group %s: single member, intervals reflect one ego", label)
        return pooled_role_tergm(
            members, cfg.pooled.spec, R=R, confidence=cfg.confidence,
            seed=group_seed, n_jobs=jobs,
        )

    if cfg.pooled.mode == "per_period":
        for pcfg in chosen:
            name = pcfg.period.name
            p_idx = [p.period.name for p in cfg.periods].index(name)
            labels = labels_by_period[name]
            pool = egos_by_period[name]
            G = max(labels.values(), default=-1) + 1
            columns = []
            for g in range(G):
                members = [pool[e] for e in sorted(labels) if labels[e] == g and e in pool]
                res = fit_group(f"{name}/role_{g}", members, child_seed(seed, 6000, p_idx, g))
                if res is None:
                    continue
                write_coef_csv(res, out / f"pooled_{slugify(name)}_role{g}.csv")
                columns.append((f"Role {g}", res))
            if columns:
                text = render_coef_text(columns)
                (out / f"pooled_table_{slugify(name)}.txt").write_text(text)
    else:
        columns = []
        chosen_names = {pcfg.period.name for pcfg in chosen}
        for k, group in enumerate(cfg.pooled.role_map):
            members = []
            for pname, role in group.members:
                if pname not in chosen_names:
                    continue
                labels = labels_by_period.get(pname)
                if labels is None:
                    continue
                pool = egos_by_period[pname]
                members += [pool[e] for e in sorted(labels)
                            if labels[e] == role and e in pool]
            res = fit_group(group.label, members, child_seed(seed, 6000, k))
            if res is None:
                continue
            write_coef_csv(res, out / f"pooled_{slugify(group.label)}.csv")
            columns.append((group.label, res))
        if columns:
            (out / "pooled_table.txt").write_text(render_coef_text(columns))
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    sim = load_simulate_config(args.config)
    out = Path(args.out or sim.output)
    out.mkdir(parents=True, exist_ok=True)
    template = sim.template
    if args.seed is not None:
        from dataclasses import replace

        template = replace(template, seed=args.seed)
    egos, labels = plant_population(
        len(sim.thetas), sim.thetas, sim.egos_per_cluster, template
    )
    dyad_rows, node_rows = population_records(egos)
    write_dyad_csv(dyad_rows, out / "dyads.csv")
    write_node_csv(node_rows, out / "nodes.csv")
    _write_csv(
        out / "truth.csv",
        ["ego_id", "cluster"],
        [[e.ego_id, int(g)] for e, g in zip(egos, labels)],
    )
    logger.info(
        "simulated %d egos in %d clusters over %d slices",
        len(egos), len(sim.thetas), template.slices,
    )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    if args.out is not None:
        out = Path(args.out)
    elif args.config is not None:
        out = Path(load_run_config(args.config).output)
    else:
        out = Path(".")
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise DataError(f"no manifest found at {manifest_path}; run the fit verb first")
    manifest = json.loads(manifest_path.read_text())
    print(f"run manifest: seed={manifest['seed']} config_hash={manifest['config_hash'][:12]}")
    print(f"versions: {manifest['versions']}")
    for name, info in sorted(manifest.get("periods", {}).items()):
        print(
            f"period {name}: {info['n_egos']} egos "
            f"({info['n_excluded']} excluded), selected G={info['selected_G']}, "
            f"BIC={info['bic']:.2f}, converged={info['converged']}"
        )
        bic_path = out / f"bic_{slugify(name)}.csv"
        if bic_path.exists():
            with open(bic_path, newline="") as fh:
                for row in csv.DictReader(fh):
                    print(
                        f"  G={row['G']}: log_pl={float(row['log_pl']):.2f} "
                        f"bic={float(row['bic']):.2f}"
                    )
    for table in sorted(out.glob("pooled_table*.txt")):
        print(f"\n{table.name}:")
        print(table.read_text(), end="")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="egotergm",
        description=(
            "Latent role detection in longitudinal alliance networks: "
            "ingest dyad-year data, fit ego-network TERGM mixtures, pool "
            "role-level models, simulate synthetic populations."
        ),
    )
    parser.add_argument("--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="verb", required=True)

    def add(name: str, func, help_: str, config_required: bool = True):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=config_required, default=None,
                       help="YAML configuration file")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        p.add_argument("--period", default=None, help="restrict to one configured period")
        p.add_argument("--replications", type=int, default=None,
                       help="bootstrap replication override")
        p.add_argument("--jobs", type=int, default=None,
                       help="worker threads for bootstrap replicates")
        p.set_defaults(func=func)
        return p

    add("ingest", cmd_ingest, "ingest dyad-year CSVs and write network summaries")
    add("fit", cmd_fit, "fit role mixtures per period and select role counts by BIC")
    add("pooled", cmd_pooled, "fit pooled role models with bootstrapped intervals")
    add("simulate", cmd_simulate, "draw a synthetic population with known clusters")
    add("report", cmd_report, "summarize the artifacts of a previous run",
        config_required=False)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 3
    except EstimationError as err:
        print(f"estimation error: {err}", file=sys.stderr)
        return 4
    except EgoTergmError as err:  # pragma: no cover - safety net
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
