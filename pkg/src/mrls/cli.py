"""Command-line experiment driver.

Subcommands: generate, validate, metrics, spectrum, radix, route-check,
ksp-build, simulate.  Experiment configs are YAML files; see ``configs/``
and the README for the schema.

Exit codes: 0 success, 2 config error, 3 infeasible spec or invalid
topology, 4 routing check failure, 5 simulation fault.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analytics import radix_for_endpoints, spectrum_csv, spectrum_sweep
from .errors import (CornerEncountered, CreditUnderflow, DeadlockDetected, HopBoundExceeded,
                     InfeasibleSpec, ParseError, SaturatedAtLoad)
from .metrics import MetricsReport, metrics_report
from .routing import corner_check, corner_csv, ksp_build
from .simulator import (ROUTINGS, Routing, SimConfig, TrafficPattern, run_all2all,
                        run_latency, run_throughput, stats_csv)
from .topology import (FtSpec, MrlsSpec, OftSpec, build_fat_tree, build_mrls, build_oft,
                       load_topology, save_topology, validate)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_ROUTING = 4
EXIT_SIM = 5

FAMILIES = ("mrls", "fat_tree", "oft")
EXPERIMENTS = ("throughput", "latency", "all2all")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    name: str
    topology: dict
    seeds: list[int]
    routing: dict = field(default_factory=lambda: {"algorithm": "polarized"})
    traffic: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)
    output_dir: str | None = None
    expected: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping")
        topo = dict(d.get("topology") or {})
        fam = topo.get("family")
        if fam not in FAMILIES:
            raise ConfigError(f"topology.family must be one of {', '.join(FAMILIES)}, got {fam!r}")
        seeds = topo.pop("seeds", d.get("seeds", [0]))
        if isinstance(seeds, int):
            seeds = [seeds]
        if not seeds:
            raise ConfigError("seed list must not be empty")
        routing = dict(d.get("routing") or {"algorithm": "polarized"})
        if routing.get("algorithm", "polarized") not in ROUTINGS:
            raise ConfigError(f"unknown routing {routing.get('algorithm')!r}; valid: {', '.join(ROUTINGS)}")
        traffic = dict(d.get("traffic") or {})
        exp = traffic.get("experiment", "throughput")
        if exp not in EXPERIMENTS:
            raise ConfigError(f"traffic.experiment must be one of {', '.join(EXPERIMENTS)}")
        for p in traffic.get("patterns", ["UN"]):
            try:
                TrafficPattern.parse(p)
            except ValueError as e:
                raise ConfigError(str(e)) from None
        sim = dict(d.get("sim") or {})
        known = set(SimConfig.__dataclass_fields__)
        bad = sorted(set(sim) - known)
        if bad:
            raise ConfigError(f"unknown sim fields: {', '.join(bad)}")
        return cls(name=str(d.get("name", "experiment")), topology=topo, seeds=[int(s) for s in seeds],
                   routing=routing, traffic=traffic, sim=sim, output_dir=d.get("output_dir"),
                   expected=dict(d.get("expected") or {}), raw=d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from None
        return cls.from_dict(data)

    def semantic(self) -> dict:
        # name, output_dir and expected describe a run without changing what it computes
        return {"topology": self.topology, "seeds": self.seeds, "routing": self.routing,
                "traffic": self.traffic, "sim": self.sim}

    def hash(self) -> str:
        return config_hash(self.semantic())


def config_hash(d: dict) -> str:
    """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str = __version__
    outputs: list[str] = field(default_factory=list)
    started: float = field(default_factory=time.time)
    wall_clock_s: float = 0.0
    status: str = "running"

    def finish(self, status: str) -> None:
        self.status = status
        self.wall_clock_s = round(time.time() - self.started, 3)

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        d = dict(self.__dict__)
        d["outputs"] = sorted(set(self.outputs))
        path.write_text(json.dumps(d, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def build_topology(topo: dict, seed: int):
    fam = topo["family"]
    try:
        if fam == "mrls":
            R, u = int(topo["R"]), int(topo["u"])
            if "S" in topo:
                spec = MrlsSpec.for_endpoints(R, u, int(topo["S"]), seed=seed)
            else:
                spec = MrlsSpec(R, u, int(topo.get("d", R - u)), int(topo["N1"]), int(topo["N2"]), seed=seed)
            t = build_mrls(spec)
        elif fam == "fat_tree":
            t = build_fat_tree(FtSpec(int(topo["R"]), int(topo["h"]), float(topo.get("populated", 1.0))))
        else:
            t = build_oft(OftSpec(int(topo["q"])))
    except KeyError as e:
        raise ConfigError(f"topology config for {fam} is missing {e}") from None
    return t


# ---------------------------------------------------------------------------
# commands


def _emit(text: str, args, name: str, manifest: RunManifest | None = None) -> None:
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / name
        path.write_text(text, encoding="utf-8")
        if manifest is not None:
            manifest.outputs.append(str(path))
        print(path)
    else:
        sys.stdout.write(text)


def cmd_generate(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    seeds = [args.seed] if args.seed is not None else cfg.seeds
    out = Path(args.out_dir or cfg.output_dir or "out")
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg.hash())
    rows = []
    for seed in seeds:
        t = build_topology(cfg.topology, seed)
        path = out / f"{cfg.name}_seed{seed}.topo"
        save_topology(t, path)
        manifest.outputs.append(str(path))
        violations = validate(t)
        rows.append((path.name, seed, t.N, t.S, t.M, len(violations)))
        print(path)
    report = out / f"{cfg.name}_validation.csv"
    with report.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["file", "seed", "N", "S", "M", "violations"])
        w.writerows(rows)
    manifest.outputs.append(str(report))
    bad = any(r[-1] for r in rows)
    manifest.finish("invalid" if bad else "ok")
    manifest.write(out)
    return EXIT_INFEASIBLE if bad else EXIT_OK


def cmd_validate(args) -> int:
    worst = EXIT_OK
    for f in args.files:
        t = load_topology(f)
        vs = validate(t)
        for v in vs:
            print(f"{f}: {v}")
        if vs:
            worst = EXIT_INFEASIBLE
        else:
            print(f"{f}: ok (N={t.N}, S={t.S}, M={t.M})")
    return worst


def _metrics_one(path_full):
    path, full = path_full
    return path, metrics_report(load_topology(path), full=full)


def metrics_table(reports: list[tuple[str, MetricsReport]], fmt: str) -> str:
    fields = ("file",) + MetricsReport.FLAT_FIELDS
    if fmt == "json":
        rows = [{"file": f, **r.flat()} for f, r in reports]
        return json.dumps({"rows": rows, "aggregate": _aggregate(reports)}, sort_keys=True) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for f, r in reports:
        w.writerow({"file": f, **r.flat()})
    if len(reports) > 1:
        agg = _aggregate(reports)
        w.writerow({"file": "mean", **agg["mean"]})
        w.writerow({"file": "std", **agg["std"]})
    return buf.getvalue()


def _aggregate(reports):
    if not reports:
        return {}
    keys = MetricsReport.FLAT_FIELDS
    arr = np.array([[float(r.flat()[k]) for k in keys] for _, r in reports])
    return {"mean": dict(zip(keys, arr.mean(axis=0).tolist())),
            "std": dict(zip(keys, arr.std(axis=0, ddof=1 if len(arr) > 1 else 0).tolist()))}


def cmd_metrics(args) -> int:
    jobs = [(f, not args.leaf_only) for f in args.files]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.jobs) as ex:
            reports = list(ex.map(_metrics_one, jobs))
    else:
        reports = [_metrics_one(j) for j in jobs]
    _emit(metrics_table(reports, args.format), args, f"metrics.{args.format}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    if args.S:
        S_range = args.S
    else:
        S_range = np.unique(np.geomspace(args.S_min, args.S_max, args.points).astype(int))
    points = spectrum_sweep(args.R, args.f, S_range, k_set=tuple(args.k))
    if args.format == "json":
        text = json.dumps([{"S": p.S, "N1": p.N1, "N2": p.N2,
                            "prob_dstar_leq": {str(k): v for k, v in p.prob_dstar_leq.items()},
                            "predicted_A": p.predicted_A, "predicted_theta": p.predicted_theta,
                            "likely_dstar": p.likely_dstar(), "likely_diameter": p.likely_diameter()}
                           for p in points], sort_keys=True) + "\n"
    else:
        text = spectrum_csv(points)
    _emit(text, args, f"spectrum.{args.format}")
    return EXIT_OK


def cmd_radix(args) -> int:
    rows = []
    for S in args.S:
        R = radix_for_endpoints(args.family, S, h=args.h, f=args.f, target_D=args.target_D)
        rows.append({"family": args.family, "S": S, "R": R})
    if args.format == "json":
        text = json.dumps(rows, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=("family", "S", "R"), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        text = buf.getvalue()
    _emit(text, args, f"radix.{args.format}")
    return EXIT_OK


def cmd_route_check(args) -> int:
    failed = False
    chunks = []
    for f in args.files:
        t = load_topology(f)
        triples = corner_check(t, threshold=args.threshold, sample_sources=args.sample_sources,
                               seed=args.seed or 0)
        chunks.append(corner_csv(triples) if not chunks else corner_csv(triples).split("\n", 1)[1])
        print(f"{f}: {len(triples)} corner triples", file=sys.stderr)
        failed |= bool(triples)
    _emit("".join(chunks), args, "corners.csv")
    return EXIT_ROUTING if failed else EXIT_OK


def cmd_ksp_build(args) -> int:
    t = load_topology(args.file)
    table = ksp_build(t, args.K, seed=args.seed or 0)
    _emit(table.to_text(), args, Path(args.file).stem + f".k{args.K}.ksp")
    return EXIT_OK


def _sim_job(job):
    cfg, seed, pattern, load = job
    t = build_topology(cfg.topology, seed)
    t.meta["label"] = f"{cfg.name}-seed{seed}"
    simcfg = SimConfig(**{**cfg.sim, "seed": seed, "offered_load": load})
    routing = Routing(cfg.routing.get("algorithm", "polarized"), K=int(cfg.routing.get("K", 250)))
    if "penalty" in cfg.routing:
        simcfg = replace(simcfg, penalty=int(cfg.routing["penalty"]))
    if cfg.routing.get("reselect"):
        simcfg = replace(simcfg, ksp_reselect=True)
    exp = cfg.traffic.get("experiment", "throughput")
    if exp == "all2all":
        tasks = int(cfg.traffic.get("task_count", t.S))
        return run_all2all(t, routing, tasks, simcfg, int(cfg.traffic.get("packets_per_message", 1)))
    pat = TrafficPattern.parse(pattern)
    if exp == "latency":
        return run_latency(t, routing, simcfg, pattern=pat)
    return run_throughput(t, routing, pat, simcfg)


def cmd_simulate(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    seeds = [args.seed] if args.seed is not None else cfg.seeds
    out = Path(args.out_dir or cfg.output_dir or "out")
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg.hash())
    if cfg.routing.get("algorithm", "polarized") == "polarized":
        for seed in seeds:
            triples = corner_check(build_topology(cfg.topology, seed))
            if triples:
                print(f"seed {seed}: corner triple (s, t, c) = {triples[0]}", file=sys.stderr)
                manifest.finish("routing-check-failed")
                manifest.write(out)
                return EXIT_ROUTING
    exp = cfg.traffic.get("experiment", "throughput")
    patterns = ["A2A"] if exp == "all2all" else cfg.traffic.get("patterns", ["UN"])
    loads = [0.0] if exp == "all2all" else [float(x) for x in cfg.traffic.get("loads", [1.0])]
    jobs = [(cfg, s, p, l) for s in seeds for p in patterns for l in loads]
    try:
        if args.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(args.jobs) as ex:
                results = list(ex.map(_sim_job, jobs))
        else:
            results = [_sim_job(j) for j in jobs]
    except (DeadlockDetected, CreditUnderflow, HopBoundExceeded, SaturatedAtLoad) as e:
        print(f"simulation fault: {e}", file=sys.stderr)
        manifest.finish("simulation-fault")
        manifest.write(out)
        return EXIT_SIM
    except CornerEncountered as e:
        print(f"routing failure: {e}", file=sys.stderr)
        manifest.finish("routing-check-failed")
        manifest.write(out)
        return EXIT_ROUTING
    if args.format == "json":
        path = out / f"{cfg.name}_sim.json"
        path.write_text("[" + ",\n".join(r.to_json() for r in results) + "]\n", encoding="utf-8")
    else:
        path = out / f"{cfg.name}_sim.csv"
        path.write_text(stats_csv(results), encoding="utf-8")
    manifest.outputs.append(str(path))
    manifest.finish("ok")
    manifest.write(out)
    print(path)
    return EXIT_OK


# ---------------------------------------------------------------------------


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # subcommand copies use SUPPRESS so they do not overwrite flags given before the subcommand
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = argparse.ArgumentParser(add_help=False)
    g.add_argument("--seed", type=int, default=d(None), help="override the seed list with one seed")
    g.add_argument("--jobs", type=int, default=d(1), help="worker processes for independent runs")
    g.add_argument("--out-dir", default=d(None), help="write outputs here instead of stdout")
    g.add_argument("--format", choices=("csv", "json"), default=d("csv"))
    return g


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags(True)
    p = argparse.ArgumentParser(prog="mrls", description=__doc__.split("\n\n")[0],
                                parents=[_global_flags(False)])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="build topology files from a config")
    g.add_argument("config")
    g.set_defaults(func=cmd_generate)

    v = sub.add_parser("validate", parents=[common], help="check topology files for structural errors")
    v.add_argument("files", nargs="+")
    v.set_defaults(func=cmd_validate)

    m = sub.add_parser("metrics", parents=[common], help="exact metrics of topology files")
    m.add_argument("files", nargs="*")
    m.add_argument("--leaf-only", action="store_true", help="skip the all-switch sweep")
    m.set_defaults(func=cmd_metrics)

    s = sub.add_parser("spectrum", parents=[common], help="predicted diameter probabilities over S")
    s.add_argument("--R", type=int, default=36)
    s.add_argument("--f", type=float, default=1.0)
    s.add_argument("--S", type=int, nargs="*", help="explicit endpoint counts")
    s.add_argument("--S-min", type=int, default=1000)
    s.add_argument("--S-max", type=int, default=10**8)
    s.add_argument("--points", type=int, default=50)
    s.add_argument("--k", type=int, nargs="+", default=[3, 4, 5, 6, 7])
    s.set_defaults(func=cmd_spectrum)

    r = sub.add_parser("radix", parents=[common], help="smallest radix reaching S endpoints")
    r.add_argument("--family", choices=("mrls", "ft", "oft"), required=True)
    r.add_argument("--S", type=int, nargs="+", required=True)
    r.add_argument("--h", type=int, default=None)
    r.add_argument("--f", type=float, default=1.0)
    r.add_argument("--target-D", type=int, default=4)
    r.set_defaults(func=cmd_radix)

    c = sub.add_parser("route-check", parents=[common], help="list Polarized corner triples")
    c.add_argument("files", nargs="+")
    c.add_argument("--threshold", type=int, default=5000, help="switch count above which sources are sampled")
    c.add_argument("--sample-sources", type=int, default=128)
    c.set_defaults(func=cmd_route_check)

    k = sub.add_parser("ksp-build", parents=[common], help="K minimal paths per leaf pair")
    k.add_argument("file")
    k.add_argument("--K", type=int, default=250)
    k.set_defaults(func=cmd_ksp_build)

    sm = sub.add_parser("simulate", parents=[common], help="run the simulations of a config")
    sm.add_argument("config")
    sm.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParseError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleSpec as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
