"""Command line front end.

One-shot subcommands (cap, green, sample --window, distance, connect
--field) print a JSON object to stdout.  Experiment subcommands (sample,
connect, shape, ldp, torus, slab, lemmas) run replicas through the
shared runner, write results.csv / summary.json / meta.json under --out,
print one line per named check, and exit nonzero when a check failed.
merge concatenates finished runs of the same configuration.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .chemdist import bfs_distance, trajectory_graph
from .equilibrium import capacity_mc, equilibrium
from .errors import ClobberError, ConfigError, InterlaceError
from .green import GreenTable, green_stopped
from .lattice import Box, Domain, box_domain, max_distance, sausage, segment
from .sampler import OccupancyField, sample_field
from .experiments.results import merge_runs
from .experiments.runner import run_experiment
from ._version import __version__


def _parse_site(text: str, what: str = "site") -> tuple[int, ...]:
    try:
        return tuple(int(p.strip(), 0) for p in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad {what} {text!r}: {exc}") from exc


def _parse_set(spec: str, d: int):
    """A small mini-language for finite sets.

    ball:R[@c]  box:lo..hi,lo..hi,...  segment:K  sausage:N,a
    points:x,y,..;x,y,..
    """
    kind, _, body = spec.partition(":")
    try:
        if kind == "ball":
            radius, _, at = body.partition("@")
            center = _parse_site(at) if at else (0,) * d
            return box_domain(center, int(radius), d)
        if kind == "box":
            lo, hi = [], []
            for part in body.split(","):
                a, _, b = part.partition("..")
                lo.append(int(a))
                hi.append(int(b) if b else int(a))
            return Domain([Box(tuple(lo), tuple(hi))])
        if kind == "segment":
            return segment(int(body), d)
        if kind == "sausage":
            n, a = body.split(",")
            return sausage(int(n), float(a), d)
        if kind == "points":
            return np.array([_parse_site(p) for p in body.split(";") if p.strip()], np.int64)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"bad set spec {spec!r}: {exc}") from exc
    raise ConfigError(
        f"unknown set kind {kind!r} (expected ball, box, segment, sausage, or points)"
    )


def _set_sites(A) -> np.ndarray:
    return A.sites() if isinstance(A, Domain) else np.asarray(A, np.int64)


def _read_config(args) -> tuple[str, str]:
    if not args.config:
        return "", "<none>"
    with open(args.config) as fh:
        return fh.read(), args.config


def _emit(obj: dict) -> int:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def _run_kind(kind: str, args, overrides: dict | None = None) -> int:
    text, path = _read_config(args)
    summary = run_experiment(
        kind,
        config_text=text,
        config_path=path,
        overrides=overrides,
        seed=args.seed,
        threads=args.threads,
        out_dir=args.out,
        force=args.force,
    )
    failed = 0
    for c in summary["checks"]:
        ok = bool(c.get("passed"))
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'} {c['name']}: {c.get('detail', '')}")
    print(f"{summary['records']} records -> {summary['out']} [{summary['config_hash']}]")
    return 1 if failed else 0


# ------------------------------------------------------------ subcommands


def cmd_cap(args) -> int:
    A = _parse_set(args.set, args.dim)
    table = GreenTable(args.dim)
    sol = equilibrium(A, table=table)
    out = {
        "set": args.set,
        "d": args.dim,
        "capacity": sol.capacity,
        "support_sites": int(len(sol.sites)),
        "orbit_count": sol.orbit_count,
        "residual": sol.residual,
    }
    if args.mc:
        sites = _set_sites(A)
        center = np.round((sites.min(axis=0) + sites.max(axis=0)) / 2).astype(np.int64)
        reach = int(max_distance(center, sites, "linf"))
        kr = args.kill_radius if args.kill_radius else 4 * (reach + 2)
        est = capacity_mc(A, args.mc, kr, args.seed or 0, table=table)
        out["mc"] = {
            "value": est.value,
            "stderr": est.stderr,
            "bias_bound": est.bias_bound,
            "escape_rate": est.escape_rate,
            "replicas": est.replicas,
            "kill_radius": est.kill_radius,
        }
    return _emit(out)


def cmd_green(args) -> int:
    if not args.at and not args.radius:
        raise ConfigError("green: give --at X and/or --radius R")
    table = GreenTable(args.dim, tol=args.tol)
    out: dict = {"d": args.dim, "tol": args.tol}
    if args.radius:
        pts = box_domain((0,) * args.dim, args.radius, args.dim).sites()
        table.values(pts)
        out["warmed_sites"] = int(len(pts))
        out["warmed_radius"] = args.radius
    if args.at:
        vals = {}
        for text in args.at:
            x = _parse_site(text, "displacement")
            vals[",".join(str(v) for v in x)] = table.value(x)
        out["values"] = vals
        if args.stopped:
            out["stopped"] = {
                ",".join(str(v) for v in _parse_site(t)): green_stopped(
                    (0,) * args.dim, _parse_site(t), args.stopped
                )
                for t in args.at
            }
            out["stopped_horizon"] = args.stopped
    return _emit(out)


def cmd_sample(args) -> int:
    if not args.window:
        return _run_kind("vacancy", args)
    dom = _parse_set(args.window, args.dim)
    if not isinstance(dom, Domain):
        raise ConfigError("sample window must be a ball, box, or sausage spec")
    field = sample_field(
        dom,
        args.u,
        seed=args.seed or 0,
        replica=args.replica,
        kill_scale=args.kill_scale,
        horizon=args.horizon,
    )
    out_dir = args.out or "out"
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "field.bin")
    if os.path.exists(path) and not args.force:
        raise ClobberError(f"{path} exists; pass --force to overwrite")
    field.write(path)
    return _emit(
        {
            "path": path,
            "d": field.d,
            "u": field.u,
            "trajectories": int(len(field.trajectories)),
            "occupied_sites": int(len(field.keys)),
            "bias_budget": field.bias_budget,
            "seed": args.seed or 0,
            "replica": args.replica,
        }
    )


def cmd_distance(args) -> int:
    field = OccupancyField.read(args.field)
    if args.level is not None:
        field = field.at_level(args.level)
    src = _parse_site(args.src, "--from site")
    dst = _parse_site(args.dst, "--to site")
    dm = bfs_distance(field, src)
    rho = dm.dist_of(dst)
    return _emit(
        {
            "from": list(src),
            "to": list(dst),
            "rho": rho,
            "flagged": bool(dm.truncated),
            "level": field.level,
            "reached_sites": dm.reached(),
        }
    )


def cmd_connect(args) -> int:
    if not args.field:
        return _run_kind("connect", args)
    field = OccupancyField.read(args.field)
    level = field.u if args.level is None else args.level
    m = args.m
    if m is None:
        lengths = [
            len(t.codes) for t, a in zip(field.trajectories, field.labels <= level) if a
        ]
        if not lengths:
            raise ConfigError("no trajectories at this level")
        m = min(lengths)
    graph = trajectory_graph(field, m, per_site_cap=args.per_site_cap)
    nodes = graph.nodes_at_level(level)
    seen: set[int] = set()
    components = 0
    max_switch = 0
    allowed = set(int(v) for v in nodes)
    for start in nodes:
        if int(start) in seen:
            continue
        components += 1
        comp = [int(start)]
        seen.add(int(start))
        dist = {int(start): 0}
        q = [int(start)]
        while q:
            i = q.pop(0)
            for j in graph.neighbors(i):
                j = int(j)
                if j in allowed and j not in seen:
                    seen.add(j)
                    dist[j] = dist[i] + 1
                    comp.append(j)
                    q.append(j)
        for far in comp:
            ecc = _component_ecc(graph, far, allowed)
            max_switch = max(max_switch, ecc)
    return _emit(
        {
            "trajectories": int(len(nodes)),
            "horizon": int(m),
            "components": components,
            "max_switch": max_switch,
            "saturated": bool(graph.conservative),
            "level": level,
        }
    )


def _component_ecc(graph, src: int, allowed: set[int]) -> int:
    dist = {src: 0}
    q = [src]
    ecc = 0
    while q:
        i = q.pop(0)
        for j in graph.neighbors(i):
            j = int(j)
            if j in allowed and j not in dist:
                dist[j] = dist[i] + 1
                ecc = max(ecc, dist[j])
                q.append(j)
    return ecc


def cmd_merge(args) -> int:
    n = merge_runs(args.dirs, args.out or "merged", force=bool(args.force))
    return _emit({"records": n, "out": args.out or "merged"})


# --------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", metavar="PATH", help="key=value config file with [sections]")
    shared.add_argument("--seed", type=lambda s: int(s, 0), metavar="U64", help="master seed")
    shared.add_argument("--threads", type=int, metavar="N", help="worker processes")
    shared.add_argument("--out", metavar="DIR", help="output directory")
    shared.add_argument("--force", action="store_true", default=None, help="overwrite outputs")

    top = argparse.ArgumentParser(prog="interlace", description=__doc__)
    top.add_argument("--version", action="version", version=f"interlace {__version__}")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cap", parents=[shared], help="capacity and equilibrium weights of a set")
    p.add_argument("--set", required=True, help="ball:R | box:lo..hi,... | segment:K | sausage:N,a | points:..")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--mc", type=int, metavar="REPLICAS", help="add an escape-sampling estimate")
    p.add_argument("--kill-radius", type=int, help="escape sphere radius for --mc")
    p.set_defaults(func=cmd_cap)

    p = sub.add_parser("green", parents=[shared], help="walk Green function values and cache warming")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--at", action="append", metavar="X,Y,..", help="displacement, repeatable")
    p.add_argument("--radius", type=int, help="warm the disk cache over a sup-ball")
    p.add_argument("--stopped", type=int, metavar="STEPS", help="also value for the stopped walk")
    p.add_argument("--tol", type=float, default=1e-8)
    p.set_defaults(func=cmd_green)

    p = sub.add_parser(
        "sample",
        parents=[shared],
        help="one field to disk with --window, otherwise the vacancy-law experiment",
    )
    p.add_argument("--window", help="set spec for the sampling window")
    p.add_argument("--dim", type=int, default=3)
    p.add_argument("--u", type=float, default=1.0, help="cloud level")
    p.add_argument("--replica", type=int, default=0)
    p.add_argument("--kill-scale", type=float, default=3.0)
    p.add_argument("--horizon", type=int, help="fixed steps per trajectory instead of a kill sphere")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("distance", parents=[shared], help="chemical distance inside a stored field")
    p.add_argument("--field", required=True, metavar="FIELD.BIN")
    p.add_argument("--from", dest="src", required=True, metavar="X,Y,..")
    p.add_argument("--to", dest="dst", required=True, metavar="X,Y,..")
    p.add_argument("--level", type=float, help="thin the cloud to this level first")
    p.set_defaults(func=cmd_distance)

    p = sub.add_parser(
        "connect",
        parents=[shared],
        help="trajectory-chain structure of a stored field, or the connectivity experiment",
    )
    p.add_argument("--field", metavar="FIELD.BIN")
    p.add_argument("--m", type=int, help="prefix steps per trajectory for the shared-site graph")
    p.add_argument("--level", type=float)
    p.add_argument("--per-site-cap", type=int, default=15)
    p.set_defaults(func=cmd_connect)

    for kind, blurb in (
        ("shape", "distance-growth and direction-symmetry experiment"),
        ("ldp", "frozen-constant exceedance-decay experiment"),
        ("torus", "single-walk torus stretch experiment"),
        ("slab", "good-edge renormalization experiment"),
        ("lemmas", "math-core lemma suite"),
    ):
        p = sub.add_parser(kind, parents=[shared], help=blurb)
        p.set_defaults(func=lambda a, k=kind: _run_kind(k, a))

    p = sub.add_parser("merge", parents=[shared], help="concatenate runs with one config hash")
    p.add_argument("dirs", nargs="+", metavar="RUN_DIR")
    p.set_defaults(func=cmd_merge)
    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InterlaceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
