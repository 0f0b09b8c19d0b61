"""Command line entry point: ``obstacle-realize <command> [options]``.

Every command prints a JSON document on stdout. Failures print a JSON error
object on stderr and exit nonzero (2 for bad configuration, 1 otherwise).
``--report DIR`` renders figures plus TSV tables for the command's results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


class ConfigError(ValueError):
    """Command line parameters violate a module precondition."""


def _vec(text, k=3):
    try:
        vals = [float(x) for x in text.split(",")]
    except ValueError as e:
        raise ConfigError(f"cannot parse {text!r} as numbers") from e
    if len(vals) != k:
        raise ConfigError(f"expected {k} comma separated numbers, got {text!r}")
    return vals


def _window(text):
    if text is None:
        return None
    v = _vec(text, 6)
    lo, hi = v[:3], v[3:]
    if any(a > b for a, b in zip(lo, hi)):
        raise ConfigError("window needs xmin,ymin,zmin,xmax,ymax,zmax with min <= max")
    return (lo, hi)


def _wall_config(args):
    from .walls import WallConfig

    if args.mode == "fidelity":
        return WallConfig.fidelity()
    cfg = WallConfig(t=args.t, side_factor=args.side_factor, bands=args.bands, zeta=args.zeta,
                     layers_per_band=args.layers_per_band)
    try:
        cfg.validate()
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return cfg


def _emit(obj):
    from .io import to_jsonable

    json.dump(to_jsonable(obj), sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")


def _report_dir(args):
    if not getattr(args, "report", None):
        return None
    d = Path(args.report)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _surface(args):
    from .patchwork import Patchwork, rounded_cube_patchwork

    if getattr(args, "surface", None):
        return Patchwork.load(args.surface)
    if args.cube <= 2:
        raise ConfigError("--cube must exceed 2 (core side is size - 2)")
    return rounded_cube_patchwork(size=args.cube)


# commands

def cmd_realize(args):
    from . import io, realization

    if not 0 < args.epsilon < 1:
        raise ConfigError("--epsilon must lie in (0, 1)")
    from .metric import load_metric

    m = load_metric(args.metric)
    cfg = _wall_config(args)
    res = realization.realize(m, args.epsilon, cfg, cap=args.cap, window=_window(args.window))
    if args.embedding:
        io.save_json(res.embedding.to_json(), args.embedding)
    surf_path = Path(str(args.out) + ".surface.json") if args.out else None
    if args.out and res.obstacles is not None:
        obs = res.obstacles
        if args.tetrahedra:
            obs = realization.tetrahedralize(obs)
        res.surface.save(surf_path)
        obs.provenance["surface_file"] = surf_path.name
        io.save_obj(obs, args.out)
    out = res.summary()
    out["plan"] = res.plan.to_json()
    out["witness"] = {f"{i}-{j}": realization.witness_length(res.plan, i, j) for i, j in res.plan.records}
    rep = _report_dir(args)
    if rep:
        from .plotting import plot_layout

        _, _, pos, _ = res.surface.sample(max(1.0, res.plan.cube_size / 40))
        plot_layout(pos, res.embedding.points, rep / "layout.png",
                    [realization.witness_path(res.plan, i, j) for i, j in res.plan.records])
        io.write_tsv(rep / "tubes.tsv", ["i", "j", "dist", "l_hor", "l_vert", "lift", "witness", "lower_bound"],
                     [(r.i, r.j, r.dist, r.l_hor, r.l_vert, r.lift, realization.witness_length(res.plan, r.i, r.j),
                       realization.one_hop_lower_bound(res.plan, r.i, r.j)) for r in res.plan.records.values()])
    return out


def cmd_separate(args):
    from . import io
    from .walls import build_separator

    S = _surface(args)
    cfg = _wall_config(args)
    obs = build_separator(S, args.sigma, cfg, cap=args.cap, window=_window(args.window))
    if args.out:
        surf_path = Path(str(args.out) + ".surface.json")
        S.save(surf_path)
        obs.provenance["surface_file"] = surf_path.name
        io.save_obj(obs, args.out)
    rep = _report_dir(args)
    if rep:
        from .plotting import plot_net

        plot_net(obs.triangles.mean(axis=1), rep / "separator.png", obs.meta.get("layer"), "triangle centres")
        io.write_tsv(rep / "bands.tsv", ["band", "start", "thickness_bound"],
                     [(k, s, b) for k, (s, b) in enumerate(zip(obs.provenance["band_starts"],
                                                              obs.provenance["per_band_bound"]))])
    return {"triangles": len(obs.triangles), "provenance": obs.provenance}


def cmd_net(args):
    from . import io
    from .nets import offset_net, partition_classes, patchwork_net, verify_net

    S = _surface(args)
    N = patchwork_net(S, args.zeta)
    if args.delta:
        N = offset_net(N, args.delta)
    part = partition_classes(N, args.t) if args.t else None
    out = {"points": len(N), "zeta": N.zeta, "a": N.a, "b": N.b, "delta": N.delta}
    if part is not None:
        out["classes"] = part.n_classes
    if args.verify:
        import numpy as np

        _, _, pos, nrm = S.sample(N.zeta / 2)
        pos = pos + N.delta * nrm
        rng = np.random.default_rng(args.seed)
        pick = rng.choice(len(pos), size=min(len(pos), args.verify), replace=False)
        r = verify_net(N.pos, pos[pick], N.a, N.b)
        out["verify"] = {"ok": r.ok, "min_distance": r.min_distance, "cover_radius": r.cover_radius,
                         "samples": r.samples}
    if args.out:
        N.save(args.out, None if part is None else part.labels)
    rep = _report_dir(args)
    if rep:
        from .plotting import plot_net

        plot_net(N.pos, rep / "net.png", None if part is None else part.labels)
        io.write_tsv(rep / "net.tsv", ["x", "y", "z", "patch"] + (["class"] if part is not None else []),
                     [(*map(float, p), int(k)) + ((int(part.labels[i]),) if part is not None else ())
                      for i, (p, k) in enumerate(zip(N.pos, N.patch_id))])
    return out


def _obstacles(path):
    from .io import load_obj

    return load_obj(path)


def cmd_geodesic(args):
    from . import io
    from .geodesy import approx_geodesic

    obs = _obstacles(args.obstacles)
    if args.sites:
        pts, labels = io.load_points(args.sites)
        i, j = args.pair
        p, q = pts[i], pts[j]
    else:
        if not (args.source and args.target):
            raise ConfigError("give --from and --to, or --sites with --pair")
        p, q = _vec(args.source), _vec(args.target)
    hs = sorted(set(args.h), reverse=True)
    results = [approx_geodesic(p, q, obs, h, node_cap=args.node_cap) for h in hs]
    out = {"h": hs, "length": [r.length for r in results], "nodes": [r.nodes for r in results],
           "polyline": results[-1].polyline.tolist()}
    rep = _report_dir(args)
    if rep:
        from .plotting import plot_convergence

        plot_convergence(hs, out["length"], rep / "convergence.png", args.reference)
        io.write_tsv(rep / "convergence.tsv", ["h", "length", "nodes"],
                     [(h, r.length, r.nodes) for h, r in zip(hs, results)])
    return out


def cmd_apsp(args):
    from . import io
    from .geodesy import apsp
    from .metric import validate_metric

    obs = _obstacles(args.obstacles)
    pts, labels = io.load_points(args.sites)
    D = apsp(pts, obs, args.h, node_cap=args.node_cap)
    validate_metric(D)
    out = {"labels": labels, "dist": D.tolist(), "h": args.h}
    if args.out:
        io.save_json({"labels": labels or [str(k) for k in range(len(D))], "dist": D.tolist()}, args.out)
    rep = _report_dir(args)
    if rep:
        from .plotting import plot_matrix

        plot_matrix(D, rep / "apsp.png", f"geodesic distances (h={args.h})")
        with open(rep / "apsp.csv", "w") as fh:
            for row in D:
                fh.write(",".join(format(float(x), ".17g") for x in row) + "\n")
    return out


def cmd_tsp(args):
    from . import io
    from .metric import load_metric
    from .tsp import check_tour, solve, tsp_with_obstacles

    if args.metric:
        m = load_metric(args.metric)
        tour = solve(m.dist, args.seed)
        check_tour(m.dist, tour)
        pts, obs = None, None
    else:
        if not (args.sites and args.obstacles):
            raise ConfigError("give --metric, or --sites with --obstacles")
        pts, _ = io.load_points(args.sites)
        obs = _obstacles(args.obstacles)
        tour = tsp_with_obstacles(pts, obs, args.h, args.epsilon, seed=args.seed, node_cap=args.node_cap)
    rep = _report_dir(args)
    if rep and pts is not None:
        from .plotting import plot_tour

        plot_tour(pts, tour.order, rep / "tour.png", obstacles=obs)
    if rep:
        io.write_tsv(rep / "tour.tsv", ["position", "site"], list(enumerate(tour.order)))
    return tour.to_json()


def cmd_verify(args):
    from .patchwork import Patchwork
    from .walls import check_band_containment, check_disjoint, side_lengths

    obs = _obstacles(args.obstacles)
    out = {"suite": args.suite, "obstacles": len(obs)}
    if args.suite == "walls":
        d = check_disjoint(obs)
        out["disjoint"] = {"ok": d["ok"], "pairs": d["pairs"], "intersecting": len(d["intersecting"]),
                           "min_distance": d["min_distance"]}
        if len(obs.triangles):
            s = side_lengths(obs.triangles)
            out["congruent"] = bool(s.max() - s.min() <= 1e-9 * max(1.0, s.max()))
        surf = args.surface or obs.provenance.get("surface_file")
        if surf and not Path(surf).is_absolute() and not Path(surf).exists():
            surf = str(Path(args.obstacles).parent / surf)
        if surf and "band_lo" in obs.meta:
            out["bands"] = check_band_containment(Patchwork.load(surf), obs)
        else:
            out["bands"] = "skipped: no surface or no band metadata"
        ok = out["disjoint"]["ok"] and out.get("congruent", True) and (
            not isinstance(out["bands"], dict) or out["bands"]["ok"])
    else:
        from .geom import tetra_fatness

        fat = tetra_fatness(obs.tetrahedra) if len(obs.tetrahedra) else []
        out["min_fatness"] = float(min(fat)) if len(fat) else None
        ok = out["min_fatness"] is None or out["min_fatness"] >= 1 / 3 - 1e-9
    out["ok"] = bool(ok)
    return out


def cmd_count(args):
    from .metric import load_metric
    from .realization import layout_surface
    from .walls import count_separator

    if not 0 < args.epsilon < 1:
        raise ConfigError("--epsilon must lie in (0, 1)")
    m = load_metric(args.metric)
    cfg = _wall_config(args)
    S, emb, plan = layout_surface(m, args.epsilon)
    sigma = max(r.dist for r in plan.records.values())
    c = count_separator(S, sigma, cfg)
    return {"count": c.count, "exact": c.exact, "zeta": c.zeta, "bands": c.bands, "net_size": c.net_size,
            "sigma": sigma, "mode": cfg.mode, "surface_area": S.area()}


COMMANDS = {"realize": cmd_realize, "separate": cmd_separate, "net": cmd_net, "geodesic": cmd_geodesic,
            "apsp": cmd_apsp, "tsp": cmd_tsp, "verify": cmd_verify, "count": cmd_count}

MODULE_OF = {"realize": "realization", "separate": "walls", "net": "nets", "geodesic": "geodesy",
             "apsp": "geodesy", "tsp": "tsp", "verify": "walls", "count": "walls"}


def _wall_args(p):
    p.add_argument("--mode", choices=["relaxed", "fidelity"], default="relaxed")
    p.add_argument("--t", type=float, default=4.0)
    p.add_argument("--side-factor", type=float, default=2.0)
    p.add_argument("--bands", type=int, default=2)
    p.add_argument("--zeta", type=float, default=1 / 17)
    p.add_argument("--layers-per-band", type=int, default=None)
    p.add_argument("--cap", type=int, default=10**7)
    p.add_argument("--window", help="xmin,ymin,zmin,xmax,ymax,zmax: build only this part")


def build_parser():
    ap = argparse.ArgumentParser(prog="obstacle-realize", description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=None, help="cap on BLAS/OpenMP threads")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("realize", help="obstacles realising a finite metric")
    p.add_argument("--metric", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--out")
    p.add_argument("--embedding")
    p.add_argument("--tetrahedra", action="store_true")
    p.add_argument("--report")
    _wall_args(p)

    p = sub.add_parser("separate", help="triangle wall around a surface")
    p.add_argument("--surface")
    p.add_argument("--cube", type=float, default=3.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--out")
    p.add_argument("--report")
    _wall_args(p)
    p.set_defaults(t=8.0, side_factor=4.0, bands=3, zeta=1 / 33)

    p = sub.add_parser("net", help="surface net, offsets and class partition")
    p.add_argument("--surface")
    p.add_argument("--cube", type=float, default=6.0)
    p.add_argument("--zeta", type=float, default=1 / 8)
    p.add_argument("--delta", type=float, default=0.0)
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--verify", type=int, default=0, help="covering samples for verify_net")
    p.add_argument("--out")
    p.add_argument("--report")

    for name in ("geodesic", "apsp"):
        p = sub.add_parser(name, help="approximate geodesic distances among obstacles")
        p.add_argument("--obstacles", required=True)
        p.add_argument("--sites")
        p.add_argument("--node-cap", type=int, default=2_000_000)
        p.add_argument("--report")
        if name == "geodesic":
            p.add_argument("--from", dest="source")
            p.add_argument("--to", dest="target")
            p.add_argument("--pair", type=int, nargs=2, default=(0, 1))
            p.add_argument("--h", type=float, nargs="+", default=[0.01])
            p.add_argument("--reference", type=float)
        else:
            p.add_argument("--h", type=float, default=0.01)
            p.add_argument("--out")

    p = sub.add_parser("tsp", help="tour over a metric or among obstacles")
    p.add_argument("--metric")
    p.add_argument("--sites")
    p.add_argument("--obstacles")
    p.add_argument("--h", type=float, default=0.01)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--node-cap", type=int, default=2_000_000)
    p.add_argument("--report")

    p = sub.add_parser("verify", help="check invariants of an obstacle file")
    p.add_argument("--obstacles", required=True)
    p.add_argument("--suite", choices=["walls", "tetrahedra"], default="walls")
    p.add_argument("--surface")

    p = sub.add_parser("count", help="analytic obstacle count without materialising")
    p.add_argument("--metric", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    _wall_args(p)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            return _fail(ConfigError("--threads must be positive"), args, 2)
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        out = COMMANDS[args.command](args)
    except ConfigError as e:
        return _fail(e, args, 2)
    except Exception as e:  # surfaced as structured JSON, not a traceback
        return _fail(e, args, 1)
    _emit(out)
    if args.command == "verify" and not out["ok"]:
        return 3
    return 0


def _fail(err, args, code):
    from .io import to_jsonable

    rec = {"error": type(err).__name__, "message": str(err), "command": args.command,
           "module": MODULE_OF.get(args.command, "cli"),
           "parameters": {k: v for k, v in vars(args).items() if k != "command"}}
    count = getattr(err, "count", None)
    if count is not None:
        rec["count"] = count
    json.dump(to_jsonable(rec), sys.stderr, sort_keys=True)
    sys.stderr.write("\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
