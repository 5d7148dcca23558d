"""Command-line entry point ``pollinet``.

Every subcommand reads a JSON config (see :mod:`pollinet.config`), applies
flag overrides, writes the resolved config into ``--out`` and then its own
CSV/JSON artifacts and optional SVG plots.

Exit status: 0 on success, 2 for configuration errors, 3 when a runtime
budget was exhausted (partial results are written and flagged), 1 otherwise.
"""

from __future__ import annotations

import argparse
import csv
import functools
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import gillespie, kinetic, single_pair, studies
from .errors import ConfigError, PollinetError, RuntimeBudgetExceeded
from .mean_field import MeanFieldModel
from .network import (
    degree_stats,
    graphon_from_dict,
    harvest_from_dict,
    identity,
    sample_community,
)
from .plotting import emit_plot
from .rates import RateParams, kernel_from_dict
from .trajectory import params_digest

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


# --------------------------------------------------------------------------
# helpers


def _constant(value, x):
    return np.full(np.shape(x), float(value))


def _power_inv_cdf(exponent, u):
    return np.asarray(u, float) ** exponent


def _beta_inv_cdf(a, b, u):
    from scipy.stats import beta

    return beta.ppf(np.asarray(u, float), a, b)


def trait_inv_cdf(spec):
    """Inverse CDF from a trait spec: ``"uniform"``, ``{"kind": "power", "exponent": e}``
    or ``{"kind": "beta", "a": a, "b": b}``."""
    if spec is None or spec == "uniform" or spec == {"kind": "uniform"}:
        return identity
    if isinstance(spec, dict) and spec.get("kind") == "power":
        return functools.partial(_power_inv_cdf, float(spec["exponent"]))
    if isinstance(spec, dict) and spec.get("kind") == "beta":
        return functools.partial(_beta_inv_cdf, float(spec["a"]), float(spec["b"]))
    raise ConfigError(f"unknown trait distribution {spec!r}")


def _need(cfg, dotted):
    node = cfg
    for key in dotted.split("."):
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"missing required field `{dotted}` for this subcommand")
        node = node[key]
    return node


def _rates(cfg):
    return RateParams.from_dict(cfg["rates"])


def _kernels(cfg):
    return kernel_from_dict(cfg["kernels"]["plants"]), kernel_from_dict(cfg["kernels"]["pollinators"])


def _community(cfg):
    com = _need(cfg, "community")
    n, m = _need(cfg, "community.n"), _need(cfg, "community.m")
    return sample_community(n, m, graphon_from_dict(com["graphon"]), harvest_from_dict(com["harvest"]),
                            cfg["seed"], trait_inv_cdf(com.get("plantTraits")),
                            trait_inv_cdf(com.get("pollinatorTraits")))


def _densities(value, size, name):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(size, float(arr))
    if arr.shape != (size,):
        raise ConfigError(f"`initial.{name}` must be a number or a list of {size} values")
    return arr


def _initial(cfg, com):
    ini = cfg["initial"]
    return _densities(ini["plants"], com.n, "plants"), _densities(ini["pollinators"], com.m, "pollinators")


def _record_times(cfg, t_end):
    sch = cfg["schedule"]
    if "recordTimes" in sch:
        rt = np.asarray(sorted(set(sch["recordTimes"]) | {0.0}), float)
        return rt[rt <= t_end]
    step = sch["recordEvery"]
    return np.round(np.arange(0.0, t_end + step / 2, step), 12)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_rows(path, rows, columns=None):
    columns = columns or list(rows[0].keys()) if rows else (columns or [])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def _trajectory_plot(traj, path, title):
    series = [{"x": traj.times.tolist(), "y": traj.plants[:, i].tolist(), "label": f"P_{i + 1}"}
              for i in range(traj.n)]
    series += [{"x": traj.times.tolist(), "y": traj.pollinators[:, j].tolist(), "label": f"A_{j + 1}",
                "style": "--"} for j in range(traj.m)]
    if traj.n + traj.m > 12:  # too many to label
        for s in series:
            s.pop("label")
    emit_plot("lines", {"series": series, "xlabel": "t", "ylabel": "abundance / K", "title": title}, path)


# --------------------------------------------------------------------------
# subcommands


def cmd_sample_graph(cfg, out, args):
    com = _community(cfg)
    com.write_json(out / "community.json")
    com.write_edge_csv(out / "edges.csv")
    ds = degree_stats(com.G)
    _write_json(out / "degrees.json", {
        "edges": ds.edges,
        "plantDegrees": ds.plant_degrees.tolist(),
        "pollinatorDegrees": ds.pollinator_degrees.tolist(),
        "plantHistogram": ds.plant_histogram.tolist(),
        "pollinatorHistogram": ds.pollinator_histogram.tolist(),
    })
    if cfg["plots"]:
        emit_plot("lines", {
            "series": [
                {"x": list(range(ds.plant_histogram.size)), "y": ds.plant_histogram.tolist(), "label": "plants"},
                {"x": list(range(ds.pollinator_histogram.size)), "y": ds.pollinator_histogram.tolist(),
                 "label": "pollinators"},
            ],
            "xlabel": "degree", "ylabel": "count", "title": "degree histogram",
        }, out / "degrees.svg")
    print(f"sampled {com.n} x {com.m} community with {ds.edges} edges")
    return EXIT_OK


def cmd_simulate_ibm(cfg, out, args):
    com = _community(cfg)
    params, kernels = _rates(cfg), _kernels(cfg)
    K = cfg["scale"]["K"]
    t_end = cfg["schedule"]["tEnd"]
    rt = _record_times(cfg, t_end)
    P0, A0 = _initial(cfg, com)
    counts = studies.initial_counts(K, P0, A0)
    status = EXIT_OK
    model = gillespie.IbmModel(com, params, kernels, K)
    summary = []
    for r in range(cfg["schedule"]["replicas"]):
        stem = out / f"replica_{r:03d}"
        try:
            traj = gillespie.simulate(com, params, kernels, K, counts, t_end, rt, cfg["seed"], r,
                                      cfg["schedule"]["maxEvents"], model=model)
        except RuntimeBudgetExceeded as exc:
            status = EXIT_BUDGET
            summary.append({"replica": r, "partial": True, "message": str(exc)})
            if exc.partial is not None:
                exc.partial.write_csv(f"{stem}.csv")
                exc.partial.write_sidecar(f"{stem}.json")
            print(f"replica {r}: {exc} (partial results written)", file=sys.stderr)
            continue
        traj.write_csv(f"{stem}.csv")
        traj.write_sidecar(f"{stem}.json")
        summary.append({"replica": r, "partial": False, "events": traj.metadata["events"],
                        "absorbed": traj.metadata["absorbed"]})
        if r == 0 and cfg["plots"]:
            _trajectory_plot(traj, out / "replica_000.svg", f"IBM, K = {K}")
    _write_json(out / "summary.json", {"K": K, "replicas": summary, "partial": status == EXIT_BUDGET})
    print(f"simulated {len(summary)} replica(s) at K = {K}")
    return status


def cmd_integrate_ode(cfg, out, args):
    com = _community(cfg)
    params, kernels = _rates(cfg), _kernels(cfg)
    t_end = cfg["schedule"]["tEnd"]
    P0, A0 = _initial(cfg, com)
    meta = {"seed": cfg["seed"], "params_digest": params_digest(cfg)}
    traj = MeanFieldModel(com, params, kernels).integrate(np.concatenate([P0, A0]), t_end,
                                                          _record_times(cfg, t_end), metadata=meta)
    traj.write_csv(out / "trajectory.csv")
    traj.write_sidecar(out / "trajectory.json")
    if cfg["plots"]:
        _trajectory_plot(traj, out / "trajectory.svg", "mean-field ODE")
    print(f"integrated to t = {t_end}")
    return EXIT_OK


def cmd_simulate_fluctuations(cfg, out, args):
    com = _community(cfg)
    params, kernels = _rates(cfg), _kernels(cfg)
    sch = cfg["schedule"]
    K, t_end = cfg["scale"]["K"], sch["tEnd"]
    P0, A0 = _initial(cfg, com)
    res = studies.clt_study(com, params, kernels, K, P0, A0, t_end, sch["replicas"], sch["paths"],
                            seed=cfg["seed"], dt=sch["dt"], jobs=args.jobs)
    _write_json(out / "summary.json", {"time": res["t"], **res})
    # a few OU paths on a coarse grid, long format
    Pc, Ac = studies.initial_counts(K, P0, A0)
    model = MeanFieldModel(com, params, kernels)
    every = max(1, int(round(0.01 / sch["dt"])))
    grid = np.round(np.linspace(0.0, t_end, int(round(t_end / 0.01)) + 1), 12)
    ode_traj = model.integrate(np.concatenate([Pc, Ac]) / K, t_end, grid)
    from .fluctuations import simulate_ou_ensemble

    shown = min(sch["paths"], 20)
    times, paths = simulate_ou_ensemble(ode_traj, com, params, kernels, None, sch["dt"], shown,
                                        seed=cfg["seed"], record_every=every)
    d = com.n + com.m
    header = ["path", "t"] + [f"eta_P_{i + 1}" for i in range(com.n)] + [f"eta_A_{j + 1}" for j in range(com.m)]
    with open(out / "ou_paths.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for p in range(shown):
            for k, t in enumerate(times):
                w.writerow([p, repr(float(t))] + [repr(float(v)) for v in paths[p, k, :d]])
    if cfg["plots"]:
        series = [{"x": times.tolist(), "y": paths[p, :, 0].tolist()} for p in range(shown)]
        emit_plot("lines", {"series": series, "xlabel": "t", "ylabel": "eta (first plant)",
                            "title": "fluctuation paths"}, out / "ou_paths.svg")
    print("empirical variance:", np.round(res["empiricalVar"], 4).tolist())
    print("OU variance:       ", np.round(res["ouVar"], 4).tolist())
    return EXIT_OK


def _psi_fn(cfg):
    com = _need(cfg, "community")
    graphon, harvest = graphon_from_dict(com["graphon"]), harvest_from_dict(com["harvest"])
    return functools.partial(kinetic.psi, graphon=graphon, harvest=harvest), graphon, harvest


def cmd_solve_kinetic(cfg, out, args):
    params = _rates(cfg)
    k, h = _kernels(cfg)
    N = cfg["scale"]["N"]
    psi_fn, _, _ = _psi_fn(cfg)
    psi_values = kinetic.psi_grid(N, psi_fn)
    ini = cfg["initial"]
    if "random" in ini:
        field0 = kinetic.random_field(N, cfg["seed"], ini["random"].get("low", 0.5), ini["random"].get("high", 1.5))
    else:
        g = np.arange(N + 1) / N
        field0 = kinetic.DensityField(N, _densities(ini["plants"], N + 1, "plants"),
                                      _densities(ini["pollinators"], N + 1, "pollinators"))
        del g
    t_end = cfg["schedule"]["tEnd"]
    snaps = kinetic.integrate_kinetic(field0, psi_values, params, k, h, t_end, _record_times(cfg, t_end))
    for f in snaps:
        f.write_csv(out / f"snapshot_t{f.t:g}.csv")
    final = snaps[-1]
    report = {"metrics": kinetic.concentration_metrics(final)}
    if k.is_constant and h.is_constant:
        try:
            report.update(kinetic.collapse_report(final, psi_fn, psi_values, params, k, h))
        except PollinetError as exc:
            report["prediction"] = f"unavailable: {exc}"
    _write_json(out / "collapse.json", report)
    if cfg["plots"]:
        shown = [f for f in snaps if f.t > 0][-3:] or snaps[-1:]
        emit_plot("densitySnapshots", {
            "x": final.grid.tolist(),
            "snapshots": [{"t": f.t, "p": f.p.tolist(), "a": f.a.tolist()} for f in shown],
            "log": True,
        }, out / "densities.svg")
    m = report["metrics"]
    print(f"t = {final.t:g}: plant max fraction {m['plantMaxFraction']:.4f} at {m['plantArgmax']:.4f}, "
          f"pollinator max fraction {m['pollMaxFraction']:.4f} at {m['pollArgmax']:.4f}")
    return EXIT_OK


def cmd_analyze_pair(cfg, out, args):
    pc = cfg["pair"]
    pp = single_pair.PairParams(_rates(cfg), pc["c"], pc["k"], pc["h"])
    print(f"assumption: single pair with c = {pp.c:g}, k = {pp.k:g}, h = {pp.h:g}")
    report = single_pair.count_and_solve(pp)
    doc = report.to_dict()
    doc["assumption"] = {"c": pp.c, "k": pp.k, "h": pp.h}
    doc["totalCount"] = len(report.equilibria)
    plant, poll = single_pair.nullclines(pp, 400)
    for name, arr in (("nullcline_plant.csv", plant), ("nullcline_pollinator.csv", poll)):
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["P", "A"])
            w.writerows([[repr(float(a)), repr(float(b))] for a, b in arr])
    pos = [e for e in report.equilibria if e.P > 0 and e.A > 0]
    p_hi = 1.5 * max([e.P for e in pos] + [plant[:, 0].max() if plant.size else 1.0, 1e-3])
    a_hi = 1.5 * max([e.A for e in pos] + [plant[:, 1].max() if plant.size else 1.0, 1e-3])
    res = cfg["pair"]["basinResolution"]
    gp, ga = np.meshgrid(np.linspace(p_hi / res, p_hi, res), np.linspace(a_hi / res, a_hi, res), indexing="ij")
    pts = np.column_stack([gp.ravel(), ga.ravel()])
    labels, finals, _ = single_pair.phase_portrait(pp, pts)
    with open(out / "basins.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["P0", "A0", "label", "P_final", "A_final"])
        for (p0, a0), lab, (pf, af) in zip(pts, labels, finals):
            w.writerow([repr(float(p0)), repr(float(a0)), int(lab), repr(float(pf)), repr(float(af))])
    doc["basinFractions"] = {str(i): float(np.mean(labels == i)) for i in range(-1, len(report.equilibria))}
    _write_json(out / "equilibria.json", doc)
    if cfg["plots"]:
        poll_clip = poll[poll[:, 1] <= a_hi] if poll.size else poll
        emit_plot("phasePlane", {
            "nullclines": [
                {"P": plant[:, 0].tolist(), "A": plant[:, 1].tolist(), "species": "plant", "label": "plant nullcline"},
                {"P": poll_clip[:, 0].tolist(), "A": poll_clip[:, 1].tolist(), "species": "pollinator",
                 "label": "pollinator nullcline"},
            ],
            "equilibria": [{"P": e.P, "A": e.A, "stability": e.stability} for e in report.equilibria],
        }, out / "phase_plane.svg")
    print(f"total equilibria: {len(report.equilibria)} (positive: {report.positive_count})")
    for e in report.equilibria:
        print(f"  P = {e.P:.6g}, A = {e.A:.6g}: {e.stability}")
    return EXIT_OK


def cmd_convergence_study(cfg, out, args):
    params, kernels = _rates(cfg), _kernels(cfg)
    _, graphon, harvest = _psi_fn(cfg)
    st = cfg["study"]
    ini = cfg["initial"]
    for side in ("plants", "pollinators"):
        if not np.isscalar(ini[side]):
            raise ConfigError(f"`initial.{side}` must be a constant density for convergence-study")
    p0 = functools.partial(_constant, ini["plants"])
    a0 = functools.partial(_constant, ini["pollinators"])
    seeds = [cfg["seed"] + s for s in range(st["seeds"])]
    rows = kinetic.convergence_study(st["nValues"], graphon, harvest, params, kernels, cfg["scale"]["N"],
                                     st["times"], seeds, p0, a0, jobs=args.jobs)
    _write_rows(out / "convergence.csv", rows)
    _write_json(out / "convergence.json", {"rows": rows})
    if cfg["plots"]:
        series = []
        for t in sorted({r["t"] for r in rows}):
            sel = [r for r in rows if r["t"] == t]
            series.append({"x": [r["n"] for r in sel], "y": [r["w1Plants"] for r in sel], "label": f"plants, t={t:g}"})
            series.append({"x": [r["n"] for r in sel], "y": [r["w1Pollinators"] for r in sel],
                           "label": f"pollinators, t={t:g}", "style": "--s"})
        emit_plot("loglog", {"series": series, "xlabel": "n", "ylabel": "mean W1"}, out / "convergence.svg")
    for r in rows:
        print(f"n = {r['n']:5d}  t = {r['t']:6g}  W1 plants {r['w1Plants']:.5f}  pollinators {r['w1Pollinators']:.5f}")
    return EXIT_OK


def cmd_lln_study(cfg, out, args):
    com = _community(cfg)
    params, kernels = _rates(cfg), _kernels(cfg)
    P0, A0 = _initial(cfg, com)
    sch = cfg["schedule"]
    rows = studies.lln_study(com, params, kernels, cfg["study"]["K"], P0, A0, sch["tEnd"], sch["replicas"],
                             seed=cfg["seed"], dt_record=sch["recordEvery"], jobs=args.jobs)
    _write_rows(out / "lln.csv", rows)
    _write_json(out / "lln.json", {"rows": rows})
    if cfg["plots"]:
        emit_plot("loglog", {"series": [{"x": [r["K"] for r in rows], "y": [r["rmsSupError"] for r in rows],
                                         "label": "RMS sup error"}],
                             "xlabel": "K", "ylabel": "error"}, out / "lln.svg")
    for r in rows:
        print(f"K = {r['K']:7d}  RMS sup error {r['rmsSupError']:.5f}  sqrt(K) x RMS {r['scaledRms']:.4f}")
    return EXIT_OK


COMMANDS = {
    "sample-graph": (cmd_sample_graph, "sample traits, interaction graph and weights"),
    "simulate-ibm": (cmd_simulate_ibm, "exact stochastic simulation of the individual-based model"),
    "integrate-ode": (cmd_integrate_ode, "integrate the large-population ODE"),
    "simulate-fluctuations": (cmd_simulate_fluctuations, "compare IBM fluctuations with the OU approximation"),
    "solve-kinetic": (cmd_solve_kinetic, "solve the trait-continuum equations on a grid"),
    "analyze-pair": (cmd_analyze_pair, "equilibria, stability and phase plane of a single pair"),
    "convergence-study": (cmd_convergence_study, "W1 distance between n-species ODE and grid solution"),
    "lln-study": (cmd_lln_study, "IBM versus ODE error over a ladder of K"),
}


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser():
    parser = argparse.ArgumentParser(prog="pollinet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides config)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--jobs", type=int, default=None,
                       help="worker processes (default: $POLLINET_JOBS or 1)")
        p.add_argument("--no-plots", action="store_true", help="skip SVG output")
        p.add_argument("--t-end", type=float, dest="t_end")
        if name in ("simulate-ibm", "simulate-fluctuations", "lln-study"):
            p.add_argument("--replicas", type=int)
        if name in ("simulate-ibm", "simulate-fluctuations"):
            p.add_argument("--K", type=int)
        if name == "lln-study":
            p.add_argument("--K", type=_int_list, help="comma-separated carrying capacities")
        if name == "simulate-fluctuations":
            p.add_argument("--paths", type=int)
            p.add_argument("--dt", type=float)
        if name in ("solve-kinetic", "convergence-study"):
            p.add_argument("--N", type=int)
        if name == "solve-kinetic":
            p.add_argument("--snapshots", type=_float_list, help="comma-separated snapshot times")
        if name == "convergence-study":
            p.add_argument("--n-values", type=_int_list, dest="n_values")
            p.add_argument("--seeds", type=int, help="number of seeds")
            p.add_argument("--times", type=_float_list)
    return parser


def _overrides(args):
    ov = {}

    def put(path, value):
        if value is None:
            return
        node = ov
        *head, last = path
        for key in head:
            node = node.setdefault(key, {})
        node[last] = value

    put(["seed"], args.seed)
    put(["out"], args.out)
    put(["schedule", "tEnd"], args.t_end)
    if args.no_plots:
        ov["plots"] = False
    put(["schedule", "replicas"], getattr(args, "replicas", None))
    K = getattr(args, "K", None)
    if isinstance(K, list):
        put(["study", "K"], K)
    else:
        put(["scale", "K"], K)
    put(["schedule", "paths"], getattr(args, "paths", None))
    put(["schedule", "dt"], getattr(args, "dt", None))
    put(["scale", "N"], getattr(args, "N", None))
    snaps = getattr(args, "snapshots", None)
    if snaps:
        put(["schedule", "recordTimes"], snaps)
        if args.t_end is None:
            put(["schedule", "tEnd"], max(snaps))
    put(["study", "nValues"], getattr(args, "n_values", None))
    put(["study", "seeds"], getattr(args, "seeds", None))
    put(["study", "times"], getattr(args, "times", None))
    return ov


def _jobs(value):
    if value is not None:
        return max(1, value)
    env = os.environ.get("POLLINET_JOBS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise ConfigError(f"POLLINET_JOBS must be an integer, got {env!r}") from None


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.jobs = _jobs(args.jobs)
        cfg = cfgmod.load(args.config, _overrides(args))
        out = Path(cfg["out"])
        cfgmod.write_resolved(cfg, out)
        return COMMANDS[args.command][0](cfg, out, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PollinetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
