"""Command-line front end and reproducible study pipelines.

Subcommands: template | synth | bounds | verify | simulate | export. Exit
codes: 0 success, 2 usage or configuration error, 3 solver infeasible,
4 verification failure. All randomness funnels through the --seed flag, and
artifacts avoid wall-clock fields so identical configurations hash
identically.
"""

from __future__ import annotations

import argparse
import json
import sys as _sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import bounds as _bounds
from . import pwa as _pwa
from . import sim as _sim
from . import synth as _synth
from . import template as _template
from .errors import Infeasible, PerturbationFailed, PolyclfError
from .geometry import HPolyhedron, enumerate_vertices, perturb_to_simple
from .model import (
    LinearSystem,
    QuadraticCost,
    SetDistanceCost,
    UncertaintyModel,
    compute_rci_target,
    cost_from_json,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_VERIFY = 4


# ---------------------------------------------------------------------------
# problem loading
# ---------------------------------------------------------------------------

def load_problem(ref: str) -> dict:
    """Problem JSON from a file path or a bundled name (nominal_di, robust_di)."""
    path = Path(ref)
    if path.exists():
        return json.loads(path.read_text())
    bundle = resources.files("polyclf").joinpath(f"problems/{ref}.json")
    if bundle.is_file():
        return json.loads(bundle.read_text())
    raise FileNotFoundError(f"problem {ref!r} is neither a file nor a bundled name")


def problem_components(obj: dict, target: HPolyhedron | None = None):
    """(system, cost, uncertainty) from a problem document.

    Set-distance costs without a stored target need one passed in (computed
    from the robust invariant-set step).
    """
    system = LinearSystem.from_json(obj)
    unc = None
    if obj.get("uncertainty"):
        unc = UncertaintyModel.from_json(obj["uncertainty"])
    cost = cost_from_json(obj["cost"], target=target)
    return system, cost, unc


def octagon_directions(f1: int = 8) -> np.ndarray:
    ang = np.pi / f1 + np.arange(f1) * 2.0 * np.pi / f1
    return np.stack([np.cos(ang), np.sin(ang)], axis=1)


def staged_perturb(F, z_bar, seed: int = 0):
    """Perturbation ladder: grow epsilon until the template becomes simple."""
    last = None
    for eps in (1e-6, 1e-5, 1e-4, 1e-3):
        try:
            return perturb_to_simple(F, z_bar, eps, seed=seed)
        except PerturbationFailed as exc:
            last = exc
    raise last


# ---------------------------------------------------------------------------
# study pipelines (also exercised by the acceptance suite)
# ---------------------------------------------------------------------------

def s3_sample_set(domain: HPolyhedron, n_interior: int, seed: int,
                  n_edge_midpoints: int = 1, min_gap: float = 0.12,
                  shrink: float = 0.85) -> np.ndarray:
    """Domain corners, edge midpoints, the origin, and spread interior points."""
    corners = np.array([v.point for v in enumerate_vertices(domain)])
    ctr = corners.mean(axis=0)
    order = np.argsort(np.arctan2(corners[:, 1] - ctr[1], corners[:, 0] - ctr[0]))
    ordered = corners[order]
    pts = [ordered[k] for k in range(len(ordered))]
    for e in range(n_edge_midpoints):
        a = ordered[e % len(ordered)]
        b = ordered[(e + 1) % len(ordered)]
        pts.append(0.5 * (a + b))
    pts.append(np.zeros(domain.dim))
    rng = np.random.default_rng(seed)
    scale = float(np.max(np.linalg.norm(corners, axis=1)))
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    found = 0
    attempts = 0
    while found < n_interior and attempts < 20000:
        attempts += 1
        c = rng.uniform(lo, hi)
        if not domain.contains(c / shrink):
            continue
        if np.linalg.norm(c) < 0.08 * scale:
            continue
        if any(np.linalg.norm(c - q) < min_gap * scale / 1.8 for q in pts):
            continue
        pts.append(c)
        found += 1
    if found < n_interior:
        raise PolyclfError("could not place the requested interior samples")
    return np.array(pts)


def s3_template_with_facet_count(domain, system, cost, Mbar, N, target_f2,
                                 seed: int):
    """S3 template adjusted until the lower hull has exactly target_f2 facets.

    Interior samples add two facets each and edge midpoints one, so the
    search walks those two counters; a seed bump handles degenerate draws.
    """
    n_corners = len(enumerate_vertices(domain))
    base = 2 * (n_corners + 1) - 2 - n_corners  # corners + origin only
    want = target_f2 - base
    n_edge = want % 2 + 1
    n_interior = (want - n_edge) // 2
    if n_interior < 1:
        raise PolyclfError(f"target f2={target_f2} too small for this domain")
    for bump in range(12):
        samples = s3_sample_set(domain, n_interior, seed + 1000 * bump,
                                n_edge_midpoints=n_edge)
        F, z_bar = _template.make_template_s3(domain, samples, system, cost,
                                              Mbar, N)
        got = F.shape[0] - domain.n_rows
        if got == target_f2:
            return F, z_bar, samples
        # non-generic hull: nudge the counters toward the target
        diff = target_f2 - got
        if diff % 2 == 0:
            n_interior += diff // 2
        else:
            n_edge += diff % 2
            n_interior += (diff - diff % 2) // 2
        if n_interior < 1 or n_edge < 0:
            raise PolyclfError("facet-count search left the feasible range")
    raise PolyclfError(f"could not reach f2={target_f2} in 12 attempts")


def nominal_study(seed: int = 11, f1: int = 8, f2: int = 37, N: int = 5,
                  lam: float = 0.995, steepen: float = 2.0,
                  steepen_ladder=(2.0, 1.75, 2.25, 2.5, 1.5)):
    """Full nominal pipeline on the bundled double-integrator problem.

    Builds a contractive octagonal domain, interpolates horizon costs into
    an S3 template with exactly f2 sloped facets, computes the facet bounds
    zeta^N, and solves the synthesis with the weighted inf-norm objective.
    The interpolation uses a steepened terminal weight (ladder of factors)
    because the plain horizon cost is too shallow to admit a large-domain
    CLF in its own configuration class.
    """
    problem = load_problem("nominal_di")
    system, cost, _ = problem_components(problem)
    Mbar = _bounds.lqr_underestimator(system, cost)
    G1 = octagon_directions(f1)
    domain = _template.max_ci_domain(G1, system, lam=lam)
    ladder = [steepen] + [g for g in steepen_ladder if g != steepen]
    last_exc = None
    for gamma in ladder:
        Msteep = _bounds.QuadForm(gamma * Mbar.P)
        F, z_bar, samples = s3_template_with_facet_count(
            domain, system, cost, Msteep, N, f2, seed)
        zp = staged_perturb(F, z_bar, seed=0)
        triplet = _template.build_triplet(F, zp, kind="nominal")
        zeta = _bounds.zeta_nominal(triplet.F, system, cost, Mbar, N)
        weights = np.concatenate([100.0 * np.ones(triplet.f1),
                                  np.ones(triplet.f - triplet.f1)])
        spec = _synth.SynthesisSpec(
            triplet=triplet, system=system, cost=cost, lam=lam,
            objective=_synth.InfDistanceObjective(weights, zeta))
        try:
            result = _synth.synth_nominal(spec)
        except Infeasible as exc:
            last_exc = exc
            continue
        # reject degenerate (collapsed-domain) optima and steepen instead
        dom_pts = triplet.vertex_points(result.z)[:, :-1]
        if np.ptp(dom_pts, axis=0).min() < 0.3:
            last_exc = Infeasible("degenerate domain at this steepening")
            continue
        return {"problem": problem, "system": system, "cost": cost,
                "Mbar": Mbar, "domain": domain, "samples": samples,
                "triplet": triplet, "zeta": zeta, "spec": spec,
                "result": result, "steepen": gamma}
    raise last_exc


def refined_nominal_study(seed: int = 1, f1: int = 8, f2: int = 461,
                          N: int = 5, lam: float = 0.995):
    """Large random-hemisphere template study for the bundled nominal problem."""
    problem = load_problem("nominal_di")
    system, cost, _ = problem_components(problem)
    Mbar = _bounds.lqr_underestimator(system, cost)
    F, z_bar = _template.make_template_s1(f1, f2, seed=seed)
    triplet = _template.build_triplet(F, z_bar, kind="nominal")
    zeta = _bounds.zeta_nominal(triplet.F, system, cost, Mbar, N)
    weights = np.concatenate([100.0 * np.ones(triplet.f1),
                              np.ones(triplet.f - triplet.f1)])
    spec = _synth.SynthesisSpec(
        triplet=triplet, system=system, cost=cost, lam=lam,
        objective=_synth.InfDistanceObjective(weights, zeta))
    result = _synth.synth_nominal(spec)
    return {"problem": problem, "system": system, "cost": cost, "Mbar": Mbar,
            "triplet": triplet, "zeta": zeta, "spec": spec, "result": result}


def robust_study(seed: int = 3, f1: int = 8, f2: int = 83, N: int = 7,
                 lam: float = 0.995):
    """Full robust pipeline on the bundled disturbed double integrator.

    Computes the invariant target set for the bundled feedback gain on the
    octagonal domain template, builds a random-hemisphere template with the
    flat facet, sets the template parameter from the min-max horizon bounds,
    and solves the worst-case synthesis.
    """
    problem = load_problem("robust_di")
    system = LinearSystem.from_json(problem)
    unc = UncertaintyModel.from_json(problem["uncertainty"])
    K = np.asarray(problem["cost"]["K"], dtype=float)
    G1 = octagon_directions(f1)
    dom_triplet = _template.build_polytope_triplet(G1, np.ones(f1))
    target = compute_rci_target(dom_triplet, K, system, unc)
    cost = cost_from_json(problem["cost"], target=target)
    Mbar = _bounds.lqr_underestimator(
        system, QuadraticCost(np.asarray(problem["cost"]["Q"]),
                              np.asarray(problem["cost"]["R"])))
    F, _ = _template.make_template_s1(f1, f2, seed=seed, kind="robust")
    F, zeta = _template.make_template_s2(F, system, cost, Mbar, N, unc=unc,
                                         n_max=max(N, 4))
    zp = staged_perturb(F, zeta, seed=0)
    triplet = _template.build_triplet(F, zp, kind="robust")
    weights = np.concatenate([100.0 * np.ones(triplet.f1),
                              np.ones(triplet.f - triplet.f1)])
    spec = _synth.SynthesisSpec(
        triplet=triplet, system=system, cost=cost, lam=lam, uncertainty=unc,
        target_zs=target.z,
        objective=_synth.InfDistanceObjective(weights, zeta))
    result = _synth.synth_robust(spec)
    return {"problem": problem, "system": system, "cost": cost, "Mbar": Mbar,
            "target": target, "triplet": triplet, "zeta": zeta, "spec": spec,
            "result": result, "uncertainty": unc}


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------

def _write_json(path, obj):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _mbar_from_flag(flag: str, system, cost):
    if flag == "zero":
        return None
    if flag == "lqr":
        if isinstance(cost, SetDistanceCost):
            qcost = QuadraticCost(cost.Q, cost.R)
        else:
            qcost = cost
        return _bounds.lqr_underestimator(system, qcost)
    if flag.startswith("lqr:"):
        gamma = float(flag.split(":", 1)[1])
        base = _mbar_from_flag("lqr", system, cost)
        return _bounds.QuadForm(gamma * base.P)
    raise ValueError(f"unknown Mbar choice {flag!r}")


def _resolve_problem_for_synth(args):
    problem = load_problem(args.problem)
    if problem.get("uncertainty"):
        system = LinearSystem.from_json(problem)
        unc = UncertaintyModel.from_json(problem["uncertainty"])
        target = None
        if problem["cost"]["variant"] == "set_distance" and problem["cost"].get("target") is None:
            K = np.asarray(problem["cost"]["K"], dtype=float)
            f1 = args.f1 if getattr(args, "f1", None) else 8
            dom_triplet = _template.build_polytope_triplet(
                octagon_directions(f1), np.ones(f1))
            target = compute_rci_target(dom_triplet, K, system, unc)
        cost = cost_from_json(problem["cost"], target=target)
        return system, cost, unc, target
    system, cost, unc = problem_components(problem)
    return system, cost, unc, None


def cmd_template(args) -> int:
    problem = load_problem(args.problem) if args.problem else None
    seed = args.seed
    kind = args.kind
    if args.strategy == "s1":
        F, z_bar = _template.make_template_s1(args.f1, args.f2, seed=seed,
                                              kind=kind)
    else:
        if problem is None:
            raise ValueError(f"strategy {args.strategy} needs --problem")
        system, cost, unc, _target = _resolve_problem_for_synth(args)
        Mbar = _mbar_from_flag(args.mbar, system, cost)
        if args.strategy == "s2":
            F0, _ = _template.make_template_s1(args.f1, args.f2, seed=seed,
                                               kind=kind)
            F, z_bar = _template.make_template_s2(
                F0, system, cost, Mbar, args.N,
                unc=unc if kind == "robust" else None,
                n_max=max(args.N, 4))
        elif args.strategy == "s3":
            G1 = octagon_directions(args.f1)
            domain = _template.max_ci_domain(G1, system, lam=args.lam)
            if args.samples:
                samples = np.asarray(json.loads(Path(args.samples).read_text()))
                F, z_bar = _template.make_template_s3(domain, samples, system,
                                                      cost, Mbar, args.N)
            else:
                F, z_bar, _ = s3_template_with_facet_count(
                    domain, system, cost, Mbar, args.N, args.f2, seed)
        else:
            raise ValueError(f"unknown strategy {args.strategy!r}")
    zp = staged_perturb(F, z_bar, seed=seed)
    triplet = _template.build_triplet(F, zp, kind=kind, e_mode=args.e_mode)
    _write_json(args.out, triplet.to_json())
    print(f"template written to {args.out}: f={triplet.f} "
          f"(f1={triplet.f1}, f2={triplet.f2}), v={triplet.v}, e={triplet.e}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    system, cost, unc, _ = _resolve_problem_for_synth(args)
    triplet = _template.ConfigurationTriplet.from_json(
        json.loads(Path(args.template).read_text()))
    Mbar = _mbar_from_flag(args.mbar, system, cost)
    if unc is not None:
        zeta = _bounds.zeta_minmax(triplet.F, system, unc, cost, Mbar, args.N,
                                   n_max=max(args.N, 4))
    else:
        zeta = _bounds.zeta_nominal(triplet.F, system, cost, Mbar, args.N)
    _write_json(args.out, {"N": args.N, "zeta": zeta.tolist(),
                           "mbar": args.mbar, "minmax": unc is not None})
    print(f"zeta^{args.N} written to {args.out} "
          f"(min {zeta.min():.6f}, max {zeta.max():.6f})")
    return EXIT_OK


def cmd_synth(args) -> int:
    system, cost, unc, target = _resolve_problem_for_synth(args)
    triplet = _template.ConfigurationTriplet.from_json(
        json.loads(Path(args.template).read_text()))
    objective = None
    if args.objective == "infdist":
        if not args.zeta:
            raise ValueError("--objective infdist needs --zeta FILE")
        zeta = np.asarray(json.loads(Path(args.zeta).read_text())["zeta"])
        weights = np.concatenate([
            args.w_domain * np.ones(triplet.f1),
            args.w_lower * np.ones(triplet.f - triplet.f1)])
        objective = _synth.InfDistanceObjective(weights, zeta)
    elif args.objective == "linear":
        c = -np.ones(triplet.f)
        objective = _synth.LinearObjective(c)
    freeze = None
    if args.freeze_z1:
        freeze = np.asarray(json.loads(Path(args.freeze_z1).read_text()))
        if objective is not None and isinstance(objective, _synth.LinearObjective):
            objective.c[: triplet.f1] = 0.0
    robust = triplet.kind == "robust"
    if robust and unc is None:
        raise ValueError("robust template but the problem has no uncertainty")
    if not robust and unc is not None:
        raise ValueError("nominal template but the problem is uncertain")
    spec = _synth.SynthesisSpec(
        triplet=triplet, system=system, cost=cost, lam=args.lam,
        uncertainty=unc if robust else None,
        target_zs=target.z if (robust and target is not None) else None,
        objective=objective, freeze_z1=freeze)
    result = _synth.synthesize(spec)
    _write_json(args.out, result.to_json(triplet))
    print(f"synthesis optimal: objective {result.objective_value:.6f}, "
          f"written to {args.out}")
    return EXIT_OK


def _load_result(args):
    doc = json.loads(Path(args.result).read_text())
    triplet = _template.ConfigurationTriplet.from_json(doc["triplet"])
    return doc, triplet


def cmd_verify(args) -> int:
    doc, triplet = _load_result(args)
    system, cost, unc, target = _resolve_problem_for_synth(args)
    if doc.get("target_zs") is not None:
        target = HPolyhedron(triplet.G1, np.asarray(doc["target_zs"]))
        problem = load_problem(args.problem)
        cost = cost_from_json(problem["cost"], target=target)
    result = _synth.SynthesisResult(
        z=np.asarray(doc["z"]), v=np.asarray(doc["v"]), y=np.asarray(doc["y"]),
        status=doc["status"], objective_value=doc["meta"]["objective"],
        kind=doc["kind"], lam=doc["lambda"],
        target_zs=np.asarray(doc["target_zs"]) if doc.get("target_zs") else None)
    spec = _synth.SynthesisSpec(
        triplet=triplet, system=system, cost=cost, lam=result.lam,
        uncertainty=unc if triplet.kind == "robust" else None,
        target_zs=result.target_zs)
    report = _synth.verify_clf(result, spec, n_samples=args.samples,
                               u_grid_resolution=args.u_res, seed=args.seed)
    _write_json(args.out, report.to_json())
    print(f"verified {report.n_checked} samples: min residual "
          f"{report.min_residual:.3e}, {len(report.violations)} violations")
    return EXIT_OK if report.passed else EXIT_VERIFY


def _parse_x0_list(text: str):
    out = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if chunk:
            out.append(np.array([float(v) for v in chunk.split(",")]))
    return out


def cmd_simulate(args) -> int:
    doc, triplet = _load_result(args)
    system, cost, unc, target = _resolve_problem_for_synth(args)
    if doc.get("target_zs") is not None:
        target = HPolyhedron(triplet.G1, np.asarray(doc["target_zs"]))
        problem = load_problem(args.problem)
        cost = cost_from_json(problem["cost"], target=target)
    M = _pwa.PwaFunction(triplet, np.asarray(doc["z"]))
    controller = _pwa.ExplicitController(M, np.asarray(doc["v"]))
    if args.policy == "none":
        policy = None
    elif args.policy in ("extreme+", "extreme-"):
        if unc is None:
            raise ValueError("extreme policies need an uncertain problem")
        verts = unc.w_vertices()
        pick = np.argmax(verts.sum(axis=1)) if args.policy == "extreme+" \
            else np.argmin(verts.sum(axis=1))
        policy = _sim.ExtremeConstant(verts[int(pick)])
    elif args.policy == "cycle":
        policy = _sim.VertexCycle(unc)
    elif args.policy == "greedy":
        policy = _sim.WorstCaseGreedy(unc)
    else:
        raise ValueError(f"unknown policy {args.policy!r}")
    x0_list = _parse_x0_list(args.x0) if args.x0 else []
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    breaches = 0
    for k, x0 in enumerate(x0_list):
        traj = _sim.simulate(system, controller, x0, args.steps,
                             disturbance_policy=policy, cost=cost)
        traj.to_csv(outdir / f"trajectory_{k:03d}.csv")
        breaches += traj.breached
    print(f"simulated {len(x0_list)} trajectories into {outdir} "
          f"({breaches} breaches)")
    return EXIT_OK


def cmd_export(args) -> int:
    doc, triplet = _load_result(args)
    M = _pwa.PwaFunction(triplet, np.asarray(doc["z"]))
    levels = [float(v) for v in args.levels.split(",")]
    if any(lev < 0 for lev in levels):
        raise ValueError("contour levels must be nonnegative")
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    _pwa.export_partition_csv(M, f"{prefix}_partition.csv")
    paths = _pwa.export_contours_csv(M, levels, str(prefix))
    print(f"partition and {len(paths)} contour files written to "
          f"{prefix.parent}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="polyclf",
        description="Piecewise-affine convex CLF synthesis on polyhedral epigraphs")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("template", help="build a configuration triplet")
    t.add_argument("--strategy", choices=["s1", "s2", "s3"], required=True)
    t.add_argument("--problem", default=None)
    t.add_argument("--f1", type=int, default=8)
    t.add_argument("--f2", type=int, default=37)
    t.add_argument("--kind", choices=["nominal", "robust"], default="nominal")
    t.add_argument("--N", type=int, default=5)
    t.add_argument("--mbar", default="lqr")
    t.add_argument("--lam", dest="lam", type=float, default=0.995)
    t.add_argument("--samples", default=None, help="JSON file of sample states")
    t.add_argument("--e-mode", choices=["full", "reduced"], default="full")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_template)

    b = sub.add_parser("bounds", help="compute the facet bounds zeta^N")
    b.add_argument("--problem", required=True)
    b.add_argument("--template", required=True)
    b.add_argument("--N", type=int, default=5)
    b.add_argument("--mbar", default="lqr")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_bounds)

    s = sub.add_parser("synth", help="solve the CLF synthesis program")
    s.add_argument("--problem", required=True)
    s.add_argument("--template", required=True)
    s.add_argument("--lambda", dest="lam", type=float, default=0.995)
    s.add_argument("--objective", choices=["linear", "infdist"],
                   default="linear")
    s.add_argument("--zeta", default=None)
    s.add_argument("--w-domain", type=float, default=100.0)
    s.add_argument("--w-lower", type=float, default=1.0)
    s.add_argument("--freeze-z1", default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)

    v = sub.add_parser("verify", help="sample the control Lyapunov inequality")
    v.add_argument("--problem", required=True)
    v.add_argument("--result", required=True)
    v.add_argument("--samples", type=int, default=2000)
    v.add_argument("--u-res", type=int, default=41)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("simulate", help="closed-loop simulation to CSV")
    m.add_argument("--problem", required=True)
    m.add_argument("--result", required=True)
    m.add_argument("--x0", default="", help="semicolon-separated start states")
    m.add_argument("--steps", type=int, default=50)
    m.add_argument("--policy", default="none",
                   choices=["none", "extreme+", "extreme-", "cycle", "greedy"])
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_simulate)

    e = sub.add_parser("export", help="partition and contour CSV export")
    e.add_argument("--result", required=True)
    e.add_argument("--levels", default="0.1,0.5,1,2")
    e.add_argument("--out-prefix", required=True)
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except Infeasible as exc:
        print(f"infeasible: {exc}", file=_sys.stderr)
        return EXIT_INFEASIBLE
    except (ValueError, FileNotFoundError, KeyError, PolyclfError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    _sys.exit(main())
