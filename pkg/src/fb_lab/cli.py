"""Command-line front end: fb-lab <verb> [options]."""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import oracle
from .config import SolverConfig, config_hash, parse_config, serialize_config
from .freeboundary import parse_polyline_csv, polyline_csv
from .frequency import FrequencyConfig, build_report, geometric_radii
from .grid import (
    CoefficientField,
    DomainGeometry,
    GridSpec,
    ScalarField,
    build_masks,
    dump_field,
    load_field,
)
from .quadrature import Membership, membership_from_field
from .regularity import fb_exponent_fit
from .report import run_suite
from .suites import SUITE_NAMES, UnknownSuiteError


def _load_cfg(path):
    if path is None:
        return SolverConfig()
    with open(path) as fh:
        return parse_config(fh.read())


def _spec_from_cfg(cfg):
    return GridSpec(half_width=cfg.grid_R, spacing=cfg.grid_h, shape=cfg.grid_shape)


def _geometry(cfg):
    spec = _spec_from_cfg(cfg)
    g = None
    if cfg.domain_g.strip():
        coeffs = [float(t) for t in cfg.domain_g.split(",")]
        g = lambda x: np.polyval(list(reversed(coeffs)), x)
    return DomainGeometry(spec, g=g)


def _data_fn(kind):
    if kind == "example":
        return oracle.example_u_xy
    if kind == "profile":
        return oracle.signorini_profile_xy
    if kind == "plane":
        return lambda x, y: np.asarray(y, dtype=float)
    if kind.startswith("slab:"):
        c = float(kind.split(":", 1)[1])
        return lambda x, y: np.maximum(y - c, 0.0)
    if kind.startswith("positive:"):
        m = float(kind.split(":", 1)[1])
        return lambda x, y: m + 0.3 * np.asarray(y, dtype=float)
    raise ValueError(f"unknown data kind {kind!r}")


def _coeff(cfg, geom):
    mask = build_masks(geom).closure
    if cfg.coeff_q == "example":
        return CoefficientField.identity(geom.spec, q=oracle.example_Q_xy, mask=mask)
    if cfg.coeff_q.startswith("constant:"):
        return CoefficientField.identity(
            geom.spec, q=float(cfg.coeff_q.split(":", 1)[1]), mask=mask
        )
    if os.path.exists(cfg.coeff_q):
        with open(cfg.coeff_q) as fh:
            qf, _ = load_field(fh.read())
        one = CoefficientField.identity(geom.spec, mask=mask)
        return CoefficientField(a11=one.a11, a12=one.a12, a22=one.a22, Q=qf)
    raise ValueError(f"coeff.Q must be 'example', 'constant:<v>' or a field dump path")


def _outdir(base, verb, cfg):
    path = os.path.join(base or "out", verb, config_hash(cfg))
    os.makedirs(path, exist_ok=True)
    return path


def cmd_onephase(args):
    from .onephase import OnePhaseProblem, check_fb_conditions, solve

    cfg = _load_cfg(args.config)
    geom = _geometry(cfg)
    coeff = _coeff(cfg, geom)
    prob = OnePhaseProblem(geom, coeff, _data_fn(cfg.data_kind))
    sol = solve(prob, cfg)
    out = _outdir(args.out, "onephase", cfg)
    with open(os.path.join(out, "u.txt"), "w") as fh:
        fh.write(dump_field(sol.u, "u"))
    with open(os.path.join(out, "fb.csv"), "w") as fh:
        fh.write(polyline_csv(sol.free_boundary))
    rep = check_fb_conditions(sol, coeff)
    with open(os.path.join(out, "fb_conditions.json"), "w") as fh:
        fh.write(json.dumps(rep, sort_keys=True, indent=2) + "\n")
    if not args.quiet:
        print(f"one-phase solve done: pde residual {sol.pde_residual:.2e}, "
              f"front residual {sol.fb_front_residual:.3f}h -> {out}")
    return 0


def cmd_signorini(args):
    from .signorini import SignoriniProblem, complementarity_report, solve_signorini

    cfg = _load_cfg(args.config)
    spec = _spec_from_cfg(cfg)
    prob = SignoriniProblem(spec, _data_fn(cfg.data_kind))
    sol = solve_signorini(
        prob,
        vi_tol=cfg.vi_tol,
        max_sweeps=cfg.max_sweeps,
        omega=cfg.omega or None,
    )
    out = _outdir(args.out, "signorini", cfg)
    with open(os.path.join(out, "w.txt"), "w") as fh:
        fh.write(dump_field(sol.w, "w"))
    cols = np.where(sol.thin[0])[0]
    xs = spec.x()[cols]
    rows = ["x,contact,multiplier"] + [
        f"{xs[k]!r},{int(sol.contact[0, cols[k]])},{sol.multiplier[cols[k]]!r}"
        for k in range(len(cols))
    ]
    with open(os.path.join(out, "contact.csv"), "w") as fh:
        fh.write("\n".join(rows) + "\n")
    rep = complementarity_report(sol)
    with open(os.path.join(out, "complementarity.json"), "w") as fh:
        fh.write(json.dumps(rep, sort_keys=True, indent=2) + "\n")
    if not args.quiet:
        print(f"signorini solve done in {sol.iterations} sweeps -> {out}")
    return 0 if rep["passed"] else 1


def cmd_frequency(args):
    from .svgplot import emit_loglog

    cfg = _load_cfg(args.config)
    with open(args.field) as fh:
        w, _ = load_field(fh.read())
    fb = None
    if args.fb:
        with open(args.fb) as fh:
            fb = parse_polyline_csv(fh.read())
    member = membership_from_field(w, threshold=-np.inf)
    h = w.spec.spacing
    radii = geometric_radii(8 * h, w.spec.half_width - 4 * h)
    fcfg = FrequencyConfig(radii=radii, sigma=cfg.sigma, c_mono=cfg.c_mono, mono_tol=cfg.mono_tol)
    rep = build_report(w, member, fb, fcfg)
    out = _outdir(args.out, "frequency", cfg)
    from .report import _freq_csv

    with open(os.path.join(out, "frequency.csv"), "w") as fh:
        fh.write(_freq_csv(rep))
    payload = {
        "rows": [rep.row_dict(k) for k in range(len(rep.radii))],
        "violations": rep.violations,
        "N0_estimate": rep.N0_estimate,
    }
    with open(os.path.join(out, "frequency.json"), "w") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    with open(os.path.join(out, "H.svg"), "w") as fh:
        fh.write(emit_loglog([("H(r)", rep.radii, rep.H)], "H(r)"))
    with open(os.path.join(out, "Ntilde.svg"), "w") as fh:
        fh.write(
            emit_loglog([("Ntilde", rep.radii, rep.Ntilde)], "Ntilde(r)", annotate_slope=False)
        )
    if not args.quiet:
        print(f"frequency report ({len(rep.radii)} radii) -> {out}")
    return 0


def cmd_verify(args):
    from .suites import run_suite_checks

    try:
        checks = run_suite_checks(args.suite)
    except UnknownSuiteError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    payload = {}
    ok = True
    for c in checks:
        if not args.quiet:
            print(c.line())
        payload[c.name] = {"value": c.value, "passed": c.passed}
        ok &= c.passed
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, f"verify_{args.suite}.json"), "w") as fh:
            fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return 0 if ok else 1


def cmd_fit_exponent(args):
    with open(args.fb) as fh:
        fb = parse_polyline_csv(fh.read())
    px, py = (float(t) for t in args.point.split(","))
    fb.spacing = args.spacing
    fit = fb_exponent_fit(fb, (px, py), spacing=args.spacing)
    print(
        json.dumps(
            {
                "exponent": fit.exponent,
                "residual": fit.residual,
                "window": list(fit.window),
                "n_points": len(fit.points),
            },
            sort_keys=True,
            indent=2,
        )
    )
    return 0


def cmd_oracle(args):
    R, h = (float(t) for t in args.grid.split(","))
    spec = GridSpec(half_width=R, spacing=h, shape="half_disk")
    mask = build_masks(DomainGeometry(spec)).closure
    if args.what == "fb":
        pts = oracle.fb_polyline(n=2000, r_max=R)
        from .freeboundary import FreeBoundarySet

        fb = FreeBoundarySet([pts], [np.zeros(len(pts), dtype=bool)], h)
        sys.stdout.write(polyline_csv(fb))
        return 0
    fn = {
        "u": oracle.example_u_xy,
        "Q": oracle.example_Q_xy,
        "signorini": oracle.signorini_profile_xy,
    }[args.what]
    f = ScalarField.from_function(spec, fn, mask)
    sys.stdout.write(dump_field(f, args.what))
    return 0


def cmd_run_suite(args):
    cfg = _load_cfg(args.config)
    try:
        rep, outdir = run_suite(args.suite, cfg, out=args.out or "out", quiet=args.quiet)
    except UnknownSuiteError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    if not args.quiet and outdir:
        print(f"report -> {outdir}/report.json")
    return 0 if rep.all_passed() else 1


def main(argv=None):
    ap = argparse.ArgumentParser(prog="fb-lab", description=__doc__)
    ap.add_argument("--config", help="flat key=value config file")
    ap.add_argument("--out", help="output directory root (default: out/)")
    ap.add_argument("--quiet", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    sub.add_parser("onephase", help="solve the one-phase problem from a config")
    sub.add_parser("signorini", help="solve the thin-obstacle problem from a config")

    p = sub.add_parser("frequency", help="frequency report for a dumped field")
    p.add_argument("--field", required=True)
    p.add_argument("--fb", help="free boundary polyline CSV")

    p = sub.add_parser("verify", help="run a named check battery")
    p.add_argument("--suite", required=True, help=f"one of: {', '.join(SUITE_NAMES)}")

    p = sub.add_parser("fit-exponent", help="detachment exponent of a polyline CSV")
    p.add_argument("--fb", required=True)
    p.add_argument("--point", required=True, help="detachment point 'x,y'")
    p.add_argument("--spacing", type=float, default=1.0 / 512)

    p = sub.add_parser("oracle", help="emit closed-form reference fields")
    p.add_argument("--what", required=True, choices=("u", "fb", "Q", "signorini"))
    p.add_argument("--grid", default="0.5,0.001953125", help="'R,h'")

    p = sub.add_parser("run-suite", help="run a full experiment suite with artifacts")
    p.add_argument("suite", help=f"one of: {', '.join(SUITE_NAMES)}")

    args = ap.parse_args(argv)
    handler = {
        "onephase": cmd_onephase,
        "signorini": cmd_signorini,
        "frequency": cmd_frequency,
        "verify": cmd_verify,
        "fit-exponent": cmd_fit_exponent,
        "oracle": cmd_oracle,
        "run-suite": cmd_run_suite,
    }[args.verb]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
