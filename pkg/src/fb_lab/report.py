"""Run reports and artifact emission for the experiment suites.

report.json is byte-deterministic for identical configs (sorted keys, fixed
float formatting, no timestamps); wall-clock timings go to a separate
timing.txt that is excluded from the determinism contract.
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from typing import List, Optional

import numpy as np

from . import oracle
from .config import SolverConfig, config_hash, serialize_config
from .freeboundary import FreeBoundarySet, polyline_csv
from .frequency import FrequencyConfig, build_report, geometric_radii
from .grid import dump_field
from .signorini import complementarity_report
from .suites import (
    LabContext,
    SUITE_CRITERIA,
    UnknownSuiteError,
    run_suite_checks,
)
from .svgplot import emit_heatmap, emit_loglog, emit_polylines


@dataclass
class RunReport:
    suite: str
    config_hash: str
    config: str
    checks: List[dict]
    artifacts: List[str] = field(default_factory=list)

    def to_json(self) -> str:
        payload = {
            "suite": self.suite,
            "config_hash": self.config_hash,
            "config": self.config,
            "checks": self.checks,
            "artifacts": sorted(self.artifacts),
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks)


def _freq_csv(rep) -> str:
    rows = ["r,H,D,E1,E2,Htilde,Hp_fd,Hp_identity,Ntilde,truncation_active,rellich"]
    for k in range(len(rep.radii)):
        d = rep.row_dict(k)
        rows.append(
            ",".join(
                [
                    repr(d["r"]), repr(d["H"]), repr(d["D"]), repr(d["E1"]),
                    repr(d["E2"]), repr(d["Htilde"]), repr(d["Hp_fd"]),
                    repr(d["Hp_identity"]), repr(d["Ntilde"]),
                    str(int(d["truncation_active"])), repr(d["rellich"]),
                ]
            )
        )
    return "\n".join(rows) + "\n"


def _suite_artifacts(suite: str, ctx: LabContext, outdir: str) -> List[str]:
    """Dump fields, CSVs and SVGs for a suite; returns relative paths."""
    written = []

    def put(name, text):
        path = os.path.join(outdir, name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w") as fh:
            fh.write(text)
        written.append(name)

    if suite in ("signorini-canonical", "full"):
        sol, _ = ctx.signorini()
        put("fields/signorini_w.txt", dump_field(sol.w, "w"))
        cols = np.where(sol.thin[0])[0]
        xs = sol.w.spec.x()[cols]
        rows = ["x,contact,multiplier"] + [
            f"{xs[k]!r},{int(sol.contact[0, cols[k]])},{sol.multiplier[cols[k]]!r}"
            for k in range(len(cols))
        ]
        put("csv/signorini_contact.csv", "\n".join(rows) + "\n")
        put(
            "report/complementarity.json",
            json.dumps(complementarity_report(sol), sort_keys=True, indent=2) + "\n",
        )
        n = int(round(1.0 / ctx.h_sig))
        f, mem, fb = ctx.wstar_field(n)
        h = 1.0 / n
        cfg = FrequencyConfig(radii=geometric_radii(12 * h, 0.3), sigma=0.1, c_mono=0.0)
        rep = build_report(f, mem, fb, cfg)
        put("csv/wstar_frequency.csv", _freq_csv(rep))
        put(
            "svg/wstar_H.svg",
            emit_loglog([("H(r)", rep.radii, rep.H)], "canonical profile H(r)"),
        )
        put(
            "svg/wstar_Ntilde.svg",
            emit_loglog(
                [("Ntilde", rep.radii, rep.Ntilde)],
                "truncated frequency",
                annotate_slope=False,
            ),
        )
        put("svg/signorini_w.svg", emit_heatmap(sol.w, "signorini solution"))

    if suite in ("onephase-example", "full"):
        sol, _, coeff = ctx.onephase()
        put("fields/onephase_u.txt", dump_field(sol.u, "u"))
        put("csv/onephase_fb.csv", polyline_csv(sol.free_boundary))
        from .onephase import check_fb_conditions

        put(
            "report/fb_conditions.json",
            json.dumps(check_fb_conditions(sol, coeff), sort_keys=True, indent=2) + "\n",
        )
        analytic = oracle.fb_polyline(n=1500, r_max=sol.u.spec.half_width)
        put(
            "svg/onephase_fb.svg",
            emit_polylines(
                [("analytic F", analytic)]
                + [(f"extracted {k}", p) for k, p in enumerate(sol.free_boundary.polylines)],
                "free boundary: analytic vs extracted",
            ),
        )
        put("svg/onephase_u.svg", emit_heatmap(sol.u, "one-phase solution", polylines=sol.free_boundary.polylines))

    if suite in ("frequency-audit", "full"):
        n = int(round(0.5 / ctx.h_one))
        w, mem, fb = ctx.example_w(n)
        h = 0.5 / n
        cfg = FrequencyConfig(radii=geometric_radii(8 * h, 0.4), sigma=0.1, c_mono=0.0)
        rep = build_report(w, mem, fb, cfg)
        put("csv/example_frequency.csv", _freq_csv(rep))
        put(
            "svg/example_H.svg",
            emit_loglog(
                [("H(r)", rep.radii, rep.H), ("Htilde", rep.radii, rep.Htilde)],
                "one-phase example H(r)",
            ),
        )
        put(
            "svg/example_Ntilde.svg",
            emit_loglog(
                [("Ntilde", rep.radii, rep.Ntilde)],
                "truncated frequency of the example",
                annotate_slope=False,
            ),
        )

    if suite in ("regularity-fits", "full"):
        from .regularity import flatness_decay_fit, measure_flatness

        n = int(round(0.5 / ctx.h_one))
        u = ctx.example_u_field(n)
        scales = [0.25 / 2 ** k for k in range(0, 5)]
        recs = [measure_flatness(u, (0.0, 0.0), (0.0, 1.0), r) for r in scales]
        fit = flatness_decay_fit(recs)
        put(
            "svg/flatness_decay.svg",
            emit_loglog(
                [("epsilon(r)", [rec.r for rec in recs], [rec.epsilon for rec in recs])],
                "flatness decay at the detachment point",
            ),
        )
        put(
            "report/flatness_fit.json",
            json.dumps(
                {"beta": fit.exponent, "residual": fit.residual, "window": fit.window},
                sort_keys=True,
                indent=2,
            )
            + "\n",
        )
    return written


def run_suite(suite: str, cfg: Optional[SolverConfig] = None, out: Optional[str] = None,
              ctx: Optional[LabContext] = None, quiet: bool = False):
    """Execute a named suite; returns (RunReport, outdir or None)."""
    import time as _time

    if suite not in SUITE_CRITERIA:
        raise UnknownSuiteError(suite)
    cfg = cfg or SolverConfig()
    ctx = ctx or LabContext()
    t0 = _time.perf_counter()
    checks = run_suite_checks(suite, ctx)
    wall = _time.perf_counter() - t0
    outdir = None
    artifacts = []
    chash = config_hash(cfg)
    if out is not None:
        outdir = os.path.join(out, suite, chash)
        os.makedirs(outdir, exist_ok=True)
        artifacts = _suite_artifacts(suite, ctx, outdir)
    rep = RunReport(
        suite=suite,
        config_hash=chash,
        config=serialize_config(cfg),
        checks=[
            {
                "name": c.name,
                "value": c.value,
                "threshold": c.threshold,
                "passed": c.passed,
                "detail": _plain(c.detail),
            }
            for c in checks
        ],
        artifacts=artifacts,
    )
    if outdir is not None:
        with open(os.path.join(outdir, "report.json"), "w") as fh:
            fh.write(rep.to_json())
        with open(os.path.join(outdir, "timing.txt"), "w") as fh:
            fh.write(f"wall_seconds {wall:.3f}\n")
    if not quiet:
        for c in checks:
            print(c.line())
    return rep, outdir


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
