"""Named experiment suites and the acceptance-criteria registry.

Every acceptance criterion is one function returning a single CheckResult;
the pytest acceptance module and the `fb-lab run-suite` / `verify` commands
both consume this registry, so each criterion is defined exactly once.

Pinned acceptance parameters: Signorini at h = 1/256 on the unit half disk,
one-phase example at h = 1/512 on the half disk of radius 1/2.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from . import oracle
from .config import SolverConfig
from .freeboundary import densify_polyline, hausdorff_distance
from .frequency import (
    FrequencyConfig,
    build_report,
    compute_H,
    geometric_radii,
    homogeneity_fit,
    monotonicity_audit,
    rellich_residual,
)
from .grid import CoefficientField, DomainGeometry, GridSpec, ScalarField, build_masks
from .onephase import OnePhaseProblem, check_fb_conditions, solve
from .quadrature import Membership
from .regularity import (
    HypothesisError,
    FlatnessRecord,
    fb_exponent_fit,
    flatness_decay_fit,
    harnack_dichotomy_check,
    measure_flatness,
    measured_trap,
    nondegeneracy_check,
)
from .signorini import SignoriniProblem, complementarity_report, solve_signorini

# pinned acceptance scales
H_SIG = 1.0 / 256
R_SIG = 1.0
H_ONE = 1.0 / 512
R_ONE = 0.5
SIGMA = 0.1
C_HTILDE = 1.0          # corpus-wide constant for |Htilde - H| <= C r^{3+sigma/2}
WSTAR_NOISE_FLOOR = 1e-4

SUITE_NAMES = (
    "signorini-canonical",
    "onephase-example",
    "frequency-audit",
    "regularity-fits",
    "full",
)


class UnknownSuiteError(ValueError):
    def __init__(self, name):
        super().__init__(f"unknown suite {name!r}; valid suites: {', '.join(SUITE_NAMES)}")


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.value:.6g} ({self.threshold})"


class LabContext:
    """Caches the expensive shared artifacts of the acceptance corpus."""

    def __init__(self, h_sig=H_SIG, h_one=H_ONE):
        self.h_sig = h_sig
        self.h_one = h_one
        self._cache: Dict = {}

    def _get(self, key, maker):
        if key not in self._cache:
            self._cache[key] = maker()
        return self._cache[key]

    # --- solved fields -------------------------------------------------
    def signorini(self):
        def make():
            spec = GridSpec(R_SIG, self.h_sig, shape="half_disk")
            prob = SignoriniProblem(spec, oracle.signorini_profile_xy)
            t0 = time.perf_counter()
            sol = solve_signorini(prob)
            return sol, time.perf_counter() - t0

        return self._get("signorini", make)

    def onephase(self):
        def make():
            geom = DomainGeometry(GridSpec(R_ONE, self.h_one, shape="half_disk"))
            coeff = CoefficientField.identity(
                geom.spec, q=oracle.example_Q_xy, mask=build_masks(geom).closure
            )
            prob = OnePhaseProblem(geom, coeff, oracle.example_u_xy)
            t0 = time.perf_counter()
            sol = solve(prob)
            return sol, time.perf_counter() - t0, coeff

        return self._get("onephase", make)

    # --- analytic sampled fields ----------------------------------------
    def wstar_field(self, n):
        def make():
            spec = GridSpec(R_SIG, 1.0 / n, shape="half_disk")
            mask = build_masks(DomainGeometry(spec)).closure
            f = ScalarField.from_function(spec, oracle.signorini_profile_xy, mask)
            pred = lambda x, y: (np.hypot(x, y) <= R_SIG + 1e-12) & (y >= -1e-12)
            mem = Membership(spec, mask, pred)
            fb = [np.array([[-R_SIG, 0.0], [R_SIG, 0.0]])]
            return f, mem, fb

        return self._get(("wstar", n), make)

    def example_w(self, n):
        def make():
            spec = GridSpec(R_ONE, R_ONE / n, shape="half_disk")
            mask = build_masks(DomainGeometry(spec)).closure
            w = ScalarField.from_function(
                spec, lambda x, y: y - oracle.example_u_xy(x, y), mask
            )
            pred = lambda x, y: (
                oracle.in_positive_set(x, y)
                & (np.hypot(x, y) <= R_ONE + 1e-12)
                & (y >= -1e-12)
            )
            mem = Membership(spec, mask, pred)
            F = oracle.fb_polyline(n=3000, r_max=R_ONE)
            lam = np.stack([np.linspace(-R_ONE, -1e-4, 1500), np.zeros(1500)], axis=1)
            return w, mem, [lam, F]

        return self._get(("example_w", n), make)

    def example_u_field(self, n):
        def make():
            spec = GridSpec(R_ONE, R_ONE / n, shape="half_disk")
            mask = build_masks(DomainGeometry(spec)).closure
            return ScalarField.from_function(spec, oracle.example_u_xy, mask)

        return self._get(("example_u", n), make)


# --------------------------------------------------------------------------
# acceptance criteria
# --------------------------------------------------------------------------

def crit_1_signorini_recovery(ctx: LabContext) -> CheckResult:
    sol, wall = ctx.signorini()
    w = sol.w
    X, Y = w.spec.mesh()
    m = w.mask
    ex = oracle.signorini_profile_xy(X[m], Y[m])
    l2 = float(np.sqrt(np.sum((w.values[m] - ex) ** 2) / np.sum(ex ** 2)))
    rep = complementarity_report(sol, tol=5e-3)
    h = w.spec.spacing
    x = w.spec.x()
    cols = np.where(sol.thin[0])[0]
    xs = x[cols]
    con = sol.contact[0, cols]
    contact_ok = bool(np.all(con[xs < -2 * h]) and not np.any(con[xs > 2 * h]))
    comp_max = max(
        rep["max_negative_w"], rep["max_negative_multiplier"], rep["max_product"]
    )
    passed = (
        l2 <= 0.02 and comp_max <= 5e-3 * rep["scale"] and contact_ok and wall <= 60.0
    )
    return CheckResult(
        name="signorini-canonical-recovery",
        value=l2,
        threshold="L2<=2%, complementarity<=5e-3, contact within 2h, wall<=60s",
        passed=bool(passed),
        detail={
            "rel_l2": l2,
            "complementarity_max": comp_max,
            "contact_ok": contact_ok,
            "wall_seconds": wall,
            "sweeps": sol.iterations,
        },
    )


def crit_2_frequency_constancy(ctx: LabContext) -> CheckResult:
    n = int(round(1.0 / ctx.h_sig))
    f, mem, fb = ctx.wstar_field(n)
    h = 1.0 / n
    pad = 2.0 ** 0.25
    radii = geometric_radii(16 * h / pad * 0.999, 0.25 * pad * 1.001)
    cfg = FrequencyConfig(radii=radii, sigma=SIGMA, c_mono=SolverConfig().c_mono)
    rep = build_report(f, mem, fb, cfg)
    sel = (radii >= 16 * h * 0.999) & (radii <= 0.25 * 1.001)
    dev = float(np.nanmax(np.abs(rep.Ntilde[sel] - 1.5)))
    viol = monotonicity_audit(radii, rep.Ntilde, cfg.c_mono, SIGMA, mono_tol=0.02)
    passed = dev <= 0.05 and len(viol) == 0
    return CheckResult(
        name="frequency-constancy-monotonicity",
        value=dev,
        threshold="|Ntilde-1.5|<=0.05 on [16h,1/4], zero monotonicity violations",
        passed=bool(passed),
        detail={"max_deviation": dev, "violations": len(viol), "c_mono": cfg.c_mono},
    )


def crit_3_growth_bound(ctx: LabContext) -> CheckResult:
    n = int(round(R_ONE / ctx.h_one))
    w, mem, fb = ctx.example_w(n)
    h = R_ONE / n
    radii = geometric_radii(8 * h, 80 * h)
    H = np.array([compute_H(w, mem, r) for r in radii])
    slope = float(np.polyfit(np.log(radii), np.log(H), 1)[0])
    return CheckResult(
        name="optimal-growth-H-r3",
        value=slope,
        threshold="log-log slope of H over [8h, 80h] >= 2.85",
        passed=bool(slope >= 2.85),
        detail={"slope": slope, "decade": (8 * h, 80 * h)},
    )


def crit_4_onephase_recovery(ctx: LabContext) -> CheckResult:
    sol, wall, coeff = ctx.onephase()
    spec = sol.u.spec
    h = spec.spacing
    R = spec.half_width
    rim = R - 3 * h
    analytic = np.vstack(
        [
            oracle.fb_polyline(n=4000, r_max=rim),
            np.stack([np.linspace(-rim, -1e-4, 2000), np.zeros(2000)], axis=1),
        ]
    )
    got = []
    for line in sol.free_boundary.polylines:
        dense = densify_polyline(line, h / 2)
        rr = np.hypot(dense[:, 0], dense[:, 1])
        dense = dense[rr < rim]
        if len(dense):
            got.append(dense)
    dH = hausdorff_distance(np.vstack(got), analytic)
    det = sol.free_boundary.detachment_points()
    d0 = det[np.argmin(np.hypot(det[:, 0], det[:, 1]))] if len(det) else np.array([0.0, 0.0])
    fit = fb_exponent_fit(sol.free_boundary, d0, window=(8 * h, R / 4))
    passed = dH <= 2 * h and 1.4 <= fit.exponent <= 1.6 and wall <= 600.0
    return CheckResult(
        name="onephase-example-recovery",
        value=dH / h,
        threshold="Hausdorff<=2h, gamma in [1.4,1.6], wall<=600s",
        passed=bool(passed),
        detail={
            "hausdorff_over_h": dH / h,
            "gamma": fit.exponent,
            "wall_seconds": wall,
            "front_residual_h": sol.fb_front_residual,
        },
    )


def crit_5_rellich(ctx: LabContext) -> CheckResult:
    n_sig = int(round(1.0 / ctx.h_sig))
    f, mem, fb = ctx.wstar_field(n_sig)
    res_wstar = rellich_residual(f, mem, fb, 0.25)
    f2, mem2, fb2 = ctx.wstar_field(n_sig // 2)
    res_wstar_coarse = rellich_residual(f2, mem2, fb2, 0.25)
    n_one = int(round(R_ONE / ctx.h_one))
    w, memw, fbw = ctx.example_w(n_one)
    res_ex = rellich_residual(w, memw, fbw, 0.25)
    w2, memw2, fbw2 = ctx.example_w(n_one // 2)
    res_ex_coarse = rellich_residual(w2, memw2, fbw2, 0.25)
    # the profile terms cancel exactly arcwise, so its residual sits at the
    # quadrature noise floor; require decrease up to that floor
    dec_wstar = res_wstar <= max(res_wstar_coarse, WSTAR_NOISE_FLOOR)
    dec_ex = res_ex < res_ex_coarse
    passed = res_wstar <= 0.05 and res_ex <= 0.05 and dec_wstar and dec_ex
    return CheckResult(
        name="rellich-identity",
        value=max(res_wstar, res_ex),
        threshold="residual<=0.05 at r=1/4 on both fields, decreasing under refinement",
        passed=bool(passed),
        detail={
            "wstar": res_wstar,
            "wstar_coarse": res_wstar_coarse,
            "example": res_ex,
            "example_coarse": res_ex_coarse,
        },
    )


def crit_6_htilde_bookkeeping(ctx: LabContext) -> CheckResult:
    n = int(round(R_ONE / ctx.h_one))
    w, mem, fb = ctx.example_w(n)
    h = R_ONE / n
    radii = geometric_radii(8 * h, 0.4)
    cfg = FrequencyConfig(radii=radii, sigma=SIGMA, c_mono=SolverConfig().c_mono)
    rep = build_report(w, mem, fb, cfg)
    ratio = float(np.max(np.abs(rep.Htilde - rep.H) / radii ** (3.0 + SIGMA / 2.0)))
    inner = slice(1, -1)
    forms = rep.Hp_fd[inner] / rep.Hp_identity[inner]
    form_dev = float(np.nanmax(np.abs(forms - 1.0)))
    passed = ratio <= C_HTILDE and form_dev <= 0.05
    return CheckResult(
        name="htilde-bookkeeping",
        value=ratio,
        threshold=f"|Htilde-H|/r^3.05 <= {C_HTILDE}, Hp forms within 5%",
        passed=bool(passed),
        detail={"bookkeeping_constant": ratio, "form_deviation": form_dev},
    )


def crit_7_flatness_decay(ctx: LabContext) -> CheckResult:
    n = int(round(R_ONE / ctx.h_one))
    u = ctx.example_u_field(n)
    scales = [R_ONE / 2 ** k for k in range(1, 6)]
    recs = [measure_flatness(u, (0.0, 0.0), (0.0, 1.0), r) for r in scales]
    fit = flatness_decay_fit(recs, beta_min=0.3)
    passed = 0.4 <= fit.exponent <= 0.6
    return CheckResult(
        name="flatness-decay",
        value=fit.exponent,
        threshold="beta-hat in [0.4, 0.6]",
        passed=bool(passed),
        detail={"beta": fit.exponent, "residual": fit.residual, "scales": scales},
    )


def crit_8_harnack_dichotomy(ctx: LabContext) -> CheckResult:
    outcomes = []
    # suite 1: plane embedding of the solved Signorini field
    sol, _ = ctx.signorini()
    spec = sol.w.spec
    X, Y = spec.mesh()
    emb = np.where(sol.w.mask, np.maximum(Y - 0.05 * sol.w.values, 0.0), np.nan)
    u_emb = ScalarField(spec, emb, sol.w.mask.copy())
    for r in (0.25, 0.125, 0.0625):
        a, b = measured_trap(u_emb, (0.0, 0.0), (0.0, 1.0), r)
        a = max(a, 1e-9)
        b = max(b, a)
        outcomes.append(harnack_dichotomy_check(u_emb, a, b, r, theta=0.01))
    # suite 4: one-phase example solution around the detachment origin
    osol, _, _ = ctx.onephase()
    for r in (1.0 / 16, 1.0 / 32, 1.0 / 64):
        a, b = measured_trap(osol.u, (0.0, 0.0), (0.0, 1.0), r)
        a = max(a, 1e-9)
        b = max(b, a)
        outcomes.append(harnack_dichotomy_check(osol.u, a, b, r, theta=0.01))
    n_viol = sum(1 for o in outcomes if o == "violation")
    return CheckResult(
        name="harnack-dichotomy",
        value=float(n_viol),
        threshold="no violation at theta=0.01 across 6 scale checks",
        passed=bool(n_viol == 0),
        detail={"outcomes": outcomes},
    )


def crit_9_nondegeneracy(ctx: LabContext) -> CheckResult:
    spec = GridSpec(1.0, 1.0 / 128, shape="half_disk")
    mask = build_masks(DomainGeometry(spec)).closure
    eta = 0.2
    u = ScalarField.from_function(spec, lambda x, y: (1 + eta) * y, mask)
    ok, _ = nondegeneracy_check(u, q0=1.0, eta=eta, eps=spec.spacing)
    eps = 4 * spec.spacing
    cone = ScalarField.from_function(spec, lambda x, y: np.maximum(y - eps, 0.0), mask)
    try:
        nondegeneracy_check(cone, q0=1.0, eta=0.1, eps=eps)
        hypo_detected = False
    except HypothesisError:
        hypo_detected = True
    passed = ok and hypo_detected
    return CheckResult(
        name="nondegeneracy-barrier",
        value=float(ok),
        threshold="True on the eta=0.2 supersolution, hypothesis failure detected",
        passed=bool(passed),
        detail={"supersolution_ok": ok, "hypothesis_detected": hypo_detected},
    )


def crit_10_oracle_consistency(ctx: LabContext) -> CheckResult:
    import sympy as sp

    r, th = sp.symbols("r theta", positive=True)
    u = r * sp.sin(th) - r ** sp.Rational(3, 2) * sp.cos(3 * th / 2)
    grad2 = sp.lambdify(
        (r, th), sp.simplify(sp.diff(u, r) ** 2 + (sp.diff(u, th) / r) ** 2), "numpy"
    )
    rr = np.geomspace(1e-3, 0.5, 100)
    thf = oracle.example_fb(rr)
    dev = float(np.max(np.abs(np.sqrt(grad2(rr, thf)) - oracle.example_Q(rr))))
    return CheckResult(
        name="oracle-self-consistency",
        value=dev,
        threshold="max |symbolic |Du| - example_Q| on F <= 1e-8 at 100 radii",
        passed=bool(dev <= 1e-8),
        detail={"max_deviation": dev},
    )


ACCEPTANCE: Dict[int, Callable[[LabContext], CheckResult]] = {
    1: crit_1_signorini_recovery,
    2: crit_2_frequency_constancy,
    3: crit_3_growth_bound,
    4: crit_4_onephase_recovery,
    5: crit_5_rellich,
    6: crit_6_htilde_bookkeeping,
    7: crit_7_flatness_decay,
    8: crit_8_harnack_dichotomy,
    9: crit_9_nondegeneracy,
    10: crit_10_oracle_consistency,
}

SUITE_CRITERIA = {
    "signorini-canonical": (1, 2),
    "onephase-example": (4, 8),
    "frequency-audit": (3, 5, 6),
    "regularity-fits": (7, 9, 10),
    "full": tuple(range(1, 11)),
}


def run_criteria(names, ctx: Optional[LabContext] = None) -> List[CheckResult]:
    ctx = ctx or LabContext()
    return [ACCEPTANCE[k](ctx) for k in names]


def run_suite_checks(suite: str, ctx: Optional[LabContext] = None) -> List[CheckResult]:
    if suite not in SUITE_CRITERIA:
        raise UnknownSuiteError(suite)
    return run_criteria(SUITE_CRITERIA[suite], ctx)
