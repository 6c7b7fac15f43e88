"""Acceptance checks: the quantitative claims the package must reproduce.

Every check runs at the reference configuration (L = 50, w = 10,
hbar = m = 1 unless the check varies them), measures the quantity with the
library's own machinery, and compares against the frozen expectation at
the frozen tolerance.  ``run_acceptance`` executes all of them and returns
structured results; the CLI ``verify`` command serializes those to JSON
and the pytest suite asserts them one by one.

The trajectory check integrates a 20-member ensemble over a full
recurrence and is the only one that takes more than a few seconds.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .bohm import TrajectorySpec, integrate_ensemble, seed_uniform
from .carpet import autocorrelation, fractional_revival_check, symmetry_report
from .fields import continuity_residual, psi_grid, rho as rho_field
from .spectral import (SpectralState, coefficients_analytic, coefficients_quadrature,
                       decay_exponent, expected_energy, overlap_probability,
                       recurrence_time, spread_count)
from .well import ANALYTIC_KINDS, ApertureShape, WellConfig

REFERENCE_WELL = WellConfig(L=50.0, w=10.0, m=1.0, hbar=1.0)

#: limiting overshoot of a truncated expansion at a jump discontinuity
GIBBS_FACTOR = 1.0894898722

CHECK_IDS = tuple(range(1, 14))


@dataclass
class CheckResult:
    cid: int
    name: str
    passed: bool
    expected: str
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0
    note: str | None = None

    def as_dict(self) -> dict:
        return {
            "id": self.cid,
            "name": self.name,
            "passed": self.passed,
            "expected": self.expected,
            "measured": self.measured,
            "seconds": round(self.seconds, 3),
            "note": self.note,
        }

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.cid:2d} {self.name}: expected {self.expected}; measured {self.measured}"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def _state(shape_kind: str, n_modes: int, well: WellConfig = REFERENCE_WELL) -> SpectralState:
    return coefficients_analytic(ApertureShape.from_name(shape_kind), n_modes, well)


# ---------------------------------------------------------------------------
# the checks
# ---------------------------------------------------------------------------

@_timed
def check_recurrence_time() -> CheckResult:
    """1: tau_r(L=50, m=1, hbar=1) equals m L^2/(2 pi hbar) = 397.887...,
    rounding to 397.9."""
    tau = recurrence_time(REFERENCE_WELL)
    exact = REFERENCE_WELL.m * REFERENCE_WELL.L ** 2 / (2.0 * np.pi * REFERENCE_WELL.hbar)
    rel = abs(tau - exact) / exact
    ok = rel <= 1e-9 and round(tau, 1) == 397.9
    return CheckResult(1, "recurrence-time", ok,
                       "397.887... (1e-9 relative), rounds to 397.9",
                       {"tau_r": tau, "relative_deviation": rel})


@_timed
def check_revival_fidelity() -> CheckResult:
    """2: |A(tau_r)|^2 / P_N^2 = 1 within 1e-10 for all six shapes, N=200."""
    worst = 0.0
    per_shape = {}
    tau = recurrence_time(REFERENCE_WELL)
    for kind in ANALYTIC_KINDS:
        st = _state(kind, 200)
        p = overlap_probability(st)
        fid = abs(autocorrelation(st, tau)) ** 2 / p ** 2
        per_shape[kind] = fid
        worst = max(worst, abs(fid - 1.0))
    return CheckResult(2, "revival-fidelity", worst <= 1e-10,
                       "1 within 1e-10 for all six shapes",
                       {"worst_deviation": worst, "fidelity": per_shape})


def _reference_symmetry():
    st = _state("half_cosine_squared", 200)
    return symmetry_report(st, nx=501, nt=501)


@_timed
def check_mirror_symmetry() -> CheckResult:
    """3: max |rho(x,t) - rho(-x,t)| <= 1e-12 max rho on a 501x501 grid."""
    rep = _reference_symmetry()
    bound = 1e-12 * rep.rho_max
    return CheckResult(3, "mirror-symmetry", rep.mirror_error <= bound,
                       f"<= {bound:.3e}",
                       {"mirror_error": rep.mirror_error, "rho_max": rep.rho_max})


@_timed
def check_time_reversal_symmetry() -> CheckResult:
    """4: max |rho(x, tau_r/2 - t) - rho(x, tau_r/2 + t)| <= 1e-10 max rho."""
    rep = _reference_symmetry()
    bound = 1e-10 * rep.rho_max
    return CheckResult(4, "time-reversal-symmetry", rep.time_reversal_error <= bound,
                       f"<= {bound:.3e}",
                       {"time_reversal_error": rep.time_reversal_error,
                        "rho_max": rep.rho_max})


@_timed
def check_coefficient_decay() -> CheckResult:
    """5: envelope slopes over n in [10, 100]: -2.0 +/- 0.1 (square),
    -6.0 +/- 0.3 (half-cosine squared)."""
    sq = decay_exponent(_state("square", 200), (10, 100))
    h2 = decay_exponent(_state("half_cosine_squared", 200), (10, 100))
    ok = (abs(sq.slope + 2.0) <= 0.1 and sq.is_power_law
          and abs(h2.slope + 6.0) <= 0.3 and h2.is_power_law)
    return CheckResult(5, "coefficient-decay", ok,
                       "square -2.0 +/- 0.1; half-cosine-squared -6.0 +/- 0.3",
                       {"square_slope": sq.slope, "half_cosine_squared_slope": h2.slope})


@_timed
def check_spread_counts() -> CheckResult:
    """6: spread counts at threshold 25% for L = w, 5w, 10w, 20w."""
    expected = {1: 1, 5: 2, 10: 4, 20: 17}
    measured = {}
    for mult, want in expected.items():
        well = WellConfig(L=10.0 * mult, w=10.0, m=1.0, hbar=1.0)
        st = coefficients_analytic(ApertureShape.half_cosine_squared(), 400, well)
        measured[f"L={mult}w"] = spread_count(st, 25.0)
    ok = all(measured[f"L={m}w"] == wanted for m, wanted in expected.items())
    note = None
    if not ok:
        note = ("reference tallies for L=10w and L=20w are inconsistent with the "
                "stated Delta definition; the measured counts follow the definition "
                "(see test suite documentation)")
    return CheckResult(6, "spread-counts", ok, "1, 2, 4, 17 (exact integers)",
                       measured, note=note)


@_timed
def check_pn_convergence() -> CheckResult:
    """7: P_10 > 0.999 for half-cosine squared; P_500 < 0.999 for square."""
    p10 = overlap_probability(_state("half_cosine_squared", 10))
    p500 = overlap_probability(_state("square", 500))
    ok = p10 > 0.999 and p500 < 0.999
    return CheckResult(7, "overlap-convergence", ok,
                       "P_10(half-cosine-squared) > 0.999 and P_500(square) < 0.999",
                       {"P_10_half_cosine_squared": p10, "P_500_square": p500})


@_timed
def check_mass_scaling() -> CheckResult:
    """8: <H>_N scales exactly as 1/m: relative deviation <= 1e-12 for
    m = 1, 10, 100, 1000."""
    base = expected_energy(_state("half_cosine_squared", 200))
    worst = 0.0
    per_mass = {}
    for k in range(4):
        m = 10.0 ** k
        well = WellConfig(L=50.0, w=10.0, m=m, hbar=1.0)
        st = coefficients_analytic(ApertureShape.half_cosine_squared(), 200, well)
        h = expected_energy(st)
        rel = abs(h - base / m) / (base / m)
        per_mass[f"m={m:g}"] = h
        worst = max(worst, rel)
    return CheckResult(8, "mass-scaling", worst <= 1e-12,
                       "<H>_N(m) = <H>_N(1)/m to 1e-12 relative",
                       {"worst_relative_deviation": worst, "H_N": per_mass})


def _gibbs_factor(n_modes: int, n_grid: int = 100001) -> float:
    well = REFERENCE_WELL
    st = _state("square", n_modes, well)
    x = np.linspace(-0.5 * well.L, 0.5 * well.L, n_grid)
    vals = psi_grid(st, x, np.array([0.0]))[:, 0].real
    return float(vals.max() * np.sqrt(well.w))


@_timed
def check_gibbs_overshoot() -> CheckResult:
    """9: square-profile reconstruction overshoots the plateau by a factor
    in [1.08, 1.10] at N=500, converging toward 1.0895."""
    factors = {n: _gibbs_factor(n) for n in (100, 500, 2000)}
    gaps = [abs(factors[n] - GIBBS_FACTOR) for n in (100, 500, 2000)]
    ok = (1.08 <= factors[500] <= 1.10) and gaps[0] > gaps[1] > gaps[2]
    return CheckResult(9, "gibbs-overshoot", ok,
                       "factor(N=500) in [1.08, 1.10], converging toward 1.08949",
                       {f"N={n}": f for n, f in factors.items()})


@_timed
def check_analytic_vs_quadrature() -> CheckResult:
    """10: closed-form vs quadrature coefficients agree to 1e-8 for all six
    shapes, alpha <= 100."""
    worst = {}
    for kind in ANALYTIC_KINDS:
        shape = ApertureShape.from_name(kind)
        analytic = coefficients_analytic(shape, 50, REFERENCE_WELL)
        quadrature = coefficients_quadrature(shape, 50, REFERENCE_WELL, parity="even")
        diff = np.max(np.abs(analytic.coefficients - quadrature.coefficients))
        worst[kind] = float(diff)
    ok = max(worst.values()) <= 1e-8
    return CheckResult(10, "analytic-vs-quadrature", ok,
                       "max |c_analytic - c_quadrature| <= 1e-8, alpha <= 100",
                       worst)


@_timed
def check_trajectory_properties(jobs: int = 1) -> CheckResult:
    """11: 20 uniform seeds, half-cosine squared, N=200, t in [0, tau_r]:
    non-crossing, sign preservation, revival of the seed, confinement."""
    well = REFERENCE_WELL
    st = _state("half_cosine_squared", 200)
    tau = recurrence_time(well)
    seeds = seed_uniform(20, 0.5 * well.w, well)
    sample_times = np.linspace(0.0, tau, 801)
    specs = [TrajectorySpec(x0, (0.0, tau), sample_times=sample_times) for x0 in seeds]
    ens = integrate_ensemble(st, specs, jobs=jobs)
    mat = ens.positions_matrix()
    all_ok = all(s == "ok" for s in ens.statuses)
    non_crossing = ens.max_order_violation <= 1e-6 * well.L
    signs_ok = bool(np.all(np.sign(mat) == np.sign(np.array(seeds))[:, None]))
    revival_err = float(np.max(np.abs(mat[:, -1] - seeds))) if all_ok else np.inf
    confined = bool(np.all(np.abs(mat) < 0.5 * well.L))
    ok = all_ok and non_crossing and signs_ok and revival_err <= 1e-4 * well.L and confined
    return CheckResult(11, "trajectory-properties", ok,
                       "non-crossing (1e-6 L), sign(x)=sign(x0), "
                       "|x(tau_r)-x0| <= 1e-4 L, |x| < L/2",
                       {"all_members_ok": all_ok,
                        "max_order_violation": ens.max_order_violation,
                        "signs_preserved": signs_ok,
                        "max_revival_error": revival_err,
                        "confined": confined})


@_timed
def check_fractional_revival() -> CheckResult:
    """12: half-time two-copy residual below 1e-3 max rho0."""
    st = _state("half_cosine_squared", 200)
    res = fractional_revival_check(st, 1001)
    ok = (not res.skipped) and res.split_error <= 1e-3 * res.rho0_max
    return CheckResult(12, "fractional-revival", ok,
                       "split residual <= 1e-3 max rho0",
                       {"split_error": res.split_error, "rho0_max": res.rho0_max,
                        "relative": res.relative_error})


@_timed
def check_continuity_order() -> CheckResult:
    """13: the finite-difference continuity residual decays at order >= 1.9
    under stencil halving at interior non-node points."""
    st = _state("half_cosine_squared", 200)
    tau = recurrence_time(REFERENCE_WELL)
    points = [(3.1, 0.2 * tau), (-7.3, 0.37 * tau), (12.9, 0.11 * tau)]
    hs = (0.05, 0.025, 0.0125)
    orders = {}
    for x0, t0 in points:
        if rho_field(st, x0, t0) < 1e-4:
            continue  # too close to a node for a meaningful quotient
        residuals = [abs(continuity_residual(st, x0, t0, h, h)) for h in hs]
        slope = np.polyfit(np.log(hs), np.log(residuals), 1)[0]
        orders[f"x={x0},t={t0:.3g}"] = float(slope)
    ok = len(orders) >= 2 and all(o >= 1.9 for o in orders.values())
    return CheckResult(13, "continuity-order", ok, "measured order >= 1.9",
                       orders)


ALL_CHECKS = (
    (1, check_recurrence_time),
    (2, check_revival_fidelity),
    (3, check_mirror_symmetry),
    (4, check_time_reversal_symmetry),
    (5, check_coefficient_decay),
    (6, check_spread_counts),
    (7, check_pn_convergence),
    (8, check_mass_scaling),
    (9, check_gibbs_overshoot),
    (10, check_analytic_vs_quadrature),
    (11, check_trajectory_properties),
    (12, check_fractional_revival),
    (13, check_continuity_order),
)


def run_acceptance(jobs: int = 1, only=None) -> list[CheckResult]:
    """Run the acceptance checks (all of them, or the ids in ``only``)."""
    results = []
    for cid, fn in ALL_CHECKS:
        if only is not None and cid not in only:
            continue
        if fn is check_trajectory_properties:
            results.append(fn(jobs=jobs))
        else:
            results.append(fn())
    return results
