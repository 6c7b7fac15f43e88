"""Bohmian trajectory integration for the box-confined superposition.

Trajectories are integral curves of the guidance law dx/dt = v(x, t) with
v = J/rho evaluated analytically from the spectral state (no grids, no
interpolation in space or time).  The integrator is an embedded
Dormand-Prince 5(4) pair with PI step-size control and fourth-order dense
output, specialized to this problem in two ways:

* a step whose proposal (or any internal stage) reaches |x| >= L/2 is
  rejected and retried at half the step, keeping every evaluation inside
  the box;
* a velocity query flagged "near node" rejects the step outright rather
  than integrating through a clamped value, because silently crossing a
  density node would break the non-crossing property of the flow.  If the
  rejections drive the step below ``h_min`` the trajectory fails loudly
  with its partial path attached.

Trajectories of states with non-differentiable profiles (the square
aperture) are supported but tolerance-fragile: their velocity fields
develop structure on every scale, so expect many more rejected steps and,
near recurrence fractions, outright node failures.

Each trajectory is independent; ensembles may fan out over worker
processes and are assembled in seed order, so results do not depend on
scheduling.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import DomainError, IntegrationError
from .fields import make_velocity_evaluator, rho as rho_field
from .spectral import SpectralState, recurrence_time

# Dormand-Prince 5(4): stage nodes, stage weights, error weights and the
# quartic dense-output matrix.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_ERR = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920,
                 -17253 / 339200, 22 / 525, -1 / 40])
_PDENSE = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_PI_BETA = 0.04                 # PI stabilization weight
_PI_EXPO = 0.2 - 0.75 * _PI_BETA


@dataclass(frozen=True)
class TrajectorySpec:
    """One trajectory: seed, horizon, tolerances and output grid.

    ``None`` tolerances resolve against the state when integrating:
    atol = 1e-10 L, h_min = 1e-12 tau_r, h_max = 1e-3 tau_r.
    """

    x0: float
    t_span: tuple[float, float]
    rtol: float = 1e-8
    atol: float | None = None
    h_min: float | None = None
    h_max: float | None = None
    sample_times: np.ndarray | None = None

    def resolve(self, state: SpectralState) -> "TrajectorySpec":
        well = state.well
        tau = recurrence_time(well)
        t0, t1 = self.t_span
        if not (math.isfinite(self.x0) and abs(self.x0) < 0.5 * well.L):
            raise DomainError(f"seed x0={self.x0} must satisfy |x0| < L/2")
        if not t1 > t0:
            raise DomainError(f"t_span must increase, got {self.t_span}")
        spec = self
        if spec.atol is None:
            spec = replace(spec, atol=1e-10 * well.L)
        if spec.h_min is None:
            spec = replace(spec, h_min=1e-12 * tau)
        if spec.h_max is None:
            spec = replace(spec, h_max=1e-3 * tau)
        if spec.rtol <= 0 or spec.atol <= 0 or spec.h_min <= 0 or spec.h_max <= spec.h_min:
            raise DomainError("tolerances and step bounds must be positive with h_max > h_min")
        if spec.sample_times is None:
            spec = replace(spec, sample_times=np.linspace(t0, t1, 801))
        ts = np.asarray(spec.sample_times, dtype=float)
        if ts.ndim != 1 or ts.size < 1 or np.any(np.diff(ts) <= 0):
            raise DomainError("sample_times must be strictly increasing")
        if ts[0] < t0 or ts[-1] > t1:
            raise DomainError("sample_times must lie within t_span")
        return replace(spec, sample_times=ts)


@dataclass
class IntegrationDiagnostics:
    n_accepted: int = 0
    n_rejected_error: int = 0
    n_rejected_wall: int = 0
    n_rejected_node: int = 0
    n_feval: int = 0
    smallest_step: float = math.inf
    largest_step: float = 0.0

    def as_dict(self) -> dict:
        return {
            "n_accepted": self.n_accepted,
            "n_rejected_error": self.n_rejected_error,
            "n_rejected_wall": self.n_rejected_wall,
            "n_rejected_node": self.n_rejected_node,
            "n_feval": self.n_feval,
            "smallest_step": None if math.isinf(self.smallest_step) else self.smallest_step,
            "largest_step": self.largest_step,
        }


@dataclass(frozen=True)
class Trajectory:
    """Sampled path of one seed, with integration diagnostics."""

    x0: float
    times: np.ndarray
    positions: np.ndarray
    diagnostics: IntegrationDiagnostics
    status: str = "ok"               # "ok" or "failed"
    failure_time: float | None = None


class _WallHit(Exception):
    pass


class _NodeHit(Exception):
    pass


def integrate_trajectory(state: SpectralState, spec: TrajectorySpec) -> Trajectory:
    """Integrate one Bohmian trajectory with the embedded 5(4) pair.

    Dense output (the quartic interpolant of the accepted steps) fills
    ``spec.sample_times``.  Raises ``IntegrationError`` carrying the
    partial path when step control underflows ``h_min``, which happens at
    density nodes the flow cannot be resolved through.
    """
    spec = spec.resolve(state)
    half = 0.5 * state.well.L
    evaluate = make_velocity_evaluator(state)
    diag = IntegrationDiagnostics()

    def f(t, x):
        if abs(x) >= half:
            raise _WallHit
        diag.n_feval += 1
        v, near = evaluate(t, x)
        if near:
            raise _NodeHit
        return v

    t0, t1 = spec.t_span
    ts = spec.sample_times
    out = np.full(ts.size, np.nan)
    n_out = 0
    if ts[0] == t0:
        out[0] = spec.x0
        n_out = 1

    t, y = t0, spec.x0
    K = np.empty(7)

    def fail(reason):
        raise IntegrationError(
            f"trajectory from x0={spec.x0} failed at t={t:.6g}: {reason}",
            failure_time=t, failure_position=y,
            partial_times=ts[:n_out].copy(), partial_positions=out[:n_out].copy())

    try:
        K[0] = f(t, y)
    except _WallHit:
        fail("seed at the wall")
    except _NodeHit:
        fail("seed sits on a density node")

    h = min(spec.h_max, (t1 - t0) / 100.0)
    facold = 1e-4
    while t < t1:
        final = h >= t1 - t
        h = min(h, t1 - t)
        if h < spec.h_min:
            fail(f"step size {h:.3e} underflowed h_min={spec.h_min:.3e}")
        try:
            for i in range(1, 6):
                yi = y + h * sum(a * K[j] for j, a in enumerate(_A[i]))
                K[i] = f(t + _C[i] * h, yi)
            y_new = y + h * float(np.dot(_B5[:6], K[:6]))
            if abs(y_new) >= half:
                raise _WallHit
            K[6] = f(t + h, y_new)
        except _WallHit:
            diag.n_rejected_wall += 1
            h *= 0.5
            continue
        except _NodeHit:
            diag.n_rejected_node += 1
            h *= 0.5
            continue

        scale = spec.atol + spec.rtol * max(abs(y), abs(y_new))
        err = abs(h * float(np.dot(_ERR, K))) / scale
        if err <= 1.0:
            # quartic dense output over [t, t+h]; the last step owns every
            # remaining sample so rounding in t+h cannot orphan the endpoint
            pending = ts > t if final else (ts > t) & (ts <= t + h)
            if np.any(pending):
                q = _PDENSE.T @ K                       # (4,)
                theta = (ts[pending] - t) / h
                poly = theta * (q[0] + theta * (q[1] + theta * (q[2] + theta * q[3])))
                vals = y + h * poly
                out[pending] = vals
                n_out = ts.size if final else int(np.searchsorted(ts, t + h, side="right"))
            diag.n_accepted += 1
            diag.smallest_step = min(diag.smallest_step, h)
            diag.largest_step = max(diag.largest_step, h)
            t, y = (t1, y_new) if final else (t + h, y_new)
            K[0] = K[6]                                  # FSAL
            if err == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * err ** (-_PI_EXPO) * facold ** _PI_BETA
                factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            facold = max(err, 1e-4)
            h = min(spec.h_max, h * factor)
        else:
            diag.n_rejected_error += 1
            h *= max(_MIN_FACTOR, min(1.0, _SAFETY * err ** -0.2))

    return Trajectory(spec.x0, ts, out, diag)


# ---------------------------------------------------------------------------
# ensembles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrajectoryEnsemble:
    """Ordered set of trajectories over one shared sample grid."""

    specs: tuple
    members: tuple                    # Trajectory, in seed order
    sample_times: np.ndarray
    ordering_tolerance: float
    max_order_violation: float

    @property
    def statuses(self) -> tuple:
        return tuple(m.status for m in self.members)

    @property
    def non_crossing_ok(self) -> bool:
        return self.max_order_violation <= self.ordering_tolerance

    def positions_matrix(self) -> np.ndarray:
        """(n_members, n_times); NaN past a member's failure point."""
        return np.vstack([m.positions for m in self.members])


def _run_member(args):
    state, spec = args
    try:
        return integrate_trajectory(state, spec)
    except IntegrationError as exc:
        nt = exc.partial_times.size if exc.partial_times is not None else 0
        ts = np.asarray(spec.sample_times, dtype=float)
        out = np.full(ts.size, np.nan)
        if nt:
            out[:nt] = exc.partial_positions
        return Trajectory(spec.x0, ts, out, IntegrationDiagnostics(),
                          status="failed", failure_time=exc.failure_time)


def integrate_ensemble(state: SpectralState, specs, jobs: int = 1,
                       ordering_tolerance: float | None = None) -> TrajectoryEnsemble:
    """Integrate an ordered family of seeds and check the non-crossing rule.

    Seeds must be strictly increasing and all specs must share one
    ``sample_times`` grid (order statements only make sense at shared
    times).  Member failures do not abort the run; they are reported in
    the member status and excluded from the ordering check.
    """
    specs = [s.resolve(state) for s in specs]
    if len(specs) == 0:
        raise DomainError("empty ensemble")
    x0s = np.array([s.x0 for s in specs])
    if np.any(np.diff(x0s) <= 0):
        raise DomainError("seeds must be strictly increasing (duplicates are invalid)")
    ts0 = specs[0].sample_times
    for s in specs[1:]:
        if s.sample_times.shape != ts0.shape or not np.array_equal(s.sample_times, ts0):
            raise DomainError("all ensemble members must share the same sample_times")
    if ordering_tolerance is None:
        ordering_tolerance = 1e-6 * state.well.L

    work = [(state, s) for s in specs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            members = list(pool.map(_run_member, work))
    else:
        members = [_run_member(w) for w in work]

    ok = [m for m in members if m.status == "ok"]
    violation = 0.0
    if len(ok) >= 2:
        mat = np.vstack([m.positions for m in ok])
        gaps = np.diff(mat, axis=0)           # successor minus predecessor
        violation = float(max(0.0, -np.nanmin(gaps)))
    return TrajectoryEnsemble(tuple(specs), tuple(members), ts0,
                              float(ordering_tolerance), violation)


# ---------------------------------------------------------------------------
# seeding
# ---------------------------------------------------------------------------

def seed_uniform(n: int, a: float, well=None) -> np.ndarray:
    """n evenly spaced seeds on [-a, a], half-spacing off the endpoints.

    The half-spacing offset keeps seeds away from the exact endpoints and,
    for even n, away from the stagnation line x = 0 (where v = 0 at all
    times).  For odd n an extra quarter-spacing shift is applied to the
    whole set, since an evenly spaced symmetric odd set necessarily
    contains 0; this trades exact symmetry for a zero-free set.
    """
    if n < 1:
        raise DomainError(f"need n >= 1 seeds, got {n}")
    if a <= 0:
        raise DomainError(f"half-width a must be positive, got {a}")
    if well is not None and a >= 0.5 * well.L:
        raise DomainError(f"half-width a={a} must be below L/2={0.5 * well.L}")
    spacing = 2.0 * a / n
    seeds = -a + (np.arange(n) + 0.5) * spacing
    if n % 2 == 1:
        seeds = seeds + 0.25 * spacing
    return seeds


def seed_density_weighted(state: SpectralState, n: int,
                          n_segments: int = 256) -> np.ndarray:
    """Seeds at the quantiles (i - 1/2)/n of the initial density.

    The cumulative distribution of rho(x, 0) is accumulated by quadrature
    over a fixed segmentation of the box and each quantile is located with
    monotone root-finding.  An ensemble seeded this way histograms to the
    Born rule, unlike the uniform seeding used for border diagnostics.
    """
    if n < 1:
        raise DomainError(f"need n >= 1 seeds, got {n}")
    half = 0.5 * state.well.L
    dens = lambda s: rho_field(state, s, 0.0)
    edges = np.linspace(-half, half, n_segments + 1)
    seg = np.array([quad(dens, edges[i], edges[i + 1], epsabs=1e-12, limit=200)[0]
                    for i in range(n_segments)])
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    if not (math.isfinite(total) and total > 1e-300):
        raise DomainError("degenerate density: cannot build quantile seeds")

    def cdf(xq):
        i = min(np.searchsorted(edges, xq, side="right") - 1, n_segments - 1)
        return (cum[i] + quad(dens, edges[i], xq, epsabs=1e-12, limit=200)[0]) / total

    seeds = np.empty(n)
    for i in range(n):
        q = (i + 0.5) / n
        seeds[i] = brentq(lambda xq: cdf(xq) - q, -half, half, xtol=1e-12)
    return seeds


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def export_trajectories(ensemble: TrajectoryEnsemble, csv_path) -> None:
    """Long-format CSV `traj_id,t,x` over the shared sample grid."""
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["traj_id", "t", "x"])
        for tid, member in enumerate(ensemble.members):
            for tv, xv in zip(member.times, member.positions):
                if math.isnan(xv):
                    continue
                writer.writerow([tid, repr(float(tv)), repr(float(xv))])


def ensemble_diagnostics(ensemble: TrajectoryEnsemble) -> dict:
    """JSON-ready diagnostics for a whole run."""
    return {
        "n_members": len(ensemble.members),
        "statuses": list(ensemble.statuses),
        "ordering_tolerance": ensemble.ordering_tolerance,
        "max_order_violation": ensemble.max_order_violation,
        "non_crossing_ok": ensemble.non_crossing_ok,
        "members": [
            {"x0": m.x0, "status": m.status, "failure_time": m.failure_time,
             **m.diagnostics.as_dict()}
            for m in ensemble.members
        ],
    }
