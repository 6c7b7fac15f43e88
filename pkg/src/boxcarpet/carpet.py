"""Space-time rasters ("quantum carpets") and their symmetry metrics.

A carpet is the density (or velocity, or quantum potential) evaluated on a
tensor grid [-L/2, L/2] x [0, T].  Axes are built by explicit mirroring so
that index pairs satisfy x[nx-1-i] = -x[i] and t[nt-1-j] = T - t[j]
bit-exactly; the mirror and time-reversal metrics then compare grid values
at exactly mirrored indices and carry no interpolation error.

Beyond rendering, this module computes:

* the autocorrelation A(t) = sum |c_alpha|^2 e^{-i E_alpha t / hbar} in
  coefficient space (no spatial quadrature), whose magnitude returns to
  P_N at every multiple of the recurrence time for even states;
* a fractional-revival check at tau_r/2, where the density of an even
  localized state splits into two half-weight copies of the initial
  density centered at -L/4 and +L/4.  The displaced copies are evaluated
  analytically at shifted arguments (zero outside the box), never by
  interpolation.

Grid evaluation is embarrassingly parallel; work is chunked over fixed
column blocks so outputs are bit-identical for any worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .fields import NODE_FLOOR_REL, psi_grid, rho_and_flux_grid, velocity_cap
from .spectral import SpectralState, overlap_probability, recurrence_time

GRID_KINDS = ("density", "velocity", "quantum_potential")

#: fixed chunk width (t columns) for parallel evaluation; independent of jobs
_CHUNK = 128


def mirrored_axis(lo: float, hi: float, n: int) -> np.ndarray:
    """n points from lo to hi with exact pair symmetry about the midpoint."""
    if n < 2:
        raise DomainError(f"axis needs at least 2 points, got {n}")
    if not hi > lo:
        raise DomainError(f"axis range must increase, got [{lo}, {hi}]")
    idx = np.arange(n, dtype=float)
    base = lo + (hi - lo) * idx / (n - 1)
    out = np.empty(n)
    h = n // 2
    out[:h] = base[:h]
    out[n - h:] = (lo + hi) - out[:h][::-1]
    if n % 2 == 1:
        out[h] = 0.5 * (lo + hi)
    return out


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """Raster of one scalar field with axis metadata.

    ``values`` has shape (nx, nt): first index runs over x, second over t.
    For velocity grids ``flags`` marks near-node samples (capped values).
    ``clip`` is the rendering range applied at export time; stored values
    are raw.
    """

    kind: str
    x_axis: np.ndarray
    t_axis: np.ndarray
    values: np.ndarray
    clip: tuple[float, float]
    flags: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in GRID_KINDS:
            raise DomainError(f"kind must be one of {GRID_KINDS}")
        if np.any(np.diff(self.x_axis) <= 0) or np.any(np.diff(self.t_axis) <= 0):
            raise DomainError("grid axes must be strictly increasing")
        if self.values.shape != (self.x_axis.size, self.t_axis.size):
            raise DomainError("values shape must be (nx, nt)")
        if self.kind == "density" and np.any(self.values < 0):
            raise DomainError("density grid contains negative values")

    @property
    def nx(self) -> int:
        return int(self.x_axis.size)

    @property
    def nt(self) -> int:
        return int(self.t_axis.size)


def _eval_chunks(state, x_axis, t_axis, jobs, kernel):
    """Apply kernel(t_chunk) -> tuple of column blocks over fixed chunks."""
    nt = t_axis.size
    starts = range(0, nt, _CHUNK)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda s: kernel(t_axis[s:s + _CHUNK]), starts))
    else:
        parts = [kernel(t_axis[s:s + _CHUNK]) for s in starts]
    return tuple(np.concatenate(blocks, axis=1) for blocks in zip(*parts))


def render_grid(state: SpectralState, kind: str, nx: int, nt: int,
                T: float | None = None, clip: tuple[float, float] | None = None,
                jobs: int = 1) -> FieldGrid:
    """Evaluate one field on the [-L/2, L/2] x [0, T] tensor grid.

    T defaults to the recurrence time.  Default clips follow the reference
    rendering: density from 0 to half its grid maximum, velocity from -1
    to +1.  Near-node velocity samples are capped and flagged.
    """
    if kind not in GRID_KINDS:
        raise DomainError(f"kind must be one of {GRID_KINDS}")
    if nx < 2 or nt < 2:
        raise DomainError("grids need nx >= 2 and nt >= 2")
    if T is None:
        T = recurrence_time(state.well)
    if not (math.isfinite(T) and T > 0):
        raise DomainError(f"grid horizon T must be positive, got {T}")
    half = 0.5 * state.well.L
    x_axis = mirrored_axis(-half, half, nx)
    t_axis = mirrored_axis(0.0, T, nt)

    flags = None
    if kind == "density":
        (vals,) = _eval_chunks(state, x_axis, t_axis, jobs,
                               lambda tc: (np.abs(psi_grid(state, x_axis, tc)) ** 2,))
        if clip is None:
            clip = (0.0, 0.5 * float(vals.max()))
    elif kind == "velocity":
        rho_vals, j_vals = _eval_chunks(state, x_axis, t_axis, jobs,
                                        lambda tc: rho_and_flux_grid(state, x_axis, tc))
        floor = NODE_FLOOR_REL * float(rho_vals.max())
        cap = velocity_cap(state)
        flags = rho_vals < floor
        safe = np.where(rho_vals > 0.0, rho_vals, 1.0)
        vals = j_vals / safe
        vals = np.where(rho_vals > 0.0, vals, np.sign(j_vals) * cap)
        vals = np.clip(vals, -cap, cap)
        if clip is None:
            clip = (-1.0, 1.0)
    else:
        from .fields import quantum_potential
        def kernel(tc):
            block = np.empty((nx, tc.size))
            fl = np.empty((nx, tc.size), dtype=bool)
            for j, tv in enumerate(tc):
                block[:, j], fl[:, j] = quantum_potential(state, x_axis, tv,
                                                          return_flags=True)
            return block, fl
        vals, flags = _eval_chunks(state, x_axis, t_axis, jobs, kernel)
        if clip is None:
            good = vals[~flags] if flags.any() else vals
            clip = (float(good.min()), float(good.max()))
    return FieldGrid(kind, x_axis, t_axis, vals, clip, flags)


# ---------------------------------------------------------------------------
# coefficient-space recurrence diagnostics
# ---------------------------------------------------------------------------

def autocorrelation(state: SpectralState, t):
    """Overlap of the evolved state with the initial one:
    A(t) = sum |c_alpha|^2 e^{-i E_alpha t/hbar}.  A(0) = P_N."""
    w = np.abs(state.coefficients) ** 2
    t_arr = np.asarray(t, dtype=float)
    phases = np.exp(-1j * np.multiply.outer(t_arr, state.energies) / state.well.hbar)
    out = phases @ w
    return out if np.ndim(t) else complex(out)


@dataclass(frozen=True)
class FractionalRevivalResult:
    """Outcome of the two-copy check at tau_r/2."""

    split_error: float | None
    rho0_max: float | None
    skipped: bool
    reason: str | None = None

    @property
    def relative_error(self) -> float | None:
        if self.skipped or not self.rho0_max:
            return None
        return self.split_error / self.rho0_max


def fractional_revival_check(state: SpectralState, nx: int = 1001) -> FractionalRevivalResult:
    """Residual of rho(x, tau_r/2) against the displaced half-weight copies.

    Compares the half-time density with
    0.5 rho0(x - L/4) + 0.5 rho0(x + L/4), where rho0 is the initial
    density of the same truncated state evaluated analytically at the
    shifted argument and zero outside the box.  Skipped (with a notice)
    when the copies would overlap (w > L/2), the state is not even-parity,
    or the state is a single stationary mode.
    """
    well = state.well
    if state.parity != "even":
        return FractionalRevivalResult(None, None, True, "state is not even-parity")
    if state.n_modes == 1:
        return FractionalRevivalResult(None, None, True,
                                       "single stationary mode: density never splits")
    if well.w > 0.5 * well.L:
        return FractionalRevivalResult(None, None, True,
                                       f"copies overlap for w={well.w} > L/2={0.5 * well.L}")
    half = 0.5 * well.L
    x = mirrored_axis(-half, half, nx)
    t_half = 0.5 * recurrence_time(well)
    rho_half = np.abs(psi_grid(state, x, np.array([t_half]))[:, 0]) ** 2

    def rho0_shifted(arg):
        vals = np.zeros_like(arg)
        inside = np.abs(arg) <= half
        if np.any(inside):
            vals[inside] = np.abs(psi_grid(state, arg[inside], np.array([0.0]))[:, 0]) ** 2
        return vals

    target = 0.5 * rho0_shifted(x - 0.25 * well.L) + 0.5 * rho0_shifted(x + 0.25 * well.L)
    rho0_max = float(np.abs(psi_grid(state, x, np.array([0.0]))[:, 0]).max() ** 2)
    err = float(np.max(np.abs(rho_half - target)))
    return FractionalRevivalResult(err, rho0_max, False)


# ---------------------------------------------------------------------------
# symmetry report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryReport:
    """Grid-measured symmetry and recurrence metrics of one state."""

    mirror_error: float
    time_reversal_error: float
    revival_fidelity: float
    half_time_split_error: float | None
    rho_max: float
    nx: int
    nt: int

    def as_dict(self) -> dict:
        return {
            "mirror_error": self.mirror_error,
            "time_reversal_error": self.time_reversal_error,
            "revival_fidelity": self.revival_fidelity,
            "half_time_split_error": self.half_time_split_error,
            "rho_max": self.rho_max,
            "nx": self.nx,
            "nt": self.nt,
        }


def symmetry_report(state: SpectralState, nx: int = 501, nt: int = 501,
                    jobs: int = 1) -> SymmetryReport:
    """Mirror, time-reversal and revival metrics over one recurrence period.

    The density grid spans [0, tau_r] with nt odd and nx odd so that the
    mirrored pairs (x, -x) and (tau_r/2 - t, tau_r/2 + t) both exist
    exactly on the grid; asymmetric grids are rejected.

    * ``mirror_error``: max |rho(x,t) - rho(-x,t)| over the grid.
    * ``time_reversal_error``: max |rho(x, tau_r/2 - t) - rho(x, tau_r/2 + t)|.
    * ``revival_fidelity``: |A(tau_r)|^2 / P_N^2, 1 for a full revival.
    * ``half_time_split_error``: two-copy residual at tau_r/2 (None when
      that check is skipped).
    """
    if nx < 3 or nx % 2 == 0 or nt < 3 or nt % 2 == 0:
        raise DomainError("symmetry grids must have odd nx >= 3 and odd nt >= 3 "
                          "so mirrored index pairs exist exactly")
    grid = render_grid(state, "density", nx, nt, T=recurrence_time(state.well),
                       jobs=jobs)
    vals = grid.values
    mirror = float(np.max(np.abs(vals - vals[::-1, :])))
    treversal = float(np.max(np.abs(vals - vals[:, ::-1])))
    p = overlap_probability(state)
    fidelity = float(abs(autocorrelation(state, recurrence_time(state.well))) ** 2 / p ** 2)
    frc = fractional_revival_check(state, nx)
    return SymmetryReport(mirror, treversal, fidelity,
                          None if frc.skipped else frc.split_error,
                          float(vals.max()), nx, nt)


# ---------------------------------------------------------------------------
# raster export
# ---------------------------------------------------------------------------

def write_pgm(grid: FieldGrid, pgm_path, json_path=None, state=None) -> None:
    """16-bit binary PGM (P5) plus a JSON sidecar.

    Rows are written top-to-bottom with decreasing t (t increases upward,
    as noted in the sidecar); within a row x runs fastest.  Values are
    clipped to ``grid.clip`` and scaled to 0..65535.
    """
    lo, hi = grid.clip
    if not hi > lo:
        raise DomainError(f"degenerate clip range {grid.clip}")
    scaled = (np.clip(grid.values, lo, hi) - lo) / (hi - lo)
    pixels = np.round(scaled * 65535.0).astype(">u2")
    with open(pgm_path, "wb") as fh:
        fh.write(f"P5\n{grid.nx} {grid.nt}\n65535\n".encode("ascii"))
        # values is (nx, nt); emit one row per time, last time first
        fh.write(np.ascontiguousarray(pixels.T[::-1, :]).tobytes())
    if json_path is not None:
        sidecar = {
            "kind": grid.kind,
            "nx": grid.nx,
            "nt": grid.nt,
            "x_range": [float(grid.x_axis[0]), float(grid.x_axis[-1])],
            "T": float(grid.t_axis[-1]),
            "clip": [float(lo), float(hi)],
            "row_order": "t decreasing from top (t increases upward)",
            "n_flagged": int(grid.flags.sum()) if grid.flags is not None else 0,
        }
        if state is not None:
            sidecar["L"] = state.well.L
            sidecar["tau_r"] = recurrence_time(state.well)
            sidecar["P_N"] = overlap_probability(state)
        with open(json_path, "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")


def grid_to_csv(grid: FieldGrid, csv_path) -> None:
    """Raw matrix dump: header row of t values, then one row per x."""
    with open(csv_path, "w", newline="") as fh:
        fh.write("x\\t," + ",".join(repr(float(t)) for t in grid.t_axis) + "\n")
        for i, xv in enumerate(grid.x_axis):
            fh.write(repr(float(xv)) + ","
                     + ",".join(repr(float(v)) for v in grid.values[i, :]) + "\n")
