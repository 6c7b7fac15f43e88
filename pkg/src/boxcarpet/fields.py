"""Pointwise evaluation of the evolved wavefunction and its derived fields.

Everything here is an explicit function of a ``SpectralState``: the
wavefunction psi(x,t) evolves each mode by its phase e^{-i E t / hbar}
(no time stepping anywhere), the density is rho = |psi|^2, and the guidance
velocity is v = J / rho with the probability current
J = (hbar/m) Im(psi* dpsi/dx).

Two evaluation routes exist for rho and v.  The fast O(N) route accumulates
psi and its spatial derivative once and forms the quotients; the O(N^2)
modal route evaluates the coherence double sums

    rho = sum_{a,a'} |c_a||c_a'| phi_a phi_a' cos(w_aa' t + d_a' - d_a)
    v   = (hbar/m) [sum |c_a||c_a'| k_a sin(k_a x) cos(k_a' x)
                     sin(w_aa' t + d_a' - d_a)] / [same cosine sum]

term by term (the second form as written applies to even-parity states;
mixed parity substitutes the actual eigenfunctions).  The two routes agree
to rounding and the modal one serves as the structural oracle in the tests.

Velocity denominators vanish at density nodes.  Samples with
rho < 1e-12 * (reference density scale) are flagged "near node" and their
velocity is capped at magnitude 1e12 * hbar/(m L) so rasters never see NaN
or infinity; trajectory integration treats the flag as a step-rejection
signal instead (see ``bohm``).

Negative times are accepted everywhere (the evolution is unitary), which
the time-reversal symmetry tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .spectral import SpectralState

#: relative density floor below which a sample counts as "near node"
NODE_FLOOR_REL = 1e-12

#: |v| cap (in units of hbar/(m L)) applied to flagged samples
VELOCITY_CAP_SCALE = 1e12


# ---------------------------------------------------------------------------
# basis plumbing
# ---------------------------------------------------------------------------

def _check_x(state: SpectralState, x):
    x_arr = np.atleast_1d(np.asarray(x, dtype=float))
    half = 0.5 * state.well.L
    if np.any(np.abs(x_arr) > half * (1.0 + 1e-12)):
        raise DomainError(f"position outside the box |x| <= {half}")
    return x_arr


def _basis(state: SpectralState, x_arr: np.ndarray, derivatives: int = 0):
    """phi(x) (and spatial derivatives) for every mode: shape (nx, N).

    Even-parity states use cosines, odd-parity sines; mixed states select
    per mode.
    """
    k = state.wavenumbers
    amp = np.sqrt(2.0 / state.well.L)
    kx = np.outer(x_arr, k)
    cos, sin = np.cos(kx), np.sin(kx)
    if state.parity == "even":
        phi, dphi = amp * cos, -amp * sin * k
    elif state.parity == "odd":
        phi, dphi = amp * sin, amp * cos * k
    else:
        odd = state.alphas % 2 == 1
        phi = amp * np.where(odd, cos, sin)
        dphi = amp * np.where(odd, -sin, cos) * k
    if derivatives == 0:
        return (phi,)
    if derivatives == 1:
        return phi, dphi
    return phi, dphi, -phi * k ** 2


def _phases(state: SpectralState, t: float) -> np.ndarray:
    """Per-mode evolved amplitudes c_alpha e^{-i E_alpha t / hbar}."""
    return state.coefficients * np.exp(-1j * state.energies * (t / state.well.hbar))


def density_scale(state: SpectralState) -> float:
    """Upper bound (2/L)(sum |c_alpha|)^2 on the density, used as the
    reference for the node floor in point queries."""
    return float((2.0 / state.well.L) * np.sum(np.abs(state.coefficients)) ** 2)


def velocity_cap(state: SpectralState) -> float:
    return VELOCITY_CAP_SCALE * state.well.hbar / (state.well.m * state.well.L)


# ---------------------------------------------------------------------------
# wavefunction and density
# ---------------------------------------------------------------------------

def psi(state: SpectralState, x, t: float):
    """Evolved wavefunction sum_alpha c_alpha phi_alpha(x) e^{-i E_alpha t/hbar}."""
    x_arr = _check_x(state, x)
    (phi,) = _basis(state, x_arr)
    out = phi @ _phases(state, t)
    return out if np.ndim(x) else complex(out[0])


def psi_dx(state: SpectralState, x, t: float):
    """Spatial derivative of the wavefunction (term-wise differentiation)."""
    x_arr = _check_x(state, x)
    _, dphi = _basis(state, x_arr, derivatives=1)
    out = dphi @ _phases(state, t)
    return out if np.ndim(x) else complex(out[0])


def rho(state: SpectralState, x, t: float, method: str = "amplitude"):
    """Probability density.

    method="amplitude" forms |psi|^2 from the O(N) accumulation;
    method="coherence" evaluates the O(N^2) double sum over mode pairs
    (diagonal weights plus oscillating coherence terms) directly.  Both
    are exposed so they can be checked against each other.
    """
    if method == "amplitude":
        x_arr = _check_x(state, x)
        (phi,) = _basis(state, x_arr)
        val = np.abs(phi @ _phases(state, t)) ** 2
        return val if np.ndim(x) else float(val[0])
    if method == "coherence":
        return rho_coherence(state, x, t)
    raise DomainError(f"unknown rho method {method!r}")


def rho_coherence(state: SpectralState, x, t: float):
    """Density via the pairwise coherence sum (O(N^2) oracle route).

    For real coefficients this is the cosine-cosine-cosine form: the
    time-independent diagonal sum plus cos(omega_{a,a'} t) coherence terms;
    complex coefficients contribute their phase differences inside the
    cosine.
    """
    x_arr = _check_x(state, x)
    (phi,) = _basis(state, x_arr)
    mag = np.abs(state.coefficients)
    delta = np.angle(state.coefficients)
    omega = (state.energies[:, None] - state.energies[None, :]) / state.well.hbar
    # M_aa' = |c_a||c_a'| cos(w_aa' t + d_a' - d_a)
    M = (mag[:, None] * mag[None, :]) * np.cos(omega * t + delta[None, :] - delta[:, None])
    val = np.einsum("xi,ij,xj->x", phi, M, phi)
    return val if np.ndim(x) else float(val[0])


def drho_dt(state: SpectralState, x, t: float):
    """Analytic time derivative of the density (term-wise differentiation)."""
    x_arr = _check_x(state, x)
    (phi,) = _basis(state, x_arr)
    a = _phases(state, t)
    p = phi @ a
    dp_dt = phi @ (a * (-1j * state.energies / state.well.hbar))
    val = 2.0 * (p.conjugate() * dp_dt).real
    return val if np.ndim(x) else float(val[0])


# ---------------------------------------------------------------------------
# current and velocity
# ---------------------------------------------------------------------------

def flux(state: SpectralState, x, t: float):
    """Probability current J = (hbar/m) Im(psi* dpsi/dx)."""
    x_arr = _check_x(state, x)
    phi, dphi = _basis(state, x_arr, derivatives=1)
    a = _phases(state, t)
    p = phi @ a
    dp = dphi @ a
    val = (state.well.hbar / state.well.m) * (p.conjugate() * dp).imag
    return val if np.ndim(x) else float(val[0])


def _velocity_from_rho_j(state, rho_vals, j_vals, rho_floor):
    cap = velocity_cap(state)
    near = rho_vals < rho_floor
    safe = np.where(rho_vals > 0.0, rho_vals, 1.0)
    v = j_vals / safe
    v = np.where(rho_vals > 0.0, v, np.sign(j_vals) * cap)
    v = np.clip(v, -cap, cap)
    return v, near


def velocity(state: SpectralState, x, t: float, *, rho_floor: float | None = None,
             return_flags: bool = False):
    """Guidance velocity v = J / rho (fast O(N) route).

    Near-node samples (rho below the floor) are flagged and the reported
    value is capped; no NaN or infinity ever escapes.  The default floor is
    ``NODE_FLOOR_REL`` times the state's density scale.
    """
    x_arr = _check_x(state, x)
    phi, dphi = _basis(state, x_arr, derivatives=1)
    a = _phases(state, t)
    p = phi @ a
    dp = dphi @ a
    rho_vals = (p.conjugate() * p).real
    j_vals = (state.well.hbar / state.well.m) * (p.conjugate() * dp).imag
    if rho_floor is None:
        rho_floor = NODE_FLOOR_REL * density_scale(state)
    v, near = _velocity_from_rho_j(state, rho_vals, j_vals, rho_floor)
    if not np.ndim(x):
        v, near = float(v[0]), bool(near[0])
    if return_flags:
        return v, near
    return v


def velocity_modal(state: SpectralState, x, t: float):
    """Guidance velocity via the pairwise modal sums (O(N^2) oracle route).

    Evaluates the double-sum quotient with explicit beat frequencies and
    coefficient phase shifts; reduces to the plain
    sin(k x)cos(k' x)sin(w t) / cos(k x)cos(k' x)cos(w t) form for real
    coefficients.  No node handling: intended for probing points where the
    density is healthy.
    """
    x_arr = _check_x(state, x)
    phi, dphi = _basis(state, x_arr, derivatives=1)
    mag = np.abs(state.coefficients)
    delta = np.angle(state.coefficients)
    omega = (state.energies[:, None] - state.energies[None, :]) / state.well.hbar
    arg = omega * t + delta[None, :] - delta[:, None]
    mm = mag[:, None] * mag[None, :]
    num = np.einsum("xi,ij,xj->x", phi, mm * np.sin(arg), dphi)
    den = np.einsum("xi,ij,xj->x", phi, mm * np.cos(arg), phi)
    val = state.well.hbar / state.well.m * num / den
    return val if np.ndim(x) else float(val[0])


# ---------------------------------------------------------------------------
# quantum potential and continuity
# ---------------------------------------------------------------------------

def quantum_potential(state: SpectralState, x, t: float, *,
                      rho_floor: float | None = None, return_flags: bool = False):
    """Quantum potential Q = -(hbar^2/2m) (sqrt(rho))'' / sqrt(rho).

    Computed as Q = -(hbar^2/2m) [ rho''/(2 rho) - (rho'/rho)^2 / 4 ] with
    rho' and rho'' assembled from the analytic series derivatives of psi.
    Near-node samples are flagged; there the density in the denominators is
    clamped to the floor so the returned value stays finite.
    """
    x_arr = _check_x(state, x)
    phi, dphi, ddphi = _basis(state, x_arr, derivatives=2)
    a = _phases(state, t)
    p = phi @ a
    dp = dphi @ a
    ddp = ddphi @ a
    rho_vals = (p.conjugate() * p).real
    drho = 2.0 * (p.conjugate() * dp).real
    ddrho = 2.0 * (p.conjugate() * ddp).real + 2.0 * (dp.conjugate() * dp).real
    if rho_floor is None:
        rho_floor = NODE_FLOOR_REL * density_scale(state)
    near = rho_vals < rho_floor
    r = np.maximum(rho_vals, rho_floor)
    pref = state.well.hbar ** 2 / (2.0 * state.well.m)
    q = -pref * (0.5 * ddrho / r - 0.25 * (drho / r) ** 2)
    if not np.ndim(x):
        q, near = float(q[0]), bool(near[0])
    if return_flags:
        return q, near
    return q


def continuity_residual(state: SpectralState, x: float, t: float,
                        h_x: float, h_t: float,
                        time_derivative: str = "fd") -> float:
    """Central-difference residual of d(rho)/dt + d(J)/dx at one point.

    ``time_derivative`` selects the finite-difference time term ("fd") or
    the analytic term-wise one ("analytic") for cross-checking.  Vanishes
    identically for stationary states and at second order in the stencil
    sizes otherwise.
    """
    if h_x <= 0.0 or h_t <= 0.0:
        raise DomainError("stencil sizes must be positive")
    half = 0.5 * state.well.L
    if abs(x) + h_x > half:
        raise DomainError("spatial stencil leaves the box")
    if time_derivative == "fd":
        dt_term = (rho(state, x, t + h_t) - rho(state, x, t - h_t)) / (2.0 * h_t)
    elif time_derivative == "analytic":
        dt_term = drho_dt(state, x, t)
    else:
        raise DomainError(f"unknown time_derivative {time_derivative!r}")
    dx_term = (flux(state, x + h_x, t) - flux(state, x - h_x, t)) / (2.0 * h_x)
    return float(dt_term + dx_term)


# ---------------------------------------------------------------------------
# samples and grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldSample:
    """All local fields at one (x, t) point."""

    x: float
    t: float
    psi: complex
    rho: float
    v: float
    q: float | None
    near_node: bool


def sample(state: SpectralState, x: float, t: float,
           include_quantum_potential: bool = True,
           rho_floor: float | None = None) -> FieldSample:
    """Evaluate psi, rho, v (and optionally Q) at one point."""
    p = psi(state, x, t)
    v, near = velocity(state, x, t, rho_floor=rho_floor, return_flags=True)
    q = None
    if include_quantum_potential:
        q, near_q = quantum_potential(state, x, t, rho_floor=rho_floor,
                                      return_flags=True)
        near = near or near_q
    return FieldSample(float(x), float(t), p, float(abs(p) ** 2), v, q, near)


def psi_grid(state: SpectralState, x_axis: np.ndarray, t_axis: np.ndarray) -> np.ndarray:
    """Wavefunction on the tensor grid; shape (nx, nt)."""
    x_arr = _check_x(state, x_axis)
    (phi,) = _basis(state, x_arr)
    A = state.coefficients[:, None] * np.exp(
        -1j * np.outer(state.energies, np.asarray(t_axis, dtype=float)) / state.well.hbar)
    return phi @ A


def rho_and_flux_grid(state: SpectralState, x_axis, t_axis):
    """Density and current on the tensor grid; each (nx, nt)."""
    x_arr = _check_x(state, x_axis)
    phi, dphi = _basis(state, x_arr, derivatives=1)
    A = state.coefficients[:, None] * np.exp(
        -1j * np.outer(state.energies, np.asarray(t_axis, dtype=float)) / state.well.hbar)
    P = phi @ A
    dP = dphi @ A
    rho_vals = (P.conjugate() * P).real
    j_vals = (state.well.hbar / state.well.m) * (P.conjugate() * dP).imag
    return rho_vals, j_vals


def make_velocity_evaluator(state: SpectralState, rho_floor: float | None = None):
    """Fast scalar evaluator v(t, x) -> (velocity, near_node) for integrators.

    Closes over the state arrays once; each call costs a handful of
    length-N vector operations.
    """
    k = state.wavenumbers
    E_over_h = state.energies / state.well.hbar
    c = state.coefficients
    amp2 = 2.0 / state.well.L  # |phi|^2 normalization folds out of v, kept for rho floor
    hbar_m = state.well.hbar / state.well.m
    cap = velocity_cap(state)
    if rho_floor is None:
        rho_floor = NODE_FLOOR_REL * density_scale(state)
    parity = state.parity
    odd = state.alphas % 2 == 1

    def evaluate(t: float, x: float):
        kx = k * x
        cos, sin = np.cos(kx), np.sin(kx)
        a = c * np.exp(-1j * E_over_h * t)
        if parity == "even":
            p = np.dot(a, cos)
            dp = -np.dot(a * k, sin)
        elif parity == "odd":
            p = np.dot(a, sin)
            dp = np.dot(a * k, cos)
        else:
            p = np.dot(a, np.where(odd, cos, sin))
            dp = np.dot(a * k, np.where(odd, -sin, cos))
        rho_val = amp2 * (p.real * p.real + p.imag * p.imag)
        j_val = amp2 * hbar_m * (p.real * dp.imag - p.imag * dp.real)
        if rho_val < rho_floor:
            if rho_val <= 0.0:
                return float(np.sign(j_val)) * cap, True
            return float(np.clip(j_val / rho_val, -cap, cap)), True
        return j_val / rho_val, False

    return evaluate
