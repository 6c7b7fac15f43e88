"""Eigenfunction expansion of a localized state in the infinite well.

Hard walls at x = +/- L/2 admit the orthonormal eigenfunctions

    phi_alpha(x) = sqrt(2/L) cos(k_alpha x)   (alpha odd,  even parity)
    phi_alpha(x) = sqrt(2/L) sin(k_alpha x)   (alpha even, odd parity)

with k_alpha = pi*alpha/L and E_alpha = (hbar*k_alpha)^2 / (2m).  A localized
initial profile f(x) is represented by the truncated superposition
sum_alpha c_alpha phi_alpha(x), where c_alpha is the overlap integral of
phi_alpha with f.  This module builds those coefficient sets (closed forms
for the analytic shapes, adaptive quadrature otherwise) and provides the
convergence and spread diagnostics used to compare shapes, masses and box
sizes: the truncated weight P_N, the truncated energy expectation <H>_N,
the power-law decay exponent of the weights, and the count of modes whose
weight stays within a percentage band of the leading one.

All functions are pure; ``SpectralState`` is immutable after construction.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np
from scipy.integrate import quad

from .errors import AccuracyError, DomainError, FitError
from .well import ApertureShape, WellConfig

#: default absolute tolerance per coefficient for the quadrature projector
QUADRATURE_EPSABS = 1e-10

#: dead-parity coefficients below this magnitude are dropped as pure noise
PARITY_TOL = 1e-9

_PARITIES = ("even", "odd", "mixed")


# ---------------------------------------------------------------------------
# elementary spectral quantities
# ---------------------------------------------------------------------------

def _check_alpha(alpha):
    a = np.asarray(alpha)
    if not np.issubdtype(a.dtype, np.integer):
        if not np.all(a == np.floor(a)):
            raise DomainError(f"mode index must be an integer, got {alpha!r}")
        a = a.astype(int)
    if np.any(a < 1):
        raise DomainError(f"mode index must be >= 1, got {alpha!r}")
    return a if a.ndim else int(a)


def wavenumber(alpha, well: WellConfig):
    """k_alpha = pi*alpha/L: an integer number of half wavelengths fits in L."""
    a = _check_alpha(alpha)
    return np.pi * np.asarray(a, dtype=float) / well.L if np.ndim(a) else np.pi * a / well.L


def energy(alpha, well: WellConfig):
    """Eigenvalue E_alpha = pi^2 hbar^2 alpha^2 / (2 m L^2)."""
    a = _check_alpha(alpha)
    af = np.asarray(a, dtype=float)
    E = (np.pi * well.hbar * af / well.L) ** 2 / (2.0 * well.m)
    return E if np.ndim(a) else float(E)


def eigenfunction(alpha, x, well: WellConfig):
    """Evaluate phi_alpha(x): cosine for odd alpha, sine for even alpha.

    Raises ``DomainError`` outside the box.  Vanishes at the walls to
    machine precision.
    """
    a = _check_alpha(alpha)
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.abs(x_arr) > 0.5 * well.L):
        raise DomainError(f"position outside the box |x| <= {0.5 * well.L}")
    k = np.pi * np.asarray(a, dtype=float) / well.L
    amp = math.sqrt(2.0 / well.L)
    if np.ndim(a):
        out = np.where(np.asarray(a) % 2 == 1,
                       amp * np.cos(np.multiply.outer(k, x_arr).T).T,
                       amp * np.sin(np.multiply.outer(k, x_arr).T).T)
        return out
    if a % 2 == 1:
        val = amp * np.cos(k * x_arr)
    else:
        val = amp * np.sin(k * x_arr)
    return val if np.ndim(x) else float(val)


def beat_frequency(alpha, alpha_prime, well: WellConfig):
    """Angular beat frequency omega = (E_alpha - E_alpha') / hbar.

    Antisymmetric under index exchange and zero for equal indices.
    """
    return (energy(alpha, well) - energy(alpha_prime, well)) / well.hbar


def recurrence_time(well: WellConfig) -> float:
    """Revival period tau_r = m L^2 / (2 pi hbar).

    Smallest time after which every relative phase omega_{alpha,alpha'} t of
    an even-parity superposition has advanced by a multiple of 2*pi, so the
    density repeats exactly.  Independent of the aperture shape and width.
    """
    return well.m * well.L ** 2 / (2.0 * np.pi * well.hbar)


# ---------------------------------------------------------------------------
# the coefficient container
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpectralState:
    """Truncated coefficient set {(alpha, c_alpha)} over the well eigenbasis.

    Together with its ``WellConfig`` this fully determines the evolved
    wavefunction.  Entries are stored sorted by alpha; even-parity states
    hold only odd alpha (cosine modes), odd-parity states only even alpha.
    Immutable: the arrays are read-only views.
    """

    well: WellConfig
    alphas: np.ndarray
    coefficients: np.ndarray
    parity: str
    shape_name: str | None = None
    metadata: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=np.int64)
        coeffs = np.asarray(self.coefficients, dtype=complex)
        if alphas.ndim != 1 or coeffs.shape != alphas.shape or alphas.size == 0:
            raise DomainError("alphas and coefficients must be matching non-empty 1-D arrays")
        if np.any(alphas < 1) or np.any(np.diff(alphas) <= 0):
            raise DomainError("mode indices must be >= 1 and strictly increasing")
        if self.parity not in _PARITIES:
            raise DomainError(f"parity must be one of {_PARITIES}")
        odd = alphas % 2 == 1
        if self.parity == "even" and not np.all(odd):
            raise DomainError("even-parity states may only hold odd alpha (cosine modes)")
        if self.parity == "odd" and np.any(odd):
            raise DomainError("odd-parity states may only hold even alpha (sine modes)")
        total = float(np.sum(np.abs(coeffs) ** 2))
        if total > 1.0 + 1e-12:
            raise DomainError(f"total weight {total} exceeds 1 (profile not normalized?)")
        alphas.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "coefficients", coeffs)
        if not isinstance(self.metadata, MappingProxyType):
            object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))
        # cached derived arrays (state is frozen afterwards)
        k = np.pi * alphas.astype(float) / self.well.L
        E = (self.well.hbar * k) ** 2 / (2.0 * self.well.m)
        k.setflags(write=False)
        E.setflags(write=False)
        object.__setattr__(self, "_k", k)
        object.__setattr__(self, "_E", E)

    def __reduce__(self):
        # MappingProxyType does not pickle; rebuild through the constructor
        return (SpectralState, (self.well, np.array(self.alphas),
                                np.array(self.coefficients), self.parity,
                                self.shape_name, dict(self.metadata)))

    # -- views -------------------------------------------------------------

    @property
    def n_modes(self) -> int:
        return int(self.alphas.size)

    @property
    def wavenumbers(self) -> np.ndarray:
        return self._k

    @property
    def energies(self) -> np.ndarray:
        return self._E

    @property
    def is_real(self) -> bool:
        scale = float(np.max(np.abs(self.coefficients))) or 1.0
        return float(np.max(np.abs(self.coefficients.imag))) <= 1e-13 * scale

    def entries(self):
        """List of (alpha, c_alpha) pairs."""
        return list(zip(self.alphas.tolist(), self.coefficients.tolist()))

    def with_coefficients(self, coefficients) -> "SpectralState":
        """Same basis, new amplitudes (used for phase tests and controls)."""
        return SpectralState(self.well, self.alphas.copy(), np.asarray(coefficients),
                             self.parity, self.shape_name, dict(self.metadata))


# ---------------------------------------------------------------------------
# building states
# ---------------------------------------------------------------------------

def even_alphas(n_modes: int) -> np.ndarray:
    """First n odd indices alpha = 2n - 1 (cosine branch)."""
    if n_modes < 1:
        raise DomainError(f"n_modes must be >= 1, got {n_modes}")
    return 2 * np.arange(1, n_modes + 1, dtype=np.int64) - 1


def coefficients_analytic(shape: ApertureShape, n_modes: int,
                          well: WellConfig) -> SpectralState:
    """Closed-form expansion of one of the six analytic shapes.

    Returns the first ``n_modes`` even-parity coefficients c_{2n-1}.  The
    coefficients depend on w/L only, never on the mass, so states built for
    different masses are bit-identical.

    Raises
    ------
    DomainError
        For sampled profiles (project those with ``coefficients_quadrature``).
    """
    alphas = even_alphas(n_modes)
    c = shape.analytic_coefficients(alphas, well)
    meta = {"builder": "analytic"}
    if shape.kind == "gaussian":
        meta["sigma0"] = shape.resolved_sigma0(well)
        # normalized on the infinite line; the box misses this much weight
        meta["box_norm_deficit"] = shape.box_norm_deficit(well)
    return SpectralState(well, alphas, c.astype(complex), "even",
                         shape_name=shape.kind, metadata=meta)


def _weighted_quad(f, a: float, b: float, k: float, trig: str, epsabs: float):
    """integral of f(x)*cos(kx) or f(x)*sin(kx) over [a, b] via QUADPACK.

    Raises ``AccuracyError`` when the reported error estimate misses the
    requested tolerance by more than a factor of ten.
    """
    val, err = quad(f, a, b, weight=trig, wvar=k,
                    epsabs=epsabs, epsrel=0.0, limit=400)
    if err > 10.0 * epsabs:
        raise AccuracyError(
            f"projection quadrature did not converge (k={k:g}): "
            f"error estimate {err:.2e} > {10.0 * epsabs:.2e}",
            value=val, error_estimate=err)
    return val


def _project(f, alphas: np.ndarray, well: WellConfig, epsabs: float,
             support: tuple[float, float], is_complex: bool) -> np.ndarray:
    """c_alpha = integral of phi_alpha * f over the support interval."""
    amp = math.sqrt(2.0 / well.L)
    a, b = support
    out = np.empty(alphas.size, dtype=complex)
    for i, al in enumerate(alphas):
        k = np.pi * float(al) / well.L
        trig = "cos" if al % 2 == 1 else "sin"
        re = _weighted_quad(lambda x: np.real(f(x)), a, b, k, trig, epsabs)
        im = _weighted_quad(lambda x: np.imag(f(x)), a, b, k, trig, epsabs) if is_complex else 0.0
        out[i] = amp * (re + 1j * im)
    return out


def coefficients_quadrature(profile, n_modes: int, well: WellConfig, *,
                            epsabs: float = QUADRATURE_EPSABS,
                            support: tuple[float, float] | None = None,
                            parity: str = "auto") -> SpectralState:
    """Project an arbitrary profile onto the eigenbasis by adaptive quadrature.

    Parameters
    ----------
    profile : callable or ApertureShape
        f(x), integrable on |x| <= L/2; may return complex values.  An
        ``ApertureShape`` (including sampled ones) is evaluated through its
        ``profile`` method over its natural support.
    n_modes : int
        Modes per parity branch: cosine modes alpha = 1, 3, ..., 2n-1 and,
        unless the profile turns out even, sine modes alpha = 2, 4, ..., 2n.
    epsabs : float
        Absolute tolerance per coefficient (oscillatory-weight QUADPACK
        rule, so individual coefficients spanning many orders of magnitude
        are each resolved to this tolerance).
    support : (a, b), optional
        Integration interval; defaults to the shape's aperture or the box.
    parity : {"auto", "even", "odd", "both"}
        "auto" computes both branches and drops one when every coefficient
        in it is below ``PARITY_TOL``; forcing a parity skips the other
        branch entirely.

    Raises
    ------
    AccuracyError
        If any coefficient quadrature misses its tolerance (carries the
        achieved estimate).
    """
    if n_modes < 1:
        raise DomainError(f"n_modes must be >= 1, got {n_modes}")
    if parity not in ("auto", "even", "odd", "both"):
        raise DomainError("parity must be auto, even, odd or both")

    shape_name = None
    if isinstance(profile, ApertureShape):
        shape = profile
        shape_name = shape.kind
        f = lambda x: shape.profile(x, well)
        if support is None:
            support = ((-0.5 * well.L, 0.5 * well.L) if shape.kind == "gaussian"
                       else (-0.5 * well.w, 0.5 * well.w))
            if shape.kind == "sampled":
                support = (float(shape.sample_x[0]), float(shape.sample_x[-1]))
    elif callable(profile):
        f = profile
        if support is None:
            support = (-0.5 * well.L, 0.5 * well.L)
    else:
        raise DomainError("profile must be a callable or an ApertureShape")
    if not (-0.5 * well.L <= support[0] < support[1] <= 0.5 * well.L):
        raise DomainError(f"support {support} must lie inside the box")

    is_complex = bool(np.iscomplexobj(np.asarray(f(np.array([0.25 * (support[0] + support[1])])))))

    cos_alphas = even_alphas(n_modes)
    sin_alphas = 2 * np.arange(1, n_modes + 1, dtype=np.int64)
    c_cos = (_project(f, cos_alphas, well, epsabs, support, is_complex)
             if parity in ("auto", "even", "both") else None)
    c_sin = (_project(f, sin_alphas, well, epsabs, support, is_complex)
             if parity in ("auto", "odd", "both") else None)

    meta = {"builder": "quadrature", "epsabs": epsabs,
            "support": (float(support[0]), float(support[1]))}
    if parity == "auto":
        cos_dead = float(np.max(np.abs(c_cos)))
        sin_dead = float(np.max(np.abs(c_sin)))
        if sin_dead <= PARITY_TOL:
            meta["dropped_sine_max_abs"] = sin_dead
            c_sin = None
        elif cos_dead <= PARITY_TOL:
            meta["dropped_cosine_max_abs"] = cos_dead
            c_cos = None
    if c_sin is None:
        alphas, coeffs, par = cos_alphas, c_cos, "even"
    elif c_cos is None:
        alphas, coeffs, par = sin_alphas, c_sin, "odd"
    else:
        alphas = np.concatenate([cos_alphas, sin_alphas])
        coeffs = np.concatenate([c_cos, c_sin])
        order = np.argsort(alphas)
        alphas, coeffs, par = alphas[order], coeffs[order], "mixed"

    return SpectralState(well, alphas, coeffs, par, shape_name=shape_name,
                         metadata=meta)


# ---------------------------------------------------------------------------
# convergence and spread diagnostics
# ---------------------------------------------------------------------------

def overlap_probability(state: SpectralState, upto: int | None = None) -> float:
    """Truncated weight P_N = sum of the first N |c_alpha|^2.

    Monotone non-decreasing in N and bounded by 1; measures how much of the
    exact profile the truncated superposition captures.
    """
    n = state.n_modes if upto is None else int(upto)
    if not 1 <= n <= state.n_modes:
        raise DomainError(f"upto must be in [1, {state.n_modes}], got {upto}")
    return float(np.sum(np.abs(state.coefficients[:n]) ** 2))


def expected_energy(state: SpectralState, upto: int | None = None) -> float:
    """Energy expectation of the truncated state:
    <H>_N = sum |c_alpha|^2 E_alpha / P_N."""
    n = state.n_modes if upto is None else int(upto)
    p = overlap_probability(state, n)
    if p <= 0.0:
        raise DomainError("truncated weight is zero; energy expectation undefined")
    weights = np.abs(state.coefficients[:n]) ** 2
    return float(np.dot(weights, state.energies[:n]) / p)


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares envelope fit of log |c|^2 against log n.

    ``slope`` is the fitted decay exponent beta in |c_n|^2 ~ n^beta.  The
    fit is declared non-power-law when the slopes of the two halves of the
    envelope differ by more than ``CURVATURE_TOL`` (super-polynomial decay
    bends strongly in log-log space; a genuine power law does not).
    """

    slope: float
    intercept: float
    n_points: int
    slope_first_half: float
    slope_second_half: float
    indices: tuple

    CURVATURE_TOL = 1.0

    @property
    def is_power_law(self) -> bool:
        return abs(self.slope_first_half - self.slope_second_half) <= self.CURVATURE_TOL


def _lstsq_slope(lx: np.ndarray, ly: np.ndarray) -> tuple[float, float]:
    A = np.vstack([lx, np.ones_like(lx)]).T
    sol, *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(sol[0]), float(sol[1])


def decay_exponent(state: SpectralState, fit_range: tuple[int, int] = (10, 100),
                   min_points: int = 5) -> PowerLawFit:
    """Fit the decay of the weights |c_n|^2 over ordinal range n in fit_range.

    Oscillatory weight sequences (sinc-like zeros) would corrupt a naive
    fit, so only the local maxima of |c_n|^2 inside the range enter; for
    monotone sequences, which have no interior maxima, every nonzero weight
    in range is used instead.

    Raises
    ------
    FitError
        Fewer than ``min_points`` usable envelope points.
    """
    lo, hi = fit_range
    if lo < 1 or hi <= lo:
        raise DomainError(f"bad fit range {fit_range}")
    w = np.abs(state.coefficients) ** 2
    n_ord = np.arange(1, state.n_modes + 1)
    hi = min(hi, state.n_modes)
    in_range = (n_ord >= lo) & (n_ord <= hi)
    idx = np.where(in_range)[0]
    if idx.size < min_points:
        raise FitError(f"only {idx.size} modes in range {fit_range}")

    peaks = [i for i in idx[1:-1]
             if w[i] > 0.0 and w[i] >= w[i - 1] and w[i] >= w[i + 1]]
    if len(peaks) < min_points:
        peaks = [i for i in idx if w[i] > 0.0]
    if len(peaks) < min_points:
        raise FitError(f"only {len(peaks)} usable envelope points in range {fit_range}")

    lx = np.log(n_ord[peaks].astype(float))
    ly = np.log(w[peaks])
    slope, intercept = _lstsq_slope(lx, ly)
    h = len(peaks) // 2
    s1, _ = _lstsq_slope(lx[:h], ly[:h])
    s2, _ = _lstsq_slope(lx[h:], ly[h:])
    return PowerLawFit(slope, intercept, len(peaks), s1, s2,
                       tuple(int(n_ord[i]) for i in peaks))


def spread_count(state: SpectralState, threshold: float = 25.0) -> int:
    """Number of modes whose weight stays within ``threshold`` percent of
    the leading one.

    Uses Delta_1,alpha = (1 - |c_alpha|^2/|c_1|^2) * 100% and counts entries
    with 0 <= Delta <= threshold.  The leading mode itself (Delta = 0) is
    included.  Modes heavier than the leading one (Delta < 0) do not count.
    """
    c = state.coefficients
    w1 = abs(c[0]) ** 2
    if w1 == 0.0:
        raise DomainError("leading coefficient vanishes; spread is undefined")
    delta = (1.0 - np.abs(c) ** 2 / w1) * 100.0
    return int(np.sum((delta >= 0.0) & (delta <= threshold)))


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def export_coefficients(state: SpectralState, csv_path, json_path=None) -> None:
    """Write `alpha,re_c,im_c,weight,energy` rows plus a JSON sidecar."""
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "re_c", "im_c", "weight", "energy"])
        for al, c, E in zip(state.alphas, state.coefficients, state.energies):
            writer.writerow([int(al), repr(float(c.real)), repr(float(c.imag)),
                             repr(float(abs(c) ** 2)), repr(float(E))])
    if json_path is not None:
        sidecar = dict(state.well.as_dict())
        sidecar.update({
            "shape": state.shape_name,
            "N": state.n_modes,
            "parity": state.parity,
            "P_N": overlap_probability(state),
            "H_N": expected_energy(state),
            "tau_r": recurrence_time(state.well),
        })
        with open(json_path, "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")
