"""Box geometry and the initial aperture profiles.

The physical setup is a particle of mass m confined to |x| <= L/2 by hard
walls, prepared at t = 0 in a localized state f(x) supported on an aperture
of width w centered at the origin.  Six analytic aperture profiles are
provided (square, triangle, parabola, half-cosine, half-cosine squared and
Gaussian), each L2-normalized on its support, together with the closed-form
projections of each profile onto the even cavity eigenfunctions
sqrt(2/L) cos(pi*alpha*x/L), alpha odd.  A tabulated (possibly complex)
profile is supported for use with the quadrature projector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# Relative magnitude of the resonant denominator below which the closed-form
# degenerate branch replaces the generic expression (avoids catastrophic
# cancellation when k_alpha hits k0 or 2*k0 exactly).
DEGENERATE_SWITCH_TOL = 1e-9

ANALYTIC_KINDS = (
    "square",
    "triangle",
    "parabola",
    "half_cosine",
    "half_cosine_squared",
    "gaussian",
)


@dataclass(frozen=True)
class WellConfig:
    """Physical parameters of the box and aperture.

    Attributes
    ----------
    L : float
        Box length; the walls sit at x = -L/2 and x = +L/2.
    w : float
        Aperture width; the initial profile lives on |x| <= w/2.
    m : float
        Particle mass.
    hbar : float
        Action constant (1.0 in the natural units used throughout).
    """

    L: float
    w: float
    m: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("L", "w", "m", "hbar"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a positive finite number, got {v!r}")
        if self.w > self.L:
            raise DomainError(f"aperture width w={self.w} exceeds box length L={self.L}")

    @property
    def half_length(self) -> float:
        return 0.5 * self.L

    def as_dict(self) -> dict:
        return {"L": self.L, "w": self.w, "m": self.m, "hbar": self.hbar}


def _sinc(x: np.ndarray) -> np.ndarray:
    """Unnormalized sinc: sin(x)/x with sinc(0) = 1."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = x != 0.0
    out[nz] = np.sin(x[nz]) / x[nz]
    return out


@dataclass(frozen=True, eq=False)
class ApertureShape:
    """One of the six analytic aperture profiles, or a tabulated one.

    Construct through the factory classmethods (``ApertureShape.square()``,
    ``.gaussian(sigma0=...)``, ``.sampled(x, f)``, ...).  Analytic profiles
    are real, even, unit-norm on their support and vanish for |x| > w/2
    (the Gaussian extends over the whole line but is negligible beyond the
    box for the default width sigma0 = w/(2*pi)).
    """

    kind: str
    sigma0: float | None = None       # gaussian only; None -> w/(2*pi)
    sample_x: np.ndarray | None = field(default=None, repr=False)
    sample_f: np.ndarray | None = field(default=None, repr=False)

    # -- factories ---------------------------------------------------------

    @classmethod
    def square(cls) -> "ApertureShape":
        return cls("square")

    @classmethod
    def triangle(cls) -> "ApertureShape":
        return cls("triangle")

    @classmethod
    def parabola(cls) -> "ApertureShape":
        return cls("parabola")

    @classmethod
    def half_cosine(cls) -> "ApertureShape":
        return cls("half_cosine")

    @classmethod
    def half_cosine_squared(cls) -> "ApertureShape":
        return cls("half_cosine_squared")

    @classmethod
    def gaussian(cls, sigma0: float | None = None) -> "ApertureShape":
        if sigma0 is not None and sigma0 <= 0:
            raise DomainError(f"sigma0 must be positive, got {sigma0}")
        return cls("gaussian", sigma0=sigma0)

    @classmethod
    def sampled(cls, x: np.ndarray, f: np.ndarray) -> "ApertureShape":
        """Tabulated profile f(x_i); may be complex-valued."""
        x = np.asarray(x, dtype=float)
        f = np.asarray(f)
        if x.ndim != 1 or x.size < 2 or f.shape != x.shape:
            raise DomainError("sampled profile needs matching 1-D x and f arrays")
        if np.any(np.diff(x) <= 0):
            raise DomainError("sample abscissae must be strictly increasing")
        f = f.astype(complex) if np.iscomplexobj(f) else f.astype(float)
        x = x.copy()
        x.setflags(write=False)
        f = f.copy()
        f.setflags(write=False)
        return cls("sampled", sample_x=x, sample_f=f)

    @classmethod
    def from_name(cls, name: str, sigma0: float | None = None) -> "ApertureShape":
        key = name.strip().lower().replace("-", "_").replace(" ", "_")
        if key == "gaussian":
            return cls.gaussian(sigma0)
        if key in ANALYTIC_KINDS:
            return cls(key)
        raise DomainError(f"unknown shape {name!r}; choose from "
                          f"{', '.join(ANALYTIC_KINDS)} or build a sampled profile")

    # -- properties --------------------------------------------------------

    def __post_init__(self):
        if self.kind not in ANALYTIC_KINDS + ("sampled",):
            raise DomainError(f"unknown shape kind {self.kind!r}")

    @property
    def is_analytic(self) -> bool:
        return self.kind != "sampled"

    def resolved_sigma0(self, well: WellConfig) -> float:
        """Gaussian width; defaults to w/(2*pi) so the profile tracks the
        half-cosine squared one near the origin."""
        if self.kind != "gaussian":
            raise DomainError("sigma0 is only defined for the gaussian shape")
        return self.sigma0 if self.sigma0 is not None else well.w / (2.0 * np.pi)

    # -- evaluation --------------------------------------------------------

    def profile(self, x, well: WellConfig):
        """Evaluate the initial profile f(x).

        Returns zero outside the aperture for the compact shapes; the
        Gaussian is evaluated everywhere.  Sampled profiles are linearly
        interpolated and are zero outside their tabulated range.
        """
        x = np.asarray(x, dtype=float)
        w = well.w
        if self.kind == "sampled":
            xs, fs = self.sample_x, self.sample_f
            if np.iscomplexobj(fs):
                out = (np.interp(x, xs, fs.real, left=0.0, right=0.0)
                       + 1j * np.interp(x, xs, fs.imag, left=0.0, right=0.0))
            else:
                out = np.interp(x, xs, fs, left=0.0, right=0.0)
            # np.interp clamps instead of zeroing at the exact ends; fix tails
            out = np.where((x < xs[0]) | (x > xs[-1]), 0.0, out)
            return out
        if self.kind == "gaussian":
            s0 = self.resolved_sigma0(well)
            return (2.0 * np.pi * s0 ** 2) ** (-0.25) * np.exp(-x ** 2 / (4.0 * s0 ** 2))

        inside = np.abs(x) <= 0.5 * w
        out = np.zeros_like(x)
        xi = x[inside]
        if self.kind == "square":
            out[inside] = 1.0 / np.sqrt(w)
        elif self.kind == "triangle":
            out[inside] = np.sqrt(3.0 / w) * (1.0 - 2.0 * np.abs(xi) / w)
        elif self.kind == "parabola":
            out[inside] = np.sqrt(15.0 / (8.0 * w)) * (1.0 - (2.0 * xi / w) ** 2)
        elif self.kind == "half_cosine":
            out[inside] = np.sqrt(2.0 / w) * np.cos(np.pi * xi / w)
        elif self.kind == "half_cosine_squared":
            out[inside] = np.sqrt(8.0 / (3.0 * w)) * np.cos(np.pi * xi / w) ** 2
        return out

    def analytic_coefficients(self, alphas, well: WellConfig) -> np.ndarray:
        """Closed-form projections onto the even eigenfunctions.

        Parameters
        ----------
        alphas : array of odd positive integers
            Mode indices alpha = 2n - 1 of the cosine eigenfunctions.
        well : WellConfig

        Returns
        -------
        ndarray of float
            c_alpha for each requested mode.

        Notes
        -----
        The half-cosine expression has a removable singularity at
        k_alpha = k0 = pi/w and the half-cosine squared one at
        k_alpha = 2*k0; both are replaced by their exact limits
        (sqrt(w/L) and sqrt(w/(3L))) whenever the resonant denominator
        drops below ``DEGENERATE_SWITCH_TOL`` in relative magnitude.
        """
        if self.kind == "sampled":
            raise DomainError("analytic coefficients are unavailable for sampled "
                              "profiles; use coefficients_quadrature")
        alphas = np.asarray(alphas)
        if np.any(alphas < 1):
            raise DomainError("mode indices must be >= 1")
        if np.any(alphas % 2 == 0):
            raise DomainError("analytic shapes are even: coefficients exist only "
                              "for odd alpha")
        L, w = well.L, well.w
        k = np.pi * alphas.astype(float) / L
        kw2 = 0.5 * k * w

        if self.kind == "square":
            return np.sqrt(2.0 * w / L) * _sinc(kw2)

        if self.kind == "triangle":
            return np.sqrt(1.5 * w / L) * _sinc(0.5 * kw2) ** 2

        if self.kind == "parabola":
            return (4.0 / w) * np.sqrt(15.0 / (w * L)) / k ** 2 * (_sinc(kw2) - np.cos(kw2))

        if self.kind == "half_cosine":
            k0 = np.pi / w
            den = k0 ** 2 - k ** 2
            degenerate = np.abs(den) < DEGENERATE_SWITCH_TOL * k0 ** 2
            safe = np.where(degenerate, 1.0, den)
            generic = (4.0 / np.sqrt(L * w)) * k0 * np.cos(kw2) / safe
            return np.where(degenerate, np.sqrt(w / L), generic)

        if self.kind == "half_cosine_squared":
            k0 = np.pi / w
            den = (2.0 * k0) ** 2 - k ** 2
            degenerate = np.abs(den) < DEGENERATE_SWITCH_TOL * (2.0 * k0) ** 2
            safe = np.where(degenerate, 1.0, den)
            generic = np.sqrt(4.0 * w / (3.0 * L)) * (2.0 * k0) ** 2 / safe * _sinc(kw2)
            return np.where(degenerate, np.sqrt(w / (3.0 * L)), generic)

        # gaussian; normalized on the infinite line, not the box (the
        # truncation deficit is recorded in state metadata, not renormalized)
        s0 = self.resolved_sigma0(well)
        return np.sqrt(2.0 / L) * (8.0 * np.pi * s0 ** 2) ** 0.25 * np.exp(-(s0 * k) ** 2)

    def box_norm_deficit(self, well: WellConfig) -> float:
        """1 - integral of |f|^2 over the box; nonzero only for the Gaussian."""
        if self.kind != "gaussian":
            return 0.0
        s0 = self.resolved_sigma0(well)
        return math.erfc(well.L / (2.0 * math.sqrt(2.0) * s0))

    @property
    def name(self) -> str:
        return self.kind
