"""Marchenko-Pastur law in the gamma = p/n parameterization, and its affine images.

The continuous density is gamma/(2 pi x) * sqrt((b - x)(x - a)) on [a, b]
with a = (1 - 1/sqrt(gamma))^2, b = (1 + 1/sqrt(gamma))^2, plus an atom of
mass (1 - gamma) at 0 when gamma < 1. This is the limiting spectral law of
the Gram matrix X^T X for columns normalized to E||X||^2 = 1.

The closed-form Stieltjes transform is derived by mapping to the standard
sample-covariance parameterization with ratio lambda = 1/gamma, where m
solves lambda z m^2 + (z + lambda - 1) m + 1 = 0; the root is selected by
the Herglotz property (Im m > 0), not by a principal-branch convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DerivativeError
from .kernels import KernelSpec, linearization_coefficients


def mp_support(gamma: float) -> tuple[float, float]:
    """Endpoints [a, b] of the continuous part."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    r = 1.0 / np.sqrt(gamma)
    return float((1.0 - r) ** 2), float((1.0 + r) ** 2)


def mp_atom_mass(gamma: float) -> float:
    """Mass of the atom at 0; nonzero only for gamma < 1."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return float(max(0.0, 1.0 - gamma))


def mp_density(gamma: float, x) -> np.ndarray | float:
    """Continuous density; the atom at 0 is reported separately."""
    a, b = mp_support(gamma)
    x_arr = np.asarray(x, dtype=float)
    inside = (x_arr > a) & (x_arr < b)
    out = np.zeros_like(x_arr)
    xs = x_arr[inside]
    out[inside] = gamma / (2.0 * np.pi * xs) * np.sqrt((b - xs) * (xs - a))
    return out if np.ndim(x) else float(out)


@lru_cache(maxsize=32)
def _mp_cdf_table(gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Cached continuous-part CDF grid via the theta substitution.

    With x(theta) = a + (b - a) sin^2(theta) the integrand is smooth on
    [0, pi/2] even at gamma = 1 where the density has an inverse-sqrt
    edge, so a dense trapezoid rule is accurate to ~1e-9.
    """
    a, b = mp_support(gamma)
    theta = np.linspace(0.0, np.pi / 2.0, 4001)
    s2 = np.sin(theta) ** 2
    den = a + (b - a) * s2
    # limit of sin^2/den as both vanish (only possible when a = 0)
    ratio = np.divide(s2, den, out=np.full_like(s2, 1.0 / (b - a)), where=den > 0)
    integrand = gamma * (b - a) ** 2 / np.pi * ratio * np.cos(theta) ** 2
    dtheta = theta[1] - theta[0]
    cdf = np.concatenate(([0.0], np.cumsum(
        0.5 * (integrand[1:] + integrand[:-1]) * dtheta)))
    xs = a + (b - a) * s2
    return xs, cdf


def _mp_continuous_cdf(gamma: float, x) -> np.ndarray:
    xs, cdf = _mp_cdf_table(gamma)
    x_arr = np.asarray(x, dtype=float)
    return np.interp(x_arr, xs, cdf, left=0.0, right=float(cdf[-1]))


def mp_cdf(gamma: float, x) -> np.ndarray | float:
    """Right-continuous CDF including the atom at 0."""
    x_arr = np.asarray(x, dtype=float)
    out = _mp_continuous_cdf(gamma, x_arr) + mp_atom_mass(gamma) * (x_arr >= 0.0)
    return out if np.ndim(x) else float(out)


def _mp_cdf_left(gamma: float, x) -> np.ndarray:
    """Left limit of the CDF (atom counted only strictly below x)."""
    x_arr = np.asarray(x, dtype=float)
    return _mp_continuous_cdf(gamma, x_arr) + mp_atom_mass(gamma) * (x_arr > 0.0)


def mp_stieltjes(gamma: float, z) -> np.ndarray | complex:
    """Stieltjes transform m(z) of the full law (atom included), Im z > 0."""
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    z_arr = np.asarray(z, dtype=complex)
    if np.any(z_arr.imag <= 0):
        raise ValueError("mp_stieltjes requires Im z > 0")
    lam = 1.0 / gamma
    disc = np.sqrt((z_arr - 1.0 - lam) ** 2 - 4.0 * lam)
    m_plus = ((1.0 - lam) - z_arr + disc) / (2.0 * lam * z_arr)
    m_minus = ((1.0 - lam) - z_arr - disc) / (2.0 * lam * z_arr)
    m = np.where(m_plus.imag > m_minus.imag, m_plus, m_minus)
    if np.any(m.imag <= 0):
        raise ArithmeticError("no Herglotz root found; this should not happen "
                              "for Im z > 0")
    return m if np.ndim(z) else complex(m)


@dataclass(frozen=True)
class AffineMPLaw:
    """Image of the MP law under x -> shift + scale * x.

    scale = 0 marks the degenerate case: the law collapses to a unit atom
    at the shift. Otherwise the continuous part lives on the mapped
    support (reversed when scale < 0) and the MP atom at 0 is transported
    to the shift with mass (1 - gamma) * 1{gamma < 1}.
    """

    gamma: float
    shift: float
    scale: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    @property
    def degenerate(self) -> bool:
        return self.scale == 0.0

    @property
    def atom_mass(self) -> float:
        return 1.0 if self.degenerate else mp_atom_mass(self.gamma)

    @property
    def atom_location(self) -> float:
        return self.shift

    @property
    def atoms(self) -> tuple[tuple[float, float], ...]:
        if self.atom_mass > 0.0:
            return ((self.atom_location, self.atom_mass),)
        return ()

    @property
    def support(self) -> tuple[float, float]:
        if self.degenerate:
            return (self.shift, self.shift)
        a, b = mp_support(self.gamma)
        lo, hi = self.shift + self.scale * a, self.shift + self.scale * b
        return (min(lo, hi), max(lo, hi))

    def _pullback(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.shift) / self.scale

    def density(self, x) -> np.ndarray | float:
        """Continuous density at x (atoms excluded)."""
        x_arr = np.asarray(x, dtype=float)
        if self.degenerate:
            out = np.zeros_like(x_arr)
        else:
            out = np.asarray(mp_density(self.gamma, self._pullback(x_arr)))
            out = out / abs(self.scale)
        return out if np.ndim(x) else float(out)

    def cdf(self, x) -> np.ndarray | float:
        x_arr = np.asarray(x, dtype=float)
        if self.degenerate:
            out = (x_arr >= self.shift).astype(float)
        elif self.scale > 0:
            out = np.asarray(mp_cdf(self.gamma, self._pullback(x_arr)))
        else:
            out = 1.0 - _mp_cdf_left(self.gamma, self._pullback(x_arr))
        return out if np.ndim(x) else float(out)

    def stieltjes(self, z) -> np.ndarray | complex:
        """Transform of the pushforward: (1/scale) m_MP((z - shift)/scale)."""
        z_arr = np.asarray(z, dtype=complex)
        if np.any(z_arr.imag <= 0):
            raise ValueError("stieltjes requires Im z > 0")
        if self.degenerate:
            m = 1.0 / (self.shift - z_arr)
        else:
            w = (z_arr - self.shift) / self.scale
            if self.scale > 0:
                m = mp_stieltjes(self.gamma, w) / self.scale
            else:
                m = np.conjugate(mp_stieltjes(self.gamma, np.conjugate(w))) / self.scale
        return m if np.ndim(z) else complex(m)

    def to_record(self) -> dict:
        return {
            "type": "affine-mp",
            "gamma": self.gamma,
            "shift": self.shift,
            "scale": self.scale,
            "atom_mass": self.atom_mass,
            "atom_location": self.atom_location,
        }


def predicted_law(spec: KernelSpec, gamma: float) -> AffineMPLaw:
    """Affine MP image (or degenerate atom) predicted for spec's model.

    The shift/scale come from the linearization theorems:
    inner/keep distances the spectrum by f(1) - f(0) - f'(0) and scales by
    f'(0); inner/zero shifts by -f(0) - f'(0); the distance kernel shifts
    by f(0) - f(2) + 2 f'(2) and scales by -2 f'(2). A vanishing scale
    degenerates the law to an atom at the shift.
    """
    try:
        alpha, beta = linearization_coefficients(spec, p=1)
    except DerivativeError as exc:
        raise DerivativeError(
            f"predicted law for {spec.label()} needs envelope derivatives: {exc}"
        ) from exc
    return AffineMPLaw(gamma=float(gamma), shift=float(alpha), scale=float(beta))
