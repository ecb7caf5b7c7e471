"""Knapp-type boxes, restriction norms on the graph and exponent arithmetic.

The test functions are indicators of anisotropic boxes
E_eps = [0, eps^-alpha1] x [0, eps^-alpha2] x [0, eps^-m]^2, whose Fourier
transforms factor into four one-dimensional integrals. Restricted to the graph
over a small dilate of a fixed patch, the transform is bounded below and its
L^q norm scales with a predictable power of eps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .core import SectorRegion, SurfaceMap, Weights
from .errors import InvalidArgument, PreconditionViolated
from .fits import ScalingFit, fit_loglog
from .fourier import Frequency4

MIN_EPS = 2.0 ** -12
SIN1 = math.sin(1.0)


def default_s_band(r: SectorRegion) -> tuple[float, float]:
    """Middle third of (c, d)."""
    third = (r.d - r.c) / 3.0
    return r.c + third, r.d - third


def patch_measure(w: Weights, s_band) -> float:
    """Lebesgue measure of Q = {t.(1,s) : 1/2 <= t <= 1, s in s_band}."""
    a1, a2, _ = w.floats()
    a = a1 + a2
    return a1 * (s_band[1] - s_band[0]) * (1.0 - 2.0 ** -a) / a


def _patch_grid(w: Weights, scale: float, s_band, n: int = 64):
    a1, a2, _ = w.floats()
    t = scale * np.linspace(0.5, 1.0, n)
    s = np.linspace(s_band[0], s_band[1], n)
    T, S = np.meshgrid(t, s, indexing="ij")
    return T**a1, T**a2 * S


def eta_admissible(phi: SurfaceMap, w: Weights, eta: float, s_band, n: int = 64) -> bool:
    """|phi| < 1 on eta.Q and eta^alpha2 * s_band inside [-1, 1]."""
    if not 0 < eta < 1:
        return False
    a2 = float(w.alpha2)
    if eta**a2 * max(abs(s_band[0]), abs(s_band[1])) > 1.0:
        return False
    x1, x2 = _patch_grid(w, eta, s_band, n)
    f1, f2 = phi(x1, x2)
    return bool(np.all(np.hypot(f1, f2) < 1.0))


def find_eta(phi: SurfaceMap, w: Weights, s_band, iters: int = 60) -> float:
    """Half of the largest admissible eta in (0, 1), located by bisection."""
    lo, hi = 0.0, 1.0
    if not eta_admissible(phi, w, 1e-6, s_band):
        raise PreconditionViolated("no admissible eta down to 1e-6")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid > 0 and eta_admissible(phi, w, mid, s_band):
            lo = mid
        else:
            hi = mid
    return 0.5 * lo


@dataclass(frozen=True)
class KnappBox:
    epsilon: float
    eta: float
    s_band: tuple[float, float]

    @classmethod
    def build(cls, phi: SurfaceMap, w: Weights, r: SectorRegion, epsilon: float,
              eta: Optional[float] = None, s_band=None) -> "KnappBox":
        if not 0 < epsilon < 1:
            raise InvalidArgument(f"epsilon must lie in (0, 1), got {epsilon}")
        band = tuple(float(v) for v in (s_band or default_s_band(r)))
        if not r.c < band[0] < band[1] < r.d:
            raise InvalidArgument(f"s_band {band} must sit strictly inside ({r.c}, {r.d})")
        if eta is None:
            eta = find_eta(phi, w, band)
        if not eta_admissible(phi, w, eta, band):
            raise PreconditionViolated(f"eta={eta} is not admissible for s_band {band}")
        return cls(float(epsilon), float(eta), band)

    def to_json(self) -> dict:
        return {"epsilon": self.epsilon, "eta": self.eta, "s_band": list(self.s_band)}


def box_sides(w: Weights, epsilon: float) -> np.ndarray:
    a1, a2, m = w.floats()
    return np.array([epsilon**-a1, epsilon**-a2, epsilon**-m, epsilon**-m])


def _side_integrals(theta, L):
    # int_0^L exp(-i xi u) du with theta = xi * L
    return L * np.exp(-0.5j * theta) * np.sinc(theta / (2.0 * np.pi))


def knapp_box_transform(w: Weights, epsilon: float, xi) -> complex | np.ndarray:
    """Fourier transform of the indicator of E_eps at ``xi``.

    ``xi`` is a ``Frequency4`` or anything whose leading axis has length 4;
    arrays broadcast over the trailing axes.
    """
    if not 0 < epsilon < 1:
        raise InvalidArgument(f"epsilon must lie in (0, 1), got {epsilon}")
    if isinstance(xi, Frequency4):
        xi = (*xi.xi_prime, *xi.xi_dprime)
    L = box_sides(w, epsilon)
    out = 1.0 + 0j
    for j in range(4):
        xj = np.asarray(xi[j], dtype=float)
        out = out * _side_integrals(xj * L[j], L[j])
    return complex(out) if np.ndim(out) == 0 else out


def knapp_factors(w: Weights, epsilon: float, x1, x2, f1, f2) -> np.ndarray:
    """The four normalized factors |int_0^1 exp(-i L_j y_j v) dv| at graph points."""
    L = box_sides(w, epsilon)
    theta = [L[0] * np.asarray(x1), L[1] * np.asarray(x2), L[2] * np.asarray(f1), L[3] * np.asarray(f2)]
    return np.stack([np.abs(np.sinc(th / (2.0 * np.pi))) for th in theta])


def patch_points(w: Weights, box: KnappBox, n: int = 32):
    """Sample points of F_eps = (eps eta).Q on an n x n grid."""
    return _patch_grid(w, box.epsilon * box.eta, box.s_band, n)


def patch_factor_min(phi: SurfaceMap, w: Weights, box: KnappBox, n: int = 32) -> float:
    x1, x2 = patch_points(w, box, n)
    f1, f2 = phi(x1, x2)
    return float(np.min(knapp_factors(w, box.epsilon, x1, x2, f1, f2)))


def restriction_norm(phi: SurfaceMap, w: Weights, r: SectorRegion, box: KnappBox, q: float,
                     patch_only: bool = True, n: int = 48,
                     transform: Optional[Callable] = None) -> float:
    """L^q(dmu) norm of the box transform restricted to the graph.

    Integrated in (u, s) with u = t^(alpha1+alpha2), so dx = (alpha1/a) du ds.
    With ``patch_only`` the domain is F_eps; otherwise the whole sector, which
    is only resolvable for moderate eps. ``transform(eps, X)`` replaces the
    box transform, ``X`` being the stacked graph points.
    """
    if q < 1:
        raise InvalidArgument(f"q must be at least 1, got {q}")
    a1, a2, _ = w.floats()
    a = a1 + a2
    if patch_only:
        scale = box.epsilon * box.eta
        u_lo, u_hi = (0.5 * scale) ** a, scale**a
        s_lo, s_hi = box.s_band
    else:
        u_lo, u_hi = 0.0, 1.0
        s_lo, s_hi = r.c, r.d
    if s_hi <= s_lo:
        return 0.0
    xg, wg = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (u_hi + u_lo) + 0.5 * (u_hi - u_lo) * xg
    s = 0.5 * (s_hi + s_lo) + 0.5 * (s_hi - s_lo) * xg
    wu = 0.5 * (u_hi - u_lo) * wg
    ws = 0.5 * (s_hi - s_lo) * wg
    U, S = np.meshgrid(u, s, indexing="ij")
    t = U ** (1.0 / a)
    x1, x2 = t**a1, t**a2 * S
    f1, f2 = phi(x1, x2)
    X = np.stack([x1, x2, f1, f2])
    fn = transform if transform is not None else (lambda eps, P: knapp_box_transform(w, eps, P))
    vals = np.abs(fn(box.epsilon, X)) ** q
    total = (a1 / a) * float(wu @ vals @ ws)
    return total ** (1.0 / q)


@dataclass
class KnappFit:
    q: float
    predicted_slope: float
    fit: ScalingFit
    eps_list: list
    norms: list
    f_norms: list
    p: float
    eta: float
    s_band: tuple
    factor_min: float

    @property
    def slope_error(self) -> float:
        return abs(self.fit.slope - self.predicted_slope)

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "predicted_slope": self.predicted_slope,
            "fitted_slope": self.fit.slope,
            "intercept": self.fit.intercept,
            "r2": self.fit.r_squared,
            "eps_list": self.eps_list,
            "norms": self.norms,
            "p": self.p,
            "f_norms": self.f_norms,
            "eta": self.eta,
            "s_band": list(self.s_band),
            "factor_min": self.factor_min,
        }


def knapp_exponent_fit(phi: SurfaceMap, w: Weights, r: SectorRegion, q: float, eps_list: Sequence[float],
                       eta: Optional[float] = None, s_band=None, p: float = 2.0) -> KnappFit:
    """Fit log ||R f_eps||_{L^q(Sigma_eps)} against log eps.

    The prediction is -(alpha1+alpha2+2m) + (alpha1+alpha2)/q. The exact
    ||f_eps||_p = eps^(-(alpha1+alpha2+2m)/p) is recorded alongside.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 6:
        raise InvalidArgument("need at least 6 epsilons")
    if max(eps_list) / min(eps_list) < 100 * (1 - 1e-9):
        raise InvalidArgument("epsilons must span at least two decades")
    if min(eps_list) < MIN_EPS or max(eps_list) >= 1:
        raise InvalidArgument(f"epsilons must lie in [{MIN_EPS}, 1)")
    band = tuple(s_band or default_s_band(r))
    if eta is None:
        eta = find_eta(phi, w, band)
    a1, a2, m = w.floats()
    a = a1 + a2
    norms, fmin = [], math.inf
    for eps in eps_list:
        box = KnappBox.build(phi, w, r, eps, eta, band)
        norms.append(restriction_norm(phi, w, r, box, q))
        fmin = min(fmin, patch_factor_min(phi, w, box))
    fit = fit_loglog(eps_list, norms)
    predicted = -(a + 2 * m) + a / q
    f_norms = [eps ** (-(a + 2 * m) / p) for eps in eps_list]
    return KnappFit(float(q), predicted, fit, eps_list, norms, f_norms, float(p), float(eta), band, fmin)


@dataclass(frozen=True)
class ExponentTable:
    restriction_threshold: Fraction
    quadrilateral: tuple
    knapp_slope_factor: Fraction

    def to_json(self) -> dict:
        return {
            "restriction_threshold": str(self.restriction_threshold),
            "quadrilateral": [[str(u), str(v)] for u, v in self.quadrilateral],
            "knapp_slope_factor": str(self.knapp_slope_factor),
        }


def critical_exponents(w: Weights) -> ExponentTable:
    a, m = w.a, w.m
    thr = (a + 4 * m) / (2 * (a + 2 * m))
    quad = ((Fraction(1), Fraction(0)), (Fraction(1), Fraction(1)), (thr, Fraction(1)), (thr, Fraction(1, 2)))
    return ExponentTable(thr, quad, (a + 2 * m) / a)


def knapp_line(w: Weights, inv_p: Fraction) -> Fraction:
    """Smallest 1/q allowed by the Knapp condition at the given 1/p."""
    return critical_exponents(w).knapp_slope_factor * (1 - Fraction(inv_p))
