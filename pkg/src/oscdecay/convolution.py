"""Convolution with the surface measure and the delta-box construction.

mu * f(x', x'') = int_V f(x' - y, x'' - phi(y)) dy is computed in the
parameters u = t^(alpha1+alpha2), s, where dy = (alpha1/a) du ds. Test
functions carry their support box so the quadrature only covers the part of
the sector where they can be nonzero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .core import SectorRegion, SurfaceMap, Weights, region_measure
from .errors import InvalidArgument
from .fits import ScalingFit, fit_loglog
from .restriction import default_s_band, patch_measure

GAUSS_CUTOFF = 6.0


@dataclass(frozen=True)
class ConstantFunction:
    value: float = 1.0
    center: tuple = (0.0, 0.0, 0.0, 0.0)
    halfwidths: Optional[tuple] = None

    def __call__(self, z):
        return np.full(np.shape(z)[1:], float(self.value))


@dataclass(frozen=True)
class BoxIndicator:
    """Indicator of the open box center + prod (-h_j, h_j)."""

    halfwidths: tuple
    center: tuple = (0.0, 0.0, 0.0, 0.0)

    def __call__(self, z):
        inside = np.ones(np.shape(z)[1:], dtype=bool)
        for j in range(4):
            inside &= np.abs(z[j] - self.center[j]) < self.halfwidths[j]
        return inside.astype(float)

    def shifted(self, v) -> "BoxIndicator":
        return BoxIndicator(self.halfwidths, tuple(c + float(s) for c, s in zip(self.center, v)))

    def lp_norm(self, p: float) -> float:
        return float(np.prod(2.0 * np.asarray(self.halfwidths))) ** (1.0 / p)


@dataclass(frozen=True)
class Gaussian4:
    """exp(-sum ((z_j - c_j)/L_j)^2), truncated at GAUSS_CUTOFF widths."""

    scales: tuple
    center: tuple = (0.0, 0.0, 0.0, 0.0)

    @property
    def halfwidths(self) -> tuple:
        return tuple(GAUSS_CUTOFF * s for s in self.scales)

    def __call__(self, z):
        acc = 0.0
        for j in range(4):
            acc = acc + ((z[j] - self.center[j]) / self.scales[j]) ** 2
        return np.exp(-acc)

    def lp_norm(self, p: float) -> float:
        return (math.pi / p) ** (2.0 / p) * float(np.prod(self.scales)) ** (1.0 / p)


def convolve_mu(phi: SurfaceMap, w: Weights, r: SectorRegion, f, x, n: int = 48) -> float:
    """mu * f at a single point x in R^4.

    The u-range and, per u node, the s-range are cut to where the first two
    coordinates of the argument of f fall inside its support box.
    """
    a1, a2, _ = w.floats()
    a = a1 + a2
    x = [float(v) for v in x]
    h = getattr(f, "halfwidths", None)
    cen = getattr(f, "center", (0.0, 0.0, 0.0, 0.0))
    u_lo, u_hi = 0.0, 1.0
    if h is not None:
        y1_lo, y1_hi = x[0] - cen[0] - h[0], x[0] - cen[0] + h[0]
        if y1_hi <= 0:
            return 0.0
        u_lo = max(y1_lo, 0.0) ** (a / a1)
        u_hi = min(y1_hi ** (a / a1), 1.0)
    if u_hi <= u_lo:
        return 0.0
    xg, wg = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (u_hi + u_lo) + 0.5 * (u_hi - u_lo) * xg
    wu = 0.5 * (u_hi - u_lo) * wg
    tau = u ** (1.0 / a)
    ta2 = tau**a2
    if h is not None:
        s_lo = np.maximum((x[1] - cen[1] - h[1]) / ta2, r.c)
        s_hi = np.minimum((x[1] - cen[1] + h[1]) / ta2, r.d)
    else:
        s_lo = np.full(n, r.c)
        s_hi = np.full(n, r.d)
    width = np.maximum(s_hi - s_lo, 0.0)
    S = 0.5 * (s_hi + s_lo)[:, None] + 0.5 * width[:, None] * xg[None, :]
    WS = 0.5 * width[:, None] * wg[None, :]
    Y1 = np.broadcast_to((tau**a1)[:, None], S.shape)
    Y2 = ta2[:, None] * S
    F1, F2 = phi(Y1, Y2)
    Z = np.stack([x[0] - Y1, x[1] - Y2, x[2] - F1, x[3] - F2])
    vals = f(Z)
    return (a1 / a) * float(np.sum(wu[:, None] * WS * vals))


# delta boxes ---------------------------------------------------------------------

def sup_phi_on_patch(phi: SurfaceMap, w: Weights, s_band, n: int = 256, refine: int = 3) -> float:
    """sup |phi| over Q = {t.(1,s) : 1/2 <= t <= 1, s in s_band}.

    Grid search in (t, s), then repeated zooming around the best grid point.
    """
    a1, a2, _ = w.floats()
    t_lo, t_hi = 0.5, 1.0
    s_lo, s_hi = s_band
    best = 0.0
    for _ in range(refine + 1):
        t = np.linspace(t_lo, t_hi, n)
        s = np.linspace(s_lo, s_hi, n)
        T, S = np.meshgrid(t, s, indexing="ij")
        f1, f2 = phi(T**a1, T**a2 * S)
        mag = np.hypot(f1, f2)
        k = np.unravel_index(int(np.argmax(mag)), mag.shape)
        best = max(best, float(mag[k]))
        dt, ds = (t_hi - t_lo) / (n - 1), (s_hi - s_lo) / (n - 1)
        tc, sc = t[k[0]], s[k[1]]
        t_lo, t_hi = max(0.5, tc - 2 * dt), min(1.0, tc + 2 * dt)
        s_lo, s_hi = max(s_band[0], sc - 2 * ds), min(s_band[1], sc + 2 * ds)
    return best


@dataclass(frozen=True)
class DeltaBox:
    delta: float
    M: float
    s_band: tuple
    weights: Weights

    @classmethod
    def build(cls, phi: SurfaceMap, w: Weights, r: SectorRegion, delta: float, s_band=None) -> "DeltaBox":
        if not 0 < delta < 1:
            raise InvalidArgument(f"delta must lie in (0, 1), got {delta}")
        band = tuple(float(v) for v in (s_band or default_s_band(r)))
        return cls(float(delta), sup_phi_on_patch(phi, w, band), band, w)

    @property
    def halfwidths(self) -> tuple:
        a1, a2, m = self.weights.floats()
        d = self.delta
        hz = (2 * self.M + 1) * d**m
        return (2 * d**a1, 2 * d**a2, hz, hz)

    def indicator(self) -> BoxIndicator:
        return BoxIndicator(self.halfwidths)

    def volume(self) -> float:
        return float(np.prod(2.0 * np.asarray(self.halfwidths)))

    def e_measure(self) -> float:
        """|E_delta| = delta^(alpha1+alpha2) |Q|."""
        a1, a2, _ = self.weights.floats()
        return self.delta ** (a1 + a2) * patch_measure(self.weights, self.s_band)

    def a_measure(self) -> float:
        """|A_delta| = |E_delta| * pi delta^(2m)."""
        m = float(self.weights.m)
        return self.e_measure() * math.pi * self.delta ** (2 * m)

    def to_json(self) -> dict:
        return {"delta": self.delta, "M": self.M, "s_band": list(self.s_band), "halfwidths": list(self.halfwidths)}


def sample_a_delta(phi: SurfaceMap, w: Weights, box: DeltaBox, n: int, rng: np.random.Generator) -> np.ndarray:
    """n random points of A_delta, returned with shape (4, n)."""
    a1, a2, m = w.floats()
    d = box.delta
    t = d * rng.uniform(0.5, 1.0, n)
    s = rng.uniform(box.s_band[0], box.s_band[1], n)
    x1, x2 = t**a1, t**a2 * s
    f1, f2 = phi(x1, x2)
    rho = d**m * np.sqrt(rng.uniform(0.0, 1.0, n))
    ang = rng.uniform(0.0, 2 * math.pi, n)
    return np.stack([x1, x2, f1 + rho * np.cos(ang), f2 + rho * np.sin(ang)])


def a_delta_quadrature(w: Weights, box: DeltaBox, n_us=(8, 8), n_z=(4, 8)):
    """Nodes (4, N), the matching x' base points and weights for integrals over A_delta.

    x' = (delta t).(1, s) with u = (delta t)^a Gauss nodes, z = x'' - phi(x')
    in polar Gauss nodes on the disk of radius delta^m.
    """
    a1, a2, m = w.floats()
    a = a1 + a2
    d = box.delta
    u_lo, u_hi = (0.5 * d) ** a, d**a
    xu, wu = np.polynomial.legendre.leggauss(n_us[0])
    xs, ws = np.polynomial.legendre.leggauss(n_us[1])
    u = 0.5 * (u_hi + u_lo) + 0.5 * (u_hi - u_lo) * xu
    wu = 0.5 * (u_hi - u_lo) * wu
    s1, s2 = box.s_band
    s = 0.5 * (s1 + s2) + 0.5 * (s2 - s1) * xs
    ws = 0.5 * (s2 - s1) * ws
    R = d**m
    xr, wr = np.polynomial.legendre.leggauss(n_z[0])
    rho = 0.5 * R * (xr + 1.0)
    wrho = 0.5 * R * wr * rho
    ang = 2 * math.pi * (np.arange(n_z[1]) + 0.5) / n_z[1]
    wang = np.full(n_z[1], 2 * math.pi / n_z[1])
    U, S, P, A = np.meshgrid(u, s, rho, ang, indexing="ij")
    WT = (a1 / a) * np.einsum("i,j,k,l->ijkl", wu, ws, wrho, wang)
    tau = U ** (1.0 / a)
    X1, X2 = tau**a1, tau**a2 * S
    return X1.ravel(), X2.ravel(), (P * np.cos(A)).ravel(), (P * np.sin(A)).ravel(), WT.ravel()


def conv_on_a_delta(phi, w, r, box: DeltaBox, f, n_inner: int = 48, n_us=(8, 8), n_z=(4, 8)):
    """Values of mu * f at the A_delta quadrature nodes, with the node weights."""
    X1, X2, Z1, Z2, WT = a_delta_quadrature(w, box, n_us, n_z)
    F1, F2 = phi(X1, X2)
    vals = np.array([convolve_mu(phi, w, r, f, (X1[k], X2[k], F1[k] + Z1[k], F2[k] + Z2[k]), n_inner)
                     for k in range(len(WT))])
    return vals, WT


def lq_norm(vals, weights, q: float) -> float:
    return float(np.sum(weights * np.abs(vals) ** q)) ** (1.0 / q)


@dataclass
class PointwiseCheck:
    delta: float
    n_points: int
    bound: float
    min_value: float
    min_ratio: float

    @property
    def passed(self) -> bool:
        return self.min_ratio >= 1.0

    def to_json(self) -> dict:
        return {"delta": self.delta, "n_points": self.n_points, "bound": self.bound,
                "min_value": self.min_value, "min_ratio": self.min_ratio, "passed": self.passed}


def pointwise_lower_bound(phi, w, r, box: DeltaBox, n_points: int = 100, seed: int = 0,
                          n_inner: int = 64) -> PointwiseCheck:
    """mu * f_delta >= delta^(alpha1+alpha2)|Q| at random points of A_delta."""
    rng = np.random.default_rng(seed)
    pts = sample_a_delta(phi, w, box, n_points, rng)
    f = box.indicator()
    vals = np.array([convolve_mu(phi, w, r, f, pts[:, k], n_inner) for k in range(n_points)])
    bound = box.e_measure()
    vmin = float(np.min(vals))
    return PointwiseCheck(box.delta, n_points, bound, vmin, vmin / bound)


@dataclass
class BoxFit:
    q: float
    predicted_slope: float
    fit: ScalingFit
    delta_list: list
    norms: list
    f_norms: list
    p: float
    M: float
    s_band: tuple

    @property
    def slope_error(self) -> float:
        return abs(self.fit.slope - self.predicted_slope)

    def to_json(self) -> dict:
        return {
            "q": self.q,
            "predicted": self.predicted_slope,
            "fitted": self.fit.slope,
            "intercept": self.fit.intercept,
            "r2": self.fit.r_squared,
            "delta_list": self.delta_list,
            "norms": self.norms,
            "p": self.p,
            "f_norms": self.f_norms,
            "M": self.M,
            "s_band": list(self.s_band),
        }


def _check_deltas(delta_list):
    delta_list = [float(d) for d in delta_list]
    if len(delta_list) < 6:
        raise InvalidArgument("need at least 6 deltas")
    if max(delta_list) / min(delta_list) < 100 * (1 - 1e-9):
        raise InvalidArgument("deltas must span at least two decades")
    if not all(0 < d < 1 for d in delta_list):
        raise InvalidArgument("deltas must lie in (0, 1)")
    return delta_list


def box_lower_bound_fits(phi, w, r, qs: Sequence[float], delta_list, s_band=None, p: float = 2.0,
                         n_inner: int = 48) -> list[BoxFit]:
    """One fit per q of log ||mu * f_delta||_{L^q(A_delta)} against log delta.

    Convolution values are shared across the q values.
    """
    delta_list = _check_deltas(delta_list)
    for q in qs:
        if q < 1:
            raise InvalidArgument(f"q must be at least 1, got {q}")
    a1, a2, m = w.floats()
    a = a1 + a2
    boxes = [DeltaBox.build(phi, w, r, d, s_band) for d in delta_list]
    samples = [conv_on_a_delta(phi, w, r, b, b.indicator(), n_inner) for b in boxes]
    out = []
    for q in qs:
        norms = [lq_norm(v, wt, q) for v, wt in samples]
        fit = fit_loglog(delta_list, norms)
        out.append(BoxFit(float(q), a + (a + 2 * m) / q, fit, delta_list, norms,
                          [b.volume() ** (1.0 / p) for b in boxes], float(p), boxes[0].M, boxes[0].s_band))
    return out


def box_lower_bound_fit(phi, w, r, q: float, delta_list, s_band=None, p: float = 2.0) -> BoxFit:
    return box_lower_bound_fits(phi, w, r, [q], delta_list, s_band, p)[0]


# type set ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TypeSetVertex:
    inv_p: Fraction
    inv_q: Fraction

    def to_json(self) -> dict:
        return {"inv_p": str(self.inv_p), "inv_q": str(self.inv_q),
                "inv_p_float": float(self.inv_p), "inv_q_float": float(self.inv_q)}


def typeset_vertex(w: Weights) -> TypeSetVertex:
    a, m = w.a, w.m
    inv_p = (a + m) / (a + 2 * m)
    return TypeSetVertex(inv_p, 1 - inv_p)


def necessary_inv_q(w: Weights, inv_p) -> Fraction:
    """Smallest 1/q compatible with the delta-box condition at the given 1/p."""
    a, m = w.a, w.m
    return Fraction(inv_p) - a / (a + 2 * m)


# operator-norm probe ----------------------------------------------------------------------

@dataclass
class ProbeResult:
    p: float
    q: float
    family: str
    params: list
    ratios: list
    sup_ratio: float
    argsup: float
    spread: float
    growth: float
    notes: list = field(default_factory=list)

    @property
    def stable(self) -> bool:
        return self.spread <= 2.0

    def to_json(self) -> dict:
        return {"p": self.p, "q": self.q, "family": self.family, "params": self.params,
                "ratios": self.ratios, "sup_ratio": self.sup_ratio, "argsup": self.argsup,
                "spread": self.spread, "growth": self.growth, "stable": self.stable, "notes": self.notes}

    def csv_rows(self) -> list[list]:
        return [[self.p, self.q, f"{self.family}:delta={d!r}", rt] for d, rt in zip(self.params, self.ratios)]


def probe_scales(n_tests: int, start: int = 6) -> list[float]:
    return [2.0 ** -(start + k) for k in range(n_tests)]


def operator_norm_probe(phi, w, r, p: float, q: float, family: str = "box", n_tests: int = 6,
                        scales: Optional[Sequence[float]] = None, n_inner: int = 48) -> ProbeResult:
    """Ratios ||mu * f||_{L^q(A_delta)} / ||f||_p over a dyadic family of test functions.

    The numerator is restricted to A_delta, so each ratio is a lower bound for
    the true ||mu * f||_q / ||f||_p. ``spread`` is max/min over the family and
    ``growth`` the ratio at the smallest scale over the largest.
    """
    if n_tests < 1:
        raise InvalidArgument("n_tests must be at least 1")
    if not (1 <= p < math.inf and 1 <= q < math.inf):
        raise InvalidArgument("p and q must lie in [1, inf)")
    if family not in ("box", "gaussian"):
        raise InvalidArgument(f"unknown test family {family!r}")
    scales = [float(d) for d in (scales or probe_scales(n_tests))]
    a1, a2, m = w.floats()
    ratios = []
    for d in scales:
        box = DeltaBox.build(phi, w, r, d)
        if family == "box":
            f = box.indicator()
        else:
            hz = (2 * box.M + 1) * d**m
            f = Gaussian4((d**a1, d**a2, hz, hz))
        vals, wt = conv_on_a_delta(phi, w, r, box, f, n_inner)
        ratios.append(lq_norm(vals, wt, q) / f.lp_norm(p))
    k = int(np.argmax(ratios))
    spread = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
    growth = ratios[-1] / ratios[0] if ratios[0] > 0 else math.inf
    return ProbeResult(float(p), float(q), family, scales, ratios, ratios[k], scales[k], spread, growth)


def young_bound(phi, w, r) -> float:
    """mu(R^4) = |V|, the constant in ||mu * f||_inf <= mu(R^4) ||f||_inf."""
    return region_measure(w, r)
