"""Curvature of the pencil zeta1*Hess(phi1) + zeta2*Hess(phi2).

Q_x(zeta) = det(zeta1 phi1''(x) + zeta2 phi2''(x)) is a quadratic form in
zeta with symmetric matrix K(x). A point is elliptic when Q_x is definite,
i.e. both eigenvalues of K(x) are nonzero with one sign. This module locates
where that fails along the ray family t.(1, s), measures how fast it fails,
and checks the Euler-relation identity that rewrites Q in terms of
G(zeta, s) = <phi(1, s), zeta>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    SectorRegion,
    SurfaceMap,
    Weights,
    _check_unit,
    angle_grid,
    check_quasi_homogeneous,
    dilate,
    section_values,
)
from .errors import DegenerateFit, InvalidArgument, PreconditionViolated
from .fits import ScalingFit, fit_linear

NONELLIPTIC_TOL = 1e-8
EULER_TOL = 1e-9
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_FLOOR = 1e-300


@dataclass(frozen=True)
class SymmetricMatrix2:
    k11: float
    k12: float
    k22: float

    @property
    def det(self):
        return self.k11 * self.k22 - self.k12 * self.k12

    @property
    def trace(self):
        return self.k11 + self.k22


@dataclass(frozen=True)
class EigenPair:
    lambda1: float
    lambda2: float


def k_matrix(phi: SurfaceMap, x) -> SymmetricMatrix2:
    """Entries of K(x); works elementwise on array-valued points."""
    x1, x2 = x
    (a11, a12, a22), (b11, b12, b22) = phi.hessians
    p11, p12, p22 = a11(x1, x2), a12(x1, x2), a22(x1, x2)
    q11, q12, q22 = b11(x1, x2), b12(x1, x2), b22(x1, x2)
    k11 = p11 * p22 - p12 * p12
    k22 = q11 * q22 - q12 * q12
    k12 = 0.5 * (p11 * q22 + p22 * q11 - 2.0 * p12 * q12)
    return SymmetricMatrix2(k11, k12, k22)


def eigenvalues(K: SymmetricMatrix2) -> EigenPair:
    """Closed-form eigenvalues, ordered lambda1 <= lambda2.

    The larger-magnitude root comes from the quadratic formula and the other
    from det / root, which keeps the small eigenvalue accurate near the
    nonelliptic curve.
    """
    k11 = np.asarray(K.k11, dtype=float)
    k12 = np.asarray(K.k12, dtype=float)
    k22 = np.asarray(K.k22, dtype=float)
    half_tr = 0.5 * (k11 + k22)
    rad = np.hypot(0.5 * (k11 - k22), k12)
    big = half_tr + np.where(half_tr >= 0, rad, -rad)
    det = k11 * k22 - k12 * k12
    with np.errstate(divide="ignore", invalid="ignore"):
        small = np.where(big != 0, det / np.where(big != 0, big, 1.0), half_tr)
    lam1 = np.minimum(big, small)
    lam2 = np.maximum(big, small)
    if lam1.ndim == 0:
        return EigenPair(float(lam1), float(lam2))
    return EigenPair(lam1, lam2)


def _min_abs_eig(phi: SurfaceMap, x1, x2):
    ev = eigenvalues(k_matrix(phi, (x1, x2)))
    l1, l2 = np.asarray(ev.lambda1), np.asarray(ev.lambda2)
    return np.minimum(np.abs(l1), np.abs(l2)), np.maximum(np.abs(l1), np.abs(l2)), l1 * l2


def min_abs_q(phi: SurfaceMap, x) -> float:
    """min over the unit circle of |Q_x|; zero when K(x) is indefinite."""
    ev = eigenvalues(k_matrix(phi, x))
    if ev.lambda1 * ev.lambda2 <= 0:
        return 0.0
    return min(abs(ev.lambda1), abs(ev.lambda2))


def q_form(phi: SurfaceMap, x, zeta):
    K = k_matrix(phi, x)
    z1, z2 = zeta
    return K.k11 * z1 * z1 + 2.0 * K.k12 * z1 * z2 + K.k22 * z2 * z2


@dataclass(frozen=True)
class PointClass:
    elliptic: bool
    lambda1: float
    lambda2: float
    min_abs_q: float

    @property
    def label(self) -> str:
        return "elliptic" if self.elliptic else "nonelliptic"


def classify_point(phi: SurfaceMap, w: Weights, x, tol: float = NONELLIPTIC_TOL) -> PointClass:
    """Elliptic iff K(x) is definite with min|Lambda| above ``tol`` times its scale."""
    if tol <= 0:
        raise InvalidArgument("tol must be positive")
    ev = eigenvalues(k_matrix(phi, x))
    small = min(abs(ev.lambda1), abs(ev.lambda2))
    scale = max(abs(ev.lambda1), abs(ev.lambda2), _FLOOR)
    definite = ev.lambda1 * ev.lambda2 > 0
    elliptic = definite and small > tol * scale
    return PointClass(elliptic, ev.lambda1, ev.lambda2, small if definite else 0.0)


def euler_residuals(phi: SurfaceMap, w: Weights, zetas, s):
    """Relative residual of the identity alpha1^2 Q_(1,s)(zeta) = H(zeta, s).

    ``zetas`` is an (n, 2) array of unit vectors and ``s`` a 1-D array; the
    result has shape (n, len(s)).
    """
    a1, a2, m = w.floats()
    s = np.asarray(s, dtype=float)
    out = np.empty((len(zetas), len(s)))
    ones = np.ones_like(s)
    K = k_matrix(phi, (ones, s))
    for k, zeta in enumerate(zetas):
        z1, z2 = _check_unit(zeta)
        G, Gs, Gss = section_values(phi, (z1, z2), s)
        lhs = a1 * a1 * (K.k11 * z1 * z1 + 2.0 * K.k12 * z1 * z2 + K.k22 * z2 * z2)
        rhs = m * (m - a1) * G * Gss + a2 * (a1 - a2) * s * Gs * Gss - (m - a2) ** 2 * Gs**2
        scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), _FLOOR)
        out[k] = np.abs(lhs - rhs) / scale
    return out


def verify_euler_identity(phi: SurfaceMap, w: Weights, samples, require_homogeneous: bool = True) -> float:
    """Max relative residual over ``samples`` of (zeta, s) pairs.

    Raises ``PreconditionViolated`` for maps that fail the homogeneity check,
    unless ``require_homogeneous`` is False (used for negative controls).
    """
    if require_homogeneous and not check_quasi_homogeneous(phi, w).monomials_ok:
        raise PreconditionViolated("the identity needs a quasi-homogeneous map")
    worst = 0.0
    for zeta, s in samples:
        r = euler_residuals(phi, w, [zeta], np.atleast_1d(s))
        worst = max(worst, float(r.max()))
    return worst


def euler_grid(phi: SurfaceMap, w: Weights, n_zeta: int = 16, n_s: int = 64,
               s_range=(0.9, 1.1), require_homogeneous: bool = True) -> float:
    if require_homogeneous and not check_quasi_homogeneous(phi, w).monomials_ok:
        raise PreconditionViolated("the identity needs a quasi-homogeneous map")
    th = angle_grid(n_zeta)
    zetas = np.column_stack([np.cos(th), np.sin(th)])
    s = np.linspace(s_range[0], s_range[1], n_s)
    return float(euler_residuals(phi, w, zetas, s).max())


def _golden_min(f, lo: float, hi: float, xtol: float = 1e-10) -> float:
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    # endpoints matter when the minimum sits on the boundary of the region
    cands = [(f(lo), lo), (f(hi), hi), (f(0.5 * (a + b)), 0.5 * (a + b))]
    return min(cands)[1]


@dataclass
class SigmaSearch:
    candidates: list
    grid_n: int
    indefinite_intervals: list = field(default_factory=list)
    tol: float = NONELLIPTIC_TOL
    degenerate_intervals: list = field(default_factory=list)

    @property
    def h3_ok(self) -> bool:
        return len(self.candidates) == 1 and not self.indefinite_intervals and not self.degenerate_intervals

    @property
    def status(self) -> str:
        if self.degenerate_intervals:
            return "degenerate-interval"
        if self.indefinite_intervals:
            return "indefinite-interval"
        if not self.candidates:
            return "everywhere-elliptic"
        if len(self.candidates) > 1:
            return "multiple-candidates"
        return "ok"

    def to_json(self) -> dict:
        return {
            "candidates": self.candidates,
            "grid_n": self.grid_n,
            "indefinite_intervals": self.indefinite_intervals,
            "degenerate_intervals": self.degenerate_intervals,
            "tol": self.tol,
            "status": self.status,
            "h3_ok": self.h3_ok,
        }


def find_sigma(phi: SurfaceMap, w: Weights, r: SectorRegion, grid_n: int = 1024,
               tol: float = NONELLIPTIC_TOL) -> SigmaSearch:
    """Locate nonelliptic parameters s in [c, d] along x = (1, s).

    Local minima of min|Lambda_i(1, s)| on the grid are refined by golden
    section; a refined minimum counts as nonelliptic when it falls below
    ``tol`` times the local eigenvalue scale. Stretches where K is indefinite
    are reported separately, since every point there is nonelliptic.
    """
    if grid_n < 64:
        raise InvalidArgument("grid_n must be at least 64")
    s = np.linspace(r.c, r.d, grid_n)
    small, big, prod = _min_abs_eig(phi, np.ones_like(s), s)
    vals = small

    def f(x):
        sm, _, _ = _min_abs_eig(phi, np.array([1.0]), np.array([x]))
        return float(sm[0])

    cands = []
    n = len(s)
    for i in range(n):
        left = vals[i - 1] if i > 0 else np.inf
        right = vals[i + 1] if i < n - 1 else np.inf
        if vals[i] <= left and vals[i] <= right and not (i > 0 and vals[i] == left):
            lo = s[max(i - 1, 0)]
            hi = s[min(i + 1, n - 1)]
            x = _golden_min(f, lo, hi)
            sm, bg, _ = _min_abs_eig(phi, np.array([1.0]), np.array([x]))
            if sm[0] <= tol * max(bg[0], _FLOOR):
                cands.append(float(x))
    # merge candidates closer than the refinement tolerance
    merged = []
    for x in sorted(cands):
        if not merged or x - merged[-1] > 1e-8:
            merged.append(x)

    indefinite = [iv for iv, _ in _runs(s, prod < 0)]
    # an eigenvalue vanishing on a whole stretch of grid points
    flat = small <= tol * np.maximum(big, _FLOOR)
    degenerate = [iv for iv, length in _runs(s, flat) if length >= 3]
    merged = [x for x in merged if not any(lo <= x <= hi for lo, hi in degenerate)]
    return SigmaSearch(merged, grid_n, indefinite, tol, degenerate)


def _runs(s, mask):
    """Maximal runs of True in ``mask`` as ([s_start, s_end], length)."""
    out = []
    i, n = 0, len(mask)
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            out.append(([float(s[i]), float(s[j])], j - i + 1))
            i = j + 1
        else:
            i += 1
    return out


@dataclass
class OrderFit:
    side: str
    n: int
    D: float
    fit: ScalingFit
    offsets: list
    values: list
    t_scaling_max_rel: float

    def to_json(self) -> dict:
        return {
            "side": self.side,
            "n": self.n,
            "D": self.D,
            "fit": self.fit.to_json(),
            "offsets": self.offsets,
            "values": self.values,
            "t_scaling_max_rel": self.t_scaling_max_rel,
        }


def _first_dyadic_level(room: float) -> int:
    """Smallest k >= 3 with 2^-k strictly inside an interval of length ``room``."""
    k = 3
    while 2.0**-k >= room:
        k += 1
    return k


def _order_from_samples(ks, values, side, label):
    values = np.asarray(values, dtype=float)
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        raise DegenerateFit(f"{label} samples on the {side} side include zeros",
                            list(zip([2.0**-k for k in ks], values.tolist())))
    fit = fit_linear(-np.asarray(ks, dtype=float), np.log2(values))
    n = int(round(fit.slope))
    if fit.r_squared < 0.99 or abs(fit.slope - n) > 0.1 or n < 1:
        raise DegenerateFit(
            f"{label} order fit on the {side} side is degenerate "
            f"(slope={fit.slope:.4f}, R^2={fit.r_squared:.5f})",
            list(zip([2.0**-k for k in ks], list(map(float, values)))),
        )
    return n, fit


def degeneracy_orders(phi: SurfaceMap, w: Weights, sigma: float, side: str, depths: int = 12,
                      region: Optional[SectorRegion] = None) -> Optional[OrderFit]:
    """One-sided vanishing order of min|Lambda_i(1, s)| as s -> sigma.

    Samples sit at s = sigma -/+ 2^-k. Returns None when the region leaves no
    room on the requested side.
    """
    if side not in ("left", "right"):
        raise InvalidArgument("side must be 'left' or 'right'")
    if depths < 8:
        raise InvalidArgument("depths must be at least 8")
    if region is not None:
        room = sigma - region.c if side == "left" else region.d - sigma
    else:
        room = 1.0
    if room <= 0:
        return None
    k0 = _first_dyadic_level(room)
    ks = np.arange(k0, k0 + depths + 1)
    offs = 2.0 ** (-ks.astype(float))
    s = sigma - offs if side == "left" else sigma + offs
    ones = np.ones_like(s)
    small, _, prod = _min_abs_eig(phi, ones, s)
    if np.any(small <= 0):
        raise DegenerateFit("eigenvalue vanishes at a sample point", list(zip(offs.tolist(), small.tolist())))
    n, fit = _order_from_samples(ks, small, side, "eigenvalue")
    D = float(np.min(small / offs**n))

    beta = float(w.beta)
    worst = 0.0
    for t in (0.5, 0.25):
        y1, y2 = dilate(w, t, (ones, s))
        sm_t, _, _ = _min_abs_eig(phi, y1, y2)
        rel = np.abs(sm_t - t**beta * small) / (t**beta * small)
        worst = max(worst, float(rel.max()))
    return OrderFit(side, n, D, fit, offs.tolist(), small.tolist(), worst)


def h_form(phi: SurfaceMap, w: Weights, s):
    """Symmetric matrix of the quadratic form zeta -> H(zeta, s).

    G is linear in zeta, so H is quadratic; three evaluations recover it.
    """
    s = np.asarray(s, dtype=float)
    r = 1.0 / math.sqrt(2.0)
    h11 = H_eval(phi, w, (1.0, 0.0), s)[0]
    h22 = H_eval(phi, w, (0.0, 1.0), s)[0]
    hd = H_eval(phi, w, (r, r), s)[0]
    return SymmetricMatrix2(h11, hd - 0.5 * (h11 + h22), h22)


def min_abs_h(phi: SurfaceMap, w: Weights, s):
    """min over the unit circle of |H(zeta, s)|, vectorised in s."""
    ev = eigenvalues(h_form(phi, w, s))
    l1, l2 = np.asarray(ev.lambda1), np.asarray(ev.lambda2)
    return np.where(l1 * l2 > 0, np.minimum(np.abs(l1), np.abs(l2)), 0.0)


def h_order(phi: SurfaceMap, w: Weights, sigma: float, side: str, depths: int = 12,
            region: Optional[SectorRegion] = None):
    """Vanishing order of min_zeta |H(zeta, s)| and its empirical constant."""
    room = (sigma - region.c if side == "left" else region.d - sigma) if region else 1.0
    if room <= 0:
        return None
    k0 = _first_dyadic_level(room)
    ks = np.arange(k0, k0 + depths + 1)
    offs = 2.0 ** (-ks.astype(float))
    s = sigma - offs if side == "left" else sigma + offs
    vals = min_abs_h(phi, w, s)
    n, fit = _order_from_samples(ks, vals, side, "H")
    return n, float(np.min(vals / offs**n)), fit


def check_H4(n1: Optional[int], n2: Optional[int], w: Weights):
    """max(n1, n2) < 2m/(alpha1+alpha2) - 3, with the exact margin."""
    present = [n for n in (n1, n2) if n is not None]
    if not present:
        raise InvalidArgument("at least one of n1, n2 is required")
    bound = 2 * w.m / w.a - 3
    margin = bound - max(present)
    return margin > 0, margin


def H_eval(phi: SurfaceMap, w: Weights, zeta, s):
    """(H, f1, f2, f3) with H = f1 - f2 + f3."""
    a1, a2, m = w.floats()
    G, Gs, Gss = section_values(phi, zeta, s)
    f1 = m * (m - a1) * G * Gss
    f2 = (m - a2) ** 2 * Gs**2
    f3 = a2 * (a1 - a2) * np.asarray(s) * Gs * Gss
    H = f1 - f2 + f3
    if np.ndim(H) == 0:
        return float(H), float(f1), float(f2), float(f3)
    return H, f1, f2, f3


@dataclass(frozen=True)
class ThresholdSetCount:
    set_id: str
    zeta_angle: float
    component_count: int
    grid_n: int

    def to_row(self) -> list:
        return [self.set_id, self.zeta_angle, self.component_count, self.grid_n]


def count_runs(mask) -> int:
    """Number of maximal runs of True in a boolean array."""
    mask = np.asarray(mask, dtype=bool)
    if mask.size == 0:
        return 0
    starts = mask & ~np.concatenate(([False], mask[:-1]))
    return int(starts.sum())


def threshold_components(phi: SurfaceMap, w: Weights, sigma: float, zeta_angle: float, delta: float,
                         C: float, n: int = 1, side="left", grid_n: int = 4096,
                         region: Optional[SectorRegion] = None) -> list[ThresholdSetCount]:
    """Count connected components of the five threshold sets on a uniform grid.

    ``side`` is ``"left"`` (I-sets on (sigma - delta, sigma)), ``"right"``
    (J-sets on (sigma, sigma + delta)) or a float tau for the K-sets on
    (tau - delta, tau + delta) intersected with the region, whose threshold
    is the constant C/4.
    """
    if delta <= 0 or C <= 0:
        raise InvalidArgument("delta and C must be positive")
    if grid_n < 4096:
        raise InvalidArgument("grid_n must be at least 4096")
    if side == "left":
        lo, hi, prefix = sigma - delta, sigma, "I"
    elif side == "right":
        lo, hi, prefix = sigma, sigma + delta, "J"
    else:
        tau = float(side)
        lo, hi, prefix = tau - delta, tau + delta, "K"
        if region is not None:
            lo, hi = max(lo, region.c), min(hi, region.d)
    # open interval: interior grid points only
    s = np.linspace(lo, hi, grid_n + 2)[1:-1]
    zeta = (math.cos(zeta_angle), math.sin(zeta_angle))
    _, f1, f2, f3 = H_eval(phi, w, zeta, s)
    if prefix == "K":
        thr = np.full_like(s, C / 4.0)
    else:
        thr = C / 4.0 * np.abs(s - sigma) ** n
    masks = [f1 > thr, f1 < -thr, f2 > thr, f3 > thr, f3 < -thr]
    return [ThresholdSetCount(f"{prefix}{k + 1}", float(zeta_angle), count_runs(mk), grid_n)
            for k, mk in enumerate(masks)]


@dataclass
class EllipticityReport:
    sigma: Optional[float]
    n1: Optional[int]
    n2: Optional[int]
    D_estimate: Optional[float]
    D_tilde_estimate: Optional[float]
    fits: list
    search: SigmaSearch
    h_orders: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "sigma": self.sigma,
            "n1": self.n1,
            "n2": self.n2,
            "D_estimate": self.D_estimate,
            "D_tilde_estimate": self.D_tilde_estimate,
            "fits": [f.to_json() for f in self.fits],
            "search": self.search.to_json(),
            "h_orders": self.h_orders,
            "notes": self.notes,
        }


def d_tilde(phi: SurfaceMap, r: SectorRegion, sigma: float, gap: float, n: int = 2048) -> Optional[float]:
    """Empirical lower bound of min|Lambda_i(1, s)| on [c, d] minus (sigma - gap, sigma + gap)."""
    s = np.linspace(r.c, r.d, n)
    keep = np.abs(s - sigma) >= gap
    if not np.any(keep):
        return None
    small, _, _ = _min_abs_eig(phi, np.ones(int(keep.sum())), s[keep])
    return float(small.min())


def analyze(phi: SurfaceMap, w: Weights, r: SectorRegion, grid_n: int = 1024, depths: int = 12,
            tol: float = NONELLIPTIC_TOL) -> EllipticityReport:
    """Run the sigma search and the one-sided order fits on both sides."""
    search = find_sigma(phi, w, r, grid_n, tol)
    if not search.h3_ok:
        return EllipticityReport(None, None, None, None, None, [], search,
                                 notes=[f"H3 fails: {search.status}"])
    sigma = search.candidates[0]
    fits, orders, h_orders, notes = [], {}, {}, []
    for side in ("left", "right"):
        try:
            of = degeneracy_orders(phi, w, sigma, side, depths, region=r)
        except DegenerateFit as exc:
            notes.append(f"eigenvalue order fit on {side} side failed: {exc}")
            orders[side] = None
            continue
        if of is None:
            orders[side] = None
            continue
        fits.append(of)
        orders[side] = of
        try:
            res = h_order(phi, w, sigma, side, depths, region=r)
        except DegenerateFit as exc:
            notes.append(f"H order fit on {side} side failed: {exc}")
            res = None
        if res is not None:
            nH, DH, _ = res
            h_orders[side] = {"n": nH, "D": DH}
            if nH != of.n:
                notes.append(f"{side}: eigenvalue order {of.n} disagrees with H order {nH}")
    n1 = orders["left"].n if orders.get("left") else None
    n2 = orders["right"].n if orders.get("right") else None
    Ds = [o.D for o in orders.values() if o is not None]
    gap = max((o.offsets[0] for o in orders.values() if o is not None), default=0.0)
    Dt = d_tilde(phi, r, sigma, gap) if gap > 0 else None
    return EllipticityReport(sigma, n1, n2, min(Ds) if Ds else None, Dt, fits, search, h_orders, notes)
