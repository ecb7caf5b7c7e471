"""Fourier transform of the surface measure and its decay.

After x1 = t^alpha1, x2 = s t^alpha2 the transform becomes

    mu_hat(xi', xi'') = alpha1 * int_c^d I(xi1, xi2 s, <phi(1,s), xi''>) ds

with the one-dimensional oscillatory integral

    I(A1, A2, A3) = int_0^1 exp(-i(A1 t^alpha1 + A2 t^alpha2 + A3 t^m)) t^(alpha1+alpha2-1) dt.

Both integrals are done with composite Gauss-Legendre panels sized so the
phase moves by at most 2*pi/8 across a panel. Error estimates compare each
result against a recomputation with every panel halved.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import SectorRegion, Surface, SurfaceMap, Weights, angle_grid, region_measure, section_polys
from .errors import BudgetExceeded, DegenerateFit, InvalidArgument
from .fits import ScalingFit, fit_loglog

PANEL_PHASE = 2.0 * math.pi / 8.0
GAUSS_ORDER = 3
SINGLE_ORDER = 8
MAX_PANELS = 4_000_000
GRADING_LEVELS = 30
_CHUNK = 1 << 21


@dataclass(frozen=True)
class Frequency4:
    xi_prime: tuple[float, float]
    xi_dprime: tuple[float, float]

    @classmethod
    def of(cls, xi1, xi2, xi3, xi4) -> "Frequency4":
        return cls((float(xi1), float(xi2)), (float(xi3), float(xi4)))

    def __neg__(self) -> "Frequency4":
        (a, b), (c, d) = self.xi_prime, self.xi_dprime
        return Frequency4((-a, -b), (-c, -d))

    @property
    def dprime_norm(self) -> float:
        return math.hypot(*self.xi_dprime)


@dataclass(frozen=True)
class OscillatoryResult:
    value: complex
    abs_error_estimate: float
    panels_used: int

    def to_json(self) -> dict:
        return {
            "re": self.value.real,
            "im": self.value.imag,
            "abs": abs(self.value),
            "abs_error_estimate": self.abs_error_estimate,
            "panels_used": self.panels_used,
        }


def _gauss(order: int):
    x, wts = np.polynomial.legendre.leggauss(order)
    return x, wts


def _invert_monotone(fun, targets, lo=0.0, hi=1.0, iters=60):
    """Solve fun(u) = target for an increasing ``fun`` by vectorised bisection."""
    a = np.full_like(targets, lo)
    b = np.full_like(targets, hi)
    for _ in range(iters):
        mid = 0.5 * (a + b)
        below = fun(mid) < targets
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    return 0.5 * (a + b)


def phase_breakpoints(amps, exps, h_max: float = 0.125, panel_phase: float = PANEL_PHASE):
    """Panel edges on [0, 1] for the phase sum_j A_j u^e_j.

    V(u) = sum_j |A_j| u^e_j bounds the phase variation on [0, u], so edges
    at equal V-increments cap the variation per panel at ``panel_phase``.
    Extra dyadic edges toward 0 handle the u^e, e < 1 terms.
    """
    amps = np.abs(np.asarray(amps, dtype=float))
    exps = np.asarray(exps, dtype=float)
    total = float(np.sum(amps))
    edges = [np.linspace(0.0, 1.0, int(math.ceil(1.0 / h_max)) + 1)]
    if total > 0:
        n = int(math.ceil(total / panel_phase))
        if n > MAX_PANELS:
            raise BudgetExceeded(f"needs {n} panels, budget is {MAX_PANELS}")
        targets = total * np.arange(1, n) / n

        def V(u):
            return sum(a * u**e for a, e in zip(amps, exps) if a > 0)

        edges.append(_invert_monotone(V, targets))
    e = np.unique(np.concatenate(edges))
    if np.any((amps > 0) & (exps < 1)):
        first = e[1]
        e = np.unique(np.concatenate([e, first * 2.0 ** -np.arange(1, GRADING_LEVELS + 1)]))
    return e


def refine_edges(edges, levels: int = 1):
    for _ in range(levels):
        mids = 0.5 * (edges[:-1] + edges[1:])
        edges = np.sort(np.concatenate([edges, mids]))
    return edges


def _nodes(edges, order: int):
    x, wts = _gauss(order)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * wts[None, :]).ravel()
    return nodes, weights


def _inner_sum(A, exps, nodes, weights):
    """sum_k w_k exp(-i sum_j A_j[b] u_k^e_j) for every row b of A."""
    A = np.atleast_2d(A)
    nb = A.shape[0]
    out = np.zeros(nb, dtype=complex)
    step = max(1, _CHUNK // max(nb, 1))
    for start in range(0, len(nodes), step):
        u = nodes[start:start + step]
        wt = weights[start:start + step]
        phase = np.zeros((nb, len(u)))
        for j, e in enumerate(exps):
            if np.any(A[:, j] != 0):
                phase += A[:, j][:, None] * u[None, :] ** e
        out += np.exp(-1j * phase) @ wt
    return out


def _inner_batch(A, w: Weights, level: int, order: int, h_max: float):
    """I(A1, A2, A3) for rows of A sharing one panel layout; returns (values, panels)."""
    a1, a2, m = w.floats()
    a = a1 + a2
    exps = (a1 / a, a2 / a, m / a)
    amax = np.max(np.abs(np.atleast_2d(A)), axis=0)
    edges = phase_breakpoints(amax, exps, h_max)
    if (len(edges) - 1) * 2**level > MAX_PANELS:
        raise BudgetExceeded(f"refinement level {level} needs more than {MAX_PANELS} panels")
    edges = refine_edges(edges, level)
    nodes, weights = _nodes(edges, order)
    return _inner_sum(A, exps, nodes, weights) / a, len(edges) - 1


def oscillatory_integral_1d(w: Weights, A1: float, A2: float, A3: float, h_max: float = 0.125,
                            order: int = SINGLE_ORDER, tol: Optional[float] = None) -> OscillatoryResult:
    """The weighted oscillatory integral I(A1, A2, A3) on [0, 1].

    Integrated in u = t^(alpha1+alpha2), where the weight becomes constant.
    Without ``tol`` one halving step gives the error estimate; with ``tol``
    panels keep halving until the estimate drops below it, and running out of
    panels raises ``BudgetExceeded`` carrying the last value.
    """
    A = np.array([[A1, A2, A3]], dtype=float)
    prev, used = _inner_batch(A, w, 0, order, h_max)
    level = 1
    while True:
        try:
            cur, n = _inner_batch(A, w, level, order, h_max)
        except BudgetExceeded as exc:
            best = OscillatoryResult(complex(prev[0]), math.inf, used)
            raise BudgetExceeded(str(exc), best=best) from None
        used += n
        err = float(abs(cur[0] - prev[0]))
        if tol is None or err <= tol:
            return OscillatoryResult(complex(cur[0]), err, used)
        prev = cur
        level += 1


# mu_hat -----------------------------------------------------------------------

def _s_breakpoints(phi: SurfaceMap, r: SectorRegion, xi: Frequency4, h_max_s: float,
                   panel_phase: float = PANEL_PHASE):
    """Outer panel edges on [c, d] from the worst-case s-phase at t = 1."""
    c, d = r.c, r.d
    p1, p2 = phi.ray_polys
    a3 = xi.xi_dprime[0] * p1 + xi.xi_dprime[1] * p2
    grid = np.linspace(c, d, 4097)
    crit = [float(z.real) for z in np.atleast_1d(a3.deriv().roots())
            if abs(z.imag) < 1e-12 and c < z.real < d] if a3.degree() > 1 else []
    grid = np.unique(np.concatenate([grid, crit]))
    tv = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(a3(grid))))])
    V = abs(xi.xi_prime[1]) * (grid - c) + tv
    total = V[-1]
    edges = [np.linspace(c, d, int(math.ceil((d - c) / h_max_s)) + 1)]
    if total > 0:
        n = int(math.ceil(total / panel_phase))
        if n > MAX_PANELS:
            raise BudgetExceeded(f"outer integral needs {n} panels, budget is {MAX_PANELS}")
        targets = total * np.arange(1, n) / n
        edges.append(np.interp(targets, V, grid))
    return np.unique(np.concatenate(edges)), a3


def _mu_hat_level(phi, w, r, xi, level, order, h_max, h_max_s, batch):
    edges, a3 = _s_breakpoints(phi, r, xi, h_max_s)
    edges = refine_edges(edges, level)
    s_nodes, s_w = _nodes(edges, order)
    A = np.column_stack([
        np.full_like(s_nodes, xi.xi_prime[0]),
        xi.xi_prime[1] * s_nodes,
        a3(s_nodes),
    ])
    total = 0j
    panels = len(edges) - 1
    for start in range(0, len(s_nodes), batch):
        vals, npan = _inner_batch(A[start:start + batch], w, level, order, h_max)
        total += np.dot(vals, s_w[start:start + batch])
        panels += npan
    return float(w.alpha1) * total, panels


def mu_hat(phi: SurfaceMap, w: Weights, r: SectorRegion, xi: Frequency4, h_max: float = 0.125,
           order: int = GAUSS_ORDER, batch: int = 16) -> OscillatoryResult:
    """Fourier transform of the surface measure at one frequency."""
    if r.c == r.d:
        return OscillatoryResult(0j, 0.0, 0)
    h_max_s = (r.d - r.c) / 8.0
    coarse, n0 = _mu_hat_level(phi, w, r, xi, 0, order, h_max, h_max_s, batch)
    try:
        fine, n1 = _mu_hat_level(phi, w, r, xi, 1, order, h_max, h_max_s, batch)
    except BudgetExceeded as exc:
        raise BudgetExceeded(str(exc), best=OscillatoryResult(coarse, math.inf, n0)) from None
    return OscillatoryResult(complex(fine), float(abs(fine - coarse)), n0 + n1)


# Van der Corput constant scan ------------------------------------------------------

@dataclass
class VdcScan:
    exponent: float
    decades: list
    decade_sups: list
    samples: list
    ratio: float
    bounded: bool
    growth_flag: bool

    def to_json(self) -> dict:
        return {
            "exponent": self.exponent,
            "decades": self.decades,
            "decade_sups": self.decade_sups,
            "ratio": self.ratio,
            "bounded": self.bounded,
            "growth_flag": self.growth_flag,
            "samples": self.samples,
        }


def vdc_constant_scan(w: Weights, A3_list: Sequence[float], A12_grid=(4.0, 5),
                      exponent: Optional[float] = None, h_max: float = 0.125) -> VdcScan:
    """Sup of |I(A1, A2, A3)| |A3|^exponent over a grid, reported per decade of |A3|.

    ``A12_grid = (L, n)`` spans the dilation-scaled coefficients
    a = A1 |A3|^(-alpha1/m), b = A2 |A3|^(-alpha2/m) over linspace(-L, L, n);
    the normalized value is invariant under the dilation only in those
    coordinates, so a fixed scaled grid probes the same family at every |A3|.
    """
    if any(abs(x) < 1 for x in A3_list):
        raise InvalidArgument("all |A3| must be at least 1")
    a1, a2, m = w.floats()
    if exponent is None:
        exponent = float(w.decay_exponent)
    L, n = A12_grid
    grid = np.linspace(-L, L, int(n)) if int(n) > 1 else np.array([0.0])
    samples = []
    per_decade: dict[int, float] = {}
    for A3 in A3_list:
        A3 = float(A3)
        scale = abs(A3) ** exponent
        dec = int(math.floor(math.log10(abs(A3)) + 1e-12))
        for a in grid:
            for b in grid:
                A1 = a * abs(A3) ** (a1 / m)
                A2 = b * abs(A3) ** (a2 / m)
                res = oscillatory_integral_1d(w, A1, A2, A3, h_max, GAUSS_ORDER)
                val = abs(res.value) * scale
                samples.append([A1, A2, A3, val])
                per_decade[dec] = max(per_decade.get(dec, 0.0), val)
    decs = sorted(per_decade)
    sups = [per_decade[k] for k in decs]
    ratio = max(sups) / min(sups) if min(sups) > 0 else math.inf
    monotone_up = all(y >= x for x, y in zip(sups, sups[1:]))
    growth = monotone_up and len(sups) > 1 and sups[-1] / sups[0] > 2.0
    return VdcScan(exponent, decs, sups, samples, ratio, ratio < 2.0, growth)


# singular integral -----------------------------------------------------------------

DIVERGENCE_LIMIT = 1e6


@dataclass
class SectionIntegral:
    value: float
    zeros: list
    divergent: bool = False


def _real_roots(p, lo, hi):
    if p.degree() < 1:
        return []
    rts = p.roots()
    out = []
    for z in np.atleast_1d(rts):
        if abs(z.imag) <= 1e-9 * max(1.0, abs(z.real)) and lo - 1e-12 <= z.real <= hi + 1e-12:
            out.append(min(max(float(z.real), lo), hi))
    return sorted(out)


def _multiplicity(p, x, tol=1e-7):
    k = 0
    q = p
    scale = max(1.0, float(np.max(np.abs(p.coef))))
    while k <= p.degree() and abs(q(x)) <= tol * scale:
        k += 1
        q = q.deriv()
    return max(k, 1)


def section_integral(g, c: float, d: float, power: float, levels: int = 60, order: int = 16) -> SectionIntegral:
    """int_c^d |g(s)|^(-power) ds for a polynomial g, graded toward its zeros.

    Each subinterval between consecutive zeros is split dyadically toward any
    zero endpoint; the innermost piece is closed with the local power-law
    antiderivative.
    """
    if c == d:
        return SectionIntegral(0.0, [])
    if np.all(g.coef == 0):
        return SectionIntegral(math.inf, [], True)
    zeros = []
    for z in _real_roots(g, c, d):
        if not zeros or abs(z - zeros[-1]) > 1e-12:
            zeros.append(z)
    pts = sorted(set([c, d] + zeros))
    x, wts = _gauss(order)

    def plain(lo, hi):
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        s = mid + half * x
        return float(np.sum(half * wts * np.abs(g(s)) ** (-power)))

    def graded(z, other):
        # integrate from zero z toward the regular endpoint ``other``
        mult = _multiplicity(g, z)
        if mult * power >= 1.0:
            return math.inf
        length = other - z
        # stop before the pieces shrink to rounding level around z
        floor = 64.0 * np.finfo(float).eps * max(1.0, abs(z))
        depth = min(levels, max(1, int(math.log2(abs(length) / floor))))
        total = 0.0
        for k in range(depth):
            a = z + length * 2.0 ** -(k + 1)
            b = z + length * 2.0 ** -k
            total += plain(min(a, b), max(a, b))
            if not math.isfinite(total) or total > DIVERGENCE_LIMIT:
                return math.inf
        eps = abs(length) * 2.0 ** -depth
        lead = abs(g.deriv(mult)(z)) / math.factorial(mult)
        total += lead ** (-power) * eps ** (1 - mult * power) / (1 - mult * power)
        return total

    zero_set = set(zeros)
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        zl, zh = lo in zero_set, hi in zero_set
        if zl and zh:
            mid = 0.5 * (lo + hi)
            part = graded(lo, mid) + graded(hi, mid)
        elif zl:
            part = graded(lo, hi)
        elif zh:
            part = graded(hi, lo)
        else:
            # split a few times in case g comes close to zero without a root
            edges = np.linspace(lo, hi, 9)
            part = sum(plain(a, b) for a, b in zip(edges[:-1], edges[1:]))
        total += part
        if not math.isfinite(total) or total > DIVERGENCE_LIMIT:
            return SectionIntegral(math.inf, zeros, True)
    return SectionIntegral(total, zeros, False)


@dataclass
class SingularSup:
    sup_value: float
    argmax_angle: float
    refinement_ratio: float
    sup_value_refined: float
    angles: int
    divergent_angles: list = field(default_factory=list)

    @property
    def divergence_suspected(self) -> bool:
        return bool(self.divergent_angles) or not math.isfinite(self.sup_value)

    def to_json(self) -> dict:
        return {
            "sup_value": self.sup_value,
            "argmax_angle": self.argmax_angle,
            "sup_value_refined": self.sup_value_refined,
            "refinement_ratio": self.refinement_ratio,
            "angles": self.angles,
            "divergence_suspected": self.divergence_suspected,
            "divergent_angles": self.divergent_angles[:50],
        }


def _section_sup(phi, r, power, n):
    best, arg, bad = -1.0, 0.0, []
    for th in angle_grid(n):
        g, _, _ = section_polys(phi, (math.cos(th), math.sin(th)))
        res = section_integral(g, r.c, r.d, power)
        if res.divergent:
            bad.append(float(th))
            continue
        if res.value > best:
            best, arg = res.value, float(th)
    return best, arg, bad


def singular_integral_sup(phi: SurfaceMap, w: Weights, r: SectorRegion, zeta_angles: int = 2048) -> SingularSup:
    """sup over zeta of int_c^d |G(zeta, s)|^(-(alpha1+alpha2)/m) ds.

    Computed on an angle grid of size N and again on 2N; the ratio of the
    two sups indicates whether the angle grid resolves the supremum.
    """
    if zeta_angles < 360:
        raise InvalidArgument("zeta_angles must be at least 360")
    power = float(w.decay_exponent)
    s1, a1, bad1 = _section_sup(phi, r, power, zeta_angles)
    s2, a2, bad2 = _section_sup(phi, r, power, 2 * zeta_angles)
    bad = sorted(set(bad1) | set(bad2))
    if bad:
        return SingularSup(math.inf, bad[0], math.nan, math.inf, zeta_angles, bad)
    return SingularSup(s1, a1, s2 / s1, s2, zeta_angles)


# decay fits -------------------------------------------------------------------------

@dataclass
class DecayFit:
    direction_angle: float
    xi_prime: tuple[float, float]
    radii: list
    values: list
    errors: list
    excluded: list
    fit: Optional[ScalingFit]
    predicted_slope: float

    def to_json(self) -> dict:
        return {
            "direction": [math.cos(self.direction_angle), math.sin(self.direction_angle)],
            "direction_angle": self.direction_angle,
            "xi_prime": list(self.xi_prime),
            "slope": self.fit.slope if self.fit else None,
            "intercept": self.fit.intercept if self.fit else None,
            "r2": self.fit.r_squared if self.fit else None,
            "points": [list(p) for p in self.fit.points] if self.fit else [],
            "radii": self.radii,
            "abs_values": self.values,
            "abs_errors": self.errors,
            "excluded_radii": self.excluded,
            "predicted_slope": self.predicted_slope,
        }


@dataclass
class DecayReport:
    fits: list
    predicted_slope: float
    worst_slope: float
    empirical_constant: float

    def to_json(self) -> dict:
        return {
            "predicted_slope": self.predicted_slope,
            "worst_slope": self.worst_slope,
            "empirical_constant": self.empirical_constant,
            "fits": [f.to_json() for f in self.fits],
        }

    def csv_rows(self) -> list[list]:
        rows = [["direction_angle", "xi1", "xi2", "slope", "intercept", "r2", "n_points"]]
        for f in self.fits:
            rows.append([f.direction_angle, f.xi_prime[0], f.xi_prime[1],
                         f.fit.slope if f.fit else "", f.fit.intercept if f.fit else "",
                         f.fit.r_squared if f.fit else "", len(f.fit.points) if f.fit else 0])
        return rows


def _mu_hat_task(args):
    surface, xi, h_max = args
    res = mu_hat(surface.phi, surface.weights, surface.region, xi, h_max)
    return abs(res.value), res.abs_error_estimate


def map_ordered(fn, tasks, jobs: int = 1):
    """Map ``fn`` over ``tasks``; results come back in task order for any ``jobs``."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def decay_fit(surface: Surface, direction_angles: Sequence[float], xi_prime_samples: Sequence,
              radii: Sequence[float], jobs: int = 1, h_max: float = 0.125) -> DecayReport:
    """Fit log|mu_hat(xi', R zeta)| against log R for every (direction, xi') pair."""
    radii = [float(R) for R in radii]
    if len(radii) < 8:
        raise InvalidArgument("need at least 8 radii")
    if max(radii) / min(radii) < 10**3 * (1 - 1e-9):
        raise InvalidArgument("radii must span at least three decades")
    w = surface.weights
    predicted = -float(w.decay_exponent)
    combos = [(float(th), (float(xp[0]), float(xp[1]))) for th in direction_angles for xp in xi_prime_samples]
    tasks = []
    for th, xp in combos:
        for R in radii:
            xi = Frequency4(xp, (R * math.cos(th), R * math.sin(th)))
            tasks.append((surface, xi, h_max))
    results = map_ordered(_mu_hat_task, tasks, jobs)
    fits = []
    worst = -math.inf
    const = 0.0
    k = 0
    for th, xp in combos:
        vals, errs, keep_R, keep_v, excl = [], [], [], [], []
        for R in radii:
            v, e = results[k]
            k += 1
            vals.append(v)
            errs.append(e)
            if v >= 10.0 * e and v > 0:
                keep_R.append(R)
                keep_v.append(v)
                const = max(const, v * R ** (-predicted))
            else:
                excl.append(R)
        fit = None
        if len(keep_R) >= 6:
            try:
                fit = fit_loglog(keep_R, keep_v)
            except DegenerateFit:
                fit = None
        if fit is not None:
            worst = max(worst, fit.slope)
        fits.append(DecayFit(th, xp, radii, vals, errs, excl, fit, predicted))
    return DecayReport(fits, predicted, worst, const)
