"""Weights, polynomial maps, dilations and the sector region.

Everything in here is exact where it can be: the weights are kept as
``Fraction`` so that exponent arithmetic downstream has no rounding, and the
maps are polynomials whose derivatives are computed termwise.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Mapping

import numpy as np
from numpy.polynomial import Polynomial

from .errors import InvalidArgument

HOMOGENEITY_RTOL = 1e-12
UNIT_TOL = 1e-12


def as_fraction(value) -> Fraction:
    """Convert ints, floats or ``"p/q"`` strings to an exact ``Fraction``.

    Floats go through their shortest repr, so ``0.1`` becomes ``1/10``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise InvalidArgument(f"not a number: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise InvalidArgument(f"not a finite number: {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidArgument(f"cannot parse rational {value!r}") from exc
    raise InvalidArgument(f"not a number: {value!r}")


@dataclass(frozen=True)
class Weights:
    """Anisotropy data: dilation exponents ``alpha1``, ``alpha2`` and degree ``m``."""

    alpha1: Fraction
    alpha2: Fraction
    m: Fraction

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "m"):
            val = as_fraction(getattr(self, name))
            if val <= 0:
                raise InvalidArgument(f"{name} must be positive, got {val}")
            object.__setattr__(self, name, val)
        if self.alpha1 == self.alpha2:
            raise InvalidArgument("alpha1 and alpha2 must differ")

    @property
    def a(self) -> Fraction:
        """alpha1 + alpha2, the homogeneous dimension of the plane."""
        return self.alpha1 + self.alpha2

    @property
    def beta(self) -> Fraction:
        """Homogeneity degree of the entries of K(x)."""
        return 2 * (self.m - self.alpha1 - self.alpha2)

    @property
    def gamma(self) -> Fraction:
        return self.m / self.a

    @property
    def decay_exponent(self) -> Fraction:
        """(alpha1 + alpha2) / m."""
        return self.a / self.m

    @property
    def satisfies_h2_bound(self) -> bool:
        return self.m >= 3 * self.a

    def floats(self) -> tuple[float, float, float]:
        return float(self.alpha1), float(self.alpha2), float(self.m)

    def to_json(self) -> dict:
        return {"alpha1": str(self.alpha1), "alpha2": str(self.alpha2), "m": str(self.m)}


@dataclass(frozen=True)
class BivariatePolynomial:
    """Finite sum of ``coeff * x1**i * x2**j`` terms.

    Stored as a sorted tuple of ``(i, j, coeff)``; duplicate exponents are
    merged and zero coefficients dropped at construction.
    """

    terms: tuple[tuple[int, int, float], ...] = ()

    def __post_init__(self):
        merged: dict[tuple[int, int], float] = {}
        for i, j, coeff in self.terms:
            if int(i) != i or int(j) != j or i < 0 or j < 0:
                raise InvalidArgument(f"exponents must be nonnegative integers: ({i}, {j})")
            key = (int(i), int(j))
            merged[key] = merged.get(key, 0.0) + float(coeff)
        clean = tuple(sorted((i, j, c) for (i, j), c in merged.items() if c != 0.0))
        object.__setattr__(self, "terms", clean)

    @classmethod
    def from_dict(cls, coeffs: Mapping[tuple[int, int], float]) -> "BivariatePolynomial":
        return cls(tuple((i, j, c) for (i, j), c in coeffs.items()))

    @property
    def is_zero(self) -> bool:
        return not self.terms

    def monomials(self) -> list[tuple[int, int]]:
        return [(i, j) for i, j, _ in self.terms]

    def __call__(self, x1, x2):
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        out = np.zeros(np.broadcast(x1, x2).shape)
        for i, j, c in self.terms:
            out = out + c * x1**i * x2**j
        return out if out.ndim else float(out)

    def abs_terms(self, x1, x2):
        """Sum of |term| values; a scale for relative comparisons."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        out = np.zeros(np.broadcast(x1, x2).shape)
        for i, j, c in self.terms:
            out = out + np.abs(c * x1**i * x2**j)
        return out if out.ndim else float(out)

    def partial(self, axis: int) -> "BivariatePolynomial":
        if axis not in (1, 2):
            raise InvalidArgument("axis must be 1 or 2")
        out = []
        for i, j, c in self.terms:
            if axis == 1 and i > 0:
                out.append((i - 1, j, c * i))
            elif axis == 2 and j > 0:
                out.append((i, j - 1, c * j))
        return BivariatePolynomial(tuple(out))

    def restrict_x1_one(self) -> Polynomial:
        """The univariate polynomial ``s -> p(1, s)``."""
        deg = max((j for _, j, _ in self.terms), default=0)
        coef = np.zeros(deg + 1)
        for _, j, c in self.terms:
            coef[j] += c
        return Polynomial(coef)

    def to_json(self) -> list[dict]:
        return [{"i": i, "j": j, "coeff": c} for i, j, c in self.terms]


def poly_eval(p: BivariatePolynomial, x) -> float:
    return p(x[0], x[1])


def poly_partial(p: BivariatePolynomial, axis: int) -> BivariatePolynomial:
    return p.partial(axis)


@dataclass(frozen=True)
class SurfaceMap:
    phi1: BivariatePolynomial
    phi2: BivariatePolynomial

    def __call__(self, x1, x2):
        return self.phi1(x1, x2), self.phi2(x1, x2)

    @cached_property
    def hessians(self):
        """Second partials ``(p11, p12, p22)`` of each component."""
        out = []
        for p in (self.phi1, self.phi2):
            p1, p2 = p.partial(1), p.partial(2)
            out.append((p1.partial(1), p1.partial(2), p2.partial(2)))
        return tuple(out)

    @cached_property
    def ray_polys(self) -> tuple[Polynomial, Polynomial]:
        """``s -> phi(1, s)`` for both components."""
        return self.phi1.restrict_x1_one(), self.phi2.restrict_x1_one()

    def to_json(self) -> dict:
        return {"phi1": self.phi1.to_json(), "phi2": self.phi2.to_json()}


@dataclass(frozen=True)
class SectorRegion:
    """Parameter box (c, d) x (0, 1) of the sector {t.(1,s)}."""

    c: float
    d: float
    t_max: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "c", float(self.c))
        object.__setattr__(self, "d", float(self.d))
        if not (math.isfinite(self.c) and math.isfinite(self.d)):
            raise InvalidArgument("region bounds must be finite")
        if self.c > self.d:
            raise InvalidArgument(f"need c <= d, got c={self.c}, d={self.d}")
        if self.t_max != 1.0:
            raise InvalidArgument("t_max is fixed at 1")

    @property
    def length(self) -> float:
        return self.d - self.c

    def to_json(self) -> dict:
        return {"c": self.c, "d": self.d}


@dataclass(frozen=True)
class SectionJet:
    G: float
    G_s: float
    G_ss: float


@dataclass(frozen=True)
class HomogeneityReport:
    passed: bool
    monomials_ok: bool
    m_bound_ok: bool
    offending: dict = field(default_factory=dict)
    spot_check_max_rel: float = 0.0

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "monomials_ok": self.monomials_ok,
            "m_bound_ok": self.m_bound_ok,
            "offending": {k: [list(m) for m in v] for k, v in self.offending.items()},
            "spot_check_max_rel": self.spot_check_max_rel,
        }


@dataclass(frozen=True)
class Surface:
    """A parsed surface file: weights, map and region together."""

    weights: Weights
    phi: SurfaceMap
    region: SectorRegion
    name: str = "custom"

    def to_json(self) -> dict:
        return {
            **self.weights.to_json(),
            **self.phi.to_json(),
            "region": self.region.to_json(),
        }

    def spec_hash(self) -> str:
        import hashlib

        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def dilate(w: Weights, t, x):
    """t . x = (t^alpha1 x1, t^alpha2 x2)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise InvalidArgument("dilation parameter must be positive")
    a1, a2, _ = w.floats()
    x1 = np.asarray(x[0], dtype=float)
    x2 = np.asarray(x[1], dtype=float)
    y1, y2 = t_arr**a1 * x1, t_arr**a2 * x2
    if y1.ndim == 0 and y2.ndim == 0:
        return float(y1), float(y2)
    return y1, y2


def check_quasi_homogeneous(phi: SurfaceMap, w: Weights, n_samples: int = 1000,
                            seed: int = 0) -> HomogeneityReport:
    """Check phi(t.x) = t^m phi(x) exactly on monomials and numerically on samples."""
    offending = {}
    for name, p in (("phi1", phi.phi1), ("phi2", phi.phi2)):
        bad = [(i, j) for i, j in p.monomials() if w.alpha1 * i + w.alpha2 * j != w.m]
        if bad:
            offending[name] = bad
    monomials_ok = not offending

    rng = np.random.default_rng(seed)
    t = np.exp(rng.uniform(np.log(0.05), np.log(20.0), n_samples))
    x1 = rng.uniform(-2.0, 2.0, n_samples)
    x2 = rng.uniform(-2.0, 2.0, n_samples)
    y1, y2 = dilate(w, t, (x1, x2))
    tm = t ** float(w.m)
    worst = 0.0
    for p in (phi.phi1, phi.phi2):
        if p.is_zero:
            continue
        lhs = p(y1, y2)
        rhs = tm * p(x1, x2)
        scale = np.maximum(p.abs_terms(y1, y2), tm * p.abs_terms(x1, x2))
        rel = np.abs(lhs - rhs) / np.maximum(scale, np.finfo(float).tiny)
        worst = max(worst, float(np.max(rel)))
    spot_ok = worst <= HOMOGENEITY_RTOL
    m_ok = w.satisfies_h2_bound
    return HomogeneityReport(
        passed=monomials_ok and spot_ok and m_ok,
        monomials_ok=monomials_ok,
        m_bound_ok=m_ok,
        offending=offending,
        spot_check_max_rel=worst,
    )


def _check_unit(zeta) -> tuple[float, float]:
    z1, z2 = float(zeta[0]), float(zeta[1])
    if abs(math.hypot(z1, z2) - 1.0) > UNIT_TOL:
        raise InvalidArgument(f"zeta must be a unit vector, |zeta| = {math.hypot(z1, z2)}")
    return z1, z2


def section_polys(phi: SurfaceMap, zeta) -> tuple[Polynomial, Polynomial, Polynomial]:
    """G(zeta, .), G_s and G_ss as univariate polynomials in s."""
    z1, z2 = _check_unit(zeta)
    p1, p2 = phi.ray_polys
    g = z1 * p1 + z2 * p2
    return g, g.deriv(1), g.deriv(2)


def section_jet(phi: SurfaceMap, w: Weights, zeta, s) -> SectionJet:
    """G(zeta, s) = <phi(1, s), zeta> with its first two s-derivatives."""
    g, gs, gss = section_polys(phi, zeta)
    return SectionJet(float(g(s)), float(gs(s)), float(gss(s)))


def section_values(phi: SurfaceMap, zeta, s):
    """Vectorised (G, G_s, G_ss) over an array of s."""
    g, gs, gss = section_polys(phi, zeta)
    s = np.asarray(s, dtype=float)
    return g(s), gs(s), gss(s)


def region_measure(w: Weights, r: SectorRegion) -> float:
    """Lebesgue measure of the sector, alpha1 (d - c) / (alpha1 + alpha2)."""
    return float(w.alpha1 / w.a) * (r.d - r.c)


def in_sector(w: Weights, r: SectorRegion, x1, x2):
    """Membership mask for the open sector V_1^{c,d}."""
    a1, a2, _ = w.floats()
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    ok = (x1 > 0) & (x1 < 1)
    t = np.where(ok, np.clip(x1, 1e-300, None), 1.0) ** (1.0 / a1)
    s = x2 / t**a2
    return ok & (s > r.c) & (s < r.d)


# Surface files ------------------------------------------------------------

EXAMPLE5 = {
    "alpha1": "1/2",
    "alpha2": "1",
    "m": "6",
    "phi1": [
        {"i": 12, "j": 0, "coeff": "-1/33"},
        {"i": 0, "j": 6, "coeff": "1/30"},
    ],
    "phi2": [
        {"i": 12, "j": 0, "coeff": "-1/44"},
        {"i": 0, "j": 6, "coeff": "1/30"},
        {"i": 6, "j": 3, "coeff": "1/18"},
    ],
    "region": {"c": "97/99", "d": "1"},
}


class SurfaceParseError(InvalidArgument):
    """A surface file is malformed; ``field`` names the offending entry."""

    def __init__(self, message, field_name=None):
        super().__init__(message if field_name is None else f"{field_name}: {message}")
        self.field = field_name


def _parse_terms(raw, name: str) -> BivariatePolynomial:
    if not isinstance(raw, list):
        raise SurfaceParseError("expected a list of terms", name)
    terms = []
    for k, item in enumerate(raw):
        where = f"{name}[{k}]"
        if not isinstance(item, dict) or not {"i", "j", "coeff"} <= item.keys():
            raise SurfaceParseError("each term needs i, j and coeff", where)
        i, j = item["i"], item["j"]
        if not (isinstance(i, int) and isinstance(j, int)) or isinstance(i, bool) or i < 0 or j < 0:
            raise SurfaceParseError("exponents must be nonnegative integers", where)
        try:
            coeff = float(as_fraction(item["coeff"]))
        except InvalidArgument as exc:
            raise SurfaceParseError(str(exc), f"{where}.coeff") from None
        terms.append((i, j, coeff))
    return BivariatePolynomial(tuple(terms))


def parse_surface(data: Mapping, name: str = "custom") -> Surface:
    """Build a ``Surface`` from the JSON surface-file layout."""
    if not isinstance(data, Mapping):
        raise SurfaceParseError("surface file must hold a JSON object")
    for key in ("alpha1", "alpha2", "m", "phi1", "phi2", "region"):
        if key not in data:
            raise SurfaceParseError("missing field", key)
    try:
        w = Weights(as_fraction(data["alpha1"]), as_fraction(data["alpha2"]), as_fraction(data["m"]))
    except InvalidArgument as exc:
        raise SurfaceParseError(str(exc), "weights") from None
    phi = SurfaceMap(_parse_terms(data["phi1"], "phi1"), _parse_terms(data["phi2"], "phi2"))
    reg = data["region"]
    if not isinstance(reg, Mapping) or "c" not in reg or "d" not in reg:
        raise SurfaceParseError("region needs c and d", "region")
    try:
        region = SectorRegion(float(as_fraction(reg["c"])), float(as_fraction(reg["d"])))
    except InvalidArgument as exc:
        raise SurfaceParseError(str(exc), "region") from None
    return Surface(w, phi, region, name=name)


def example5() -> Surface:
    return parse_surface(EXAMPLE5, name="example5")


def load_surface(ref: str) -> Surface:
    """Load a surface from a JSON path, or the built-in name ``example5``."""
    if ref == "example5":
        return example5()
    with open(ref, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SurfaceParseError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return parse_surface(data, name=str(ref))


def unit_from_angle(theta: float) -> tuple[float, float]:
    return math.cos(theta), math.sin(theta)


def angle_grid(n: int, offset: float = 0.0) -> np.ndarray:
    """n equispaced angles in [0, 2 pi)."""
    return offset + 2.0 * np.pi * np.arange(n) / n

