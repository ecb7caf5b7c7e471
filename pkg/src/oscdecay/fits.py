"""Least-squares power-law fits in log-log coordinates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFit, InvalidArgument

MIN_POINTS = 6


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    intercept: float
    r_squared: float
    points: tuple[tuple[float, float], ...]

    def to_json(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r2": self.r_squared,
            "points": [list(p) for p in self.points],
        }


def fit_loglog(x, y, base: float = np.e, min_points: int = MIN_POINTS) -> ScalingFit:
    """Fit log(y) = intercept + slope * log(x).

    ``x`` and ``y`` must be positive. Logs are taken in ``base`` so that the
    stored points and intercept are in the same units as the caller's.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidArgument("x and y must be 1-D arrays of equal length")
    if len(x) < min_points:
        raise InvalidArgument(f"need at least {min_points} points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise DegenerateFit("nonpositive sample in log-log fit", list(zip(x.tolist(), y.tolist())))
    lx = np.log(x) / np.log(base)
    ly = np.log(y) / np.log(base)
    return fit_linear(lx, ly)


def fit_linear(lx, ly) -> ScalingFit:
    """Ordinary least squares on already-transformed coordinates."""
    lx = np.asarray(lx, dtype=float)
    ly = np.asarray(ly, dtype=float)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (intercept + slope * lx)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    pts = tuple((float(a), float(b)) for a, b in zip(lx, ly))
    return ScalingFit(float(slope), float(intercept), r2, pts)


def geometric_list(lo: float, hi: float, n: int) -> list[float]:
    if n < 2 or lo <= 0 or hi <= 0:
        raise InvalidArgument("geometric list needs n >= 2 and positive bounds")
    return np.geomspace(lo, hi, n).tolist()


def parse_range(text: str) -> list[float]:
    """Parse ``a:b:n`` (geometric, n points) or a comma list.

    ``a`` and ``b`` may be written as ``2^-3`` for powers of two. With only
    ``a:b`` and both bounds powers of two, every integer power in between is
    returned.
    """
    def num(tok: str) -> float:
        tok = tok.strip()
        if "^" in tok:
            base, exp = tok.split("^", 1)
            return float(base) ** float(exp)
        return float(tok)

    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) == 3:
            return geometric_list(num(parts[0]), num(parts[1]), int(parts[2]))
        if len(parts) == 2 and all("^" in p for p in parts):
            (b0, e0), (b1, e1) = (p.split("^", 1) for p in parts)
            if float(b0) != float(b1):
                raise InvalidArgument(f"mismatched bases in range {text!r}")
            e0, e1 = int(float(e0)), int(float(e1))
            step = 1 if e1 >= e0 else -1
            return [float(b0) ** e for e in range(e0, e1 + step, step)]
        raise InvalidArgument(f"cannot parse range {text!r}")
    return [num(t) for t in text.split(",") if t.strip()]
