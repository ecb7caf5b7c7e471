"""Command-line front end.

Every subcommand writes ``<out>/<command>.json`` (and a CSV where the result
is tabular) and prints a short summary. Exit codes: 0 success, 1 usage or
parse error, 2 hypothesis failure, 3 fit or tolerance failure, 4 numerical
budget failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from fractions import Fraction

import numpy as np

from . import __version__
from .convolution import (
    DeltaBox,
    box_lower_bound_fits,
    necessary_inv_q,
    operator_norm_probe,
    pointwise_lower_bound,
    typeset_vertex,
)
from .core import angle_grid, check_quasi_homogeneous, load_surface
from .ellipticity import (
    EULER_TOL,
    NONELLIPTIC_TOL,
    analyze,
    check_H4,
    classify_point,
    euler_grid,
)
from .errors import BudgetExceeded, DegenerateFit, InvalidArgument, PreconditionViolated
from .fits import parse_range
from .fourier import decay_fit, singular_integral_sup, vdc_constant_scan
from .reports import write_csv, write_json
from .restriction import SIN1, critical_exponents, knapp_exponent_fit, knapp_line

EXIT_OK, EXIT_USAGE, EXIT_HYPOTHESIS, EXIT_FIT, EXIT_BUDGET = 0, 1, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _pairs(text: str) -> list[tuple[float, float]]:
    """Parse ``"a,b;c,d"`` into [(a, b), (c, d)]."""
    out = []
    for chunk in text.split(";"):
        if chunk.strip():
            a, b = chunk.split(",")
            out.append((float(Fraction(a.strip())), float(Fraction(b.strip()))))
    return out


def _floats(text: str) -> list[float]:
    return [float(Fraction(t.strip())) for t in text.split(",") if t.strip()]


# hypothesis checks ---------------------------------------------------------------

def hypothesis_report(surface, grid_n: int = 1024, depths: int = 12, tol: float = NONELLIPTIC_TOL) -> dict:
    w = surface.weights
    homog = check_quasi_homogeneous(surface.phi, w)
    ell = analyze(surface.phi, w, surface.region, grid_n, depths, tol)
    reasons = []
    if not homog.monomials_ok:
        reasons.append("H2: monomials off the weighted degree")
    if not homog.m_bound_ok:
        reasons.append(f"H2: m = {w.m} below 3(alpha1+alpha2) = {3 * w.a}")
    if not ell.search.h3_ok:
        reasons.append(f"H3: {ell.search.status}")
    h4 = None
    if ell.n1 is not None or ell.n2 is not None:
        ok, margin = check_H4(ell.n1, ell.n2, w)
        h4 = {"passed": ok, "margin": margin, "bound": 2 * w.m / w.a - 3}
        if not ok:
            reasons.append(f"H4: max order not below {h4['bound']}")
    elif ell.search.h3_ok:
        reasons.append("H4: no degeneracy order could be fitted")
    return {
        "H1": {"passed": True, "reason": "polynomial components are real analytic"},
        "H2": homog.to_json(),
        "H3": ell.to_json(),
        "H4": h4,
        "passed": not reasons,
        "reasons": reasons,
    }


def _gate(args, surface) -> int | None:
    """Run the hypothesis check before an analysis unless --force is given."""
    if args.force:
        return None
    rep = hypothesis_report(surface)
    if not rep["passed"]:
        print("hypotheses fail (use --force to run anyway): " + "; ".join(rep["reasons"]), file=sys.stderr)
        return EXIT_HYPOTHESIS
    return None


# commands -------------------------------------------------------------------------------

def cmd_check(args, surface):
    rep = hypothesis_report(surface, args.grid_n, args.depths, args.tol or NONELLIPTIC_TOL)
    h3 = rep["H3"]
    h4 = rep["H4"]
    h4_text = "n/a" if h4 is None else f"{'pass' if h4['passed'] else 'FAIL'} (margin {h4['margin']})"
    print(f"H2 {'pass' if rep['H2']['passed'] else 'FAIL'}; sigma={h3['sigma']}; "
          f"n1={h3['n1']}; n2={h3['n2']}; H4 {h4_text}")
    for reason in rep["reasons"]:
        print("  " + reason)
    code = EXIT_OK if rep["passed"] else EXIT_HYPOTHESIS
    return code, rep, {"nonelliptic_tol": args.tol or NONELLIPTIC_TOL, "grid_n": args.grid_n,
                       "depths": args.depths}, None


def cmd_euler(args, surface):
    tol = args.tol or EULER_TOL
    lo, hi = _floats(args.s_range)
    res = euler_grid(surface.phi, surface.weights, args.n_zeta, args.n_s, (lo, hi))
    ok = res <= tol
    print(f"max relative residual {res:.3e} ({'pass' if ok else 'FAIL'} at {tol:g})")
    rep = {"max_residual": res, "passed": ok, "n_zeta": args.n_zeta, "n_s": args.n_s, "s_range": [lo, hi]}
    return (EXIT_OK if ok else EXIT_FIT), rep, {"euler_tol": tol}, None


def cmd_classify(args, surface):
    tol = args.tol or NONELLIPTIC_TOL
    pts = _pairs(args.points) if args.points else []
    if args.random:
        rng = np.random.default_rng(args.seed)
        r = surface.region
        t = rng.uniform(0.0, 1.0, args.random)
        s = rng.uniform(r.c, r.d, args.random)
        a1, a2, _ = surface.weights.floats()
        pts += list(zip((t**a1).tolist(), (t**a2 * s).tolist()))
    rows = [["x1", "x2", "class", "lambda1", "lambda2", "min_abs_q"]]
    out = []
    for x in pts:
        pc = classify_point(surface.phi, surface.weights, x, tol)
        out.append({"x": list(x), "class": pc.label, "lambda1": pc.lambda1, "lambda2": pc.lambda2,
                    "min_abs_q": pc.min_abs_q})
        rows.append([x[0], x[1], pc.label, pc.lambda1, pc.lambda2, pc.min_abs_q])
        print(f"({x[0]:.6g}, {x[1]:.6g}): {pc.label}  Lambda=({pc.lambda1:.4g}, {pc.lambda2:.4g})")
    return EXIT_OK, {"points": out}, {"nonelliptic_tol": tol}, rows


def cmd_decay(args, surface):
    tol = args.tol or 0.05
    radii = parse_range(args.radii)
    dirs = angle_grid(args.dirs).tolist()
    xps = _pairs(args.xi_prime)
    try:
        rep = decay_fit(surface, dirs, xps, radii, jobs=args.jobs, h_max=args.h_max)
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET, {"error": str(exc), "radii": radii}, {"slope_tol": tol}, None
    bad = [f for f in rep.fits
           if f.fit is None or f.fit.slope > rep.predicted_slope + tol or f.fit.r_squared < args.min_r2]
    print(f"predicted slope {rep.predicted_slope:.4f}; worst fitted slope {rep.worst_slope:.4f}; "
          f"{len(rep.fits) - len(bad)}/{len(rep.fits)} fits within tolerance")
    data = rep.to_json()
    data["failing"] = [[f.direction_angle, list(f.xi_prime)] for f in bad]
    return (EXIT_OK if not bad else EXIT_FIT), data, {"slope_tol": tol, "min_r2": args.min_r2,
                                                       "h_max": args.h_max}, rep.csv_rows()


def cmd_vdc(args, surface):
    A3 = parse_range(args.a3)
    L, n = _floats(args.grid)
    scan = vdc_constant_scan(surface.weights, A3, (L, int(n)), args.exponent)
    print(f"per-decade sups {['%.4g' % v for v in scan.decade_sups]}; ratio {scan.ratio:.3f}; "
          f"growth flagged: {scan.growth_flag}")
    rows = [["A1", "A2", "A3", "normalized"]] + scan.samples
    return (EXIT_OK if scan.bounded else EXIT_FIT), scan.to_json(), {"ratio_bound": 2.0}, rows


def cmd_singular(args, surface):
    tol = args.tol or 0.05
    res = singular_integral_sup(surface.phi, surface.weights, surface.region, args.angles)
    ok = not res.divergence_suspected and abs(res.refinement_ratio - 1.0) <= tol
    print(f"sup {res.sup_value:.6g} at angle {res.argmax_angle:.6g}; refinement ratio {res.refinement_ratio:.6f}")
    return (EXIT_OK if ok else EXIT_FIT), res.to_json(), {"ratio_tol": tol}, None


def cmd_knapp(args, surface):
    tol = args.tol or 0.05
    eps = parse_range(args.eps)
    fits, rows, ok = [], [["q", "predicted_slope", "fitted_slope", "r2", "factor_min"]], True
    for q in _floats(args.q):
        kf = knapp_exponent_fit(surface.phi, surface.weights, surface.region, q, eps)
        good = kf.slope_error <= tol and kf.factor_min >= SIN1
        ok &= good
        fits.append(kf.to_json())
        rows.append([q, kf.predicted_slope, kf.fit.slope, kf.fit.r_squared, kf.factor_min])
        print(f"q={q:g}: fitted {kf.fit.slope:.4f} vs predicted {kf.predicted_slope:.4f}; "
              f"min factor {kf.factor_min:.4f} (sin 1 = {SIN1:.4f})")
    return (EXIT_OK if ok else EXIT_FIT), {"fits": fits}, {"slope_tol": tol}, rows


def cmd_exponents(args, surface):
    table = critical_exponents(surface.weights)
    thr = table.restriction_threshold
    line = knapp_line(surface.weights, thr)
    print(f"restriction threshold {thr} ({float(thr):.6f}); Knapp slope factor {table.knapp_slope_factor}")
    data = table.to_json()
    data["knapp_line_at_threshold"] = str(line)
    return EXIT_OK, data, {}, None


def cmd_typeset(args, surface):
    v = typeset_vertex(surface.weights)
    on_line = necessary_inv_q(surface.weights, v.inv_p) == v.inv_q
    print(f"vertex ({float(v.inv_p):.4f}, {float(v.inv_q):.4f}) = ({v.inv_p}, {v.inv_q}); "
          f"on necessary line: {on_line}")
    data = v.to_json()
    data["on_necessary_line"] = on_line
    return EXIT_OK, data, {}, None


def cmd_convolve(args, surface):
    tol = args.tol or 0.1
    phi, w, r = surface.phi, surface.weights, surface.region
    deltas = parse_range(args.deltas)
    fits = box_lower_bound_fits(phi, w, r, _floats(args.q), deltas)
    checks = [pointwise_lower_bound(phi, w, r, DeltaBox.build(phi, w, r, d), args.points, args.seed + k)
              for k, d in enumerate(deltas)]
    ok = all(c.passed for c in checks) and all(f.slope_error <= tol for f in fits)
    rows = [["p", "q", "family_param", "ratio"]]
    probes = []
    for pair in _pairs(args.probe) if args.probe else []:
        ip, iq = pair
        for fam in ("box", "gaussian"):
            pr = operator_norm_probe(phi, w, r, 1 / ip, 1 / iq, fam, args.n_tests)
            probes.append(pr.to_json())
            rows.extend(pr.csv_rows())
            print(f"probe (1/p,1/q)=({ip:.4g},{iq:.4g}) {fam}: spread {pr.spread:.4g}, growth {pr.growth:.4g}")
    for f in fits:
        print(f"q={f.q:g}: fitted {f.fit.slope:.4f} vs predicted {f.predicted_slope:.4f}")
    print(f"pointwise lower bound holds at all sampled deltas: {all(c.passed for c in checks)}")
    data = {"fits": [f.to_json() for f in fits], "pointwise": [c.to_json() for c in checks], "probes": probes}
    return (EXIT_OK if ok else EXIT_FIT), data, {"slope_tol": tol}, rows if probes else None


COMMANDS = {
    "check": cmd_check,
    "euler": cmd_euler,
    "classify": cmd_classify,
    "decay": cmd_decay,
    "vdc": cmd_vdc,
    "singular": cmd_singular,
    "knapp": cmd_knapp,
    "exponents": cmd_exponents,
    "typeset": cmd_typeset,
    "convolve": cmd_convolve,
}
GATED = {"decay", "knapp", "typeset", "singular", "euler", "convolve"}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--surface", default="example5", help="surface JSON file or 'example5'")
    common.add_argument("--out", default="reports", help="directory for JSON/CSV reports")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    common.add_argument("--tol", type=float, default=None, help="override the command's tolerance")
    common.add_argument("--force", action="store_true", help="skip the hypothesis gate")

    p = _Parser(prog="oscdecay", description=__doc__.splitlines()[0], parents=[common])
    p.add_argument("--version", action="version", version=f"oscdecay {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", parents=[common], help="verify H1-H4")
    c.add_argument("--grid-n", type=int, default=1024)
    c.add_argument("--depths", type=int, default=12)

    c = sub.add_parser("euler", parents=[common], help="Euler-identity residual on a grid")
    c.add_argument("--n-zeta", type=int, default=16)
    c.add_argument("--n-s", type=int, default=64)
    c.add_argument("--s-range", default="0.9,1.1")

    c = sub.add_parser("classify", parents=[common], help="classify points as elliptic or not")
    c.add_argument("--points", default="1,0.98;1,1", help="'x1,x2;x1,x2;...'")
    c.add_argument("--random", type=int, default=0, help="also classify this many random sector points")

    c = sub.add_parser("decay", parents=[common], help="fit the decay exponent of mu_hat")
    c.add_argument("--radii", default="1e2:1e5:8")
    c.add_argument("--dirs", type=int, default=8)
    c.add_argument("--xi-prime", default="0,0;50,0;0,50;30,-30")
    c.add_argument("--h-max", type=float, default=0.125)
    c.add_argument("--min-r2", type=float, default=0.98)

    c = sub.add_parser("vdc", parents=[common], help="van der Corput constant scan")
    c.add_argument("--a3", default="1e2:1e5:7")
    c.add_argument("--grid", default="4,5", help="'L,n': scaled A1/A2 grid over linspace(-L, L, n)")
    c.add_argument("--exponent", type=float, default=None)

    c = sub.add_parser("singular", parents=[common], help="sup of the singular section integral")
    c.add_argument("--angles", type=int, default=2048)

    c = sub.add_parser("knapp", parents=[common], help="Knapp-box scaling fits")
    c.add_argument("--q", default="1,2")
    c.add_argument("--eps", default="2^-3:2^-10")

    sub.add_parser("exponents", parents=[common], help="critical restriction exponents")
    sub.add_parser("typeset", parents=[common], help="type-set vertex")

    c = sub.add_parser("convolve", parents=[common], help="delta-box fits and operator-norm probes")
    c.add_argument("--q", default="1,2")
    c.add_argument("--deltas", default="2^-4:2^-11")
    c.add_argument("--points", type=int, default=100)
    c.add_argument("--probe", default="", help="'inv_p,inv_q;...' points to probe")
    c.add_argument("--n-tests", type=int, default=6)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.tol is not None and args.tol <= 0:
        parser.error("--tol must be positive")
    try:
        surface = load_surface(args.surface)
    except FileNotFoundError:
        print(f"surface file not found: {args.surface}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidArgument as exc:
        print(f"cannot parse surface: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command in GATED:
        code = _gate(args, surface)
        if code is not None:
            return code
    try:
        code, data, tols, rows = COMMANDS[args.command](args, surface)
    except (InvalidArgument, PreconditionViolated) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateFit as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        code, data, tols, rows = EXIT_FIT, {"error": str(exc), "samples": exc.samples}, {}, None
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        code, data, tols, rows = EXIT_BUDGET, {"error": str(exc)}, {}, None
    report = {
        "command": args.command,
        "tool": "oscdecay",
        "version": __version__,
        "surface": surface.name,
        "spec_hash": surface.spec_hash(),
        "seed": args.seed,
        "tolerances": tols,
        "exit_code": code,
        "result": data,
    }
    write_json(os.path.join(args.out, f"{args.command}.json"), report)
    if rows:
        write_csv(os.path.join(args.out, f"{args.command}.csv"), rows)
    return code


if __name__ == "__main__":
    sys.exit(main())
