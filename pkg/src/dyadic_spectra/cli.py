"""Command line front end: ``dyadic-spectra <subcommand> ...``.

Exit status: 0 when every assertion in the report holds, 1 on an assertion
or stage failure, 2 on input errors (a JSON error object goes to stderr).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from ._exact import as_fraction, floor_pow2
from .fourier import (
    fourier_stieltjes,
    level_set,
    range_closure_report,
    riesz_exact_coeffs,
    spectral_decay_experiment,
)
from .martingale import (
    CoverError,
    MountainRiverError,
    build_tree,
    c_beta_estimate,
    check_class_membership,
    margin_mass,
    mountain_river_search,
    s_r_counts,
    select_cover,
)
from .report import Report, atomic_write, to_jsonable
from .specs import SpecError, load_spec, measure_from_spec
from .testfn import (
    PipelineError,
    band_projection_and_polynomial,
    band_tail_energies,
    make_hn,
    prop2_pipeline,
)
from .walsh import g_lambda, haar_coeffs, lorentz_norm, remark10_aggregates, walsh_coeffs

__all__ = ["main", "run", "run_manifest", "InputError"]

SUBCOMMANDS = ("measure", "tree", "mountain-river", "cover", "cbeta", "prop2", "band", "riesz",
               "spectrum", "decay", "walsh", "manifest")


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        # let "-3/4" through as a value
        self._negative_number_matcher = re.compile(r"^-\d+(/\d+)?$|^-\d*\.\d+$")

    def error(self, message):
        raise InputError(message)


def _rational(text: str) -> Fraction:
    try:
        return as_fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc


def _common(p: argparse.ArgumentParser, measure: bool = True) -> None:
    if measure:
        p.add_argument("--measure", required=True, help="spec path or inline JSON")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--seed", type=int, default=0, help="seed for random generators")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dyadic-spectra", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("measure", help="summarise a measure and export weights")
    _common(p)

    p = sub.add_parser("tree", help="dyadic martingale level table")
    _common(p)

    p = sub.add_parser("mountain-river", help="calm level search")
    _common(p)
    for name in ("beta", "alpha", "rho"):
        p.add_argument(f"--{name}", type=_rational, required=True)
    p.add_argument("--k", type=int, required=True)

    p = sub.add_parser("cover", help="equal-length cover for two singular measures")
    p.add_argument("--nu1", required=True)
    p.add_argument("--nu2", required=True)
    p.add_argument("--beta", type=_rational, required=True)
    p.add_argument("--tau", type=_rational, required=True)
    p.add_argument("--k", type=int, help="single scale (default: finest downwards)")
    _common(p, measure=False)

    p = sub.add_parser("cbeta", help="finite-scale c_beta")
    _common(p)
    p.add_argument("--beta", type=_rational, required=True)
    p.add_argument("--k", type=int)

    p = sub.add_parser("prop2", help="witness lower bound for ||h_n * mu||_1")
    _common(p)
    for name in ("beta", "alpha", "rho", "eta"):
        p.add_argument(f"--{name}", type=_rational, required=True)

    p = sub.add_parser("band", help="h_n band energies and p_n support")
    _common(p, measure=False)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--epsilon", type=_rational, help="default 2**(-n-3)")
    p.add_argument("--a", type=_rational, required=True)
    p.add_argument("--b", type=_rational, required=True)
    p.add_argument("--terms", type=int, default=1 << 20)
    p.add_argument("--coeffs", type=int, default=0, help="emit h^(j) for 1 <= j <= this many (CSV)")

    p = sub.add_parser("riesz", help="exact Riesz product coefficients")
    _common(p, measure=False)
    p.add_argument("--kmax", type=int, required=True)
    p.add_argument("--level-set", type=_rational)
    p.add_argument("--N", type=int, help="window (default: full reach)")

    p = sub.add_parser("spectrum", help="Fourier-Stieltjes table")
    _common(p)
    p.add_argument("--N", type=int, required=True)

    p = sub.add_parser("decay", help="spectral decay versus witness bound")
    _common(p)
    p.add_argument("--mmax", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--beta", type=_rational, required=True)
    p.add_argument("--alpha", type=_rational, required=True)
    p.add_argument("--rho", type=_rational, required=True)
    p.add_argument("--eta", type=_rational, default=Fraction(1, 100))
    p.add_argument("--expect-decay", action="store_true", help="assert the contrast")

    p = sub.add_parser("walsh", help="Walsh and Haar statistics per level")
    _common(p)
    p.add_argument("--nmax", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=_rational, required=True)
    p.add_argument("--beta", type=_rational, required=True)
    p.add_argument("--beta-prime", type=_rational)

    p = sub.add_parser("manifest", help="run an experiment manifest")
    p.add_argument("path")
    p.add_argument("--out", help="summary path (default: stdout)")
    return parser


def _measure(text: str, seed: int):
    try:
        return measure_from_spec(load_spec(text), seed)
    except SpecError as exc:
        raise InputError(str(exc)) from exc


# -- subcommand bodies ------------------------------------------------------------------------

def _cmd_measure(a, rep: Report):
    mu = _measure(a.measure, a.seed)
    rep.result.update({
        "K": mu.K, "atoms": mu.n_atoms, "exact": mu.exact, "positive": mu.is_positive,
        "total_variation": mu.total_variation(), "total_mass": mu.total_mass(),
    })
    if mu.exact:
        rep.rows = [{"index": c, "numerator": Fraction(w).numerator, "denominator": Fraction(w).denominator}
                    for c, w in mu.atoms()]
        rep.result["weights"] = {str(c): w for c, w in mu.atoms()}
    else:
        rep.rows = [{"index": c, "weight": w} for c, w in mu.atoms()]
        rep.result["weights"] = {str(c): w for c, w in mu.atoms()}
    pos, neg = mu.jordan_split()
    rep.check("jordan_norms", mu.total_variation(), pos.total_variation() + neg.total_variation(),
              mu.total_variation() == pos.total_variation() + neg.total_variation() if mu.exact
              else math.isclose(mu.total_variation(), pos.total_variation() + neg.total_variation()))


def _cmd_tree(a, rep: Report):
    mu = _measure(a.measure, a.seed)
    tree = build_tree(mu)
    rows = []
    for n in range(mu.K + 1):
        cells, nums = tree.level(n)
        rows.append({"n": n, "nonzero": int(np.count_nonzero(nums)), "level_sum": tree.level_sum(n)})
    rep.rows = rows
    rep.result["levels"] = rows
    consistent = all(r["level_sum"] == rows[0]["level_sum"] for r in rows)
    rep.check("level_sums_constant", rows[0]["level_sum"], rows[-1]["level_sum"],
              consistent if mu.exact else all(math.isclose(r["level_sum"], rows[0]["level_sum"], abs_tol=1e-12)
                                              for r in rows))


def _cmd_mountain_river(a, rep: Report):
    mu = _measure(a.measure, a.seed)
    try:
        res = mountain_river_search(mu, a.beta, a.alpha, a.rho, a.k)
    except MountainRiverError as exc:
        rep.result["failure"] = {"stage": "mountain_river_search", "message": str(exc), "r": exc.r,
                                 "turbulent_mass_by_level": exc.turbulent_mass_by_level}
        rep.check("calm_level_found", None, None, False)
        return
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    rep.result.update({
        "n": res.n, "theta": res.theta, "r": res.r, "rho_prime": res.rho_prime,
        "turbulent_mass": res.turbulent_mass,
        "turbulent_mass_by_level": [{"n": n, "mass": m} for n, m in res.turbulent_mass_by_level.items()],
    })
    rep.rows = rep.result["turbulent_mass_by_level"]
    rep.check("turbulent_mass_below_rho", res.turbulent_mass, a.rho * res.total_mass,
              res.turbulent_mass < a.rho * res.total_mass)
    counts = s_r_counts(build_tree(mu), a.alpha, res.r, a.k)
    rep.check("sr_identity", counts.lhs, counts.rhs, counts.identity_holds)


def _cmd_cover(a, rep: Report):
    nu1, nu2 = _measure(a.nu1, a.seed), _measure(a.nu2, a.seed)
    try:
        fam = select_cover(nu1, nu2, a.beta, a.tau, scales=None if a.k is None else [a.k])
    except CoverError as exc:
        rep.result["failure"] = {"stage": "select_cover", "message": str(exc), "per_scale": exc.per_scale}
        rep.check("cover_found", None, None, False)
        return
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    rep.result.update(fam.to_dict())
    mass1 = sum((nu1.coarsen(fam.k).weight(int(c)) for c in fam.cells), Fraction(0))
    mass2 = margin_mass(nu2, fam.cells, fam.k, fam.delta)
    cap = floor_pow2(fam.beta * fam.k)
    rep.check("count", len(fam.cells), cap, len(fam.cells) <= cap)
    rep.check("nu1_mass", mass1, fam.half_target, mass1 > fam.half_target)
    rep.check("nu2_margin", mass2, fam.tau, mass2 < fam.tau)


def _cmd_cbeta(a, rep: Report):
    mu = _measure(a.measure, a.seed)
    k = mu.K if a.k is None else a.k
    val = c_beta_estimate(mu, a.beta, k)
    mem = check_class_membership(mu, a.beta, k)
    rep.result.update({"k": k, "c_beta": val, "member": mem.member, "count": mem.count, "bound": mem.bound})
    rep.check("c_beta_le_total_variation", val, mu.total_variation(), val <= mu.total_variation())


def _cmd_prop2(a, rep: Report):
    mu = _measure(a.measure, a.seed)
    try:
        r = prop2_pipeline(mu, a.beta, a.alpha, a.rho, a.eta)
    except PipelineError as exc:
        rep.result["failure"] = {"stage": exc.stage, "message": str(exc), "detail": exc.detail}
        rep.check(f"stage_{exc.stage}", None, None, False)
        return
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    rep.result.update({
        "vacuous": r.vacuous, "c_beta": r.c_beta, "bound": r.bound, "effective_bound": r.effective_bound,
        "sign": r.sign, "k": r.k, "r": r.r, "n": r.n, "epsilon": r.epsilon, "orientation": r.orientation,
        "cover": r.cover, "vertices": r.vertices, "E": r.E, "achieved": r.achieved,
        "premise": r.premise, "chain": r.chain, "scale_failures": r.scale_failures, "constants": r.constants,
    })
    rep.rows = [{"step": s.name, "lhs": s.lhs, "rhs": s.rhs, "holds": s.holds, "asserted": s.asserted}
                for s in r.chain]
    if r.vacuous:
        rep.check("vacuous_bound", r.c_beta / 2, a.eta, True)
        return
    rep.check("premise", r.premise.lhs, r.premise.rhs, r.premise.holds)
    for s in r.chain:
        if s.asserted:
            rep.check(s.name, s.lhs, s.rhs, s.holds)


def _cmd_band(a, rep: Report):
    eps = a.epsilon if a.epsilon is not None else Fraction(1, 1 << (a.n + 3))
    try:
        h = make_hn(a.n, eps)
        e = band_tail_energies(h, a.a, a.b, terms=a.terms)
        poly, check = band_projection_and_polynomial(h, a.a, a.b, math.floor(a.b * 2 ** (2 * a.n)), seed=a.seed)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    rep.result.update({
        "n": a.n, "epsilon": eps, "low": e.low, "low_bound": e.low_bound, "low_cut": e.low_cut,
        "high_interval": e.high_interval, "high_bound": e.high_bound, "majorant": e.majorant,
        "high_range": [e.high_start, e.high_stop], "p_support": check,
    })
    rep.check("low_band", e.low, e.low_bound, e.low < e.low_bound)
    rep.check("high_band", e.high_upper, e.high_bound, e.high_upper < e.high_bound)
    rep.check("p_support", check["outside_band_nonzero"], 0, check["ok"])
    rep.check("p_analytic", check["negative_nonzero"], 0, check["negative_nonzero"] == 0)
    if a.coeffs:
        j = np.arange(1, a.coeffs + 1)
        from .testfn import hn_fourier

        rep.rows = [{"j": int(x), "re": float(v.real), "im": float(v.imag)} for x, v in zip(j, hn_fourier(h, j))]


def _cmd_riesz(a, rep: Report):
    try:
        table = riesz_exact_coeffs(a.kmax)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    N = table.reach if a.N is None else a.N
    census = range_closure_report(table)
    values = [v for v, _ in census]
    expected = sorted({Fraction(0), Fraction(1)} | {Fraction(1, 1 << m) for m in range(a.kmax + 1)})
    rep.result.update({"kmax": a.kmax, "window": N, "range": census})
    rep.check("range", values, expected, values == expected if table.reach > 0 else values == [Fraction(1)])
    if a.level_set is not None:
        ls = level_set(table, a.level_set, window=N)
        f = np.arange(-N, N + 1, dtype=np.int64)
        direct = f[table.values(f) == float(a.level_set)].tolist()
        rep.result["level_set"] = ls
        rep.rows = [{"n": n} for n in ls]
        rep.check("level_set_matches_table", len(ls), len(direct), ls == direct)


def _cmd_spectrum(a, rep: Report):
    mu = _measure(a.measure, a.seed)
    try:
        t = fourier_stieltjes(mu, a.N)
    except AssertionError as exc:
        rep.check("spectrum_invariants", None, None, False)
        rep.result["failure"] = str(exc)
        return
    rep.rows = [{"n": int(n), "re": float(v.real), "im": float(v.imag)} for n, v in zip(t.freqs, t.values)]
    rep.result.update({"N": a.N, "sup_abs_nonzero": t.sup_abs(), "table": rep.rows})
    rep.check("spectrum_invariants", None, None, True)


def _cmd_decay(a, rep: Report):
    mu = _measure(a.measure, a.seed)
    try:
        d = spectral_decay_experiment(mu, a.mmax, a.N, a.beta, a.alpha, a.rho, a.eta)
    except PipelineError as exc:
        rep.result["failure"] = {"stage": exc.stage, "message": str(exc)}
        rep.check(f"stage_{exc.stage}", None, None, False)
        return
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    rep.result.update(d)
    rep.rows = d["rows"]
    if a.expect_decay:
        rep.check("sup_strictly_decreasing", [r["sup"] for r in d["rows"]], None, d["sup_strictly_decreasing"])
        rep.check("bound_floor", d["bound_floor_ratio"], 0.5, d["bound_floor_ratio"] > 0.5)


def _cmd_walsh(a, rep: Report):
    mu = _measure(a.measure, a.seed)
    if not 1 <= a.nmax <= min(mu.K, 20):
        raise InputError(f"--nmax must lie in [1, min(resolution, 20)]")
    exp = walsh_coeffs(mu, a.nmax)
    c_beta = c_beta_estimate(mu, a.beta, mu.K)
    rows = []
    ok = True
    for n in range(1, a.nmax + 1):
        lhs, rhs = exp.parseval(n)
        count = max(1, math.floor(2 ** (float(a.lam) * n)))
        row = {"n": n, "G_lambda": g_lambda(exp, n, a.lam), "parseval_lhs": lhs, "parseval_rhs": rhs}
        if n < mu.K:
            haar = haar_coeffs(mu, n - 1)
            row["haar_W"] = lorentz_norm(haar, count)
            row["walsh_W"] = lorentz_norm(exp.group(n), count)
            ok &= bool(row["walsh_W"] >= row["haar_W"])
        rows.append(row)
        rep.check(f"parseval_{n}", lhs, rhs, lhs == rhs if mu.exact else math.isclose(lhs, rhs, rel_tol=1e-9))
    rep.check("walsh_dominates_haar", None, None, ok)
    rep.rows = rows
    rep.result.update({"levels": rows, "c_beta": c_beta})
    if a.beta_prime is not None:
        agg = remark10_aggregates(mu, a.beta_prime, a.nmax, beta=a.beta)
        rep.result["aggregates"] = agg
        rep.check("S3_le_S4", agg["S3"], agg["S4"], agg["S3_le_S4"])


_HANDLERS = {
    "measure": _cmd_measure, "tree": _cmd_tree, "mountain-river": _cmd_mountain_river,
    "cover": _cmd_cover, "cbeta": _cmd_cbeta, "prop2": _cmd_prop2, "band": _cmd_band,
    "riesz": _cmd_riesz, "spectrum": _cmd_spectrum, "decay": _cmd_decay, "walsh": _cmd_walsh,
}


def _params(args: argparse.Namespace) -> dict:
    skip = {"command", "format", "out"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


def _error(kind: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": {"type": kind, "message": message}}) + "\n")
    return 2


def run(argv: list[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise InputError(f"missing subcommand; choose from {', '.join(SUBCOMMANDS)}")
        if args.command == "manifest":
            return run_manifest(args.path, out=args.out, stdout=stdout)
        rep = Report(command=argv, parameters=_params(args), result={})
        _HANDLERS[args.command](args, rep)
    except InputError as exc:
        return _error("input", str(exc))
    text = rep.to_csv() if args.format == "csv" else rep.to_json()
    if args.out:
        atomic_write(args.out, text)
    else:
        stdout.write(text)
    return 0 if rep.passed else 1


# -- manifests ----------------------------------------------------------------------------------

def _manifest_argv(entry: dict, base: Path) -> list[str]:
    argv = [entry["subcommand"]]
    for key in ("measure", "nu1", "nu2"):
        if key in entry:
            spec = entry[key]
            if isinstance(spec, str) and not spec.lstrip().startswith("{"):
                spec = str((base / spec).resolve())
            elif not isinstance(spec, str):
                spec = json.dumps(spec)
            argv += [f"--{key}", spec]
    args = entry.get("args", [])
    if isinstance(args, dict):
        for k, v in args.items():
            flag = f"--{k}"
            if v is True:
                argv.append(flag)
            else:
                argv += [flag, str(v)]
    else:
        argv += [str(x) for x in args]
    if "format" in entry:
        argv += ["--format", entry["format"]]
    if "output" in entry:
        argv += ["--out", str((base / entry["output"]).resolve())]
    return argv


def _run_isolated(argv: list[str]) -> tuple[int, float]:
    t0 = time.perf_counter()
    import io

    sink = io.StringIO()
    code = run(argv, stdout=sink)
    return code, time.perf_counter() - t0


def run_manifest(path: str, out: str | None = None, stdout=None) -> int:
    """Run every entry; fail fast on unresolvable inputs, record per-run verdicts."""
    stdout = stdout or sys.stdout
    p = Path(path)
    if not p.is_file():
        raise InputError(f"manifest not found: {path}")
    try:
        manifest = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"invalid manifest JSON: {exc}") from exc
    runs = manifest.get("runs", []) if isinstance(manifest, dict) else manifest
    names = [r.get("name") for r in runs]
    if any(n is None for n in names) or len(set(names)) != len(names):
        raise InputError("manifest run names must be present and unique")
    base = p.parent
    argvs = []
    for r in runs:
        if r.get("subcommand") not in _HANDLERS:
            raise InputError(f"run {r.get('name')!r}: unknown subcommand {r.get('subcommand')!r}")
        for key in ("measure", "nu1", "nu2"):
            spec = r.get(key)
            if isinstance(spec, str) and not spec.lstrip().startswith("{") and not (base / spec).is_file():
                raise InputError(f"run {r['name']!r}: {key} file not found: {spec}")
        argvs.append(_manifest_argv(r, base))
    workers = max(1, int(os.environ.get("DYADIC_SPECTRA_THREADS", "1")))
    if workers > 1 and len(argvs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(argvs))) as pool:
            outcomes = list(pool.map(_run_isolated, argvs))
    else:
        outcomes = [_run_isolated(a) for a in argvs]
    summary = {
        "manifest": str(p),
        "runs": [{"name": r["name"], "subcommand": r["subcommand"], "exit_code": code,
                  "verdict": "pass" if code == 0 else "fail"} for r, (code, _) in zip(runs, outcomes)],
    }
    summary["passed"] = all(r["exit_code"] == 0 for r in summary["runs"])
    text = json.dumps(to_jsonable(summary), indent=2) + "\n"
    if out:
        atomic_write(out, text)
    else:
        stdout.write(text)
    return 0 if summary["passed"] else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
