"""Command-line front end.

Run records are JSON lines carrying ``"schema": 1``; grids (``surface``) are
CSV with a commented header naming units and provenance per column.  Primary
data on stdout is deterministic for a fixed seed; timings and timestamps go to
stderr or to the ``--metadata`` file.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from datetime import datetime, timezone
from typing import Iterable, List, Optional

import numpy as np

from . import __version__, asymptotics as asy, cache, cg, moments, validation
from .ensemble import (
    DEFAULT_MAX_DIM,
    DEFAULT_ORACLE_MAX_V,
    mc_average,
    oracle_entropy_average,
)
from .errors import DomainError, SizeLimitError, Su2EntError
from .sectors import (
    Bipartition,
    SectorSpec,
    completeness_check,
    multiplicity,
    pair_set,
    sector_dimension,
)

SCHEMA = 1
LN2 = math.log(2)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_SIZE = 4
EXIT_NUMERICAL = 5
EXIT_INVARIANT = 6


class Output:
    """Collects records for stdout and metadata for stderr / a side file."""

    def __init__(self, args):
        self.args = args
        self.stream = sys.stdout
        self.scale = 1 / LN2 if getattr(args, "bits", False) else 1.0
        self.unit = "bits" if getattr(args, "bits", False) else "nats"
        self.meta = {"version": __version__, "command": args.command,
                     "started": datetime.now(timezone.utc).isoformat()}
        self._t0 = time.perf_counter()

    def entropy(self, x: float) -> float:
        return x * self.scale

    def record(self, kind: str, **fields) -> None:
        rec = {"schema": SCHEMA, "kind": kind, "version": __version__}
        rec.update(fields)
        self.stream.write(json.dumps(rec, sort_keys=True, default=_jsonable) + "\n")

    def finish(self) -> None:
        self.meta["elapsed_s"] = round(time.perf_counter() - self._t0, 3)
        self.meta["finished"] = datetime.now(timezone.utc).isoformat()
        text = json.dumps({"schema": SCHEMA, "kind": "metadata", **self.meta}, sort_keys=True)
        if getattr(self.args, "metadata", None):
            with open(self.args.metadata, "w") as fh:
                fh.write(text + "\n")
        elif getattr(self.args, "verbose", False):
            print(text, file=sys.stderr)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    raise TypeError(f"not serializable: {type(x)}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _float_list(text: str) -> List[float]:
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _caps(args):
    """(max_dim, oracle_max_V, max_L) after applying --unsafe-caps overrides."""
    max_dim, max_V, max_L = DEFAULT_MAX_DIM, DEFAULT_ORACLE_MAX_V, moments.MAX_L
    for name, default in (("max_dim", max_dim), ("oracle_max_V", max_V), ("max_L", max_L)):
        val = getattr(args, name, None)
        if val is not None and val > default and not args.unsafe_caps:
            raise SizeLimitError(f"--{name.replace('_', '-')} above the default {default} needs --unsafe-caps")
    return (args.max_dim or max_dim, args.oracle_max_V or max_V, args.max_L or max_L)


def _sector(args):
    if args.V is None:
        raise DomainError("--V is required")
    if args.twoJ is None:
        if getattr(args, "j", None) is None:
            raise DomainError("give --twoJ or --j")
        twoJ = args.j * args.V
        if not float(twoJ).is_integer():
            raise DomainError(f"j*V = {twoJ} is not an integer")
        args.twoJ = int(twoJ)
    return SectorSpec(args.V, args.twoJ)


# -- dims ------------------------------------------------------------------------------


def _nearest_admissible(V: int, twoJ_real: float) -> List[int]:
    lo = 2 * math.floor(twoJ_real / 2)
    return [t for t in sorted({lo, lo + 2}) if 0 <= t <= V] if lo != twoJ_real else [int(lo)]


def cmd_dims(args, out: Output) -> int:
    if args.check_completeness:
        if args.V is None or args.V < 1:
            raise DomainError("--check-completeness needs --V >= 1")
        Vs = range(1, args.V + 1)
        bad = [V for V in Vs if not completeness_check(V)]
        out.record("completeness", V_max=args.V, passed=not bad, failures=bad)
        return EXIT_OK if not bad else EXIT_FAILED
    if args.V is None:
        raise DomainError("--V is required")
    if args.twoJ is not None:
        twoJs = [args.twoJ]
    elif args.j is not None:
        twoJs = _nearest_admissible(args.V, args.j * args.V)
    else:
        twoJs = list(range(args.V % 2, args.V + 1, 2))
    for twoJ in twoJs:
        if not 0 <= twoJ <= args.V or (args.V - twoJ) % 2:
            raise DomainError(f"no spin 2J={twoJ} on V={args.V} sites")
        n = multiplicity(args.V, twoJ)
        rec = {"V": args.V, "twoJ": twoJ, "multiplicity": str(n), "mode": "exact"}
        if args.VA is not None:
            sector, split = SectorSpec(args.V, twoJ), Bipartition.of(args.V, args.VA)
            rec["VA"] = args.VA
            rec["d"] = str(sector_dimension(sector, split))
            rec["pairs"] = pair_set(sector, split)
        if args.compare_asymptotic:
            if not 0 < twoJ < args.V:
                raise DomainError("the asymptotic dimension needs 0 < j < 1")
            exact, approx = asy.log_dim_exact(args.V, twoJ), asy.log_dim(args.V, twoJ)
            rec.update(log_d_exact=exact, log_d_asymptotic=approx,
                       relative_residual=abs(approx - exact) / exact)
        out.record("dims", **rec)
    return EXIT_OK


# -- cg --------------------------------------------------------------------------------


def cmd_cg(args, out: Output) -> int:
    if args.probe:
        sector = _sector(args)
        split = Bipartition.of(args.V, args.VA)
        twoJA = args.twoJA if args.twoJA is not None else validation.nearest_even(split.f * sector.twoJ)
        twoM = args.twoM or 0
        for k in args.k:
            exact, model = cg.cg_scaling_probe(sector, split, twoJA, twoM, k, args.convention)
            # odd k vanish at the origin, so only the absolute error is meaningful there
            rel = abs(exact - model) / model if model else None
            out.record("cg_probe", V=args.V, twoJ=sector.twoJ, VA=args.VA, twoJA=twoJA,
                       twoM=twoM, k=k, convention=args.convention, exact=exact,
                       oscillator=model, absolute_error=abs(exact - model),
                       relative_error=rel, mode="float")
        return EXIT_OK
    if None in (args.twoJA, args.twoJB, args.twoJ):
        raise DomainError("give --twoJA, --twoJB and --twoJ (or --probe)")
    top = min(args.twoJA, args.twoJB)
    ms = [args.twoM] if args.twoM is not None else list(range(-top, top + 1, 2))
    for m in ms:
        c = cg.cg_squared(args.twoJA, m, args.twoJB, args.twoJ)
        out.record("cg", twoJA=args.twoJA, twoJB=args.twoJB, twoJ=args.twoJ, twoM=m,
                   value=str(c.value), sign=c.sign, float=float(c.value), mode="exact")
    return EXIT_OK


# -- entropy ---------------------------------------------------------------------------


def cmd_entropy(args, out: Output) -> int:
    max_dim, oracle_V, _ = _caps(args)
    sector = _sector(args)
    if args.VA is None:
        raise DomainError("--VA is required")
    split = Bipartition.of(args.V, args.VA)
    if args.oracle and args.V > oracle_V:
        # fail before the sampling work, not after it
        raise SizeLimitError(f"oracle limited to V <= {oracle_V}; got V={args.V}")
    est = mc_average(sector, split, args.n, args.seed, workers=args.workers, max_dim=max_dim)
    rec = {
        "V": args.V, "twoJ": sector.twoJ, "VA": args.VA, "d": est.d, "seed": args.seed,
        "n_samples": args.n, "unit": out.unit, "mode": "mc",
        "entropy": out.entropy(est.entropy.mean), "entropy_stderr": out.entropy(est.entropy.stderr),
        "purity": est.purity.mean, "purity_stderr": est.purity.stderr,
    }
    status = EXIT_OK
    if args.oracle:
        orc = oracle_entropy_average(sector, split, args.n, args.seed, max_V=oracle_V)
        agree = validation._within(est.entropy.mean, est.entropy.stderr, orc.mean, orc.stderr)
        rec.update(oracle=out.entropy(orc.mean), oracle_stderr=out.entropy(orc.stderr),
                   oracle_agree=agree)
        status = EXIT_OK if agree else EXIT_FAILED
    f, j = split.f, sector.j
    if 0 < j < 1 and f != 0.5:
        b = asy.s_avg(f, j, args.V)
        rec["asymptotic"] = {k: out.entropy(v) for k, v in b.as_dict().items()}
    elif j == 1 and args.V % 2 == 0:
        rec["exact_stretched"] = out.entropy(asy.stretched_entropy(args.V, args.VA))
    out.record("entropy", **rec)
    return status


# -- moments ---------------------------------------------------------------------------


def _shape_str(shape) -> str:
    return "".join("(" + _shape_str(c) + ")" for c in shape) or "."


def cmd_moments(args, out: Output) -> int:
    _, _, max_L = _caps(args)
    if args.census:
        for L in args.L:
            trees = moments.enumerate_trees(L, max_L=max_L)
            out.record("census", L=L, trees=len(trees),
                       multiplicities=[t.multiplicity for t in trees],
                       shapes=[_shape_str(t.shape) for t in trees],
                       total=sum(t.multiplicity for t in trees), catalan=moments.catalan(L))
        return EXIT_OK
    if args.dominance:
        if args.j is None or args.f is None or not args.V_list:
            raise DomainError("--dominance needs --j, --f and --V as a comma list")
        status = EXIT_OK
        for L in args.L:
            rows = moments.dominance_probe(L, args.j, args.f, args.V_list)
            res = [r.residual for r in rows]
            dec = validation._strictly_decreasing(res)
            for r in rows:
                out.record("dominance", L=L, V=r.V, twoJ=r.twoJ, VA=r.VA, residual=r.residual,
                           cross=r.cross, mode="exact")
            out.record("dominance_summary", L=L, V=args.V_list, strictly_decreasing=dec)
            status = status if dec else EXIT_FAILED
        return status
    if args.V_list is None or len(args.V_list) != 1:
        raise DomainError("give a single --V")
    args.V = args.V_list[0]
    sector = _sector(args)
    split = Bipartition.of(args.V, args.VA)
    status = EXIT_OK
    for L in args.L:
        if L > max_L:
            raise SizeLimitError(f"L={L} exceeds the tree cap {max_L}; add --unsafe-caps --max-L")
        total = moments.planar_moment(L, sector, split)
        ra, rb = moments.extremal_terms(L, sector, split)
        rec = {"V": args.V, "twoJ": sector.twoJ, "VA": args.VA, "L": L, "mode": "exact",
               "planar": str(total.exact), "R_A": str(ra.exact), "R_B": str(rb.exact),
               "log_planar": total.log}
        if L == 2:
            rec["normalized_purity"] = str(moments.normalized_purity(sector, split))
            if args.mc_check:
                max_dim, _, _ = _caps(args)
                est = mc_average(sector, split, args.n, args.seed, workers=args.workers,
                                 max_dim=max_dim).purity
                pred = float(moments.normalized_purity(sector, split))
                agree = validation._within(est.mean, est.stderr, pred, 0.0)
                rec.update(mc_purity=est.mean, mc_stderr=est.stderr, n_samples=args.n,
                           seed=args.seed, mc_agree=agree)
                status = status if agree else EXIT_FAILED
        out.record("moments", **rec)
    return status


# -- surface ---------------------------------------------------------------------------


SURFACE_COLUMNS = [
    ("f", "1", "input"),
    ("j", "1", "input"),
    ("V", "sites", "input"),
    ("volume_density", "{u}/site", "float"),
    ("volume", "{u}", "float"),
    ("log_term", "{u}", "float"),
    ("abelian", "{u}", "float"),
    ("non_abelian", "{u}", "float"),
    ("cg_const", "{u}", "float"),
    ("constant", "{u}", "float"),
    ("total", "{u}", "float"),
    ("reflection_diff", "{u}", "float"),
]


def _grid(given: Optional[List[float]], n: int, lo: float, hi: float) -> List[float]:
    if given:
        return given
    return [lo + (hi - lo) * (i + 0.5) / n for i in range(n)]


def surface_rows(fs: Iterable[float], js: Iterable[float], V: float):
    for f in fs:
        for j in js:
            if f == 0.5:
                continue
            b = asy.s_avg(f, j, V)
            mirror = asy.s_avg(1 - f, j, V)
            yield f, j, b, abs(b.total - mirror.total)


def cmd_surface(args, out: Output) -> int:
    fs = _grid(args.f, args.nf, 0.0, 1.0)
    js = _grid(args.j, args.nj, 0.0, 1.0)
    if not fs or not js:
        raise DomainError("empty grid")
    u = out.unit
    buf = io.StringIO()
    buf.write(f"# schema: {SCHEMA}; version: {__version__}; log base: {u}\n")
    buf.write("# units: " + ",".join(c.format(u=u) for _, c, _ in SURFACE_COLUMNS) + "\n")
    buf.write("# provenance: " + ",".join(p for _, _, p in SURFACE_COLUMNS) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([name for name, _, _ in SURFACE_COLUMNS])
    s = out.entropy
    worst = 0.0
    for f, j, b, refl in surface_rows(fs, js, args.V):
        worst = max(worst, refl)
        w.writerow([repr(f), repr(j), repr(float(args.V)), repr(s(asy.beta(j) * min(f, 1 - f))),
                    repr(s(b.volume)), repr(s(b.log_term)), repr(s(b.abelian)),
                    repr(s(b.non_abelian)), repr(s(b.cg_const)), repr(s(b.constant)),
                    repr(s(b.total)), repr(s(refl))])
    text = buf.getvalue()
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    out.meta["max_reflection_diff"] = worst
    return EXIT_OK


# -- validate --------------------------------------------------------------------------


def cmd_validate(args, out: Output) -> int:
    cfg = validation.Settings(seed=args.seed, workers=args.workers, quick=args.quick)
    only = args.only or None
    ok = True
    for cid in only or sorted(validation.CRITERIA):
        res = validation.run([cid], cfg)[0]
        ok &= res.passed
        out.record("criterion", quick=args.quick, seed=args.seed, **res.record())
        print(res.line(), file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAILED


# -- parser ----------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, stochastic: bool = False) -> None:
    p.add_argument("--bits", action="store_true", help="report entropies in bits instead of nats")
    p.add_argument("--metadata", help="write timestamps and timings to this file")
    p.add_argument("--verbose", action="store_true", help="print metadata to stderr")
    p.add_argument("--unsafe-caps", action="store_true", help="allow caps above the defaults")
    p.add_argument("--max-dim", dest="max_dim", type=int, help="MC sector dimension cap")
    p.add_argument("--oracle-max-V", dest="oracle_max_V", type=int, help="oracle chain length cap")
    p.add_argument("--max-L", dest="max_L", type=int, help="tree order cap")
    if stochastic:
        p.add_argument("--n", type=int, default=2000, help="number of samples")
        p.add_argument("--seed", type=int, default=validation.DEFAULT_SEED, help="master seed")
        p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="su2ent", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"su2ent {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dims", help="multiplicities, sector dimensions, asymptotic residuals")
    _common(p)
    p.add_argument("--V", type=int)
    p.add_argument("--twoJ", type=int)
    p.add_argument("--j", type=float)
    p.add_argument("--VA", type=int)
    p.add_argument("--check-completeness", action="store_true")
    p.add_argument("--compare-asymptotic", action="store_true")

    p = sub.add_parser("cg", help="exact squared CG coefficients or the oscillator probe")
    _common(p)
    p.add_argument("--twoJA", type=int)
    p.add_argument("--twoJB", type=int)
    p.add_argument("--twoJ", type=int)
    p.add_argument("--twoM", type=int)
    p.add_argument("--probe", action="store_true")
    p.add_argument("--V", type=int)
    p.add_argument("--j", type=float)
    p.add_argument("--VA", type=int)
    p.add_argument("--k", type=_int_list, default=[0])
    p.add_argument("--convention", choices=["display", "compressed"], default="display")

    p = sub.add_parser("entropy", help="Monte Carlo average entanglement entropy")
    _common(p, stochastic=True)
    p.add_argument("--V", type=int)
    p.add_argument("--twoJ", type=int)
    p.add_argument("--j", type=float)
    p.add_argument("--VA", type=int)
    p.add_argument("--oracle", action="store_true", help="cross-check in the computational basis")

    p = sub.add_parser("moments", help="planar moments, tree census, dominance probes")
    _common(p, stochastic=True)
    p.add_argument("--V", dest="V_list", type=_int_list)
    p.add_argument("--twoJ", type=int)
    p.add_argument("--j", type=float)
    p.add_argument("--f", type=float)
    p.add_argument("--VA", type=int)
    p.add_argument("--L", type=_int_list, default=[2])
    p.add_argument("--census", action="store_true")
    p.add_argument("--dominance", action="store_true")
    p.add_argument("--mc-check", action="store_true")

    p = sub.add_parser("surface", help="asymptotic entropy breakdown on an (f, j) grid, as CSV")
    _common(p)
    p.add_argument("--V", type=float, default=100.0)
    p.add_argument("--f", type=_float_list, help="explicit f values")
    p.add_argument("--j", type=_float_list, help="explicit j values")
    p.add_argument("--nf", type=int, default=20)
    p.add_argument("--nj", type=int, default=20)
    p.add_argument("--output", help="CSV path (default stdout)")

    p = sub.add_parser("validate", help="run the acceptance criteria")
    _common(p)
    p.add_argument("--seed", type=int, default=validation.DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--quick", action="store_true", help="reduced sample sizes")
    p.add_argument("--only", type=_int_list, help="comma list of criterion numbers")
    return ap


COMMANDS = {
    "dims": cmd_dims,
    "cg": cmd_cg,
    "entropy": cmd_entropy,
    "moments": cmd_moments,
    "surface": cmd_surface,
    "validate": cmd_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    out = Output(args)
    loaded = cache.load()
    try:
        code = COMMANDS[args.command](args, out)
    except Su2EntError as exc:
        label = {EXIT_DOMAIN: "domain error", EXIT_SIZE: "size cap",
                 EXIT_NUMERICAL: "numerical failure"}.get(exc.exit_code, "error")
        print(f"su2ent: {label}: {exc}", file=sys.stderr)
        return exc.exit_code
    out.meta["cache_loaded"] = loaded
    if cache.default_path() is not None:
        cache.store()
    out.finish()
    return code
