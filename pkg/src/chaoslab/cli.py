"""Command-line front end.

Each subcommand calls one library operation and prints its result, as
``key: value`` lines by default or as a JSON report with ``--json``.  JSON
reports hold a ``result`` and a ``manifest`` (command line, seeds, threads,
version, wall time, sha256 of input files).  Exact rationals are strings.

Exit codes: 0 ok, 1 inequality violated, 2 bad input, 3 size infeasible.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from .chaos import BudgetExceeded, moment_p, moment_p_exact, moment_p_exact_vec, moment_p_mc
from .constructions import RM_MAX, build_rm, ksz_search
from .forms import FormError, SupNormInfeasible, format_form_text, parse_form_text, sup_norm
from .inequalities import (
    fit_exponent,
    ksz_exponent_bound,
    lower_bound_from_slices,
    verify_contraction,
    verify_hilbert_prop,
    verify_mixed,
    verify_multik,
    verify_multiple_kahane,
    verify_prop,
    verify_theorem1,
)
from .search import STRATEGIES, SearchConfig, SearchError, SearchInfeasible, estimate_A1, exponent_sweep, maximize_ratio
from .tensor import TensorError, VectorTensor, parse_tensor_text

SCHEMA = "chaoslab.report/1"
OK, VIOLATION, INPUT_ERROR, INFEASIBLE = 0, 1, 2, 3


class InputError(Exception):
    pass


@dataclass
class RunManifest:
    argv: list[str]
    seeds: dict = field(default_factory=dict)
    threads: Optional[int] = None
    version: str = __version__
    wall_time: float = 0.0
    inputs: dict = field(default_factory=dict)

    def digest(self, path: str, data: bytes) -> None:
        self.inputs[path] = hashlib.sha256(data).hexdigest()

    def to_dict(self) -> dict:
        return {
            "command": " ".join(self.argv),
            "seeds": self.seeds,
            "threads": self.threads,
            "version": self.version,
            "wall_time": round(self.wall_time, 6),
            "inputs": self.inputs,
        }


def _read(path: str, man: RunManifest) -> str:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    man.digest(path, data)
    return data.decode()


def _tensor(path: str, man: RunManifest):
    return parse_tensor_text(_read(path, man))


def _form(spec: str, man: RunManifest):
    """A form file, or a built-in name R2..R6."""
    if not Path(spec).exists() and spec.upper().startswith("R") and spec[1:].isdigit():
        return build_rm(int(spec[1:]))
    return parse_form_text(_read(spec, man))


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    """'2,4,8' or '2..64'."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"expected integers like 2,4,8 or 2..10, got {text!r}") from None


# -- subcommands: each returns (result dict, exit code, csv text or None) --------------


def cmd_moment(args, man):
    a = _tensor(args.file, man)
    vec = isinstance(a, VectorTensor)
    if args.mode == "exact":
        fn = moment_p_exact_vec if vec else moment_p_exact
        res = fn(a, args.p, threads=args.threads)
    elif args.mode == "mc":
        man.seeds["mc"] = args.seed
        res = moment_p_mc(a, args.p, args.samples, args.seed, threads=args.threads)
    else:
        man.seeds["mc"] = args.seed
        res = moment_p(a, args.p, samples=args.samples, seed=args.seed, threads=args.threads)
    return res.to_dict(), OK, None


def cmd_supnorm(args, man):
    f = _form(args.file, man)
    return sup_norm(f, threads=args.threads).to_dict(), OK, None


def cmd_rm(args, man):
    if not 2 <= args.m <= RM_MAX:
        raise InputError(f"--m must be in 2..{RM_MAX}")
    f = build_rm(args.m)
    text = format_form_text(f, header=[f"R_{args.m}"])
    out = {"m": args.m, "monomials": len(f), "dims": list(f.dims), "sup_norm": 2 ** (args.m - 1)}
    if args.json:
        out["form"] = text
    if args.out:
        Path(args.out).write_text(text)
        out["written"] = args.out
        return out, OK, None
    return out, OK, text


def cmd_ksz(args, man):
    man.seeds["ksz"] = args.seed
    cert = ksz_search(args.m, args.n, args.budget, args.seed, threads=args.threads)
    out = cert.to_dict()
    if args.out:
        Path(args.out).write_text(format_form_text(cert.form, header=[f"ksz m={args.m} n={args.n} trial seed={args.seed + cert.best_trial}"]))
        out["written"] = args.out
    if args.r is not None and cert.m >= 2:
        out["lower_bound"] = ksz_exponent_bound(cert, args.r).to_dict()
    return out, OK, None


_BOUNDS = ("multik", "theorem1", "mixed", "prop", "contraction", "kahane", "hilbert")


def cmd_bound(args, man):
    a = _tensor(args.file, man)
    which = args.which
    needs_scalar = which in ("multik", "theorem1", "mixed", "prop")
    if needs_scalar and isinstance(a, VectorTensor):
        raise InputError(f"--which {which} needs a scalar tensor")
    kw = {"threads": args.threads}
    if which == "multik":
        rep = verify_multik(a, args.p, **kw)
    elif which == "theorem1":
        rep = verify_theorem1(a, _need(args.r, "--r"), args.p, **kw)
    elif which == "mixed":
        rep = verify_mixed(a, _floats(_need(args.spec, "--spec")), args.p, **kw)
    elif which == "prop":
        rep = verify_prop(a, _need(args.r, "--r"), **kw)
    elif which == "contraction":
        rep = verify_contraction(a, **kw)
    elif which == "kahane":
        rep = verify_multiple_kahane(a, args.p, args.q, **kw)
    else:
        rep = verify_hilbert_prop(a, _need(args.r, "--r"), **kw)
    return rep.to_dict(), OK if rep.holds else VIOLATION, None


def _need(value, flag):
    if value is None:
        raise InputError(f"{flag} is required here")
    return value


def cmd_slices(args, man):
    f = _form(args.form, man)
    return lower_bound_from_slices(f, args.r, threads=args.threads).to_dict(), OK, None


def cmd_fit(args, man):
    text = _read(args.csv, man)
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise InputError("empty CSV")
    if rows[0] and not _is_number(rows[0][0]):
        rows = rows[1:]
    try:
        pts = [(float(r[0]), float(r[1])) for r in rows if r]
    except (ValueError, IndexError):
        raise InputError("CSV rows must be n,value") from None
    return fit_exponent(pts).to_dict(), OK, None


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def _config(args) -> SearchConfig:
    return SearchConfig(m=args.m, n=args.n, r=args.r, p=args.p, strategy=args.strategy,
                        budget=args.budget, seed=args.seed, restarts=args.restarts)


def cmd_search(args, man):
    man.seeds["search"] = args.seed
    res = maximize_ratio(_config(args), threads=args.threads)
    if args.trace_csv:
        Path(args.trace_csv).write_text(res.trace_csv())
        _sidecar(args.trace_csv, man)
    return res.to_dict(), OK, None


def cmd_a1(args, man):
    man.seeds["a1"] = args.seed
    rows = []
    for n in _int_list(args.n):
        res = estimate_A1(n, args.budget, args.seed)
        rows.append({"n": n, "value": res.best_ratio,
                     "argmin": res.best_tensor.entries.tolist()})
    return {"estimates": rows}, OK, _csv([(r["n"], r["value"]) for r in rows])


def cmd_sweep(args, man):
    man.seeds["sweep"] = args.seed
    results = []
    fit = exponent_sweep(args.m, args.r, args.p, _int_list(args.n_list), args.strategy,
                         args.budget, args.seed, args.restarts, threads=args.threads, results=results)
    out = fit.to_dict()
    out["target_exponent"] = args.m * (1 / args.r - 0.5)
    out["exact_moments"] = {str(res.config.n): res.exact_moment for res in results if res.exact_moment}
    return out, OK, _csv(fit.points)


def _csv(points) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "value"])
    for n, v in points:
        w.writerow([int(n) if float(n).is_integer() else n, repr(float(v))])
    return buf.getvalue()


def _sidecar(path: str, man: RunManifest) -> None:
    Path(str(path) + ".manifest.json").write_text(json.dumps(man.to_dict(), sort_keys=True, indent=2) + "\n")


# -- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    common.add_argument("--json", action="store_true", help="print a JSON report")
    common.add_argument("--csv-out", default=None, help="write n,value plot data here (a1, sweep)")

    parser = argparse.ArgumentParser(prog="chaoslab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("moment", parents=[common], help="L_p moment of a chaos")
    s.add_argument("file")
    s.add_argument("--p", type=float, default=1.0)
    s.add_argument("--mode", choices=("exact", "mc", "auto"), default="auto")
    s.add_argument("--samples", type=int, default=200_000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_moment)

    s = sub.add_parser("supnorm", parents=[common], help="exact sup-norm of a form (file or R2..R6)")
    s.add_argument("file")
    s.set_defaults(func=cmd_supnorm)

    s = sub.add_parser("rm", parents=[common], help="build and check R_m")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_rm)

    s = sub.add_parser("ksz", parents=[common], help="random +-1 forms with small certified norm")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--budget", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--r", type=float, default=None, help="also report the implied lower bound")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_ksz)

    s = sub.add_parser("bound", parents=[common], help="check one inequality on a tensor file")
    s.add_argument("file")
    s.add_argument("--which", choices=_BOUNDS, required=True)
    s.add_argument("--r", type=float, default=None)
    s.add_argument("--p", type=float, default=1.0)
    s.add_argument("--q", type=float, default=2.0)
    s.add_argument("--spec", default=None, help="mixed-norm exponents, e.g. 1,1.5")
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("slices", parents=[common], help="slice lower bound L/M for a form")
    s.add_argument("--form", required=True, help="form file or R2..R6")
    s.add_argument("--r", type=float, required=True)
    s.set_defaults(func=cmd_slices)

    s = sub.add_parser("fit", parents=[common], help="log-log slope of an n,value CSV")
    s.add_argument("--csv", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("search", parents=[common], help="maximise l_r / moment_p")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--r", type=float, required=True)
    s.add_argument("--p", type=float, default=1.0)
    s.add_argument("--strategy", choices=STRATEGIES, default="sign-coordinate-ascent")
    s.add_argument("--budget", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--restarts", type=int, default=1)
    s.add_argument("--trace-csv", default=None)
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("a1", parents=[common], help="estimate the L1 Khinchin constant")
    s.add_argument("--n", default="2..12", help="sizes, e.g. 2..12 or 2,4,8")
    s.add_argument("--budget", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_a1)

    s = sub.add_parser("sweep", parents=[common], help="best ratio over n and its fitted exponent")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--r", type=float, required=True)
    s.add_argument("--p", type=float, default=1.0)
    s.add_argument("--n-list", required=True, help="e.g. 2..64 or 2,4,8")
    s.add_argument("--strategy", choices=STRATEGIES, default="product-ones")
    s.add_argument("--budget", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--restarts", type=int, default=1)
    s.set_defaults(func=cmd_sweep)
    return parser


def _plain(d: dict, prefix: str = "") -> list[str]:
    lines = []
    for k in sorted(d):
        v = d[k]
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            lines.extend(_plain(v, key + "."))
        else:
            lines.append(f"{key}: {json.dumps(v) if isinstance(v, (list, bool)) or v is None else v}")
    return lines


def main(argv: Optional[list[str]] = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return INPUT_ERROR if exc.code else OK
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=stderr)
        return INPUT_ERROR
    man = RunManifest(["chaoslab"] + argv, threads=args.threads or os.cpu_count())
    start = time.perf_counter()
    try:
        result, code, text = args.func(args, man)
    except (BudgetExceeded, SupNormInfeasible, SearchInfeasible) as exc:
        print(f"infeasible: {exc}", file=stderr)
        return INFEASIBLE
    except (InputError, TensorError, FormError, SearchError, ValueError) as exc:
        print(f"error: {exc}", file=stderr)
        return INPUT_ERROR
    man.wall_time = time.perf_counter() - start

    if args.csv_out and text is not None and text.startswith("n,value"):
        Path(args.csv_out).write_text(text)
        _sidecar(args.csv_out, man)
    if args.json:
        report = {"schema": SCHEMA, "command": args.command, "result": result, "manifest": man.to_dict()}
        print(json.dumps(report, sort_keys=True, indent=2), file=stdout)
    else:
        if text is not None and args.command == "rm":
            stdout.write(text)
        else:
            for line in _plain(result):
                print(line, file=stdout)
    return code
