"""Command-line interface: ``emperor <subcommand> ...``.

Exit status: 0 on success, 1 on a usage error (bad or missing flag), 2 on a
data error (unreadable or invalid input file). Output files are written to a
temporary file and renamed into place, so a failed run leaves nothing
behind.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import errors
from .bench import BenchConfig, run_benchmark
from .descriptor import Descriptor, DescriptorConfig, emperor_descriptor, flatten
from .gmm1d import EMConfig
from .model import gmm_from_dict, load_gmm_spec, read_pointset_csv
from .momentindex import enumerate_multi_indices
from .moments import (
    carleman_partial_sum,
    gmm_moment_vector,
    hankel_psd_check,
    multivariate_gmm_moment,
    slice_gmm,
    univariate_moment_sequence,
)
from .reconstruct import RateStudyConfig, format_rate_csv, rate_study, recover_moments
from .slicing import Scheme, generate_directions


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n\n{self.format_help()}")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v >= 0 or v == float("inf"):
        raise argparse.ArgumentTypeError(f"must be a finite number >= 0, got {text}")
    return v


def _int_list(text):
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text):
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def write_atomic(path, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Fmt:
    def __init__(self, precision):
        self.precision = precision

    def __call__(self, v: float) -> str:
        v = float(v)
        return repr(v) if self.precision is None else f"{v:.{self.precision}g}"


def _common(p):
    p.add_argument("--seed", type=int, default=None, help="master random seed")
    p.add_argument("--threads", type=_positive_int, default=1, help="worker threads (results do not depend on it)")
    p.add_argument("--precision", type=_positive_int, default=None, help="significant digits in printed numbers (default: exact round-trip)")


DESCRIBE_HELP = """\
Input: PointSet CSV, one point per line, d comma-separated floats; lines
starting with '#' are skipped. Output: descriptor JSON (see the
emperor.descriptor module docs). --flat-csv writes the flattened vector as a
single comma-separated line: slice-major, component, then (pi, mu, sigma).
"""

RECONSTRUCT_HELP = """\
Output CSV: a header line '# a1,...,ad,value' and then one row per monomial
of total degree --degree, in descending lexicographic order of the exponents:
the d exponents followed by the recovered moment.
"""

MOMENTS_HELP = """\
GMM spec: JSON with 'weights' (K), 'means' (K x d), 'covariances' (K x d x d).
With --alpha prints E[x^alpha]; with --degree prints the CSV layout used by
'reconstruct'. With --direction, also prints the sliced moments m_0..m_2n of
that direction, the Hankel PSD check of H_n (n = --hankel) and the Carleman
partial sum over --carleman terms.
"""

RATES_HELP = """\
Config JSON keys: gmm (inline spec) or gmm_file (path), degree, slice_counts,
trials, noise_scale, sample_size, ridge, seed, mode ('noise' or
'end-to-end'). Output CSV columns 'L,trial,rmse' (rmse is ||m_hat - m||_2 of
one trial), followed by one row 'slope,fit,<slope>'. The fitted log-log slope
is printed; --summary writes a JSON summary with the per-L table.
"""

BENCH_HELP = """\
Config JSON: see the emperor.bench module docs. Report CSV columns
'method,seed,train_acc,test_acc'; a mean/std table is printed. --seed s
replaces the configured seeds by s, s+1, ... (same count).
"""

DIRECTIONS_HELP = """\
Output JSON: {"scheme", "seed", "directions": L x d}.
"""


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="emperor", description="Sliced-GMM moment-preserving descriptors.")
    sub = parser.add_subparsers(dest="command", metavar="{describe,reconstruct,moments,rates,bench,directions}", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("describe", help="point set CSV -> descriptor", epilog=DESCRIBE_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--slices", type=_positive_int, default=64)
    p.add_argument("--components", type=_positive_int, default=3)
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default=Scheme.IID_GAUSSIAN_NORMALIZED.value)
    p.add_argument("--standardize", action="store_true", help="fit standardized projections")
    p.add_argument("--restarts", type=_positive_int, default=5)
    p.add_argument("--max-iters", type=_positive_int, default=200)
    p.add_argument("--tol", type=_nonneg_float, default=1e-8)
    p.add_argument("--flat-csv", default=None)
    _common(p)

    p = sub.add_parser("reconstruct", help="descriptor -> degree-k moments", epilog=RECONSTRUCT_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--descriptor", required=True)
    p.add_argument("--degree", type=_nonneg_int, required=True)
    p.add_argument("--ridge", type=_nonneg_float, default=None, help="ridge penalty (default: 0 if L >= 2 M_k, else tiny)")
    p.add_argument("--output", default=None, help="CSV path (default: stdout)")
    _common(p)

    p = sub.add_parser("moments", help="analytic moments of a GMM spec", epilog=MOMENTS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--gmm", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--alpha", type=_int_list)
    g.add_argument("--degree", type=_nonneg_int)
    p.add_argument("--direction", type=_float_list, default=None)
    p.add_argument("--hankel", type=_nonneg_int, default=2)
    p.add_argument("--carleman", type=_positive_int, default=4)
    p.add_argument("--output", default=None)
    _common(p)

    p = sub.add_parser("rates", help="slice-count error study", epilog=RATES_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--summary", default=None)
    _common(p)

    p = sub.add_parser("bench", help="pooling benchmark", epilog=BENCH_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", default=None)
    p.add_argument("--output", required=True)
    _common(p)

    p = sub.add_parser("directions", help="emit a slice set", epilog=DIRECTIONS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--dim", type=_positive_int, required=True)
    p.add_argument("--slices", type=_positive_int, required=True)
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default=Scheme.IID_GAUSSIAN_NORMALIZED.value)
    p.add_argument("--output", default=None)
    _common(p)
    return parser


def _emit(text: str, path, out) -> None:
    if path is None:
        out.write(text)
    else:
        write_atomic(path, text)


def _read_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise errors.FormatError(exc.msg, path, exc.lineno) from None


def _moment_rows(vector, fmt) -> str:
    d = vector.basis.d
    lines = ["# " + ",".join(f"a{i + 1}" for i in range(d)) + ",value"]
    for alpha, v in vector.items():
        lines.append(",".join(str(a) for a in alpha) + "," + fmt(v))
    return "\n".join(lines) + "\n"


def cmd_describe(args, out):
    pts = read_pointset_csv(args.input)
    cfg = DescriptorConfig(
        slices=args.slices,
        components=args.components,
        em=EMConfig(components=args.components, max_iters=args.max_iters, rel_tol=args.tol, restarts=args.restarts),
        direction_scheme=args.scheme,
        seed=0 if args.seed is None else args.seed,
        standardize_slices=args.standardize,
    )
    desc = emperor_descriptor(pts, cfg, threads=args.threads)
    write_atomic(args.output, desc.dumps())
    if args.flat_csv:
        fmt = _Fmt(args.precision)
        write_atomic(args.flat_csv, ",".join(fmt(v) for v in flatten(desc)) + "\n")
    for w in desc.warnings:
        print(f"warning: {w}", file=sys.stderr)


def cmd_reconstruct(args, out):
    path = Path(args.descriptor)
    try:
        desc = Descriptor.loads(path.read_text())
    except errors.FormatError as exc:
        raise errors.FormatError(str(exc), path) from None
    vec = recover_moments(desc, args.degree, args.ridge)
    _emit(_moment_rows(vec, _Fmt(args.precision)), args.output, out)


def cmd_moments(args, out):
    gmm = load_gmm_spec(args.gmm)
    fmt = _Fmt(args.precision)
    if args.alpha is not None:
        text = fmt(multivariate_gmm_moment(gmm, args.alpha)) + "\n"
    else:
        text = _moment_rows(gmm_moment_vector(gmm, args.degree), fmt)
    if args.direction is not None:
        theta = np.asarray(args.direction, dtype=float)
        if theta.size != gmm.d or not np.linalg.norm(theta) > 0:
            raise errors.DimensionMismatch(f"--direction needs {gmm.d} entries, not all zero")
        theta = theta / np.linalg.norm(theta)
        n = args.hankel
        seq = univariate_moment_sequence(slice_gmm(gmm, theta), max(2 * n, 2 * args.carleman))
        ok, lo = hankel_psd_check(seq, n)
        carl = carleman_partial_sum(seq.values[2::2], args.carleman)
        text += "# sliced moments m_0..: " + ",".join(fmt(v) for v in seq.values) + "\n"
        text += f"# hankel H_{n}: psd={str(ok).lower()} min_eigenvalue={fmt(lo)}\n"
        text += f"# carleman partial sum ({args.carleman} terms): {fmt(carl)}\n"
    _emit(text, args.output, out)


def cmd_rates(args, out):
    doc = _read_json(args.config)
    if "gmm" in doc:
        gmm = gmm_from_dict(doc["gmm"])
    elif "gmm_file" in doc:
        gmm = load_gmm_spec(Path(args.config).parent / doc["gmm_file"])
    else:
        raise errors.FormatError("config needs 'gmm' or 'gmm_file'", args.config)
    try:
        cfg = RateStudyConfig(
            gmm=gmm,
            degree=int(doc["degree"]),
            slice_counts=tuple(doc["slice_counts"]),
            trials=int(doc.get("trials", 50)),
            noise_scale=float(doc.get("noise_scale", 1.0)),
            sample_size=int(doc.get("sample_size", 100)),
            ridge=float(doc.get("ridge", 0.0)),
            seed=int(doc.get("seed", 0)) if args.seed is None else args.seed,
            mode=str(doc.get("mode", "noise")),
        )
    except KeyError as exc:
        raise errors.FormatError(f"config is missing {exc}", args.config) from None
    except (TypeError, ValueError) as exc:
        raise errors.FormatError(str(exc), args.config) from None
    res = rate_study(cfg)
    write_atomic(args.output, format_rate_csv(res))
    if args.summary:
        summary = {
            "slope": res.slope,
            "excluded_L": list(res.excluded),
            "lambda_min_estimate": res.lambda_min,
            "table": [{"L": L, "rmse": m, "error_std": s} for L, m, s in res.table],
            "mode": cfg.mode,
        }
        write_atomic(args.summary, json.dumps(summary, indent=1, sort_keys=True) + "\n")
    out.write(f"slope {_Fmt(args.precision)(res.slope)}\n")


def cmd_bench(args, out):
    doc = _read_json(args.config) if args.config else {}
    try:
        cfg = BenchConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise errors.FormatError(str(exc), args.config) from None
    if args.seed is not None:
        from dataclasses import replace

        cfg = replace(cfg, seeds=tuple(args.seed + i for i in range(len(cfg.seeds))))
    report = run_benchmark(cfg, threads=args.threads)
    write_atomic(args.output, report.to_csv())
    out.write(report.to_table())


def cmd_directions(args, out):
    s = generate_directions(args.dim, args.slices, 0 if args.seed is None else args.seed, args.scheme)
    _emit(json.dumps(s.to_dict(), indent=1, sort_keys=True) + "\n", args.output, out)


COMMANDS = {
    "describe": cmd_describe,
    "reconstruct": cmd_reconstruct,
    "moments": cmd_moments,
    "rates": cmd_rates,
    "bench": cmd_bench,
    "directions": cmd_directions,
}


def run_cli(argv=None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        err.write(str(exc))
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args, out)
    except (errors.EmperorError, OSError) as exc:
        err.write(f"emperor {args.command}: {exc}\n")
        return 2
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
