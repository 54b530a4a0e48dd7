"""``qgen`` command-line front end.

Exit codes: 0 success, 1 verification or learning failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from pathlib import Path

from .core import OutputDistribution, QuantumGenerator, exact_distribution, sample_many, validate
from .errors import EmptyNet, EmptySamples, QGenError, VerificationFailed
from .gates import all_partitions, enumerate_net, read_manifest, write_manifest
from .learn import kl_divergence, learn, perturb
from .parity import ParitySpec, build_parity_qg, verify_construction
from .reduce import run_reduction

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    """Write all of ``text`` or nothing."""
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _parse_set(text: str) -> frozenset[int]:
    try:
        return frozenset(int(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise UsageError(f"--S expects a comma list of integers, got {text!r}") from exc


def _spec(args) -> ParitySpec:
    if args.n is None or args.S is None or args.eta is None:
        raise UsageError("a parity spec needs --n, --S and --eta")
    return ParitySpec(args.n, _parse_set(args.S), args.eta)


def _generator(args) -> QuantumGenerator:
    if getattr(args, "generator", None):
        return validate(QuantumGenerator.from_json(json.loads(Path(args.generator).read_text())))
    return build_parity_qg(_spec(args))


def _length(args) -> int:
    if args.len is not None:
        return args.len
    if args.n is not None:
        return args.n + 1
    raise UsageError("--len is required")


def cmd_build(args) -> int:
    qg = build_parity_qg(_spec(args))
    _emit(json.dumps(qg.to_json()) + "\n", args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.generator:
        try:
            _generator(args)
            report = {"valid": True, "pass": True}
        except QGenError as exc:
            report = {"valid": False, "pass": False, "error": type(exc).__name__, "detail": str(exc)}
        _emit(json.dumps(report, sort_keys=True) + "\n", args.out)
        return EXIT_OK if report["pass"] else EXIT_FAIL
    report = verify_construction(_spec(args), strict=False)
    _emit(report.dumps() + "\n", args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_sample(args) -> int:
    qg = _generator(args)
    xs = sample_many(qg, _length(args), args.samples, args.seed)
    _emit("".join(x + "\n" for x in xs), args.out)
    return EXIT_OK


def cmd_dist(args) -> int:
    dist = exact_distribution(_generator(args), _length(args))
    _emit(dist.to_text(), args.out)
    return EXIT_OK


def _read_table(path: str) -> OutputDistribution:
    return OutputDistribution.from_text(Path(path).read_text())


def cmd_perturb(args) -> int:
    source = _read_table(args.table) if args.table else exact_distribution(_generator(args), _length(args))
    _emit(perturb(source, args.eps1).table().to_text(), args.out)
    return EXIT_OK


def cmd_kl(args) -> int:
    value = kl_divergence(_read_table(args.p), _read_table(args.q), base=math.e if args.nats else 2.0)
    _emit(f"{value:.16e}\n", args.out)
    return EXIT_OK


def cmd_net(args) -> int:
    k = 1 << args.width
    if args.meas:
        meas = [tuple(int(c) for c in m) for m in args.meas.split(",")]
    else:
        meas = all_partitions(k)
    entries = enumerate_net(args.width, args.depth, args.grid, meas, args.len, eps0=args.eps0)
    _emit(write_manifest(entries, args.eps0), args.out)
    return EXIT_OK


def cmd_learn(args) -> int:
    samples = [line.strip() for line in Path(args.samples).read_text().splitlines() if line.strip()]
    net_text = Path(args.net).read_text()
    net = read_manifest(net_text)
    eps0 = next(line for line in net_text.splitlines() if line.startswith("#"))
    result = learn(samples, net, args.eps1, threads=args.threads)
    text = f"{eps0}\n# eps1={float(args.eps1)!r} index={result.index}\n{result.entry.manifest_line()}\n"
    if args.trace:
        _emit(result.trace_csv(), args.trace)
    if args.table:
        _emit(result.evaluator.table().to_text(), args.table)
    _emit(text, args.out)
    return EXIT_OK


def cmd_reduce(args) -> int:
    spec = _spec(args)
    if args.mode == "voting" and args.seed is None:
        raise UsageError("--mode voting is stochastic and needs --seed")
    if args.evaluator:
        evaluator = _read_table(args.evaluator)
    else:
        evaluator = exact_distribution(build_parity_qg(spec), spec.n + 1)
    report = run_reduction(evaluator, spec, args.eps, args.mode, args.trials, args.seed)
    _emit(report.dumps() + "\n", args.out)
    return EXIT_OK if report.match else EXIT_FAIL


def _add_spec(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int)
    p.add_argument("--S", help="comma-separated 1-based positions")
    p.add_argument("--eta", type=float)


def _add_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--generator", help="generator JSON file (default: build from --n/--S/--eta)")
    _add_spec(p)
    p.add_argument("--len", type=int, help="string length (default n+1 for parity specs)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qgen", description=__doc__)
    parser.add_argument("--threads", type=int, default=1)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="write the noisy-parity generator as JSON")
    _add_spec(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("verify", help="validate a generator file or verify a parity construction")
    p.add_argument("--generator")
    _add_spec(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sample", help="draw output strings")
    _add_source(p)
    p.add_argument("--samples", type=int, default=1, help="number of strings")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("dist", help="exact output table")
    _add_source(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("perturb", help="clamp the conditionals of a table")
    _add_source(p)
    p.add_argument("--table", help="table file instead of a generator")
    p.add_argument("--eps1", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("kl", help="KL(P || Q) between two table files")
    p.add_argument("--p", required=True)
    p.add_argument("--q", required=True)
    p.add_argument("--nats", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_kl)

    p = sub.add_parser("net", help="enumerate a bounded-depth generator net")
    p.add_argument("--width", type=int, default=1)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--grid", type=int, default=4)
    p.add_argument("--eps0", type=float, default=0.1)
    p.add_argument("--meas", help="comma list of partitions such as 01,10 (default: all)")
    p.add_argument("--len", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_net)

    p = sub.add_parser("learn", help="select the perturbed net entry of least log-loss")
    p.add_argument("--samples", required=True, help="file with one bitstring per line")
    p.add_argument("--net", required=True, help="net manifest file")
    p.add_argument("--eps1", type=float, required=True)
    p.add_argument("--trace", help="write the per-entry log-loss CSV here")
    p.add_argument("--table", help="write the learned table here")
    p.add_argument("--out")
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("reduce", help="parity predictor and set recovery from an evaluator")
    _add_spec(p)
    p.add_argument("--evaluator", help="table file over {0,1}^(n+1) (default: exact generator law)")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--mode", choices=("exact", "voting"), default="exact")
    p.add_argument("--trials", type=int, default=400)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_reduce)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qgen: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (VerificationFailed, EmptyNet, EmptySamples) as exc:
        print(f"qgen: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, OSError) as exc:
        print(f"qgen: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
