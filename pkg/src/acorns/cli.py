"""`acorns_autodiff` command line front end.

Pipeline mode (default):
    acorns_autodiff input.c energy --vars x --func function_0 \\
        --output_filename ders/der_0

Verification mode:
    acorns_autodiff verify eq3 --s 10 --points 100 --mode hessian

Outputs are byte-deterministic for identical inputs: the provenance
comment carries no timestamps, so build systems can hash the files.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import __version__
from .codegen import DEFAULT_SPLIT_TARGET, EmitConfig, emit
from .derivatives import DEFAULT_NODE_CAP, VarIndexMap, derive_bundle
from .errors import (
    AcornsError,
    BoundExplosion,
    ExpressionExplosion,
    FormatError,
    MissingEnergyVar,
    MissingFunction,
    NotConstant,
    ParseError,
    UnsupportedConstruct,
)
from .flatten import dump_text, serialize, unroll
from .parser import parse_source, validate_subset
from .verify import CORPUS, CorpusFunction, verify as run_verify, corpus_function

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_IO = 2
EXIT_RESOURCE = 3

_INPUT_ERRORS = (ParseError, UnsupportedConstruct, MissingFunction, MissingEnergyVar,
                 NotConstant, FormatError, AcornsError)


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):  # exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _pipeline_parser() -> _ArgumentParser:
    p = _ArgumentParser(
        prog="acorns_autodiff",
        description="Differentiate a C99 function and emit C99 kernels for "
                    "its value, gradient, and Hessian.",
    )
    p.add_argument("input", help="C source file containing the function")
    p.add_argument("energy_var", help="name of the scalar local holding the energy")
    p.add_argument("--vars", nargs="+", default=[], metavar="NAME",
                   help="parameters to differentiate with respect to")
    p.add_argument("--func", required=True, help="function to differentiate")
    p.add_argument("--output_filename", required=True, metavar="STEM",
                   help="path stem for the generated .h/.c files")
    p.add_argument("--mode", nargs="+", default=["function", "gradient", "hessian"],
                   choices=["function", "gradient", "hessian"],
                   help="which kernels to emit (default: all three)")
    p.add_argument("--split-size", type=int, default=DEFAULT_SPLIT_TARGET, metavar="BYTES",
                   help="target size per generated source file (default 16 MiB)")
    p.add_argument("--parallel", action="store_true",
                   help="annotate the point loop with an OpenMP parallel-for pragma")
    p.add_argument("--no-simplify", action="store_true",
                   help="skip algebraic simplification of derivative expressions")
    p.add_argument("--dump-slp", action="store_true",
                   help="also write the straight-line intermediate (.slp + text dump)")
    p.add_argument("--single-file", action="store_true",
                   help="name the output <stem>.c when it fits in one source file")
    p.add_argument("--version", action="version", version=f"acorns-autodiff {__version__}")
    return p


def _node_cap() -> int:
    raw = os.environ.get("ACORNS_MAX_NODES")
    if not raw:
        return DEFAULT_NODE_CAP
    try:
        return int(raw)
    except ValueError:
        print(f"warning: ignoring non-integer ACORNS_MAX_NODES={raw!r}", file=sys.stderr)
        return DEFAULT_NODE_CAP


def _run_pipeline(args) -> int:
    modes = frozenset(args.mode)
    if not args.vars and modes & {"gradient", "hessian"}:
        print("acorns_autodiff: error: --vars is required for gradient/hessian output",
              file=sys.stderr)
        return EXIT_INPUT
    try:
        source_text = open(args.input, encoding="utf-8").read()
    except OSError as exc:
        print(f"acorns_autodiff: cannot read {args.input}: {exc}", file=sys.stderr)
        return EXIT_IO

    try:
        ir = parse_source(source_text, args.func, args.energy_var)
        violations = validate_subset(ir)
        if violations:
            for v in violations:
                print(f"{args.input}:{v.span}: {v.reason}", file=sys.stderr)
            return EXIT_INPUT
        program = unroll(ir)
        vars_ = VarIndexMap.from_names(program, args.vars)
        bundle = derive_bundle(
            program, vars_,
            do_simplify=not args.no_simplify,
            cap=_node_cap(),
            want_gradient=bool(modes & {"gradient", "hessian"}),
            want_hessian="hessian" in modes,
        )
        cfg = EmitConfig(
            mode=modes,
            split_target_bytes=args.split_size,
            parallel=args.parallel,
            basename=args.output_filename,
            simplified=not args.no_simplify,
            source_name=os.path.basename(args.input),
            var_names=tuple(args.vars),
        )
        artifact = emit(bundle, vars_, cfg, program)
    except (BoundExplosion, ExpressionExplosion) as exc:
        print(f"acorns_autodiff: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except _INPUT_ERRORS as exc:
        print(f"acorns_autodiff: {args.input}: {exc}", file=sys.stderr)
        return EXIT_INPUT

    stem = args.output_filename
    out_dir = os.path.dirname(stem)
    try:
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
        if args.dump_slp:
            with open(stem + ".slp", "wb") as fh:
                fh.write(serialize(program))
            with open(stem + ".slp.txt", "w", encoding="utf-8") as fh:
                fh.write(dump_text(program))
        with open(stem + ".h", "w", encoding="utf-8") as fh:
            fh.write(artifact.header)
        single = args.single_file and len(artifact.sources) == 1
        for filename, text in artifact.sources:
            path = os.path.join(out_dir, filename) if out_dir else filename
            if single:
                path = stem + ".c"
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
    except OSError as exc:
        print(f"acorns_autodiff: write failed: {exc}", file=sys.stderr)
        return EXIT_IO

    print(f"n={vars_.n} statements={artifact.n_statements} files={len(artifact.sources)}")
    return EXIT_OK


def _verify_parser() -> _ArgumentParser:
    p = _ArgumentParser(
        prog="acorns_autodiff verify",
        description="Check analytic derivatives against finite-difference oracles.",
    )
    p.add_argument("function", help=f"corpus name ({', '.join(CORPUS)}) or a C source file")
    p.add_argument("--s", type=int, default=None, help="variable count for the eq3 family")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--mode", default="gradient", choices=["gradient", "hessian"])
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--no-simplify", action="store_true")
    p.add_argument("--tolerance", type=float, default=None)
    p.add_argument("--machine", action="store_true",
                   help="line-oriented output: entry,analytic,fd,relerr,pass")
    # for verifying a user source file instead of a corpus entry:
    p.add_argument("--func", default=None, help="function name (file inputs)")
    p.add_argument("--energy", default=None, help="energy variable (file inputs)")
    p.add_argument("--vars", nargs="+", default=None, help="independent vars (file inputs)")
    p.add_argument("--box", nargs=2, type=float, default=(0.01, 1.0), metavar=("LO", "HI"),
                   help="sampling interval for file inputs (default 0.01 1)")
    return p


def _run_verify(argv) -> int:
    args = _verify_parser().parse_args(argv)
    try:
        if args.function in CORPUS:
            fn = corpus_function(args.function, s=args.s)
        else:
            if not (args.func and args.energy and args.vars):
                print("acorns_autodiff verify: file inputs need --func, --energy and --vars",
                      file=sys.stderr)
                return EXIT_INPUT
            try:
                source = open(args.function, encoding="utf-8").read()
            except OSError as exc:
                print(f"acorns_autodiff verify: cannot read {args.function}: {exc}",
                      file=sys.stderr)
                return EXIT_IO
            fn = CorpusFunction(
                name=os.path.basename(args.function), source=source,
                func_name=args.func, energy_var=args.energy,
                var_names=tuple(args.vars),
                boxes={p: tuple(args.box) for p in args.vars},
            )
        kwargs = {}
        if args.seed is not None:
            kwargs["seed"] = args.seed
        report = run_verify(fn, mode=args.mode, points=args.points,
                            do_simplify=not args.no_simplify,
                            tolerance=args.tolerance, **kwargs)
    except (BoundExplosion, ExpressionExplosion) as exc:
        print(f"acorns_autodiff verify: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except _INPUT_ERRORS as exc:
        print(f"acorns_autodiff verify: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(report.render_machine() if args.machine else report.render())
    return EXIT_OK if report.ok else EXIT_INPUT


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] == "verify":
        return _run_verify(argv[1:])
    args = _pipeline_parser().parse_args(argv)
    return _run_pipeline(args)


if __name__ == "__main__":
    sys.exit(main())
