"""Emission of derivative bundles as dependency-free C99.

The generated artifact is one header plus N source files.  Statements are
packed greedily into files of roughly `split_target_bytes`; each run of
same-mode statements in a file becomes a chunk function evaluating one
point, and exported drivers (`compute`, `compute_grad`, `compute_hess`)
in part 0 loop over points calling the chunks in order.  Output text is
fully deterministic for a given bundle and config.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .cast import Binary, Call, Constant, Expr, Unary, Var, to_source
from .derivatives import DerivativeBundle, VarIndexMap
from .errors import AcornsError
from .flatten import StraightLineProgram

MODE_ORDER = ("function", "gradient", "hessian")
DRIVER_NAME = {"function": "compute", "gradient": "compute_grad", "hessian": "compute_hess"}
DRIVER_OUT_ARG = {"function": "out", "gradient": "ders", "hessian": "hess"}

DEFAULT_SPLIT_TARGET = 16 * 2**20
MIN_SPLIT_TARGET = 2**16

RECOMMENDED_FLAGS = "-O3 -ffast-math -flto"


@dataclass(frozen=True)
class EmitConfig:
    mode: frozenset = frozenset(MODE_ORDER)
    split_target_bytes: int = DEFAULT_SPLIT_TARGET
    parallel: bool = False
    basename: str = "der"
    simplified: bool = True
    source_name: str = ""
    var_names: tuple = ()

    def __post_init__(self):
        bad = set(self.mode) - set(MODE_ORDER)
        if bad:
            raise AcornsError(f"unknown emit mode(s): {sorted(bad)}")
        if not self.mode:
            raise AcornsError("at least one emit mode is required")
        if self.split_target_bytes < MIN_SPLIT_TARGET:
            raise AcornsError(f"split target must be at least {MIN_SPLIT_TARGET} bytes")


@dataclass(frozen=True)
class GeneratedArtifact:
    header: str
    sources: tuple  # ordered (filename, text) pairs
    n_statements: int = 0


@dataclass(frozen=True)
class Statement:
    mode: str
    text: str
    params: frozenset  # parameter names the expression reads


def layout_slots(program: StraightLineProgram, vars_: VarIndexMap) -> list:
    """Per-point slot order: independent vars first, then remaining inputs."""
    chosen = set(vars_.labels)
    rest = [s.label for s in program.inputs if s.label not in chosen]
    return list(vars_.labels) + rest


def _collect_params(e: Expr, out: set):
    if isinstance(e, Var):
        out.add(e.name.split("[", 1)[0])
    elif isinstance(e, Unary):
        _collect_params(e.operand, out)
    elif isinstance(e, Binary):
        _collect_params(e.lhs, out)
        _collect_params(e.rhs, out)
    elif isinstance(e, Call):
        for a in e.args:
            _collect_params(a, out)


def _statements(bundle: DerivativeBundle, cfg: EmitConfig) -> list:
    n = bundle.n
    stmts = []

    def add(mode: str, target: str, expr: Expr):
        params: set = set()
        _collect_params(expr, params)
        stmts.append(Statement(mode, f"{target} = {to_source(expr)};", frozenset(params)))

    if "function" in cfg.mode:
        add("function", "out[0]", bundle.f)
    if "gradient" in cfg.mode:
        for j, g in enumerate(bundle.grad):
            add("gradient", f"out[{j}]", g)
    if "hessian" in cfg.mode:
        for i in range(n):
            for j in range(i + 1):
                add("hessian", f"out[{i * n + j}]", bundle.hess_lower[i * (i + 1) // 2 + j])
                if i != j:
                    # mirror the lower triangle instead of recomputing
                    stmts.append(Statement("hessian", f"out[{j * n + i}] = out[{i * n + j}];", frozenset()))
    return stmts


def split(statements: list, cfg: EmitConfig) -> list:
    """Greedy in-order packing of statements into per-file groups."""
    if not statements:
        raise AcornsError("no statements to emit")
    reserve = min(16384, cfg.split_target_bytes // 4)  # headroom for boilerplate
    budget = cfg.split_target_bytes - reserve
    files: list[list] = []
    current: list = []
    size = 0
    for st in statements:
        nbytes = len(st.text) + 16
        if current and size + nbytes > budget:
            files.append(current)
            current = []
            size = 0
        current.append(st)
        size += nbytes
        if nbytes > budget:  # oversize statement occupies its own file
            files.append(current)
            current = []
            size = 0
    if current:
        files.append(current)
    return files


def _param_decls(program: StraightLineProgram, layout: list, params: frozenset) -> list:
    """Declare C locals for each referenced parameter, loaded from vals."""
    slot_pos = {label: i for i, label in enumerate(layout)}
    by_param: dict[str, list] = {}
    order: list[str] = []
    for s in program.inputs:
        if s.param not in by_param:
            by_param[s.param] = []
            order.append(s.param)
        by_param[s.param].append(s)
    lines = []
    for name in order:
        if name not in params:
            continue
        slots = by_param[name]
        if slots[0].indices == ():
            lines.append(f"    const double {name} = vals[{slot_pos[name]}];")
            continue
        rank = len(slots[0].indices)
        extents = [max(s.indices[d] for s in slots) + 1 for d in range(rank)]
        values = {s.indices: slot_pos[s.label] for s in slots}

        def braces(prefix: tuple) -> str:
            d = len(prefix)
            if d == rank:
                return f"vals[{values[prefix]}]"
            inner = ", ".join(braces(prefix + (i,)) for i in range(extents[d]))
            return "{" + inner + "}"

        dims = "".join(f"[{e}]" for e in extents)
        lines.append(f"    const double {name}{dims} = {braces(())};")
    return lines


def _guard_name(basename: str) -> str:
    stem = basename.replace("\\", "/").rsplit("/", 1)[-1]
    return re.sub(r"[^A-Za-z0-9]", "_", stem).upper() + "_H"


def _header_stem(basename: str) -> str:
    return basename.replace("\\", "/").rsplit("/", 1)[-1]


def emit(bundle: DerivativeBundle, vars_: VarIndexMap, cfg: EmitConfig,
         program: StraightLineProgram) -> GeneratedArtifact:
    """Generate the header and split source files for the selected modes."""
    from . import __version__

    n = bundle.n
    layout = layout_slots(program, vars_)
    stride_in = len(layout)
    out_stride = {"function": 1, "gradient": n, "hessian": n * n}

    statements = _statements(bundle, cfg)
    file_groups = split(statements, cfg)
    stem = _header_stem(cfg.basename)

    # assign chunk numbers: one chunk per run of same-mode statements per file
    chunk_defs = []  # (file_index, chunk_id, mode, [Statement])
    chunks_by_mode: dict[str, list[int]] = {m: [] for m in MODE_ORDER}
    chunk_id = 0
    for fi, group in enumerate(file_groups):
        run: list = []
        run_mode = None
        for st in group:
            if run and st.mode != run_mode:
                chunk_defs.append((fi, chunk_id, run_mode, run))
                chunks_by_mode[run_mode].append(chunk_id)
                chunk_id += 1
                run = []
            run_mode = st.mode
            run.append(st)
        if run:
            chunk_defs.append((fi, chunk_id, run_mode, run))
            chunks_by_mode[run_mode].append(chunk_id)
            chunk_id += 1

    provenance = [
        f"/* generated by acorns-autodiff {__version__}",
        f" * source: {cfg.source_name}" if cfg.source_name else " * source: <in-memory>",
        f" * vars: {' '.join(cfg.var_names) or '-'} (n = {n})",
        f" * simplify: {'on' if cfg.simplified else 'off'}",
        f" * recommended compile flags: {RECOMMENDED_FLAGS}",
        " */",
    ]

    guard = _guard_name(cfg.basename)
    header_lines = list(provenance)
    header_lines += [f"#ifndef {guard}", f"#define {guard}", ""]
    if "function" in cfg.mode:
        header_lines.append("void compute(const double* vals, int num_points, double* out);")
    if "gradient" in cfg.mode:
        header_lines.append("void compute_grad(const double* vals, int num_points, double* ders);")
    if "hessian" in cfg.mode:
        header_lines.append("void compute_hess(const double* vals, int num_points, double* hess);")
    header_lines.append("")
    header_lines.append("/* per-point chunk functions, called in order by the drivers */")
    for _, cid, _, _ in chunk_defs:
        header_lines.append(f"void {stem}_chunk_{cid}(const double* vals, double* out);")
    header_lines += ["", f"#endif /* {guard} */", ""]
    header = "\n".join(header_lines)

    sources = []
    for fi, group in enumerate(file_groups):
        lines = list(provenance)
        lines.append(f'#include "{stem}.h"')
        lines.append("#include <math.h>")
        lines.append("")
        for cfi, cid, mode, run in chunk_defs:
            if cfi != fi:
                continue
            used = frozenset().union(*(st.params for st in run)) if run else frozenset()
            lines.append(f"void {stem}_chunk_{cid}(const double* vals, double* out)")
            lines.append("{")
            decls = _param_decls(program, layout, used)
            if decls:
                lines.extend(decls)
                lines.append("")
            else:
                lines.append("    (void) vals;")
            for st in run:
                lines.append(f"    {st.text}")
            lines.append("}")
            lines.append("")
        if fi == 0:
            for mode in MODE_ORDER:
                if mode not in cfg.mode:
                    continue
                arg = DRIVER_OUT_ARG[mode]
                lines.append(f"void {DRIVER_NAME[mode]}(const double* vals, int num_points, double* {arg})")
                lines.append("{")
                if cfg.parallel:
                    lines.append("#ifdef _OPENMP")
                    lines.append("#pragma omp parallel for")
                    lines.append("#endif")
                lines.append("    for (int p = 0; p < num_points; ++p) {")
                for cid in chunks_by_mode[mode]:
                    lines.append(
                        f"        {stem}_chunk_{cid}(vals + (long)p * {stride_in}, "
                        f"{arg} + (long)p * {out_stride[mode]});"
                    )
                lines.append("    }")
                lines.append("}")
                lines.append("")
        sources.append((f"{stem}_part{fi}.c", "\n".join(lines)))

    return GeneratedArtifact(header, tuple(sources), len(statements))
