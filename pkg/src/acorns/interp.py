"""In-process expression evaluation.

Two layers:

* ``eval_expr`` — direct tree-order interpreter, the reference oracle.
* tapes — expressions compiled to a flat instruction list over a register
  file, evaluated for many points at once.  The tape loop is the hot path
  of verification, so it has a compiled backend (``acorns._evalcore``,
  built from Cython) with a pure-Python fallback selected at import.

Both backends execute the identical instruction stream, so their results
are bitwise equal at non-singular points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cast import Binary, Call, Constant, Expr, Unary, Var
from .errors import UnboundSlot
from .flatten import StraightLineProgram

try:
    from . import _evalcore  # compiled extension

    HAVE_NATIVE = True
except ImportError:  # pragma: no cover - depends on build environment
    _evalcore = None
    HAVE_NATIVE = False


def _c_div(a: float, b: float) -> float:
    """IEEE division matching C semantics (no ZeroDivisionError)."""
    if b != 0.0:
        return a / b
    if a != a or a == 0.0:
        return math.nan
    return math.copysign(math.inf, a) * math.copysign(1.0, b)


def _c_log(u: float) -> float:
    if u > 0.0:
        return math.log(u)
    return -math.inf if u == 0.0 else math.nan


def _c_sqrt(u: float) -> float:
    return math.sqrt(u) if u >= 0.0 else math.nan


def _c_pow(a: float, b: float) -> float:
    try:
        return math.pow(a, b)
    except ValueError:
        return math.nan
    except OverflowError:
        return math.copysign(math.inf, a)


_INTRINSIC_FN = {
    "log": _c_log,
    "exp": math.exp,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "sqrt": _c_sqrt,
}


def eval_expr(e: Expr, bindings: dict) -> float:
    """IEEE-754 evaluation in tree order; slots are looked up in `bindings`."""
    memo: dict[int, float] = {}

    def ev(node: Expr) -> float:
        got = memo.get(id(node))
        if got is not None:
            return got
        out = _ev(node)
        memo[id(node)] = out
        return out

    def _ev(node: Expr) -> float:
        if isinstance(node, Constant):
            return node.value
        if isinstance(node, Var):
            try:
                return bindings[node.name]
            except KeyError:
                raise UnboundSlot(node.name) from None
        if isinstance(node, Unary):
            return -ev(node.operand)
        if isinstance(node, Binary):
            a = ev(node.lhs)
            b = ev(node.rhs)
            op = node.op
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "*":
                return a * b
            if op == "/":
                return _c_div(a, b)
            if op == "<":
                return 1.0 if a < b else 0.0
            if op == "<=":
                return 1.0 if a <= b else 0.0
            if op == ">":
                return 1.0 if a > b else 0.0
            if op == ">=":
                return 1.0 if a >= b else 0.0
            if op == "==":
                return 1.0 if a == b else 0.0
            if op == "!=":
                return 1.0 if a != b else 0.0
        if isinstance(node, Call):
            if node.name == "pow":
                return _c_pow(ev(node.args[0]), ev(node.args[1]))
            return _INTRINSIC_FN[node.name](ev(node.args[0]))
        raise TypeError(f"cannot evaluate {node!r}")

    return ev(e)


# ---------------------------------------------------------------------------
# Tape compilation

OP_LOAD_SLOT = 0
OP_LOAD_CONST = 1
OP_ADD = 2
OP_SUB = 3
OP_MUL = 4
OP_DIV = 5
OP_NEG = 6
OP_POW = 7
OP_LOG = 8
OP_EXP = 9
OP_SIN = 10
OP_COS = 11
OP_TAN = 12
OP_SQRT = 13
OP_LT = 14
OP_LE = 15
OP_GT = 16
OP_GE = 17
OP_EQ = 18
OP_NE = 19

_BINOP_CODE = {
    "+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV,
    "<": OP_LT, "<=": OP_LE, ">": OP_GT, ">=": OP_GE, "==": OP_EQ, "!=": OP_NE,
}
_CALL_CODE = {
    "log": OP_LOG, "exp": OP_EXP, "sin": OP_SIN,
    "cos": OP_COS, "tan": OP_TAN, "sqrt": OP_SQRT,
}


@dataclass
class Tape:
    ops: np.ndarray  # (m, 3) int32: opcode, a, b
    consts: np.ndarray  # float64 pool
    out_regs: np.ndarray  # int32, one register per output expression
    slots: tuple  # slot labels; points are laid out in this order

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    @property
    def n_out(self) -> int:
        return len(self.out_regs)


class _TapeBuilder:
    def __init__(self, slots):
        self.slot_index = {label: i for i, label in enumerate(slots)}
        self.slots = tuple(slots)
        self.ops: list[tuple[int, int, int]] = []
        self.consts: list[float] = []
        self.const_index: dict[float, int] = {}
        self.reg_of: dict[int, int] = {}  # id(node) -> register
        self.named: dict[str, int] = {}  # assigned slot name -> register

    def instr(self, op: int, a: int = 0, b: int = 0) -> int:
        self.ops.append((op, a, b))
        return len(self.ops) - 1

    def const_slot(self, value: float) -> int:
        got = self.const_index.get(value)
        if got is None:
            got = len(self.consts)
            self.consts.append(value)
            self.const_index[value] = got
        return got

    def compile(self, e: Expr) -> int:
        got = self.reg_of.get(id(e))
        if got is not None:
            return got
        reg = self._compile(e)
        self.reg_of[id(e)] = reg
        return reg

    def _compile(self, e: Expr) -> int:
        if isinstance(e, Constant):
            return self.instr(OP_LOAD_CONST, self.const_slot(e.value))
        if isinstance(e, Var):
            reg = self.named.get(e.name)
            if reg is not None:
                return reg
            slot = self.slot_index.get(e.name)
            if slot is None:
                raise UnboundSlot(e.name)
            return self.instr(OP_LOAD_SLOT, slot)
        if isinstance(e, Unary):
            return self.instr(OP_NEG, self.compile(e.operand))
        if isinstance(e, Binary):
            a = self.compile(e.lhs)
            b = self.compile(e.rhs)
            return self.instr(_BINOP_CODE[e.op], a, b)
        if isinstance(e, Call):
            if e.name == "pow":
                a = self.compile(e.args[0])
                b = self.compile(e.args[1])
                return self.instr(OP_POW, a, b)
            return self.instr(_CALL_CODE[e.name], self.compile(e.args[0]))
        raise TypeError(f"cannot compile {e!r}")

    def finish(self, out_regs) -> Tape:
        ops = np.asarray(self.ops, dtype=np.int32).reshape(-1, 3)
        return Tape(
            ops=np.ascontiguousarray(ops),
            consts=np.asarray(self.consts, dtype=np.float64),
            out_regs=np.asarray(out_regs, dtype=np.int32),
            slots=self.slots,
        )


def compile_exprs(exprs, slots) -> Tape:
    """Compile expressions over input-slot labels into one shared tape."""
    b = _TapeBuilder(slots)
    out_regs = [b.compile(e) for e in exprs]
    return b.finish(out_regs)


def compile_program(p: StraightLineProgram) -> Tape:
    """Compile a straight-line program; the single output is the energy."""
    b = _TapeBuilder(p.input_labels())
    for a in p.assigns:
        b.named[a.target] = b.compile(a.rhs)
    try:
        out = b.named[p.output]
    except KeyError:
        raise UnboundSlot(p.output) from None
    return b.finish([out])


def eval_tape_python(ops, consts, out_regs, points, out):
    """Pure-Python tape executor; same instruction semantics as the extension."""
    fns = (
        None, None,
        lambda a, b: a + b,
        lambda a, b: a - b,
        lambda a, b: a * b,
        _c_div,
        None,
        _c_pow,
        _c_log, math.exp, math.sin, math.cos, math.tan, _c_sqrt,
        lambda a, b: 1.0 if a < b else 0.0,
        lambda a, b: 1.0 if a <= b else 0.0,
        lambda a, b: 1.0 if a > b else 0.0,
        lambda a, b: 1.0 if a >= b else 0.0,
        lambda a, b: 1.0 if a == b else 0.0,
        lambda a, b: 1.0 if a != b else 0.0,
    )
    n_ops = len(ops)
    regs = [0.0] * n_ops
    op_list = [tuple(row) for row in ops.tolist()]
    for p in range(points.shape[0]):
        row = points[p]
        for k, (op, a, b) in enumerate(op_list):
            if op == OP_LOAD_SLOT:
                regs[k] = row[a]
            elif op == OP_LOAD_CONST:
                regs[k] = consts[a]
            elif op == OP_NEG:
                regs[k] = -regs[a]
            elif op in (OP_EXP, OP_SIN, OP_COS, OP_TAN, OP_LOG, OP_SQRT):
                regs[k] = fns[op](regs[a])
            else:
                regs[k] = fns[op](regs[a], regs[b])
        for j, r in enumerate(out_regs):
            out[p, j] = regs[r]
    return out


def evaluate(tape: Tape, points, backend: str | None = None) -> np.ndarray:
    """Evaluate a tape at many points.

    `points` is (num_points, n_slots); returns (num_points, n_out).
    `backend` forces "native" or "python"; default prefers the extension.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points.reshape(1, -1)
    if points.shape[1] != tape.n_slots:
        raise ValueError(f"expected {tape.n_slots} slots per point, got {points.shape[1]}")
    out = np.empty((points.shape[0], tape.n_out), dtype=np.float64)
    if backend is None:
        backend = "native" if HAVE_NATIVE else "python"
    if backend == "native":
        if not HAVE_NATIVE:
            raise RuntimeError("compiled evaluation backend is not available")
        _evalcore.eval_tape(tape.ops, tape.consts, tape.out_regs, points, out)
    elif backend == "python":
        eval_tape_python(tape.ops, tape.consts, tape.out_regs, points, out)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return out
