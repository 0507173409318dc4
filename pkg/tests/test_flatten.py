import re
import struct

import pytest
from hypothesis import given, strategies as st

from acorns.cast import Binary, Constant, Var, const
from acorns.errors import BoundExplosion, FormatError, NotConstant
from acorns.flatten import (
    StraightLineProgram,
    SlpAssign,
    InputSlot,
    deserialize,
    dump_text,
    eval_const,
    pretty_assign,
    serialize,
    unroll,
)
from acorns.parser import parse_expr, parse_source
from acorns.verify import CROSS_ENTROPY_SRC


def _parse(src, func="f", energy="e"):
    return parse_source(src, func, energy)


# --- eval_const --------------------------------------------------------------


def test_eval_const_arithmetic():
    assert eval_const(parse_expr("2*3+1"), {}) == 7


def test_eval_const_comparison():
    assert eval_const(parse_expr("i < 2"), {"i": 1}) is True
    assert eval_const(parse_expr("i < 2"), {"i": 2}) is False


def test_eval_const_unbound():
    with pytest.raises(NotConstant):
        eval_const(parse_expr("j"), {})


def test_eval_const_rejects_float_literal():
    with pytest.raises(NotConstant):
        eval_const(parse_expr("1.5 + 1"), {})


def test_eval_const_truncating_division():
    assert eval_const(parse_expr("7/2"), {}) == 3
    assert eval_const(parse_expr("0 - 7/2"), {}) == -3  # C truncates toward zero


@given(st.integers(-50, 50), st.integers(-50, 50), st.sampled_from(["+", "-", "*"]))
def test_eval_const_matches_python(a, b, op):
    e = Binary(op, const(float(a), str(a)), const(float(b), str(b)))
    expected = {"+": a + b, "-": a - b, "*": a * b}[op]
    assert eval_const(e, {}) == expected


# --- unroll ------------------------------------------------------------------


def test_cross_entropy_unrolls_to_four_assignments():
    ir = parse_source(CROSS_ENTROPY_SRC, "cross_entropy", "loss")
    p = unroll(ir)
    body = p.body_assigns
    assert len(body) == 4
    expected = [
        "loss = loss - b[0][0] * log(a[0][0] + 0.00001);",
        "loss = loss - b[0][1] * log(a[0][1] + 0.00001);",
        "loss = loss - b[1][0] * log(a[1][0] + 0.00001);",
        "loss = loss - b[1][1] * log(a[1][1] + 0.00001);",
    ]
    assert [pretty_assign(a) for a in body] == expected
    # 2x2 row-major inference for the extent-less ** parameters
    assert [s.label for s in p.inputs] == [
        "a[0][0]", "a[0][1]", "a[1][0]", "a[1][1]",
        "b[0][0]", "b[0][1]", "b[1][0]", "b[1][1]",
    ]


def test_empty_iteration_space():
    src = """
    double f(double x) {
        double e = 0;
        for (int i = 0; i < 0; i++) { e = e + x; }
        return 0;
    }
    """
    p = unroll(_parse(src))
    assert len(p.body_assigns) == 0


def test_nested_2x3_loop_counter_substitution():
    src = """
    double f(double x) {
        double e = 0;
        for (int i = 0; i < 2; i++) {
            for (int j = 0; j < 3; j++) { e = e + i * 10 + j + x; }
        }
        return 0;
    }
    """
    p = unroll(_parse(src))
    body = p.body_assigns
    assert len(body) == 6
    pairs = []
    for a in body:
        m = re.search(r"\+ (\d+) \* 10 \+ (\d+) \+ x", pretty_assign(a))
        pairs.append((int(m.group(1)), int(m.group(2))))
    assert pairs == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]


def test_monotone_flattening():
    src = """
    double f(double x) {
        double e = 0;
        for (int i = 0; i < 3; i++) {
            e = e + x;
            for (int j = 0; j < 4; j++) { e = e * x; }
        }
        e = e + 1;
        return 0;
    }
    """
    p = unroll(_parse(src))
    # 3*1 + 3*4 + 1 body assignments
    assert len(p.body_assigns) == 3 + 12 + 1


def test_conditional_elimination():
    src = """
    double f(double x) {
        double e = 0;
        for (int i = 0; i < 3; i++) {
            if (i == 1) { e = e + x; } else { e = e - x; }
        }
        return 0;
    }
    """
    p = unroll(_parse(src))
    texts = [pretty_assign(a) for a in p.body_assigns]
    assert texts == ["e = e - x;", "e = e + x;", "e = e - x;"]


def test_downward_loop_and_step():
    src = """
    double f(double x) {
        double e = 0;
        for (int i = 6; i > 0; i -= 2) { e = e + i * x; }
        return 0;
    }
    """
    p = unroll(_parse(src))
    texts = [pretty_assign(a) for a in p.body_assigns]
    assert texts == ["e = e + 6 * x;", "e = e + 4 * x;", "e = e + 2 * x;"]


def test_bound_explosion():
    src = """
    double f(double x) {
        double e = 0;
        for (int i = 0; i < 1000; i++) { e = e + x; }
        return 0;
    }
    """
    with pytest.raises(BoundExplosion):
        unroll(_parse(src), cap=100)


def test_local_array_slots():
    src = """
    double f(double x) {
        double t[2];
        t[0] = x * x;
        t[1] = t[0] + 1;
        double e = t[1];
        return 0;
    }
    """
    p = unroll(_parse(src))
    assert [a.display for a in p.assigns] == ["t[0]", "t[1]", "e"]


def test_unroll_idempotent_on_straight_line_ir():
    src = "double f(double x){ double e = x * x; e = e + 1; return 0; }"
    ir = _parse(src)
    p1 = unroll(ir)
    # a straight-line IR unrolls to the same assignment structure
    assert [a.display for a in p1.assigns] == ["e", "e"]
    assert [a.rhs for a in p1.assigns][0] == Binary("*", Var("x"), Var("x"))


# --- serialization -----------------------------------------------------------


def test_round_trip_cross_entropy():
    ir = parse_source(CROSS_ENTROPY_SRC, "cross_entropy", "loss")
    p = unroll(ir)
    assert deserialize(serialize(p)) == p


def test_round_trip_empty_program():
    p = StraightLineProgram(
        (InputSlot("x", (), "x"),),
        (SlpAssign("e@1", "e", Var("x"), True),),
        "e@1",
    )
    assert deserialize(serialize(p)) == p


def test_large_program_reserializes_byte_identically():
    assigns = []
    prev = "x"
    for k in range(100_000):
        target = f"e@{k + 1}"
        assigns.append(SlpAssign(target, "e", Binary("+", Var(prev), Constant("1", 1.0))))
        prev = target
    p = StraightLineProgram((InputSlot("x", (), "x"),), tuple(assigns), prev)
    data = serialize(p)
    p2 = deserialize(data)
    assert serialize(p2) == data


def test_magic_and_version_checked():
    ir = parse_source(CROSS_ENTROPY_SRC, "cross_entropy", "loss")
    data = serialize(unroll(ir))
    with pytest.raises(FormatError):
        deserialize(b"XXXX" + data[4:])
    bad_version = data[:4] + struct.pack("<I", 99) + data[8:]
    with pytest.raises(FormatError):
        deserialize(bad_version)
    with pytest.raises(FormatError):
        deserialize(data[:-3])


def test_constant_text_survives_round_trip():
    src = "double f(double x){ double e = x + 0.00001; return 0; }"
    p = unroll(_parse(src))
    p2 = deserialize(serialize(p))
    assert "0.00001" in dump_text(p2)
