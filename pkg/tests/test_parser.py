import pytest
from hypothesis import given, strategies as st

from acorns.cast import (
    ArrayRef,
    Assignment,
    Binary,
    Call,
    Constant,
    Declaration,
    ForLoop,
    Unary,
    Var,
    to_source,
)
from acorns.errors import MissingEnergyVar, MissingFunction, ParseError, UnsupportedConstruct
from acorns.parser import parse_expr, parse_source, validate_subset
from acorns.verify import CROSS_ENTROPY_SRC, FUNCTION_0_SRC


def test_function_0_listing():
    ir = parse_source(FUNCTION_0_SRC, "function_0", "energy")
    assert [p.name for p in ir.params] == ["x"]
    assert ir.params[0].rank == 0
    decls = [s for s in ir.body if isinstance(s, Declaration)]
    assert len(decls) == 1
    init = decls[0].init
    # pow(x, 4) - 3*pow(x, 3) + 2
    assert init == Binary(
        "+",
        Binary(
            "-",
            Call("pow", (Var("x"), Constant("4", 4.0))),
            Binary("*", Constant("3", 3.0), Call("pow", (Var("x"), Constant("3", 3.0)))),
        ),
        Constant("2", 2.0),
    )


def test_identity_body():
    ir = parse_source("double f(double x){ double e = x; return 0; }", "f", "e")
    assert len(ir.body) == 2
    decl = ir.body[0]
    assert isinstance(decl, Declaration)
    assert decl.init == Var("x")


def test_cross_entropy_listing():
    ir = parse_source(CROSS_ENTROPY_SRC, "cross_entropy", "loss")
    assert [(p.name, p.rank) for p in ir.params] == [("a", 2), ("b", 2)]
    decls = [s for s in ir.body if isinstance(s, Declaration)]
    assert len(decls) == 1
    loops = [s for s in ir.body if isinstance(s, ForLoop)]
    assert len(loops) == 1
    (inner,) = loops[0].body
    assert isinstance(inner, ForLoop)
    (assign,) = inner.body
    assert isinstance(assign, Assignment)
    assert assign.lvalue == Var("loss")


def test_array_param_declared_extents():
    ir = parse_source("double f(const double x[2][3]){ double e = x[0][0]; return 0; }", "f", "e")
    assert ir.params[0].rank == 2
    assert ir.params[0].extents == (2, 3)


def test_compound_assignment_desugars():
    ir = parse_source("double f(double x){ double e = 0; e += x; e *= 2; return 0; }", "f", "e")
    a1, a2 = ir.body[1], ir.body[2]
    assert a1.rhs == Binary("+", Var("e"), Var("x"))
    assert a2.rhs == Binary("*", Var("e"), Constant("2", 2.0))


def test_constant_text_preserved():
    ir = parse_source("double f(double x){ double e = x * 0.00001; return 0; }", "f", "e")
    rhs = ir.body[0].init
    assert rhs.rhs.text == "0.00001"
    assert rhs.rhs.value == 0.00001


@pytest.mark.parametrize(
    "source,construct",
    [
        ("double f(double x){ double e = x; while (1) { e = e; } return 0; }", "while"),
        ("double f(double x){ double e = g(x); return 0; }", "non-intrinsic"),
        ("double f(double x){ double e = x; switch (1) {} return 0; }", "switch"),
        ("double f(double x){ double e = !x; return 0; }", "'!'"),
        ("float f(double x){ double e = x; return 0; }", "float"),
    ],
)
def test_unsupported_constructs(source, construct):
    with pytest.raises(UnsupportedConstruct) as exc:
        parse_source(source, "f", "e")
    assert construct.strip("'") in str(exc.value)


def test_missing_function():
    with pytest.raises(MissingFunction):
        parse_source("double f(double x){ double e = x; return 0; }", "g", "e")


def test_missing_energy_var():
    with pytest.raises(MissingEnergyVar):
        parse_source("double f(double x){ double e = x; return 0; }", "f", "energy")


def test_undeclared_identifier():
    with pytest.raises(ParseError) as exc:
        parse_source("double f(double x){ double e = y; return 0; }", "f", "e")
    assert "y" in str(exc.value)


def test_syntax_error_has_span():
    src = "double f(double x){\n    double e = x +;\n    return 0;\n}"
    with pytest.raises(ParseError) as exc:
        parse_source(src, "f", "e")
    span = exc.value.span
    assert span.line == 2
    # the span points inside the input text
    lines = src.split("\n")
    assert 1 <= span.column <= len(lines[span.line - 1]) + 1


def test_intrinsic_arity_checked():
    with pytest.raises(ParseError):
        parse_source("double f(double x){ double e = pow(x); return 0; }", "f", "e")
    with pytest.raises(ParseError):
        parse_source("double f(double x){ double e = sin(x, x); return 0; }", "f", "e")


def test_parse_determinism():
    ir1 = parse_source(CROSS_ENTROPY_SRC, "cross_entropy", "loss")
    ir2 = parse_source(CROSS_ENTROPY_SRC, "cross_entropy", "loss")
    assert ir1 == ir2


# --- validate_subset ---------------------------------------------------------


def test_validate_cross_entropy_clean():
    ir = parse_source(CROSS_ENTROPY_SRC, "cross_entropy", "loss")
    assert validate_subset(ir) == []


def test_validate_runtime_bound():
    src = """
    double f(double n) {
        double e = 0;
        for (int i = 0; i < n; i++) { e = e + 1; }
        return 0;
    }
    """
    ir = parse_source(src, "f", "e")
    (v,) = validate_subset(ir)
    assert "bound" in v.reason


def test_validate_variable_conditional():
    src = "double f(double x){ double e = 0; if (x > 0) { e = x; } return 0; }"
    ir = parse_source(src, "f", "e")
    (v,) = validate_subset(ir)
    assert "variable conditional" in v.reason


def test_validate_counter_bounds_ok():
    src = """
    double f(double x) {
        double e = 0;
        int n = 3;
        for (int i = 0; i < n; i++) {
            for (int j = 0; j < i + 1; j++) { e = e + x; }
            if (i == 1) { e = e * 2; }
        }
        return 0;
    }
    """
    ir = parse_source(src, "f", "e")
    assert validate_subset(ir) == []


# --- expression round-trip ---------------------------------------------------

_names = st.sampled_from(["x", "y", "z0"])
_leaves = st.one_of(
    _names.map(Var),
    st.floats(min_value=0.0, max_value=100.0, allow_nan=False).map(
        lambda v: Constant(repr(v), v)
    ),
    st.integers(min_value=0, max_value=50).map(lambda v: Constant(str(v), float(v))),
    st.tuples(_names, st.integers(0, 3), st.integers(0, 3)).map(
        lambda t: ArrayRef(t[0], (Constant(str(t[1]), float(t[1])), Constant(str(t[2]), float(t[2]))))
    ),
)


def _compound(children):
    ops = st.sampled_from(["+", "-", "*", "/", "<", "<=", ">", ">=", "==", "!="])
    return st.one_of(
        st.tuples(ops, children, children).map(lambda t: Binary(t[0], t[1], t[2])),
        children.map(lambda e: Unary("-", e)),
        st.tuples(st.sampled_from(["log", "exp", "sin", "cos", "tan", "sqrt"]), children).map(
            lambda t: Call(t[0], (t[1],))
        ),
        st.tuples(children, children).map(lambda t: Call("pow", t)),
    )


_exprs = st.recursive(_leaves, _compound, max_leaves=25)


@given(_exprs)
def test_print_parse_round_trip(e):
    assert parse_expr(to_source(e)) == e
