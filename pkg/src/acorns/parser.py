"""Recursive-descent front end for the supported C99 subset.

The grammar covers what the differentiation pipeline can consume:
functions over double scalars/arrays, variable declarations, plain and
compound assignments, constant-bound for loops, compile-time-evaluable
conditionals, and calls to the math intrinsics in `cast.INTRINSICS`.
Everything else is rejected with a precise source span.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .cast import (
    INTRINSICS,
    ArrayRef,
    Assignment,
    Binary,
    Call,
    Constant,
    Declaration,
    Expr,
    ForLoop,
    FunctionIR,
    If,
    Param,
    Return,
    Stmt,
    Unary,
    Var,
    const,
)
from .errors import (
    MissingEnergyVar,
    MissingFunction,
    ParseError,
    SourceSpan,
    UnsupportedConstruct,
)

_KEYWORDS = {
    "double", "int", "float", "void", "const", "for", "if", "else", "return",
    "while", "do", "switch", "case", "break", "continue", "goto", "static",
    "struct", "union", "enum", "unsigned", "signed", "long", "short", "char",
    "sizeof", "typedef", "extern", "volatile",
}

_UNSUPPORTED_KEYWORDS = {
    "while": "while loop",
    "do": "do-while loop",
    "switch": "switch statement",
    "goto": "goto",
    "break": "break",
    "continue": "continue",
    "struct": "struct",
    "union": "union",
    "enum": "enum",
    "sizeof": "sizeof",
    "typedef": "typedef",
    "unsigned": "unsigned type",
    "signed": "signed type",
    "long": "long type",
    "short": "short type",
    "char": "char type",
    "static": "storage-class specifier",
    "extern": "storage-class specifier",
    "volatile": "volatile qualifier",
}

_NUMBER_RE = re.compile(
    r"(?:\d+\.\d*|\.\d+)(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?"
)
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_PUNCT = (
    "<=", ">=", "==", "!=", "+=", "-=", "*=", "/=", "++", "--", "&&", "||",
    "+", "-", "*", "/", "%", "<", ">", "=", "(", ")", "[", "]", "{", "}",
    ";", ",", "!", "&", "|", "?", ":", ".",
)


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "number", "keyword", or the punctuation itself
    text: str
    span: SourceSpan


@dataclass(frozen=True)
class Violation:
    span: SourceSpan
    reason: str


def tokenize(source: str) -> list[Token]:
    tokens = []
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            j = source.find("\n", i)
            i = n if j < 0 else j
            continue
        if source.startswith("/*", i):
            j = source.find("*/", i + 2)
            if j < 0:
                raise ParseError(SourceSpan(line, col, 2), "unterminated comment")
            chunk = source[i:j + 2]
            nl = chunk.count("\n")
            if nl:
                line += nl
                col = len(chunk) - chunk.rfind("\n")
            else:
                col += len(chunk)
            i = j + 2
            continue
        if c == "#":
            raise ParseError(
                SourceSpan(line, col, 1),
                "preprocessor directives are not supported; preprocess the input first",
            )
        span_start = SourceSpan(line, col, 1)
        m = _NUMBER_RE.match(source, i)
        if m and (c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit())):
            text = m.group()
            tokens.append(Token("number", text, SourceSpan(line, col, len(text))))
            i = m.end()
            col += len(text)
            continue
        m = _IDENT_RE.match(source, i)
        if m:
            text = m.group()
            kind = "keyword" if text in _KEYWORDS else "ident"
            tokens.append(Token(kind, text, SourceSpan(line, col, len(text))))
            i = m.end()
            col += len(text)
            continue
        for p in _PUNCT:
            if source.startswith(p, i):
                tokens.append(Token(p, p, SourceSpan(line, col, len(p))))
                i += len(p)
                col += len(p)
                break
        else:
            raise ParseError(span_start, f"unexpected character {c!r}")
    tokens.append(Token("eof", "", SourceSpan(line, col, 0)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # -- token helpers -----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def accept(self, kind: str) -> Token | None:
        if self.peek().kind == kind:
            return self.next()
        return None

    def expect(self, kind: str, what: str | None = None) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            shown = what or f"'{kind}'"
            raise ParseError(tok.span, f"expected {shown}, got {tok.text or 'end of input'!r}")
        return self.next()

    def expect_keyword(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind != "keyword" or tok.text != word:
            raise ParseError(tok.span, f"expected '{word}', got {tok.text or 'end of input'!r}")
        return self.next()

    def reject_unsupported(self, tok: Token):
        if tok.kind == "keyword" and tok.text in _UNSUPPORTED_KEYWORDS:
            raise UnsupportedConstruct(tok.span, _UNSUPPORTED_KEYWORDS[tok.text])

    # -- declarations ------------------------------------------------------

    def type_specifier(self) -> str:
        while self.peek().kind == "keyword" and self.peek().text == "const":
            self.next()
        tok = self.peek()
        self.reject_unsupported(tok)
        if tok.kind == "keyword" and tok.text in ("double", "int", "void", "float"):
            if tok.text == "float":
                raise UnsupportedConstruct(tok.span, "float type (use double)")
            self.next()
            while self.peek().kind == "keyword" and self.peek().text == "const":
                self.next()
            return tok.text
        raise ParseError(tok.span, f"expected type specifier, got {tok.text!r}")

    def param(self) -> Param:
        self.type_specifier()
        rank = 0
        while self.accept("*"):
            rank += 1
            while self.peek().kind == "keyword" and self.peek().text == "const":
                self.next()
        name = self.expect("ident", "parameter name").text
        extents: list[int | None] = [None] * rank
        while self.accept("["):
            if self.peek().kind == "number":
                tok = self.next()
                if "." in tok.text or "e" in tok.text or "E" in tok.text:
                    raise ParseError(tok.span, "array extent must be an integer literal")
                extents.append(int(tok.text))
            else:
                extents.append(None)
            self.expect("]")
            rank += 1
        return Param(name, rank, tuple(extents))

    def function(self) -> tuple[str, list[Param], list[Stmt], SourceSpan]:
        self.type_specifier()
        name_tok = self.expect("ident", "function name")
        self.expect("(")
        params = []
        if self.peek().kind != ")":
            if not (self.peek().kind == "keyword" and self.peek().text == "void" and self.peek(1).kind == ")"):
                params.append(self.param())
                while self.accept(","):
                    params.append(self.param())
            else:
                self.next()
        self.expect(")")
        if self.accept(";"):  # prototype: skip
            return name_tok.text, params, None, name_tok.span
        body = self.compound()
        return name_tok.text, params, body, name_tok.span

    # -- statements ----------------------------------------------------------

    def compound(self) -> list[Stmt]:
        self.expect("{")
        body: list[Stmt] = []
        while not self.accept("}"):
            if self.peek().kind == "eof":
                raise ParseError(self.peek().span, "unexpected end of input inside block")
            body.extend(self.statement())
        return body

    def statement(self) -> list[Stmt]:
        tok = self.peek()
        self.reject_unsupported(tok)
        if tok.kind == "keyword":
            if tok.text in ("double", "int", "const"):
                return self.declaration()
            if tok.text == "for":
                return [self.for_loop()]
            if tok.text == "if":
                return [self.if_stmt()]
            if tok.text == "return":
                self.next()
                value = None if self.peek().kind == ";" else self.expr()
                self.expect(";")
                return [Return(value, span=tok.span)]
            if tok.text == "float":
                raise UnsupportedConstruct(tok.span, "float type (use double)")
            raise ParseError(tok.span, f"unexpected keyword {tok.text!r}")
        if tok.kind == "{":
            return self.compound()
        if tok.kind == ";":
            self.next()
            return []
        return [self.assignment_stmt()]

    def declaration(self) -> list[Stmt]:
        elem_type = self.type_specifier()
        if elem_type == "void":
            raise ParseError(self.peek().span, "cannot declare a void variable")
        decls = []
        while True:
            if self.peek().kind == "*":
                raise UnsupportedConstruct(self.peek().span, "local pointer declaration")
            name_tok = self.expect("ident", "variable name")
            extents = []
            while self.accept("["):
                extents.append(self.expr())
                self.expect("]")
            init = None
            if self.accept("="):
                if self.peek().kind == "{":
                    raise UnsupportedConstruct(self.peek().span, "brace initializer")
                init = self.expr()
            decls.append(Declaration(name_tok.text, elem_type, tuple(extents), init, span=name_tok.span))
            if not self.accept(","):
                break
        self.expect(";")
        return decls

    def assignment_stmt(self) -> Stmt:
        stmt = self.assignment_core()
        self.expect(";")
        return stmt

    def assignment_core(self) -> Stmt:
        lv = self.postfix()
        if not isinstance(lv, (Var, ArrayRef)):
            raise ParseError(self.peek().span, "assignment target must be a variable or array element")
        tok = self.next()
        if tok.kind == "=":
            return Assignment(lv, self.expr(), span=tok.span)
        if tok.kind in ("+=", "-=", "*="):
            rhs = self.expr()
            return Assignment(lv, Binary(tok.kind[0], lv, rhs, span=tok.span), span=tok.span)
        if tok.kind == "/=":
            rhs = self.expr()
            return Assignment(lv, Binary("/", lv, rhs, span=tok.span), span=tok.span)
        if tok.kind in ("++", "--"):
            op = tok.kind[0]
            return Assignment(lv, Binary(op, lv, const(1.0, "1"), span=tok.span), span=tok.span)
        raise ParseError(tok.span, f"expected assignment operator, got {tok.text!r}")

    def for_loop(self) -> Stmt:
        for_tok = self.expect_keyword("for")
        self.expect("(")
        kw = self.peek()
        if not (kw.kind == "keyword" and kw.text == "int"):
            raise UnsupportedConstruct(kw.span, "for loop without `int` counter declaration")
        self.next()
        counter_tok = self.expect("ident", "loop counter name")
        self.expect("=")
        init = self.expr()
        self.expect(";")
        cond = self.expr()
        if not (isinstance(cond, Binary) and cond.op in ("<", "<=", ">", ">=", "!=")):
            raise UnsupportedConstruct(for_tok.span, "loop condition must compare the counter against a bound")
        self.expect(";")
        update = self.for_update(counter_tok.text)
        self.expect(")")
        body = self.statement()
        if not body:
            raise ParseError(for_tok.span, "loop body is empty")
        return ForLoop(counter_tok.text, init, cond, update, tuple(body), span=for_tok.span)

    def for_update(self, counter: str) -> Expr:
        name_tok = self.expect("ident", "loop counter in update")
        if name_tok.text != counter:
            raise ParseError(name_tok.span, f"loop update must modify the counter {counter!r}")
        tok = self.next()
        cvar = Var(counter, span=name_tok.span)
        if tok.kind == "++":
            return Binary("+", cvar, const(1.0, "1"), span=tok.span)
        if tok.kind == "--":
            return Binary("-", cvar, const(1.0, "1"), span=tok.span)
        if tok.kind in ("+=", "-="):
            return Binary(tok.kind[0], cvar, self.expr(), span=tok.span)
        if tok.kind == "=":
            return self.expr()
        raise UnsupportedConstruct(tok.span, f"loop update form {tok.text!r}")

    def if_stmt(self) -> Stmt:
        if_tok = self.expect_keyword("if")
        self.expect("(")
        cond = self.expr()
        self.expect(")")
        then_body = self.statement()
        else_body: list[Stmt] = []
        if self.peek().kind == "keyword" and self.peek().text == "else":
            self.next()
            else_body = self.statement()
        return If(cond, tuple(then_body), tuple(else_body), span=if_tok.span)

    # -- expressions -------------------------------------------------------

    def expr(self) -> Expr:
        return self.equality()

    def _left_assoc(self, sub, ops) -> Expr:
        e = sub()
        while self.peek().kind in ops:
            tok = self.next()
            e = Binary(tok.kind, e, sub(), span=tok.span)
        return e

    def equality(self) -> Expr:
        return self._left_assoc(self.relational, ("==", "!="))

    def relational(self) -> Expr:
        return self._left_assoc(self.additive, ("<", "<=", ">", ">="))

    def additive(self) -> Expr:
        return self._left_assoc(self.multiplicative, ("+", "-"))

    def multiplicative(self) -> Expr:
        tok = self.peek()
        if tok.kind == "%":
            raise UnsupportedConstruct(tok.span, "modulo operator")
        return self._left_assoc(self.unary, ("*", "/"))

    def unary(self) -> Expr:
        tok = self.peek()
        if tok.kind == "-":
            self.next()
            return Unary("-", self.unary(), span=tok.span)
        if tok.kind == "+":
            self.next()
            return self.unary()
        if tok.kind in ("!", "&", "*", "++", "--"):
            raise UnsupportedConstruct(tok.span, f"unary operator {tok.text!r}")
        return self.postfix()

    def postfix(self) -> Expr:
        tok = self.peek()
        if tok.kind == "number":
            self.next()
            return Constant(tok.text, float(tok.text), span=tok.span)
        if tok.kind == "(":
            self.next()
            e = self.expr()
            self.expect(")")
            return self.index_suffix(e)
        self.reject_unsupported(tok)
        if tok.kind != "ident":
            raise ParseError(tok.span, f"expected expression, got {tok.text or 'end of input'!r}")
        self.next()
        if self.peek().kind == "(":
            arity = INTRINSICS.get(tok.text)
            if arity is None:
                raise UnsupportedConstruct(tok.span, f"call to non-intrinsic function {tok.text!r}")
            self.next()
            args = [self.expr()]
            while self.accept(","):
                args.append(self.expr())
            close = self.expect(")")
            if len(args) != arity:
                raise ParseError(close.span, f"{tok.text} expects {arity} argument(s), got {len(args)}")
            return Call(tok.text, tuple(args), span=tok.span)
        return self.index_suffix(Var(tok.text, span=tok.span))

    def index_suffix(self, e: Expr) -> Expr:
        indices = []
        while self.peek().kind == "[":
            self.next()
            indices.append(self.expr())
            self.expect("]")
        if not indices:
            return e
        if not isinstance(e, Var):
            raise UnsupportedConstruct(self.peek().span, "indexing a non-identifier expression")
        return ArrayRef(e.name, tuple(indices), span=e.span)


# ---------------------------------------------------------------------------
# Public entry points


def parse_source(source_text: str, func_name: str, energy_var: str) -> FunctionIR:
    """Parse one function out of a translation unit into FunctionIR."""
    parser = _Parser(tokenize(source_text))
    found = None
    while parser.peek().kind != "eof":
        name, params, body, span = parser.function()
        if name == func_name and body is not None:
            found = (params, body, span)
    if found is None:
        raise MissingFunction(func_name)
    params, body, span = found
    ir = FunctionIR(func_name, tuple(params), energy_var, tuple(body))
    _check_scopes(ir)
    if not _defines_energy(ir.body, energy_var):
        raise MissingEnergyVar(energy_var)
    return ir


def _defines_energy(stmts, energy_var: str) -> bool:
    for s in stmts:
        if isinstance(s, Declaration) and s.name == energy_var:
            return True
        if isinstance(s, Assignment):
            lv = s.lvalue
            if isinstance(lv, Var) and lv.name == energy_var:
                return True
            if isinstance(lv, ArrayRef) and lv.base == energy_var:
                return True
        if isinstance(s, ForLoop) and _defines_energy(s.body, energy_var):
            return True
        if isinstance(s, If) and (
            _defines_energy(s.then_body, energy_var) or _defines_energy(s.else_body, energy_var)
        ):
            return True
    return False


def _check_scopes(ir: FunctionIR):
    """Every identifier must be a parameter, loop counter, or prior local."""

    def check_expr(e: Expr, scope: set):
        if isinstance(e, Var):
            if e.name not in scope:
                raise ParseError(e.span or SourceSpan(1, 1), f"use of undeclared identifier {e.name!r}")
        elif isinstance(e, ArrayRef):
            if e.base not in scope:
                raise ParseError(e.span or SourceSpan(1, 1), f"use of undeclared identifier {e.base!r}")
            for ix in e.indices:
                check_expr(ix, scope)
        elif isinstance(e, Unary):
            check_expr(e.operand, scope)
        elif isinstance(e, Binary):
            check_expr(e.lhs, scope)
            check_expr(e.rhs, scope)
        elif isinstance(e, Call):
            for a in e.args:
                check_expr(a, scope)

    def check_block(stmts, scope: set):
        scope = set(scope)
        for s in stmts:
            if isinstance(s, Declaration):
                for ext in s.extents:
                    check_expr(ext, scope)
                if s.init is not None:
                    check_expr(s.init, scope)
                scope.add(s.name)
            elif isinstance(s, Assignment):
                check_expr(s.lvalue, scope)
                check_expr(s.rhs, scope)
            elif isinstance(s, ForLoop):
                check_expr(s.init, scope)
                inner = scope | {s.counter}
                check_expr(s.cond, inner)
                check_expr(s.update, inner)
                check_block(s.body, inner)
            elif isinstance(s, If):
                check_expr(s.cond, scope)
                check_block(s.then_body, scope)
                check_block(s.else_body, scope)
            elif isinstance(s, Return) and s.value is not None:
                check_expr(s.value, scope)

    check_block(ir.body, {p.name for p in ir.params})


def parse_expr(text: str) -> Expr:
    """Parse a standalone expression (used by tests and the round-trip check)."""
    parser = _Parser(tokenize(text))
    e = parser.expr()
    parser.expect("eof", "end of expression")
    return e


def _is_integer_literal(c: Constant) -> bool:
    return not any(ch in c.text for ch in ".eE")


def _const_evaluable(e: Expr, allowed: set) -> bool:
    if isinstance(e, Constant):
        return _is_integer_literal(e)
    if isinstance(e, Var):
        return e.name in allowed
    if isinstance(e, (Unary, Binary)):
        kids = [e.operand] if isinstance(e, Unary) else [e.lhs, e.rhs]
        return all(_const_evaluable(k, allowed) for k in kids)
    return False  # array refs and intrinsic calls are never compile-time


def validate_subset(ir: FunctionIR) -> list[Violation]:
    """Check that all control flow is resolvable at transform time."""
    violations: list[Violation] = []

    def walk(stmts, allowed: set):
        allowed = set(allowed)
        for s in stmts:
            if isinstance(s, Declaration):
                for ext in s.extents:
                    if not _const_evaluable(ext, allowed):
                        violations.append(Violation(s.span or SourceSpan(1, 1), f"non-constant array extent for {s.name!r}"))
                if s.elem_type == "int" and s.init is not None and _const_evaluable(s.init, allowed):
                    allowed.add(s.name)
            elif isinstance(s, ForLoop):
                here = s.span or SourceSpan(1, 1)
                if not _const_evaluable(s.init, allowed):
                    violations.append(Violation(here, "non-constant loop start"))
                inner = allowed | {s.counter}
                if not _const_evaluable(s.cond, inner):
                    violations.append(Violation(here, "non-constant loop bound"))
                if not _const_evaluable(s.update, inner):
                    violations.append(Violation(here, "non-constant loop step"))
                walk(s.body, inner)
            elif isinstance(s, If):
                if not _const_evaluable(s.cond, allowed):
                    violations.append(Violation(s.span or SourceSpan(1, 1), "variable conditional"))
                walk(s.then_body, allowed)
                walk(s.else_body, allowed)

    walk(ir.body, set())
    return violations
