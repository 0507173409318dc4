"""Source-to-source differentiation of a C99 subset.

Pipeline: parse -> unroll -> differentiate -> emit C99 kernels for the
function value, gradient, and Hessian.
"""

import sys

__version__ = "0.1.0"

# substituted expressions can nest as deep as the unrolled assignment chain
if sys.getrecursionlimit() < 20000:
    sys.setrecursionlimit(20000)

from .cast import Expr, FunctionIR, to_source  # noqa: E402
from .codegen import EmitConfig, GeneratedArtifact, emit  # noqa: E402
from .derivatives import (  # noqa: E402
    DerivativeBundle,
    VarIndexMap,
    derive_bundle,
    differentiate,
    gradient,
    hessian,
    simplify,
    substitute,
)
from .flatten import (  # noqa: E402
    StraightLineProgram,
    deserialize,
    eval_const,
    serialize,
    unroll,
)
from .interp import eval_expr  # noqa: E402
from .parser import parse_source, validate_subset  # noqa: E402
from .verify import fd_gradient, fd_hessian, verify  # noqa: E402

__all__ = [
    "__version__",
    "Expr", "FunctionIR", "to_source",
    "parse_source", "validate_subset",
    "StraightLineProgram", "unroll", "eval_const", "serialize", "deserialize",
    "VarIndexMap", "DerivativeBundle", "substitute", "differentiate",
    "gradient", "hessian", "simplify", "derive_bundle",
    "EmitConfig", "GeneratedArtifact", "emit",
    "eval_expr", "fd_gradient", "fd_hessian", "verify",
]
