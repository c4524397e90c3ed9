from .formula import (
    FALSE,
    MAX_ALPHABET,
    TRUE,
    Always,
    And,
    Atom,
    Eventually,
    FalseF,
    Formula,
    Next,
    Not,
    Or,
    Release,
    TrueF,
    Until,
    eval_prop,
    mk_and,
    mk_not,
    mk_or,
    negate,
    simplify,
    subformulas,
    to_nnf,
)
from .parser import LTLError, LTLSyntaxError, UnknownProposition, parse
from .progression import progress, progress_trace
from .semantics import LassoFamily, LassoWord, holds_on_lasso, letter

__all__ = [
    "FALSE",
    "MAX_ALPHABET",
    "TRUE",
    "Always",
    "And",
    "Atom",
    "Eventually",
    "FalseF",
    "Formula",
    "LTLError",
    "LTLSyntaxError",
    "LassoFamily",
    "LassoWord",
    "Next",
    "Not",
    "Or",
    "Release",
    "TrueF",
    "UnknownProposition",
    "Until",
    "eval_prop",
    "holds_on_lasso",
    "letter",
    "mk_and",
    "mk_not",
    "mk_or",
    "negate",
    "parse",
    "progress",
    "progress_trace",
    "simplify",
    "subformulas",
    "to_nnf",
]
