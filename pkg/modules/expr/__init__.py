from modules.expr.errors import (
    ExprError,
    ExprSyntaxError,
    UnknownIdentifierError,
    ExprEvaluationError,
    UnsupportedDerivativeError,
)
from modules.expr.nodes import Expr, Num, Var, Neg, BinOp, Call
from modules.expr.parser import parse, derivative, compile_formula


def eval_expr(e, x, t=0.0):
    return e.evaluate(x, t)
