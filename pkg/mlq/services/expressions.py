# mlq/services/expressions.py
"""
Value types and operator semantics shared by the validator, the interpreter and
the plan VM. Static checks work on type names; evaluation works on plain Python
values (int, float, bool, str) and never consults static types, so both
executors agree on every result.
"""
from typing import Optional, Union

import numpy as np

Value = Union[bool, int, float, str]

INT32 = "Int32"
LONG = "Long"
FLOAT = "Float"
DOUBLE = "Double"
BOOLEAN = "Boolean"
STRING = "String"

TYPE_NAMES = (INT32, LONG, FLOAT, DOUBLE, BOOLEAN, STRING)
INTEGER_TYPES = (INT32, LONG)
FLOAT_TYPES = (FLOAT, DOUBLE)
NUMERIC_TYPES = INTEGER_TYPES + FLOAT_TYPES

# widening order inside the numeric family
_RANK = {INT32: 0, LONG: 1, FLOAT: 2, DOUBLE: 3}

ARITHMETIC_OPS = ("+", "-", "*", "/")
EQUALITY_OPS = ("==", "!=")
ORDERING_OPS = ("<", "<=", ">", ">=")
LOGICAL_OPS = ("and", "or")

_INT_BITS = {INT32: 32, LONG: 64}


class ExpressionFault(Exception):
    """Evaluation failed at run time (division by zero, operand of the wrong kind)."""


def is_numeric(type_name: Optional[str]) -> bool:
    return type_name in NUMERIC_TYPES


def family(type_name: str) -> str:
    if type_name in NUMERIC_TYPES:
        return "numeric"
    return type_name


def literal_type(value: Value) -> str:
    if isinstance(value, bool):
        return BOOLEAN
    if isinstance(value, int):
        return INT32 if -2**31 <= value < 2**31 else LONG
    if isinstance(value, float):
        return FLOAT
    return STRING


def can_assign(target: str, source: str) -> bool:
    """True when a `source` value may be stored into a `target` slot without narrowing."""
    if target == source:
        return True
    if target in NUMERIC_TYPES and source in NUMERIC_TYPES:
        return _RANK[source] <= _RANK[target]
    return False


def wider(left: str, right: str) -> str:
    return left if _RANK[left] >= _RANK[right] else right


def binary_type(op: str, left: Optional[str], right: Optional[str]) -> Optional[str]:
    """Result type of `left op right`, or None when the operand types are not allowed."""
    if left is None or right is None:
        return None
    if op == "+" and STRING in (left, right):
        return STRING
    if op in ARITHMETIC_OPS:
        return wider(left, right) if is_numeric(left) and is_numeric(right) else None
    if op in EQUALITY_OPS:
        return BOOLEAN if family(left) == family(right) else None
    if op in ORDERING_OPS:
        return BOOLEAN if is_numeric(left) and is_numeric(right) else None
    if op in LOGICAL_OPS:
        return BOOLEAN if left == BOOLEAN and right == BOOLEAN else None
    return None


def unary_type(op: str, operand: Optional[str]) -> Optional[str]:
    if op == "not":
        return BOOLEAN if operand == BOOLEAN else None
    return operand if is_numeric(operand) else None


def default_value(type_name: str) -> Value:
    if type_name in INTEGER_TYPES:
        return 0
    if type_name in FLOAT_TYPES:
        return 0.0
    if type_name == BOOLEAN:
        return False
    return ""


def _wrap(value: int, bits: int) -> int:
    mask = (1 << bits) - 1
    value &= mask
    return value - (1 << bits) if value >= 1 << (bits - 1) else value


def coerce(value: Value, type_name: str) -> Value:
    """Convert a value for storage into a slot of `type_name`."""
    if type_name in _INT_BITS:
        if isinstance(value, float):
            value = int(value)
        return _wrap(int(value), _INT_BITS[type_name])
    if type_name == FLOAT:
        return float(np.float32(value))
    if type_name == DOUBLE:
        return float(value)
    if type_name == BOOLEAN:
        return bool(value)
    return render(value)


def render(value: Value) -> str:
    """Text form used by print, string concatenation and dataset rows."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _number(value: Value, op: str) -> Union[int, float]:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ExpressionFault(f"operator '{op}' needs numbers, got {render(value)!r}")
    return value


def apply_unary(op: str, value: Value) -> Value:
    if op == "not":
        if not isinstance(value, bool):
            raise ExpressionFault(f"operator 'not' needs a Boolean, got {render(value)!r}")
        return not value
    number = _number(value, op)
    return _wrap(-number, 64) if isinstance(number, int) else -number


def apply_binary(op: str, left: Value, right: Value) -> Value:
    if op == "+" and (isinstance(left, str) or isinstance(right, str)):
        return render(left) + render(right)
    if op in ARITHMETIC_OPS:
        a, b = _number(left, op), _number(right, op)
        if op == "/" and b == 0:
            raise ExpressionFault("division by zero")
        if isinstance(a, int) and isinstance(b, int):
            if op == "/":
                quotient = abs(a) // abs(b)
                result = quotient if (a < 0) == (b < 0) else -quotient
            else:
                result = a + b if op == "+" else a - b if op == "-" else a * b
            return _wrap(result, 64)
        a, b = float(a), float(b)
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        return a / b
    if op in EQUALITY_OPS:
        if isinstance(left, bool) != isinstance(right, bool) or isinstance(left, str) != isinstance(right, str):
            raise ExpressionFault(f"cannot compare {render(left)!r} with {render(right)!r}")
        return (left == right) if op == "==" else (left != right)
    if op in ORDERING_OPS:
        a, b = _number(left, op), _number(right, op)
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        return a >= b
    if op in LOGICAL_OPS:
        if not isinstance(left, bool) or not isinstance(right, bool):
            raise ExpressionFault(f"operator '{op}' needs Booleans")
        return (left and right) if op == "and" else (left or right)
    raise ExpressionFault(f"unknown operator '{op}'")


def truthy(value: Value) -> bool:
    if not isinstance(value, bool):
        raise ExpressionFault(f"condition must be a Boolean, got {render(value)!r}")
    return value
