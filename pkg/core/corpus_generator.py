"""
Corpus Generator - Deterministic synthetic (method source, summary) pairs.

Every example is built as a syntax tree first, printed to source, and described by a template
keyed on the method's archetype, so the summary is always recoverable from the code.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .minilang import SyntaxNode, render_method

SIZE_CLASSES = ("small", "medium")

_INT_NAMES = ("a", "b", "x", "y", "n", "m", "value", "count", "left", "right", "first",
              "second", "total", "limit", "size", "width", "height", "index")
_BOOL_NAMES = ("p", "q", "flag", "ready", "valid", "enabled", "done", "active")
_CALLEES = ("print", "log", "emit", "send", "record", "notify")
_TRACE_CALLEES = ("trace", "debug", "audit")


@dataclass(frozen=True)
class GeneratedExample:
    source: str
    summary: List[str]
    template: str
    syntax: SyntaxNode


# Syntax helpers

def _ident(name: str) -> SyntaxNode:
    return SyntaxNode("Identifier", name)


def _int(value: int) -> SyntaxNode:
    return SyntaxNode("IntLiteral", str(value))


def _bin(op: str, left: SyntaxNode, right: SyntaxNode) -> SyntaxNode:
    return SyntaxNode("BinaryOp", op, [left, right])


def _ret(expr: Optional[SyntaxNode] = None) -> SyntaxNode:
    return SyntaxNode("Return", None, [expr] if expr is not None else [])


def _decl(type_name: str, name: str, init: SyntaxNode) -> SyntaxNode:
    return SyntaxNode("VarDecl", None, [SyntaxNode("TypeName", type_name), _ident(name), init])


def _assign(name: str, expr: SyntaxNode) -> SyntaxNode:
    return SyntaxNode("Assign", None, [_ident(name), expr])


def _block(*statements: SyntaxNode) -> SyntaxNode:
    return SyntaxNode("Block", None, list(statements))


def _if(condition: SyntaxNode, then: SyntaxNode, otherwise: Optional[SyntaxNode] = None) -> SyntaxNode:
    children = [condition, then] + ([otherwise] if otherwise is not None else [])
    return SyntaxNode("If", None, children)


def _while(condition: SyntaxNode, body: SyntaxNode) -> SyntaxNode:
    return SyntaxNode("While", None, [condition, body])


def _call_stmt(callee: str, *args: SyntaxNode) -> SyntaxNode:
    return SyntaxNode("ExprStmt", None, [SyntaxNode("Call", callee, list(args))])


def _method(return_type: str, name: str, params: Sequence[Tuple[str, str]],
            statements: Sequence[SyntaxNode]) -> SyntaxNode:
    children = [SyntaxNode("TypeName", return_type)]
    for type_name, param in params:
        children.append(SyntaxNode("Parameter", None, [SyntaxNode("TypeName", type_name), _ident(param)]))
    children.append(_block(*statements))
    return SyntaxNode("MethodDeclaration", name, children)


# Archetypes: (rng) -> (method syntax, summary text)
Archetype = Callable[[random.Random], Tuple[SyntaxNode, str]]


def _two_ints(rng: random.Random) -> Tuple[str, str]:
    first, second = rng.sample(_INT_NAMES, 2)
    return first, second


def _binary_archetype(names: Sequence[str], op: str, phrase: str) -> Archetype:
    def build(rng: random.Random) -> Tuple[SyntaxNode, str]:
        a, b = _two_ints(rng)
        method = _method("int", rng.choice(names), [("int", a), ("int", b)],
                         [_ret(_bin(op, _ident(a), _ident(b)))])
        return method, phrase.format(a=a, b=b)
    return build


def _unary_int_archetype(names: Sequence[str], make: Callable[[str], SyntaxNode], phrase: str,
                         return_type: str = "int") -> Archetype:
    def build(rng: random.Random) -> Tuple[SyntaxNode, str]:
        x = rng.choice(_INT_NAMES)
        method = _method(return_type, rng.choice(names), [("int", x)], [_ret(make(x))])
        return method, phrase.format(x=x)
    return build


def _bool_pair_archetype(names: Sequence[str], op: str, phrase: str) -> Archetype:
    def build(rng: random.Random) -> Tuple[SyntaxNode, str]:
        p, q = rng.sample(_BOOL_NAMES, 2)
        method = _method("bool", rng.choice(names), [("bool", p), ("bool", q)],
                         [_ret(_bin(op, _ident(p), _ident(q)))])
        return method, phrase.format(p=p, q=q)
    return build


def _average(rng: random.Random) -> Tuple[SyntaxNode, str]:
    a, b = _two_ints(rng)
    body = _ret(_bin("/", _bin("+", _ident(a), _ident(b)), _int(2)))
    return (_method("int", rng.choice(("average", "mean", "midpoint")), [("int", a), ("int", b)], [body]),
            f"returns the average of {a} and {b}")


def _extremum(largest: bool) -> Archetype:
    def build(rng: random.Random) -> Tuple[SyntaxNode, str]:
        a, b = _two_ints(rng)
        op = ">" if largest else "<"
        names = ("max", "larger", "greatest") if largest else ("min", "smaller", "least")
        body = _if(_bin(op, _ident(a), _ident(b)), _block(_ret(_ident(a))), _block(_ret(_ident(b))))
        word = "maximum" if largest else "minimum"
        return _method("int", rng.choice(names), [("int", a), ("int", b)], [body]), \
            f"returns the {word} of {a} and {b}"
    return build


def _absolute(rng: random.Random) -> Tuple[SyntaxNode, str]:
    x = rng.choice(_INT_NAMES)
    statements = [
        _if(_bin("<", _ident(x), _int(0)), _block(_ret(SyntaxNode("UnaryOp", "-", [_ident(x)])))),
        _ret(_ident(x)),
    ]
    return _method("int", rng.choice(("abs", "magnitude")), [("int", x)], statements), \
        f"returns the absolute value of {x}"


def _not_flag(rng: random.Random) -> Tuple[SyntaxNode, str]:
    p = rng.choice(_BOOL_NAMES)
    return _method("bool", rng.choice(("negate", "invert", "flip")), [("bool", p)],
                   [_ret(SyntaxNode("UnaryOp", "!", [_ident(p)]))]), \
        f"returns the logical negation of {p}"


def _in_range(rng: random.Random) -> Tuple[SyntaxNode, str]:
    x, lo, hi = rng.sample(_INT_NAMES, 3)
    condition = _bin("&&", _bin(">=", _ident(x), _ident(lo)), _bin("<=", _ident(x), _ident(hi)))
    return _method("bool", rng.choice(("inRange", "between", "within")),
                   [("int", x), ("int", lo), ("int", hi)], [_ret(condition)]), \
        f"checks whether {x} lies between {lo} and {hi}"


def _clamp(rng: random.Random) -> Tuple[SyntaxNode, str]:
    x, lo, hi = rng.sample(_INT_NAMES, 3)
    statements = [
        _if(_bin("<", _ident(x), _ident(lo)), _block(_ret(_ident(lo)))),
        _if(_bin(">", _ident(x), _ident(hi)), _block(_ret(_ident(hi)))),
        _ret(_ident(x)),
    ]
    return _method("int", rng.choice(("clamp", "bound", "limitTo")),
                   [("int", x), ("int", lo), ("int", hi)], statements), \
        f"clamps {x} between {lo} and {hi}"


def _sign(rng: random.Random) -> Tuple[SyntaxNode, str]:
    x = rng.choice(_INT_NAMES)
    statements = [
        _if(_bin(">", _ident(x), _int(0)), _block(_ret(_int(1)))),
        _if(_bin("<", _ident(x), _int(0)), _block(_ret(SyntaxNode("UnaryOp", "-", [_int(1)])))),
        _ret(_int(0)),
    ]
    return _method("int", rng.choice(("sign", "signum")), [("int", x)], statements), \
        f"returns the sign of {x}"


def _forward_call(rng: random.Random) -> Tuple[SyntaxNode, str]:
    x = rng.choice(_INT_NAMES)
    callee = rng.choice(_CALLEES)
    return _method("void", rng.choice(("handle", "process", "dispatch")), [("int", x)],
                   [_call_stmt(callee, _ident(x))]), \
        f"calls {callee} with {x}"


def _sum_below(rng: random.Random) -> Tuple[SyntaxNode, str]:
    n = rng.choice(_INT_NAMES)
    statements = [
        _decl("int", "acc", _int(0)),
        _decl("int", "i", _int(0)),
        _while(_bin("<", _ident("i"), _ident(n)), _block(
            _assign("acc", _bin("+", _ident("acc"), _ident("i"))),
            _assign("i", _bin("+", _ident("i"), _int(1))),
        )),
        _ret(_ident("acc")),
    ]
    return _method("int", rng.choice(("sumBelow", "triangle", "accumulate")), [("int", n)], statements), \
        f"computes the sum of all integers below {n}"


def _factorial(rng: random.Random) -> Tuple[SyntaxNode, str]:
    n = rng.choice(_INT_NAMES)
    statements = [
        _decl("int", "result", _int(1)),
        _while(_bin(">", _ident(n), _int(1)), _block(
            _assign("result", _bin("*", _ident("result"), _ident(n))),
            _assign(n, _bin("-", _ident(n), _int(1))),
        )),
        _ret(_ident("result")),
    ]
    return _method("int", rng.choice(("factorial", "fact")), [("int", n)], statements), \
        f"computes the factorial of {n}"


def _power(rng: random.Random) -> Tuple[SyntaxNode, str]:
    base, exponent = _two_ints(rng)
    statements = [
        _decl("int", "result", _int(1)),
        _decl("int", "i", _int(0)),
        _while(_bin("<", _ident("i"), _ident(exponent)), _block(
            _assign("result", _bin("*", _ident("result"), _ident(base))),
            _assign("i", _bin("+", _ident("i"), _int(1))),
        )),
        _ret(_ident("result")),
    ]
    return _method("int", rng.choice(("pow", "power", "raise")), [("int", base), ("int", exponent)],
                   statements), \
        f"computes {base} raised to the power {exponent}"


def _gcd(rng: random.Random) -> Tuple[SyntaxNode, str]:
    a, b = _two_ints(rng)
    statements = [
        _while(_bin("!=", _ident(b), _int(0)), _block(
            _decl("int", "tmp", _ident(b)),
            _assign(b, _bin("%", _ident(a), _ident(b))),
            _assign(a, _ident("tmp")),
        )),
        _ret(_ident(a)),
    ]
    return _method("int", rng.choice(("gcd", "commonDivisor")), [("int", a), ("int", b)], statements), \
        f"computes the greatest common divisor of {a} and {b}"


def _count_digits(rng: random.Random) -> Tuple[SyntaxNode, str]:
    x = rng.choice(_INT_NAMES)
    statements = [
        _decl("int", "digits", _int(0)),
        _while(_bin(">", _ident(x), _int(0)), _block(
            _assign(x, _bin("/", _ident(x), _int(10))),
            _assign("digits", _bin("+", _ident("digits"), _int(1))),
        )),
        _ret(_ident("digits")),
    ]
    return _method("int", rng.choice(("digitCount", "countDigits")), [("int", x)], statements), \
        f"counts the decimal digits of {x}"


def _repeat_call(rng: random.Random) -> Tuple[SyntaxNode, str]:
    n = rng.choice(_INT_NAMES)
    callee = rng.choice(_CALLEES)
    statements = [
        _decl("int", "i", _int(0)),
        _while(_bin("<", _ident("i"), _ident(n)), _block(
            _call_stmt(callee, _ident("i")),
            _assign("i", _bin("+", _ident("i"), _int(1))),
        )),
    ]
    return _method("void", rng.choice(("repeat", "loop", "runTimes")), [("int", n)], statements), \
        f"calls {callee} once for each index below {n}"


SMALL_ARCHETYPES: Dict[str, Archetype] = {
    "sum": _binary_archetype(("add", "sum", "plus"), "+", "returns the sum of {a} and {b}"),
    "difference": _binary_archetype(("subtract", "diff", "minus"), "-", "returns the difference of {a} and {b}"),
    "product": _binary_archetype(("multiply", "times", "product"), "*", "returns the product of {a} and {b}"),
    "quotient": _binary_archetype(("divide", "quotient"), "/", "returns {a} divided by {b}"),
    "remainder": _binary_archetype(("mod", "remainder"), "%", "returns the remainder of {a} divided by {b}"),
    "average": _average,
    "square": _unary_int_archetype(("square", "sq"), lambda x: _bin("*", _ident(x), _ident(x)),
                                   "returns the square of {x}"),
    "double": _unary_int_archetype(("twice", "double"), lambda x: _bin("*", _ident(x), _int(2)),
                                   "returns twice the value of {x}"),
    "increment": _unary_int_archetype(("inc", "next", "successor"), lambda x: _bin("+", _ident(x), _int(1)),
                                      "returns {x} plus one"),
    "decrement": _unary_int_archetype(("dec", "prev", "predecessor"), lambda x: _bin("-", _ident(x), _int(1)),
                                      "returns {x} minus one"),
    "negate": _unary_int_archetype(("negate", "opposite"), lambda x: SyntaxNode("UnaryOp", "-", [_ident(x)]),
                                   "returns the negation of {x}"),
    "maximum": _extremum(True),
    "minimum": _extremum(False),
    "absolute": _absolute,
    "is_even": _unary_int_archetype(("isEven", "even"),
                                    lambda x: _bin("==", _bin("%", _ident(x), _int(2)), _int(0)),
                                    "checks whether {x} is even", "bool"),
    "is_odd": _unary_int_archetype(("isOdd", "odd"),
                                   lambda x: _bin("!=", _bin("%", _ident(x), _int(2)), _int(0)),
                                   "checks whether {x} is odd", "bool"),
    "is_positive": _unary_int_archetype(("isPositive", "positive"), lambda x: _bin(">", _ident(x), _int(0)),
                                        "checks whether {x} is positive", "bool"),
    "is_negative": _unary_int_archetype(("isNegative", "negative"), lambda x: _bin("<", _ident(x), _int(0)),
                                        "checks whether {x} is negative", "bool"),
    "is_zero": _unary_int_archetype(("isZero", "zero"), lambda x: _bin("==", _ident(x), _int(0)),
                                    "checks whether {x} is zero", "bool"),
    "equals": _binary_archetype(("same", "equal"), "==", "checks whether {a} equals {b}"),
    "both": _bool_pair_archetype(("both", "all", "conjunction"), "&&",
                                 "returns true if both {p} and {q} are true"),
    "either": _bool_pair_archetype(("either", "any", "disjunction"), "||",
                                   "returns true if either {p} or {q} is true"),
    "not_flag": _not_flag,
    "in_range": _in_range,
    "clamp": _clamp,
    "sign": _sign,
    "forward_call": _forward_call,
}

LOOP_ARCHETYPES: Dict[str, Archetype] = {
    "sum_below": _sum_below,
    "factorial": _factorial,
    "power": _power,
    "gcd": _gcd,
    "count_digits": _count_digits,
    "repeat_call": _repeat_call,
}

# "equals" returns bool although built by the int helper
_BOOL_RETURNING = {"equals"}


def generate_sample(seed: int, size_class: str = "small") -> GeneratedExample:
    """Full generator output, including the template name and the internal syntax tree."""
    if size_class not in SIZE_CLASSES:
        raise ValueError(f"size_class must be one of {SIZE_CLASSES}, got {size_class!r}")
    rng = random.Random(seed * len(SIZE_CLASSES) + SIZE_CLASSES.index(size_class))
    if size_class == "small":
        pool = SMALL_ARCHETYPES
    else:
        pool = {**SMALL_ARCHETYPES, **LOOP_ARCHETYPES}
    template = rng.choice(sorted(pool))
    method, summary = pool[template](rng)
    if template in _BOOL_RETURNING:
        method.children[0].value = "bool"
    if size_class == "medium" and rng.random() < 0.5:
        # Leading trace call; it never changes the summary
        first_param = method.children[1].children[1].value if len(method.children) > 2 else None
        args = [_ident(first_param)] if first_param else []
        method.children[-1].children.insert(0, _call_stmt(rng.choice(_TRACE_CALLEES), *args))
    return GeneratedExample(render_method(method), summary.split(), template, method)


def generate_example(seed: int, size_class: str = "small") -> Tuple[str, List[str]]:
    """Deterministic (source, summary tokens) pair for `seed`."""
    sample = generate_sample(seed, size_class)
    return sample.source, sample.summary
