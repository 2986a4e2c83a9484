"""Tiny expression language for variable tail exponents ``a_i(x)``.

Allowed syntax: numbers, ``r`` (the radius ``|x|``), ``x1 .. xd`` (coordinates),
``+ - * /``, ``min(...)``, ``max(...)``, ``abs(...)`` and
``smooth(v0, v1, r0, r1)`` which moves from ``v0`` (for ``|x| <= r0``) to ``v1``
(for ``|x| >= r1``) along a C^1 cubic in the radius.

Every expression also carries interval bounds, used for the lower/upper
bounds of the exponent over all of R^d.  Bounds are exact for the
expressions that only involve constants, ``smooth`` and ``min``/``max``;
anything touching raw coordinates gets conservative (possibly infinite)
bounds.
"""
import ast
import math

import numpy as np

_FUNCS = {"min", "max", "abs", "smooth"}


class ExpressionError(ValueError):
    pass


def _smoothstep(r, r0, r1):
    s = np.clip((r - r0) / (r1 - r0), 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


class Coefficient:
    """A parsed exponent ``a(x)``; call it on an ``(N, d)`` array."""

    def __init__(self, text, dimension):
        self.text = str(text).strip()
        self.dimension = int(dimension)
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse coefficient {self.text!r}") from exc
        self._tree = tree.body
        self._check(self._tree)
        self.lower, self.upper = self._bounds(self._tree)

    @classmethod
    def constant(cls, value, dimension):
        return cls(repr(float(value)), dimension)

    def __repr__(self):
        return f"Coefficient({self.text!r})"

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = self._eval(self._tree, x)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape[:-1]).copy()

    @property
    def radii(self):
        """Transition radii of every ``smooth`` call (where ``a`` is not C^2)."""
        out = set()
        for node in ast.walk(self._tree):
            if isinstance(node, ast.Call) and node.func.id == "smooth":
                out.update(float(a.value) for a in node.args[2:])
        return tuple(sorted(out))

    @property
    def is_constant(self):
        return self.lower == self.upper

    # -- validation -----------------------------------------------------
    def _check(self, node):
        if isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
                raise ExpressionError(f"bad literal in {self.text!r}")
        elif isinstance(node, ast.Name):
            if node.id == "r":
                return
            if node.id.startswith("x") and node.id[1:].isdigit():
                k = int(node.id[1:])
                if not 1 <= k <= self.dimension:
                    raise ExpressionError(f"coordinate {node.id} out of range in {self.text!r}")
                return
            raise ExpressionError(f"unknown name {node.id!r} in {self.text!r}")
        elif isinstance(node, ast.BinOp):
            if not isinstance(node.op, (ast.Add, ast.Sub, ast.Mult, ast.Div)):
                raise ExpressionError(f"operator not allowed in {self.text!r}")
            self._check(node.left)
            self._check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ExpressionError(f"operator not allowed in {self.text!r}")
            self._check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS or node.keywords:
                raise ExpressionError(f"function not allowed in {self.text!r}")
            name = node.func.id
            if name == "smooth":
                if len(node.args) != 4:
                    raise ExpressionError("smooth takes (v0, v1, r0, r1)")
                for a in node.args[2:]:
                    if not isinstance(a, ast.Constant):
                        raise ExpressionError("smooth radii must be numbers")
                if not 0 <= node.args[2].value < node.args[3].value:
                    raise ExpressionError("smooth needs 0 <= r0 < r1")
            elif name == "abs" and len(node.args) != 1:
                raise ExpressionError("abs takes one argument")
            elif len(node.args) < 1:
                raise ExpressionError(f"{name} needs arguments")
            for a in node.args:
                self._check(a)
        else:
            raise ExpressionError(f"unsupported syntax in {self.text!r}")

    # -- evaluation -----------------------------------------------------
    def _eval(self, node, x):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id == "r":
                return np.sqrt(np.sum(x * x, axis=-1))
            return x[..., int(node.id[1:]) - 1]
        if isinstance(node, ast.UnaryOp):
            v = self._eval(node.operand, x)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            a = self._eval(node.left, x)
            b = self._eval(node.right, x)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            return a / b
        name = node.func.id
        if name == "smooth":
            v0 = self._eval(node.args[0], x)
            v1 = self._eval(node.args[1], x)
            r = np.sqrt(np.sum(x * x, axis=-1))
            s = _smoothstep(r, node.args[2].value, node.args[3].value)
            return v0 + (v1 - v0) * s
        vals = [self._eval(a, x) for a in node.args]
        if name == "abs":
            return np.abs(vals[0])
        fn = np.minimum if name == "min" else np.maximum
        out = vals[0]
        for v in vals[1:]:
            out = fn(out, v)
        return out

    # -- interval bounds ------------------------------------------------
    def _bounds(self, node):
        if isinstance(node, ast.Constant):
            v = float(node.value)
            return v, v
        if isinstance(node, ast.Name):
            if node.id == "r":
                return 0.0, math.inf
            return -math.inf, math.inf
        if isinstance(node, ast.UnaryOp):
            lo, hi = self._bounds(node.operand)
            return (-hi, -lo) if isinstance(node.op, ast.USub) else (lo, hi)
        if isinstance(node, ast.BinOp):
            a0, a1 = self._bounds(node.left)
            b0, b1 = self._bounds(node.right)
            if isinstance(node.op, ast.Add):
                return a0 + b0, a1 + b1
            if isinstance(node.op, ast.Sub):
                return a0 - b1, a1 - b0
            if isinstance(node.op, ast.Div):
                if b0 <= 0 <= b1:
                    return -math.inf, math.inf
                b0, b1 = 1.0 / b1, 1.0 / b0
            with np.errstate(invalid="ignore"):
                c = [a0 * b0, a0 * b1, a1 * b0, a1 * b1]
            c = [v for v in c if not math.isnan(v)] or [-math.inf, math.inf]
            return min(c), max(c)
        name = node.func.id
        if name == "smooth":
            l0, h0 = self._bounds(node.args[0])
            l1, h1 = self._bounds(node.args[1])
            return min(l0, l1), max(h0, h1)
        bs = [self._bounds(a) for a in node.args]
        if name == "abs":
            lo, hi = bs[0]
            if lo >= 0:
                return lo, hi
            if hi <= 0:
                return -hi, -lo
            return 0.0, max(-lo, hi)
        if name == "min":
            return min(b[0] for b in bs), min(b[1] for b in bs)
        return max(b[0] for b in bs), max(b[1] for b in bs)

    def limit_at_infinity(self):
        """Value once every ``smooth`` has saturated, or None when the
        expression depends on the coordinates in another way."""
        return self._far(self._tree)

    def _far(self, node):
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            return None
        if isinstance(node, ast.UnaryOp):
            v = self._far(node.operand)
            if v is None:
                return None
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            a = self._far(node.left)
            b = self._far(node.right)
            if a is None or b is None:
                return None
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            return a / b if b != 0 else None
        name = node.func.id
        if name == "smooth":
            return self._far(node.args[1])
        vs = [self._far(a) for a in node.args]
        if any(v is None for v in vs):
            return None
        if name == "abs":
            return abs(vs[0])
        return min(vs) if name == "min" else max(vs)
