"""Truncated Taylor arithmetic.

Two number types live here:

* :class:`Jet` -- value, gradient and Hessian of a function of ``n``
  variables (order-2 truncation). Every component is a numpy array, so a
  single Jet carries a whole lattice of evaluation points at once.
* :class:`Taylor` -- univariate truncated Taylor series of arbitrary order,
  used for profile curves where third derivatives are needed.

The module-level functions (``sin``, ``sqrt``, ...) dispatch on the argument
type, so user-supplied maps can be written once and evaluated on floats,
arrays, Jets or Taylor series.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


class Jet:
    """Order-2 jet ``(val, grad, hess)`` of a scalar function of n variables.

    Shapes: ``val`` is ``S``, ``grad`` is ``S + (n,)``, ``hess`` is
    ``S + (n, n)`` for an arbitrary batch shape ``S``.
    """

    __slots__ = ("val", "grad", "hess")
    __array_priority__ = 1000

    def __init__(self, val, grad, hess):
        self.val = _as_array(val)
        self.grad = _as_array(grad)
        self.hess = _as_array(hess)

    @property
    def nvars(self) -> int:
        return self.grad.shape[-1]

    @classmethod
    def variables(cls, points: np.ndarray) -> list["Jet"]:
        """Seed jets for the coordinates of ``points`` (shape ``S + (n,)``)."""
        points = _as_array(points)
        n = points.shape[-1]
        batch = points.shape[:-1]
        out = []
        for i in range(n):
            grad = np.zeros(batch + (n,))
            grad[..., i] = 1.0
            out.append(cls(points[..., i], grad, np.zeros(batch + (n, n))))
        return out

    def _lift(self, other) -> "Jet":
        if isinstance(other, Jet):
            return other
        val = _as_array(other)
        n = self.nvars
        shape = np.broadcast_shapes(val.shape, self.val.shape)
        return Jet(
            np.broadcast_to(val, shape),
            np.zeros(shape + (n,)),
            np.zeros(shape + (n, n)),
        )

    def apply(self, f0, f1, f2) -> "Jet":
        """Chain rule for a scalar function with derivatives f0, f1, f2 at val."""
        g = self.grad
        hess = (
            f1[..., None, None] * self.hess
            + f2[..., None, None] * g[..., :, None] * g[..., None, :]
        )
        return Jet(f0, f1[..., None] * g, hess)

    def __neg__(self):
        return Jet(-self.val, -self.grad, -self.hess)

    def __pos__(self):
        return self

    def __add__(self, other):
        other = self._lift(other)
        return Jet(self.val + other.val, self.grad + other.grad, self.hess + other.hess)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = _as_array(other)
            return Jet(self.val * c, self.grad * c[..., None], self.hess * c[..., None, None])
        a, b = self, other
        ga, gb = a.grad, b.grad
        outer = ga[..., :, None] * gb[..., None, :]
        hess = (
            a.val[..., None, None] * b.hess
            + b.val[..., None, None] * a.hess
            + outer
            + np.swapaxes(outer, -1, -2)
        )
        return Jet(a.val * b.val, a.val[..., None] * gb + b.val[..., None] * ga, hess)

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        v = self.val
        return self.apply(1.0 / v, -1.0 / v**2, 2.0 / v**3)

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / _as_array(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(log(self) * p)
        p = float(p)
        if p == 2.0:
            return self * self
        v = self.val
        return self.apply(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))

    def __repr__(self) -> str:
        return f"Jet(val={self.val!r}, grad={self.grad!r}, hess={self.hess!r})"

    # elementary functions
    def sqrt(self):
        r = np.sqrt(self.val)
        return self.apply(r, 0.5 / r, -0.25 / (r * self.val))

    def exp(self):
        e = np.exp(self.val)
        return self.apply(e, e, e)

    def log(self):
        v = self.val
        return self.apply(np.log(v), 1.0 / v, -1.0 / v**2)

    def sin(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self.apply(s, c, -s)

    def cos(self):
        s, c = np.sin(self.val), np.cos(self.val)
        return self.apply(c, -s, -c)

    def tan(self):
        t = np.tan(self.val)
        sec2 = 1.0 + t * t
        return self.apply(t, sec2, 2.0 * t * sec2)

    def sinh(self):
        s, c = np.sinh(self.val), np.cosh(self.val)
        return self.apply(s, c, s)

    def cosh(self):
        s, c = np.sinh(self.val), np.cosh(self.val)
        return self.apply(c, s, c)

    def tanh(self):
        t = np.tanh(self.val)
        d = 1.0 - t * t
        return self.apply(t, d, -2.0 * t * d)

    def arctan(self):
        v = self.val
        d = 1.0 / (1.0 + v * v)
        return self.apply(np.arctan(v), d, -2.0 * v * d * d)


class Taylor:
    """Univariate truncated Taylor series ``sum_k c[k] * eps**k``.

    ``c[k]`` is ``f^(k)(s0) / k!``; the coefficient array has shape
    ``(order + 1,) + S``.
    """

    __slots__ = ("c",)
    __array_priority__ = 1000

    def __init__(self, coeffs):
        self.c = _as_array(coeffs)

    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    @classmethod
    def variable(cls, s, order: int) -> "Taylor":
        s = _as_array(s)
        c = np.zeros((order + 1,) + s.shape)
        c[0] = s
        if order >= 1:
            c[1] = 1.0
        return cls(c)

    @classmethod
    def constant(cls, value, order: int) -> "Taylor":
        value = _as_array(value)
        c = np.zeros((order + 1,) + value.shape)
        c[0] = value
        return cls(c)

    @property
    def val(self) -> np.ndarray:
        return self.c[0]

    def derivative(self, k: int) -> np.ndarray:
        """k-th derivative at the expansion point."""
        return self.c[k] * math.factorial(k)

    def _lift(self, other) -> "Taylor":
        if isinstance(other, Taylor):
            return other
        val = _as_array(other)
        shape = np.broadcast_shapes(val.shape, self.val.shape)
        return Taylor.constant(np.broadcast_to(val, shape), self.order)

    def __neg__(self):
        return Taylor(-self.c)

    def __pos__(self):
        return self

    def __add__(self, other):
        other = self._lift(other)
        return Taylor(self.c + other.c)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Taylor):
            return Taylor(self.c * _as_array(other))
        a, b = self.c, other.c
        k = min(self.order, other.order)
        out = np.zeros((k + 1,) + np.broadcast_shapes(a.shape[1:], b.shape[1:]))
        for n in range(k + 1):
            for j in range(n + 1):
                out[n] = out[n] + a[j] * b[n - j]
        return Taylor(out)

    __rmul__ = __mul__

    def _compose(self, derivs: Sequence[np.ndarray]) -> "Taylor":
        # f(c0 + d) = sum_k f^(k)(c0)/k! d^k with d having zero constant term
        d = Taylor(self.c.copy())
        d.c[0] = 0.0
        out = np.zeros_like(self.c)
        out[0] = derivs[0]
        power = Taylor.constant(np.ones_like(self.c[0]), self.order)
        for k in range(1, self.order + 1):
            power = power * d
            out = out + (derivs[k] / math.factorial(k)) * power.c
        return Taylor(out)

    def __pow__(self, p):
        p = float(p)
        v = self.c[0]
        derivs = []
        coef = 1.0
        for k in range(self.order + 1):
            derivs.append(coef * v ** (p - k))
            coef *= p - k
        return self._compose(derivs)

    def reciprocal(self):
        return self ** -1.0

    def __truediv__(self, other):
        if not isinstance(other, Taylor):
            return self * (1.0 / _as_array(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def sqrt(self):
        return self**0.5

    def exp(self):
        e = np.exp(self.c[0])
        return self._compose([e] * (self.order + 1))

    def log(self):
        v = self.c[0]
        derivs = [np.log(v)]
        for k in range(1, self.order + 1):
            derivs.append((-1) ** (k - 1) * math.factorial(k - 1) / v**k)
        return self._compose(derivs)

    def sin(self):
        s, c = np.sin(self.c[0]), np.cos(self.c[0])
        cycle = [s, c, -s, -c]
        return self._compose([cycle[k % 4] for k in range(self.order + 1)])

    def cos(self):
        s, c = np.sin(self.c[0]), np.cos(self.c[0])
        cycle = [c, -s, -c, s]
        return self._compose([cycle[k % 4] for k in range(self.order + 1)])

    def tan(self):
        return self.sin() / self.cos()

    def sinh(self):
        s, c = np.sinh(self.c[0]), np.cosh(self.c[0])
        return self._compose([s if k % 2 == 0 else c for k in range(self.order + 1)])

    def cosh(self):
        s, c = np.sinh(self.c[0]), np.cosh(self.c[0])
        return self._compose([c if k % 2 == 0 else s for k in range(self.order + 1)])

    def tanh(self):
        return self.sinh() / self.cosh()

    def arctan(self):
        # integrate u' / (1 + u^2) term by term
        k = np.arange(1, self.order + 1).reshape((-1,) + (1,) * (self.c.ndim - 1))
        du = Taylor(np.concatenate([self.c[1:] * k, np.zeros_like(self.c[:1])]))
        q = du / (1.0 + self * self)
        out = np.zeros_like(self.c)
        out[0] = np.arctan(self.c[0])
        for k in range(1, self.order + 1):
            out[k] = q.c[k - 1] / k
        return Taylor(out)

    def __repr__(self) -> str:
        return f"Taylor({self.c!r})"


def _dispatch(name: str, npfunc: Callable) -> Callable:
    def f(x):
        if isinstance(x, (Jet, Taylor)):
            return getattr(x, name)()
        return npfunc(x)

    f.__name__ = name
    f.__doc__ = f"{name} for floats, arrays, Jets and Taylor series."
    return f


sqrt = _dispatch("sqrt", np.sqrt)
exp = _dispatch("exp", np.exp)
log = _dispatch("log", np.log)
sin = _dispatch("sin", np.sin)
cos = _dispatch("cos", np.cos)
tan = _dispatch("tan", np.tan)
sinh = _dispatch("sinh", np.sinh)
cosh = _dispatch("cosh", np.cosh)
tanh = _dispatch("tanh", np.tanh)
arctan = _dispatch("arctan", np.arctan)


def value(x) -> np.ndarray:
    """Plain value of a number-like object."""
    if isinstance(x, Jet):
        return x.val
    if isinstance(x, Taylor):
        return x.c[0]
    return _as_array(x)
