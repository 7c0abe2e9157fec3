"""First-order dual numbers for forward-mode differentiation.

A :class:`Dual` carries a value and a single directional derivative; both may
be floats or numpy arrays (elementwise), so one dual evaluation differentiates
an integrand simultaneously at many grid points.  The module-level math
functions (:func:`sin`, :func:`exp`, ...) dispatch on their argument and are
the ones expression-compiled integrands call, which is what makes those
integrands transparently differentiable.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Dual", "sin", "cos", "exp", "log", "sqrt", "fabs", "value_of", "derivative_of"]


class Dual:
    __slots__ = ("val", "dot")

    # make numpy defer to the reflected operators instead of building
    # object arrays when an ndarray sits on the left of an operation
    __array_ufunc__ = None

    def __init__(self, val, dot):
        self.val = val
        self.dot = dot

    def __repr__(self):
        return f"Dual({self.val!r}, {self.dot!r})"

    def __add__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val + other.val, self.dot + other.dot)
        return Dual(self.val + other, self.dot)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val - other.val, self.dot - other.dot)
        return Dual(self.val - other, self.dot)

    def __rsub__(self, other):
        return Dual(other - self.val, -self.dot)

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val, self.dot * other.val + self.val * other.dot)
        return Dual(self.val * other, self.dot * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Dual):
            inv = 1.0 / other.val
            return Dual(self.val * inv, (self.dot - self.val * inv * other.dot) * inv)
        return Dual(self.val / other, self.dot / other)

    def __rtruediv__(self, other):
        inv = 1.0 / self.val
        return Dual(other * inv, -other * inv * inv * self.dot)

    def __neg__(self):
        return Dual(-self.val, -self.dot)

    def __pos__(self):
        return self

    def __pow__(self, other):
        if isinstance(other, Dual):
            # x^y = exp(y log x); requires x > 0 when y varies
            v = self.val ** other.val
            return Dual(v, v * (other.dot * np.log(self.val) + other.val * self.dot / self.val))
        if isinstance(other, (int, np.integer)) or float(other).is_integer():
            k = int(other)
            if k == 0:
                return Dual(np.ones_like(np.asarray(self.val, dtype=float)) * 1.0, self.dot * 0.0)
            return Dual(self.val ** k, k * self.val ** (k - 1) * self.dot)
        return Dual(self.val ** other, other * self.val ** (other - 1.0) * self.dot)

    def __rpow__(self, other):
        v = other ** self.val
        return Dual(v, v * np.log(other) * self.dot)

    # comparisons act on values (used e.g. for domain checks)
    def __lt__(self, other):
        return self.val < _val(other)

    def __le__(self, other):
        return self.val <= _val(other)

    def __gt__(self, other):
        return self.val > _val(other)

    def __ge__(self, other):
        return self.val >= _val(other)


def _val(x):
    return x.val if isinstance(x, Dual) else x


def value_of(x):
    """Real part of a possibly-dual quantity."""
    return x.val if isinstance(x, Dual) else x


def derivative_of(x, like=None):
    """Dual part, or zero when the result never touched the seeded slot."""
    if isinstance(x, Dual):
        return x.dot
    if like is None:
        return 0.0
    return np.zeros_like(np.asarray(like, dtype=float))


def sin(x):
    return Dual(np.sin(x.val), np.cos(x.val) * x.dot) if isinstance(x, Dual) else np.sin(x)


def cos(x):
    return Dual(np.cos(x.val), -np.sin(x.val) * x.dot) if isinstance(x, Dual) else np.cos(x)


def exp(x):
    if isinstance(x, Dual):
        v = np.exp(x.val)
        return Dual(v, v * x.dot)
    return np.exp(x)


def log(x):
    if isinstance(x, Dual):
        return Dual(np.log(x.val), x.dot / x.val)
    return np.log(x)


def sqrt(x):
    if isinstance(x, Dual):
        v = np.sqrt(x.val)
        return Dual(v, 0.5 * x.dot / v)
    return np.sqrt(x)


def fabs(x):
    if isinstance(x, Dual):
        return Dual(np.abs(x.val), np.sign(x.val) * x.dot)
    return np.abs(x)
