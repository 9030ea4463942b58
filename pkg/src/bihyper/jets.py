"""Truncated third-order jets for exact chart derivatives.

A :class:`Jet` carries the value of a scalar function of ``n`` parameters
together with its gradient, Hessian and third-derivative tensor, batched over
a leading axis of sample points. Arithmetic and the elementary functions below
propagate all four levels with the usual Leibniz / Faa di Bruno rules, so a
chart written as an ordinary formula in jets yields closed-form derivatives
without any numerical differentiation.
"""

from __future__ import annotations

import numpy as np


def _sym3(t):
    """Sum over the three index placements of a tensor symmetric in its first two slots."""
    return t + np.swapaxes(t, -1, -2) + np.moveaxis(t, -1, -3)


class Jet:
    __slots__ = ("v", "d1", "d2", "d3")
    __array_priority__ = 100

    def __init__(self, v, d1, d2, d3):
        self.v = v
        self.d1 = d1
        self.d2 = d2
        self.d3 = d3

    @property
    def nvar(self):
        return self.d1.shape[-1]

    @classmethod
    def constant(cls, value, batch, nvar, dtype=float):
        v = np.broadcast_to(np.asarray(value, dtype=dtype), (batch,)).copy()
        return cls(
            v,
            np.zeros((batch, nvar), dtype),
            np.zeros((batch, nvar, nvar), dtype),
            np.zeros((batch, nvar, nvar, nvar), dtype),
        )

    @classmethod
    def variables(cls, u, dtype=float):
        """Independent-variable jets for a ``(batch, n)`` array of parameter points."""
        u = np.asarray(u, dtype=dtype)
        batch, nvar = u.shape
        out = []
        for k in range(nvar):
            d1 = np.zeros((batch, nvar), dtype)
            d1[:, k] = 1
            out.append(cls(u[:, k].copy(), d1, np.zeros((batch, nvar, nvar), dtype),
                           np.zeros((batch, nvar, nvar, nvar), dtype)))
        return out

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.v + other, self.d1, self.d2, self.d3)
        return Jet(self.v + other.v, self.d1 + other.d1, self.d2 + other.d2, self.d3 + other.d3)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.d1, -self.d2, -self.d3)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = float(other)
            return Jet(self.v * other, self.d1 * other, self.d2 * other, self.d3 * other)
        a, b = self, other
        av, bv = a.v[:, None], b.v[:, None]
        d1 = a.d1 * bv + av * b.d1
        outer11 = a.d1[:, :, None] * b.d1[:, None, :]
        d2 = a.d2 * bv[:, :, None] + av[:, :, None] * b.d2 + outer11 + np.swapaxes(outer11, 1, 2)
        # (ab)_ijk = a_ijk b + a b_ijk + sym(a_ij b_k) + sym(a_k b_ij)
        t21 = a.d2[:, :, :, None] * b.d1[:, None, None, :]
        t12 = b.d2[:, :, :, None] * a.d1[:, None, None, :]
        d3 = (a.d3 * bv[:, :, None, None] + av[:, :, None, None] * b.d3
              + _sym3(t21) + _sym3(t12))
        return Jet(a.v * b.v, d1, d2, d3)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / float(other))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def compose(self, f0, f1, f2, f3):
        """Apply a scalar function given its derivatives evaluated at ``self.v``."""
        f1_, f2_, f3_ = f1[:, None], f2[:, None, None], f3[:, None, None, None]
        g1, g2 = self.d1, self.d2
        d1 = f1_ * g1
        outer = g1[:, :, None] * g1[:, None, :]
        d2 = f2_ * outer + f1[:, None, None] * g2
        triple = outer[:, :, :, None] * g1[:, None, None, :]
        mixed = g2[:, :, :, None] * g1[:, None, None, :]
        d3 = f3_ * triple + f2[:, None, None, None] * _sym3(mixed) + f1[:, None, None, None] * self.d3
        return Jet(f0, d1, d2, d3)

    def reciprocal(self):
        x = self.v
        return self.compose(1 / x, -1 / x**2, 2 / x**3, -6 / x**4)

    def __pow__(self, k):
        k = float(k)
        x = self.v
        return self.compose(x**k, k * x ** (k - 1), k * (k - 1) * x ** (k - 2),
                            k * (k - 1) * (k - 2) * x ** (k - 3))


def sin(a: Jet) -> Jet:
    s, c = np.sin(a.v), np.cos(a.v)
    return a.compose(s, c, -s, -c)


def cos(a: Jet) -> Jet:
    s, c = np.sin(a.v), np.cos(a.v)
    return a.compose(c, -s, -c, s)


def sinh(a: Jet) -> Jet:
    s, c = np.sinh(a.v), np.cosh(a.v)
    return a.compose(s, c, s, c)


def cosh(a: Jet) -> Jet:
    s, c = np.sinh(a.v), np.cosh(a.v)
    return a.compose(c, s, c, s)


def sqrt(a: Jet) -> Jet:
    return a ** 0.5


def stack(jets):
    """Stack a list of ``E`` scalar jets into ambient arrays.

    Returns ``(p, dp, d2p, d3p)`` with shapes ``(B, E)``, ``(B, n, E)``,
    ``(B, n, n, E)`` and ``(B, n, n, n, E)``.
    """
    p = np.stack([j.v for j in jets], axis=-1)
    dp = np.stack([j.d1 for j in jets], axis=-1)
    d2p = np.stack([j.d2 for j in jets], axis=-1)
    d3p = np.stack([j.d3 for j in jets], axis=-1)
    return p, dp, d2p, d3p
