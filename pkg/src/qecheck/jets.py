"""Truncated Taylor (jet) arithmetic in n variables up to total order 4.

A jet is stored as a dense coefficient vector over the graded multi-index
basis: ``coeff[alpha] = (d^alpha f)(p) / alpha!``.  Multiplication is a
truncated convolution; elementary functions are applied through their
univariate Taylor series composed with the nilpotent part.  All derivatives
obtained this way are exact to machine rounding for analytic inputs.

``JA`` wraps an ndarray whose *last* axis is the coefficient axis, so whole
tensors of jets are manipulated with vectorized numpy operations.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import EvalDomainError, JetOrderError

MAX_ORDER = 4


def _multi_indices(n, order):
    """Graded list of exponent tuples with |alpha| <= order."""
    out = []
    for deg in range(order + 1):
        for combo in itertools.combinations_with_replacement(range(n), deg):
            alpha = [0] * n
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
    return out


@lru_cache(maxsize=None)
class JetSpace:
    """Per-(n, order) lookup tables for jet arithmetic."""

    def __init__(self, n, order):
        if not (0 <= order <= MAX_ORDER):
            raise JetOrderError(f"jet order must be in 0..{MAX_ORDER}, got {order}")
        self.n = n
        self.order = order
        self.multis = _multi_indices(n, order)
        self.index = {m: i for i, m in enumerate(self.multis)}
        self.ncoeff = len(self.multis)
        self.degrees = np.array([sum(m) for m in self.multis])
        # prefix length of the sub-basis of each lower order
        self.prefix = [sum(1 for m in self.multis if sum(m) <= r) for r in range(order + 1)]
        self._build_mul_table()
        self._build_diff_tables()
        self.factorials = np.array(
            [math.prod(math.factorial(a) for a in m) for m in self.multis], dtype=float
        )

    def _build_mul_table(self):
        ti, tj, tk = [], [], []
        for ia, ma in enumerate(self.multis):
            da = sum(ma)
            for ib, mb in enumerate(self.multis):
                if da + sum(mb) > self.order:
                    continue
                ti.append(ia)
                tj.append(ib)
                tk.append(self.index[tuple(a + b for a, b in zip(ma, mb))])
        self.mul_i = np.array(ti)
        self.mul_j = np.array(tj)
        scatter = np.zeros((len(ti), self.ncoeff))
        scatter[np.arange(len(ti)), tk] = 1.0
        self.mul_scatter = scatter

    def _build_diff_tables(self):
        # d/dx_d maps an order-r jet onto an order-(r-1) jet (prefix basis)
        self.diff_src = []
        self.diff_fac = []
        nprev = self.prefix[self.order - 1] if self.order >= 1 else 0
        for d in range(self.n):
            src = np.zeros(nprev, dtype=int)
            fac = np.zeros(nprev)
            for t in range(nprev):
                alpha = list(self.multis[t])
                alpha[d] += 1
                src[t] = self.index[tuple(alpha)]
                fac[t] = alpha[d]
            self.diff_src.append(src)
            self.diff_fac.append(fac)


def space(n, order):
    return JetSpace(n, order)


class JA:
    """An ndarray of jets: data shape = tensor shape + (ncoeff,)."""

    __slots__ = ("c", "n", "order")
    __array_priority__ = 100  # keep numpy from absorbing us in mixed ops

    def __init__(self, c, n, order):
        self.c = np.asarray(c, dtype=float)
        self.n = n
        self.order = order
        assert self.c.shape[-1] == space(n, order).ncoeff

    # -- constructors -------------------------------------------------
    @staticmethod
    def constant(values, n, order):
        values = np.asarray(values, dtype=float)
        sp = space(n, order)
        c = np.zeros(values.shape + (sp.ncoeff,))
        c[..., 0] = values
        return JA(c, n, order)

    @staticmethod
    def coordinate(i, point, n, order):
        sp = space(n, order)
        c = np.zeros(sp.ncoeff)
        c[0] = point[i]
        if order >= 1:
            e = tuple(1 if j == i else 0 for j in range(n))
            c[sp.index[e]] = 1.0
        return JA(c, n, order)

    # -- basic views ---------------------------------------------------
    @property
    def shape(self):
        return self.c.shape[:-1]

    @property
    def value(self):
        return self.c[..., 0]

    def trunc(self, order):
        if order > self.order:
            raise JetOrderError(f"cannot raise jet order {self.order} -> {order}")
        if order == self.order:
            return self
        sp = space(self.n, self.order)
        return JA(self.c[..., : sp.prefix[order]], self.n, order)

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return JA(self.c[idx + (slice(None),)], self.n, self.order)

    def transpose(self, *axes):
        ax = list(axes) + [self.c.ndim - 1]
        return JA(self.c.transpose(ax), self.n, self.order)

    def sum(self, axis):
        return JA(self.c.sum(axis=axis), self.n, self.order)

    # -- ring operations -----------------------------------------------
    def _coerce(self, other):
        if isinstance(other, JA):
            return other
        return JA.constant(other, self.n, self.order)

    def __add__(self, other):
        other = self._coerce(other)
        o = min(self.order, other.order)
        a, b = self.trunc(o), other.trunc(o)
        return JA(a.c + b.c, self.n, o)

    __radd__ = __add__

    def __neg__(self):
        return JA(-self.c, self.n, self.order)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) + (-self)

    def __mul__(self, other):
        if not isinstance(other, JA):
            # scalar or plain field: pure coefficient scaling
            other_arr = np.asarray(other, dtype=float)
            return JA(self.c * other_arr[..., None], self.n, self.order)
        o = min(self.order, other.order)
        a, b = self.trunc(o), other.trunc(o)
        sp = space(self.n, o)
        prod = a.c[..., sp.mul_i] * b.c[..., sp.mul_j]
        return JA(prod @ sp.mul_scatter, self.n, o)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, JA):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) or (isinstance(p, float) and p.is_integer()):
            return self.ipow(int(p))
        return self.rpow(float(p))

    def ipow(self, k):
        if k == 0:
            return JA.constant(np.ones(self.shape), self.n, self.order)
        if k < 0:
            return self.reciprocal().ipow(-k)
        out = self
        for _ in range(k - 1):
            out = out * self
        return out

    # -- differentiation -----------------------------------------------
    def d(self, i):
        """Partial derivative jet along coordinate i (order drops by one)."""
        if self.order < 1:
            raise JetOrderError("cannot differentiate an order-0 jet")
        sp = space(self.n, self.order)
        return JA(self.c[..., sp.diff_src[i]] * sp.diff_fac[i], self.n, self.order - 1)

    def grad(self):
        """Stack of partial-derivative jets; new axis is leading."""
        return JA(
            np.stack([self.d(i).c for i in range(self.n)], axis=0), self.n, self.order - 1
        )

    # -- analytic functions --------------------------------------------
    def compose(self, coeffs):
        """sum_k coeffs[k] * p^k where p is the nilpotent part of self.

        coeffs has shape (order+1,) + self.shape and holds f^(k)(value)/k!.
        """
        p = JA(self.c.copy(), self.n, self.order)
        p.c[..., 0] = 0.0
        out = JA.constant(coeffs[0], self.n, self.order)
        pk = None
        for k in range(1, self.order + 1):
            pk = p if pk is None else pk * p
            out = out + pk * coeffs[k]
        return out

    def _series(self, fn_derivs, name, domain_ok):
        u0 = self.value
        if not np.all(domain_ok(u0)):
            raise EvalDomainError(f"{name} outside domain (argument value {u0})")
        coeffs = fn_derivs(u0, self.order)
        return self.compose(coeffs)

    def reciprocal(self):
        def derivs(u0, order):
            return np.stack([(-1.0) ** k / u0 ** (k + 1) for k in range(order + 1)])

        return self._series(derivs, "1/x", lambda u: u != 0)

    def exp(self):
        def derivs(u0, order):
            e = np.exp(u0)
            return np.stack([e / math.factorial(k) for k in range(order + 1)])

        return self._series(derivs, "exp", lambda u: np.isfinite(u))

    def log(self):
        def derivs(u0, order):
            out = [np.log(u0)]
            for k in range(1, order + 1):
                out.append((-1.0) ** (k - 1) / (k * u0**k))
            return np.stack(out)

        return self._series(derivs, "log", lambda u: u > 0)

    def rpow(self, a):
        def derivs(u0, order):
            out = [u0**a]
            coef = 1.0
            for k in range(1, order + 1):
                coef *= (a - k + 1) / k
                out.append(coef * u0 ** (a - k))
            return np.stack(out)

        return self._series(derivs, f"x^{a}", lambda u: u > 0)

    def sqrt(self):
        return self.rpow(0.5)

    def sin(self):
        def derivs(u0, order):
            cycle = [np.sin(u0), np.cos(u0), -np.sin(u0), -np.cos(u0)]
            return np.stack([cycle[k % 4] / math.factorial(k) for k in range(order + 1)])

        return self._series(derivs, "sin", lambda u: np.isfinite(u))

    def cos(self):
        def derivs(u0, order):
            cycle = [np.cos(u0), -np.sin(u0), -np.cos(u0), np.sin(u0)]
            return np.stack([cycle[k % 4] / math.factorial(k) for k in range(order + 1)])

        return self._series(derivs, "cos", lambda u: np.isfinite(u))

    def sinh(self):
        def derivs(u0, order):
            cycle = [np.sinh(u0), np.cosh(u0)]
            return np.stack([cycle[k % 2] / math.factorial(k) for k in range(order + 1)])

        return self._series(derivs, "sinh", lambda u: np.isfinite(u))

    def cosh(self):
        def derivs(u0, order):
            cycle = [np.cosh(u0), np.sinh(u0)]
            return np.stack([cycle[k % 2] / math.factorial(k) for k in range(order + 1)])

        return self._series(derivs, "cosh", lambda u: np.isfinite(u))

    def tan(self):
        return self.sin() / self.cos()

    def tanh(self):
        return self.sinh() / self.cosh()


def jeinsum(subscripts, a, b=None):
    """einsum over jet arrays; the coefficient axis is handled implicitly.

    Operands may be JA or plain ndarrays (treated as constant fields).  At
    least one operand must be a JA.
    """
    if b is None:
        assert isinstance(a, JA)
        lhs, rhs = subscripts.split("->")
        out = np.einsum(f"{lhs}z->{rhs}z", a.c)
        return JA(out, a.n, a.order)
    terms, rhs = subscripts.split("->")
    ta, tb = terms.split(",")
    if isinstance(a, JA) and isinstance(b, JA):
        o = min(a.order, b.order)
        a, b = a.trunc(o), b.trunc(o)
        sp = space(a.n, o)
        out = np.einsum(
            f"{ta}z,{tb}z->{rhs}z", a.c[..., sp.mul_i], b.c[..., sp.mul_j]
        )
        return JA(out @ sp.mul_scatter, a.n, o)
    if isinstance(a, JA):
        out = np.einsum(f"{ta}z,{tb}->{rhs}z", a.c, np.asarray(b, dtype=float))
        return JA(out, a.n, a.order)
    out = np.einsum(f"{ta},{tb}z->{rhs}z", np.asarray(a, dtype=float), b.c)
    return JA(out, b.n, b.order)


def jstack(jets, axis=0):
    o = min(j.order for j in jets)
    return JA(np.stack([j.trunc(o).c for j in jets], axis=axis), jets[0].n, o)


def inverse_matrix(a):
    """Inverse of an (n x n) matrix of jets via the nilpotent Neumann series.

    a = a0 (I + a0^{-1} N) with N the derivative part, so the series in
    a0^{-1} N terminates at the jet order.
    """
    k = a.shape[0]
    a0inv = np.linalg.inv(a.value)
    nilp = JA(a.c.copy(), a.n, a.order)
    nilp.c[..., 0] = 0.0
    m = jeinsum("ij,jk->ik", a0inv, nilp)  # zero value part
    series = JA.constant(np.eye(k), a.n, a.order)
    cur = None
    sign = 1.0
    for _ in range(a.order):
        cur = m if cur is None else jeinsum("ij,jk->ik", cur, m)
        sign = -sign
        series = series + cur * sign
    return jeinsum("ij,jk->ik", series, a0inv)


class Jet:
    """Scalar jet: value plus exact mixed partials up to ``order``.

    Partials are stored once per multi-index (symmetry is implicit) as
    Taylor coefficients; ``partial`` rescales by the factorial.
    """

    def __init__(self, ja):
        assert ja.shape == ()
        self._ja = ja

    @property
    def order(self):
        return self._ja.order

    @property
    def nvars(self):
        return self._ja.n

    @property
    def value(self):
        return float(self._ja.value)

    @property
    def ja(self):
        return self._ja

    def coefficient(self, alpha):
        alpha = tuple(alpha)
        sp = space(self._ja.n, self._ja.order)
        if sum(alpha) > self._ja.order:
            raise JetOrderError(f"requested partial {alpha} beyond order {self._ja.order}")
        return float(self._ja.c[sp.index[alpha]])

    def partial(self, alpha):
        alpha = tuple(alpha)
        fac = math.prod(math.factorial(a) for a in alpha)
        return self.coefficient(alpha) * fac

    def gradient(self):
        n = self._ja.n
        return np.array([self.partial(tuple(1 if j == i else 0 for j in range(n)))
                         for i in range(n)])

    def hessian(self):
        n = self._ja.n
        h = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                alpha = [0] * n
                alpha[i] += 1
                alpha[j] += 1
                h[i, j] = self.partial(tuple(alpha))
        return h
