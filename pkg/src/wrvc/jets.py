"""Truncated multivariate Taylor arithmetic (jets) in up to four variables.

A jet stores the Taylor coefficients of an analytic function at a chart
point: ``coeffs[rank(alpha)] = (1/alpha!) * d^alpha f``.  Monomials are
ranked in graded order (total degree first), so truncating a jet to a
lower order is a prefix slice of its coefficient array.  All arithmetic
is exact for polynomial data up to the truncation order; there is no
finite-difference error anywhere downstream.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, DomainError, OrderError

MAX_DIM = 4

_RECIPROCAL_FLOOR = 1e-300


@lru_cache(maxsize=None)
def _monomials(dim: int, order: int) -> tuple[tuple[int, ...], ...]:
    """All multi-indices with |alpha| <= order, graded, lex within a degree."""
    by_degree: list[list[tuple[int, ...]]] = [[] for _ in range(order + 1)]

    def rec(prefix, remaining_slots, budget):
        if remaining_slots == 0:
            by_degree[sum(prefix)].append(tuple(prefix))
            return
        for k in range(budget, -1, -1):
            rec(prefix + [k], remaining_slots - 1, budget - k)

    rec([], dim, order)
    out: list[tuple[int, ...]] = []
    for deg in range(order + 1):
        out.extend(by_degree[deg])
    return tuple(out)


@lru_cache(maxsize=None)
def _rank_table(dim: int, order: int) -> dict[tuple[int, ...], int]:
    return {alpha: i for i, alpha in enumerate(_monomials(dim, order))}


@lru_cache(maxsize=None)
def _product_triples(dim: int, order: int):
    """Index triples (ia, ib, ic) with monomial(ia) + monomial(ib) = monomial(ic)."""
    monos = _monomials(dim, order)
    rank = _rank_table(dim, order)
    ia, ib, ic = [], [], []
    for i, a in enumerate(monos):
        da = sum(a)
        for j, b in enumerate(monos):
            if da + sum(b) > order:
                continue
            c = tuple(x + y for x, y in zip(a, b))
            ia.append(i)
            ib.append(j)
            ic.append(rank[c])
    return np.array(ia), np.array(ib), np.array(ic)


@lru_cache(maxsize=None)
def _derivative_pairs(dim: int, order: int, axis: int):
    """Pairs (src, dst, factor): coeff(dst) of d/dx_axis = factor * coeff(src)."""
    monos = _monomials(dim, order)
    rank_lower = _rank_table(dim, order - 1) if order > 0 else {}
    src, dst, fac = [], [], []
    for i, a in enumerate(monos):
        if a[axis] == 0:
            continue
        b = list(a)
        b[axis] -= 1
        src.append(i)
        dst.append(rank_lower[tuple(b)])
        fac.append(a[axis])
    return np.array(src), np.array(dst), np.array(fac, dtype=float)


def n_coeffs(dim: int, order: int) -> int:
    return math.comb(dim + order, order)


class Jet:
    """Dense truncated Taylor expansion of a scalar at a fixed chart point.

    Jets are immutable values; every operation returns a new jet truncated
    to the smaller operand order.
    """

    __slots__ = ("dim", "order", "coeffs")

    def __init__(self, dim: int, order: int, coeffs=None):
        if not 1 <= dim <= MAX_DIM:
            raise DimensionMismatch(f"jet dimension must be in 1..{MAX_DIM}, got {dim}")
        if order < 0:
            raise OrderError(f"jet order must be >= 0, got {order}")
        self.dim = dim
        self.order = order
        size = n_coeffs(dim, order)
        if coeffs is None:
            self.coeffs = np.zeros(size)
        else:
            arr = np.asarray(coeffs, dtype=float)
            if arr.shape != (size,):
                raise DimensionMismatch(
                    f"expected {size} coefficients for dim={dim}, order={order}, "
                    f"got shape {arr.shape}"
                )
            self.coeffs = arr

    # -- constructors -------------------------------------------------

    @staticmethod
    def constant(value: float, dim: int, order: int) -> "Jet":
        j = Jet(dim, order)
        j.coeffs[0] = value
        return j

    @staticmethod
    def variable(index: int, value: float, dim: int, order: int) -> "Jet":
        """The coordinate function x_index centered at the given value."""
        if not 0 <= index < dim:
            raise DimensionMismatch(
                f"variable index {index} out of range for dim {dim}"
            )
        j = Jet(dim, order)
        j.coeffs[0] = value
        if order >= 1:
            j.coeffs[1 + index] = 1.0
        return j

    # -- basic views --------------------------------------------------

    @property
    def value(self) -> float:
        """The function value at the base point (constant term)."""
        return float(self.coeffs[0])

    def truncate(self, order: int) -> "Jet":
        if order >= self.order:
            return self
        return Jet(self.dim, order, self.coeffs[: n_coeffs(self.dim, order)].copy())

    def partial(self, multi_index) -> float:
        """Value of the mixed partial d^alpha at the base point."""
        alpha = tuple(int(a) for a in multi_index)
        if len(alpha) != self.dim or any(a < 0 for a in alpha):
            raise DimensionMismatch(f"bad multi-index {alpha} for dim {self.dim}")
        if sum(alpha) > self.order:
            raise OrderError(
                f"partial of total degree {sum(alpha)} exceeds jet order {self.order}"
            )
        rank = _rank_table(self.dim, self.order)[alpha]
        fact = 1.0
        for a in alpha:
            fact *= math.factorial(a)
        return float(self.coeffs[rank] * fact)

    def derivative(self, axis: int) -> "Jet":
        """Jet of the partial derivative along one axis (order drops by one)."""
        if not 0 <= axis < self.dim:
            raise DimensionMismatch(f"axis {axis} out of range for dim {self.dim}")
        if self.order == 0:
            raise OrderError("cannot differentiate an order-0 jet")
        out = Jet(self.dim, self.order - 1)
        src, dst, fac = _derivative_pairs(self.dim, self.order, axis)
        if len(src):
            np.add.at(out.coeffs, dst, self.coeffs[src] * fac)
        return out

    # -- ring operations ----------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.dim != self.dim:
                raise DimensionMismatch(
                    f"jet dims differ: {self.dim} vs {other.dim}"
                )
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet.constant(float(other), self.dim, self.order)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        k = min(self.order, o.order)
        a, b = self.truncate(k), o.truncate(k)
        return Jet(self.dim, k, a.coeffs + b.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.dim, self.order, -self.coeffs)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet(self.dim, self.order, self.coeffs * float(other))
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        k = min(self.order, o.order)
        a, b = self.truncate(k), o.truncate(k)
        out = Jet(self.dim, k)
        ia, ib, ic = _product_triples(self.dim, k)
        np.add.at(out.coeffs, ic, a.coeffs[ia] * b.coeffs[ib])
        return out

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet":
        if abs(self.value) <= _RECIPROCAL_FLOOR:
            raise DomainError("reciprocal of a jet with (near-)zero constant term")
        return self.apply("pow", -1.0)

    def __truediv__(self, other):
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Jet(self.dim, self.order, self.coeffs / float(other))
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, exponent):
        if isinstance(exponent, (int, np.integer)):
            n = int(exponent)
            if n < 0:
                return self.reciprocal() ** (-n)
            result = Jet.constant(1.0, self.dim, self.order)
            base = self
            while n:
                if n & 1:
                    result = result * base
                base = base * base if n > 1 else base
                n >>= 1
            return result
        return self.apply("pow", float(exponent))

    # -- analytic composition ------------------------------------------

    def apply(self, fn: str, alpha: float | None = None) -> "Jet":
        """Compose a named analytic function with this jet.

        Univariate Taylor coefficients of ``fn`` at the constant term are
        composed with the zero-constant part by Horner evaluation, which is
        exact to the truncation order.
        """
        c = _univariate_coeffs(fn, self.value, self.order, alpha)
        u = Jet(self.dim, self.order, self.coeffs.copy())
        u.coeffs[0] = 0.0
        result = Jet.constant(c[self.order], self.dim, self.order)
        for k in range(self.order - 1, -1, -1):
            result = result * u + c[k]
        return result

    def exp(self):
        return self.apply("exp")

    def log(self):
        return self.apply("log")

    def sqrt(self):
        return self.apply("sqrt")

    def sin(self):
        return self.apply("sin")

    def cos(self):
        return self.apply("cos")

    def __repr__(self):
        monos = _monomials(self.dim, self.order)
        names = "xyzw"
        terms = []
        for a, c in zip(monos, self.coeffs):
            if c == 0.0:
                continue
            mono = "".join(
                names[i] + (f"^{p}" if p > 1 else "")
                for i, p in enumerate(a)
                if p > 0
            )
            terms.append(f"{c:g}{('*' + mono) if mono else ''}")
        body = " + ".join(terms) if terms else "0"
        return f"Jet(dim={self.dim}, order={self.order}: {body})"


def _univariate_coeffs(fn: str, a0: float, order: int, alpha: float | None):
    """Taylor coefficients c_k = fn^(k)(a0)/k! for k = 0..order."""
    k = np.arange(order + 1)
    if fn == "exp":
        return np.exp(a0) / _factorials(order)
    if fn == "log":
        if a0 <= 0.0:
            raise DomainError(f"log of non-positive constant term {a0}")
        c = np.empty(order + 1)
        c[0] = math.log(a0)
        if order >= 1:
            kk = k[1:]
            c[1:] = ((-1.0) ** (kk + 1)) / (kk * a0**kk)
        return c
    if fn == "sqrt":
        if a0 <= 0.0:
            raise DomainError(f"sqrt of non-positive constant term {a0}")
        return _pow_coeffs(a0, 0.5, order)
    if fn == "sin":
        return np.sin(a0 + k * math.pi / 2) / _factorials(order)
    if fn == "cos":
        return np.cos(a0 + k * math.pi / 2) / _factorials(order)
    if fn == "pow":
        if alpha is None:
            raise DomainError("pow requires an exponent")
        return _pow_coeffs(a0, float(alpha), order)
    raise DomainError(f"unknown analytic function {fn!r}")


def _pow_coeffs(a0: float, alpha: float, order: int):
    is_integer = float(alpha).is_integer()
    if not is_integer and a0 <= 0.0:
        raise DomainError(
            f"pow({alpha}) needs a positive constant term, got {a0}"
        )
    if is_integer and alpha < 0 and abs(a0) <= _RECIPROCAL_FLOOR:
        raise DomainError("negative power of a jet with (near-)zero constant term")
    c = np.zeros(order + 1)
    binom = 1.0
    for j in range(order + 1):
        if is_integer and alpha >= 0 and j > alpha:
            break  # binomial coefficient vanishes; avoids 0^negative
        c[j] = binom * a0 ** (alpha - j)
        binom *= (alpha - j) / (j + 1)
    return c


@lru_cache(maxsize=None)
def _factorials(order: int):
    return np.array([math.factorial(i) for i in range(order + 1)], dtype=float)


# Functional aliases matching the operation-level API.

def jet_variable(index: int, value: float, dim: int, order: int) -> Jet:
    return Jet.variable(index, value, dim, order)


def jet_constant(value: float, dim: int, order: int) -> Jet:
    return Jet.constant(value, dim, order)


def jet_mul(a: Jet, b: Jet) -> Jet:
    return a * b


def jet_apply_analytic(fn: str, a: Jet, alpha: float | None = None) -> Jet:
    return a.apply(fn, alpha)


def jet_partial(a: Jet, multi_index) -> float:
    return a.partial(multi_index)
