"""Truncated power series in the expansion parameter rho and the ambient
coefficient pipeline built on them.

``RhoSeries`` holds Taylor coefficients c_0..c_K (so the stored entry k is
(1/k!) d_rho^k at 0, not the raw derivative).  Coefficients are scalars or
symmetric matrices; an optional leading batch axis lets a whole quadrature
grid of expansions flow through the same arithmetic at once.

The ambient data of a structure at a point is an ``AmbientExpansion``:
coefficient lists of the metric family g_rho and density family f_rho.
From it this module extracts

* the volume coefficients v_k of (f_rho/f)^m (det g_rho / det g)^{1/2},
* the curvature-normal series Lambda^(k) and its rho=0 restrictions (the
  extended obstruction tensors),
* the self-consistency residual tying f'' to the trace of Lambda^(1),
* the second-order operator coefficients L_k from the series
  v(rho) * int_0^rho g^{ij}.

When n+m is an even integer the expansion only determines orders
k <= (n+m)/2; requests beyond that raise ``DeterminacyError``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

from .errors import DeterminacyError, DimensionMismatch, DomainError, OrderError

_LEADING_TOL = 1e-300


def _perm_sign(perm) -> int:
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


class RhoSeries:
    """Polynomial in rho, truncated at order K, with scalar or matrix
    coefficients (optionally batched along leading axes after the first)."""

    def __init__(self, coeffs, kind: str = "scalar"):
        if kind not in ("scalar", "matrix"):
            raise DomainError(f"unknown series kind {kind!r}")
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.kind = kind
        if kind == "matrix":
            if self.coeffs.ndim < 3 or self.coeffs.shape[-1] != self.coeffs.shape[-2]:
                raise DimensionMismatch("matrix series needs (K+1, ..., n, n) coeffs")

    @property
    def K(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def n(self) -> int:
        if self.kind != "matrix":
            raise DimensionMismatch("scalar series has no matrix size")
        return self.coeffs.shape[-1]

    @staticmethod
    def scalar_constant(value, K: int) -> "RhoSeries":
        value = np.asarray(value, dtype=float)
        c = np.zeros((K + 1,) + value.shape)
        c[0] = value
        return RhoSeries(c, "scalar")

    def copy(self) -> "RhoSeries":
        return RhoSeries(self.coeffs.copy(), self.kind)

    def truncate(self, K: int) -> "RhoSeries":
        if K >= self.K:
            return self
        return RhoSeries(self.coeffs[: K + 1].copy(), self.kind)

    # -- linear structure ------------------------------------------------

    def __add__(self, other):
        if isinstance(other, RhoSeries):
            if self.kind != other.kind:
                raise DimensionMismatch("cannot add scalar and matrix series")
            K = min(self.K, other.K)
            return RhoSeries(self.coeffs[: K + 1] + other.coeffs[: K + 1], self.kind)
        out = self.coeffs.copy()
        out[0] = out[0] + other
        return RhoSeries(out, self.kind)

    __radd__ = __add__

    def __neg__(self):
        return RhoSeries(-self.coeffs, self.kind)

    def __sub__(self, other):
        return self + (-other if isinstance(other, RhoSeries) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, RhoSeries):
            return RhoSeries(self.coeffs * float(other), self.kind)
        K = min(self.K, other.K)
        a, b = self.coeffs, other.coeffs
        out_kind = "matrix" if "matrix" in (self.kind, other.kind) else "scalar"
        parts = []
        for k in range(K + 1):
            acc = None
            for i in range(k + 1):
                term = _coeff_product(a[i], self.kind, b[k - i], other.kind)
                acc = term if acc is None else acc + term
            parts.append(acc)
        return RhoSeries(np.stack(parts), out_kind)

    __rmul__ = __mul__

    # -- calculus ---------------------------------------------------------

    def derivative(self) -> "RhoSeries":
        """d/d rho; the truncation order drops by one."""
        if self.K < 1:
            raise OrderError("cannot differentiate an order-0 series")
        k = np.arange(1, self.K + 1, dtype=float)
        shape = (-1,) + (1,) * (self.coeffs.ndim - 1)
        return RhoSeries(self.coeffs[1:] * k.reshape(shape), self.kind)

    def antiderivative(self) -> "RhoSeries":
        """int_0^rho; vanishing constant term, order grows by one."""
        k = np.arange(1, self.K + 2, dtype=float)
        shape = (-1,) + (1,) * (self.coeffs.ndim - 1)
        out = np.concatenate(
            [np.zeros((1,) + self.coeffs.shape[1:]), self.coeffs / k.reshape(shape)]
        )
        return RhoSeries(out, self.kind)

    # -- scalar transcendental heads ---------------------------------------

    def scalar_inverse(self) -> "RhoSeries":
        self._require("scalar")
        a = self.coeffs
        if np.any(np.abs(a[0]) <= _LEADING_TOL):
            raise DomainError("series inverse needs a nonzero leading coefficient")
        out = np.zeros_like(a)
        out[0] = 1.0 / a[0]
        for k in range(1, self.K + 1):
            acc = np.zeros_like(a[0])
            for j in range(1, k + 1):
                acc = acc + a[j] * out[k - j]
            out[k] = -acc / a[0]
        return RhoSeries(out, "scalar")

    def scalar_exp(self) -> "RhoSeries":
        self._require("scalar")
        a = self.coeffs
        out = np.zeros_like(a)
        out[0] = np.exp(a[0])
        for k in range(1, self.K + 1):
            acc = np.zeros_like(a[0])
            for j in range(1, k + 1):
                acc = acc + j * a[j] * out[k - j]
            out[k] = acc / k
        return RhoSeries(out, "scalar")

    def scalar_log(self) -> "RhoSeries":
        self._require("scalar")
        a = self.coeffs
        if np.any(a[0] <= 0.0):
            raise DomainError("series log needs a positive leading coefficient")
        out = np.zeros_like(a)
        out[0] = np.log(a[0])
        for k in range(1, self.K + 1):
            acc = np.zeros_like(a[0])
            for j in range(1, k):
                acc = acc + j * out[j] * a[k - j]
            out[k] = (a[k] - acc / k) / a[0]
        return RhoSeries(out, "scalar")

    def scalar_pow(self, alpha: float) -> "RhoSeries":
        return (self.scalar_log() * float(alpha)).scalar_exp()

    # -- matrix heads -------------------------------------------------------

    def matrix_inverse(self) -> "RhoSeries":
        self._require("matrix")
        a = self.coeffs
        try:
            b0 = np.linalg.inv(a[0])
        except np.linalg.LinAlgError:
            raise DomainError("series inverse needs an invertible leading matrix")
        out = np.zeros_like(a)
        out[0] = b0
        for k in range(1, self.K + 1):
            acc = np.zeros_like(a[0])
            for j in range(1, k + 1):
                acc = acc + a[j] @ out[k - j]
            out[k] = -b0 @ acc
        return RhoSeries(out, "matrix")

    def matrix_det(self) -> "RhoSeries":
        self._require("matrix")
        n = self.n
        det = None
        for perm in permutations(range(n)):
            sign = _perm_sign(perm)
            term = self.entry(0, perm[0])
            for i in range(1, n):
                term = term * self.entry(i, perm[i])
            term = term * float(sign)
            det = term if det is None else det + term
        return det

    def matrix_trace(self) -> "RhoSeries":
        self._require("matrix")
        return RhoSeries(np.trace(self.coeffs, axis1=-2, axis2=-1), "scalar")

    def entry(self, i: int, j: int) -> "RhoSeries":
        self._require("matrix")
        return RhoSeries(self.coeffs[..., i, j], "scalar")

    def symmetrize(self) -> "RhoSeries":
        self._require("matrix")
        return RhoSeries(
            0.5 * (self.coeffs + np.swapaxes(self.coeffs, -1, -2)), "matrix"
        )

    def _require(self, kind: str):
        if self.kind != kind:
            raise DimensionMismatch(f"operation needs a {kind} series")

    def __repr__(self):
        return f"RhoSeries(kind={self.kind}, K={self.K}, shape={self.coeffs.shape})"


def _coeff_product(a, kind_a, b, kind_b):
    if kind_a == "scalar" and kind_b == "scalar":
        return a * b
    if kind_a == "scalar":
        return a[..., None, None] * b
    if kind_b == "scalar":
        return a * b[..., None, None]
    return a @ b


# -- ambient expansions -----------------------------------------------------


@dataclass
class AmbientExpansion:
    """Taylor data of (g_rho, f_rho) at one point (or a batch of points).

    ``gcoeffs[k]`` and ``fcoeffs[k]`` are Taylor coefficients
    (1/k!) d_rho^k at rho = 0, so gcoeffs[0] is the base metric and
    fcoeffs[0] the base density.  ``self_consistent`` marks expansions whose
    generator guarantees the f''-trace relation (checked, never imposed).
    """

    gcoeffs: np.ndarray   # (K+1, ..., n, n)
    fcoeffs: np.ndarray   # (K+1, ...)
    self_consistent: bool = False
    mu: float | None = None

    def __post_init__(self):
        self.gcoeffs = np.asarray(self.gcoeffs, dtype=float)
        self.fcoeffs = np.asarray(self.fcoeffs, dtype=float)
        if self.gcoeffs.ndim < 3 or self.gcoeffs.shape[-1] != self.gcoeffs.shape[-2]:
            raise DimensionMismatch("gcoeffs must have shape (K+1, ..., n, n)")
        if self.fcoeffs.shape[0] != self.gcoeffs.shape[0]:
            raise DimensionMismatch("gcoeffs and fcoeffs must share the order axis")
        if np.any(self.fcoeffs[0] <= 0.0):
            raise DomainError("base density must be positive")

    @property
    def n(self) -> int:
        return self.gcoeffs.shape[-1]

    @property
    def K(self) -> int:
        return self.gcoeffs.shape[0] - 1

    @property
    def g(self) -> np.ndarray:
        return self.gcoeffs[0]

    @property
    def f(self):
        return self.fcoeffs[0]

    def g_series(self) -> RhoSeries:
        return RhoSeries(self.gcoeffs, "matrix")

    def f_series(self) -> RhoSeries:
        return RhoSeries(self.fcoeffs, "scalar")


@dataclass
class VolumeCoefficients:
    """v_1..v_K extracted from an expansion (batch axes preserved)."""

    v: np.ndarray

    def __getitem__(self, k: int):
        if not 1 <= k <= self.v.shape[0]:
            raise OrderError(f"v_{k} not available (have 1..{self.v.shape[0]})")
        return self.v[k - 1]

    def __len__(self):
        return self.v.shape[0]


def determinacy_cap(n: int, m: float) -> float | None:
    """(n+m)/2 when n+m is an even natural number, else None (no cap)."""
    nm = n + m
    if abs(nm - round(nm)) < 1e-9 and round(nm) % 2 == 0 and round(nm) > 0:
        return round(nm) / 2
    return None


def check_determinacy(n: int, m: float, k: int):
    cap = determinacy_cap(n, m)
    if cap is not None and k > cap:
        raise DeterminacyError(
            f"order {k} is beyond determinacy order {cap:g} for n+m = {n + m:g} "
            "(even-integer total dimension)"
        )


def volume_series(a: AmbientExpansion, m: float) -> RhoSeries:
    """The scalar series (f_rho/f)^m (det g_rho / det g)^{1/2}."""
    f_ratio = a.f_series() * RhoSeries.scalar_constant(1.0 / a.f, a.K)
    det_g = a.g_series().matrix_det()
    det_ratio = det_g * RhoSeries.scalar_constant(1.0 / det_g.coeffs[0], det_g.K)
    return f_ratio.scalar_pow(m) * det_ratio.scalar_pow(0.5)


def volume_coefficients(a: AmbientExpansion, m: float) -> VolumeCoefficients:
    """Extract v_1..v_K; errors when K exceeds the determinacy cap."""
    if a.K < 1:
        raise OrderError("expansion must carry at least one rho order")
    check_determinacy(a.n, m, a.K)
    return VolumeCoefficients(v=volume_series(a, m).coeffs[1:])


def lambda_one_series(a: AmbientExpansion) -> RhoSeries:
    """Lambda^(1)(rho) = (g'' - g' g^{-1} g' / 2) / 2 as a matrix series."""
    if a.K < 2:
        raise OrderError("Lambda^(1) needs K >= 2")
    g = a.g_series()
    gp = g.derivative()
    gpp = gp.derivative()
    quad = (gp * g.matrix_inverse() * gp) * 0.5
    return ((gpp - quad) * 0.5).symmetrize()


@dataclass
class ObstructionSet:
    """Restrictions Omega^(k) = Lambda^(k)(0) together with the retained
    in-rho series for diagnostics."""

    omegas: list = field(default_factory=list)      # Omega^(1)..Omega^(K-1)
    lambda_series: list = field(default_factory=list)

    def trace_norms(self, base_g: np.ndarray) -> np.ndarray:
        """|g^{ij} Omega^(k)_{ij}| for each k (max over any batch axes)."""
        ginv = np.linalg.inv(base_g)
        return np.array(
            [np.max(np.abs(np.einsum("...ij,...ij->...", ginv, om)))
             for om in self.omegas]
        )

    def sup_norms(self) -> np.ndarray:
        return np.array([np.max(np.abs(om)) for om in self.omegas])


def obstruction_tensors(a: AmbientExpansion) -> ObstructionSet:
    """Iterate the normal-direction recursion

        Lambda^(k+1) = d_rho Lambda^(k)
                       - (g' g^{-1} Lambda^(k) + Lambda^(k) g^{-1} g') / 2

    starting from Lambda^(1) and restrict each step to rho = 0.  The
    symmetrized pairing carries weight 1/2; with that weight the recursion
    closes exactly on the model families.  Each step consumes one series
    order, so K orders of data determine Omega^(1)..Omega^(K-1).
    """
    if a.K < 2:
        raise OrderError("obstruction tensors need K >= 2")
    g = a.g_series()
    ginv = g.matrix_inverse()
    gp = g.derivative()
    lam = lambda_one_series(a)
    out = ObstructionSet()
    out.lambda_series.append(lam)
    out.omegas.append(lam.coeffs[0].copy())
    for _ in range(2, a.K):
        if lam.K < 1:
            break
        correction = (gp * ginv * lam + lam * ginv * gp) * 0.5
        lam = (lam.derivative() - correction).symmetrize()
        out.lambda_series.append(lam)
        out.omegas.append(lam.coeffs[0].copy())
    return out


def f_second_residual(a: AmbientExpansion, m: float):
    """|f'' + (f/m) g^{ij} Lambda^(1)_{ij}| at rho = 0.

    fcoeffs stores Taylor coefficients, so f'' = 2 fcoeffs[2].
    """
    if m <= 0:
        raise DomainError("self-consistency residual needs m > 0")
    if a.K < 2:
        raise OrderError("self-consistency residual needs K >= 2")
    omega1 = lambda_one_series(a).coeffs[0]
    ginv = np.linalg.inv(a.g)
    trace = np.einsum("...ij,...ij->...", ginv, omega1)
    return np.abs(2.0 * a.fcoeffs[2] + (a.f / m) * trace)


def l_operator(a: AmbientExpansion, m: float, k: int) -> np.ndarray:
    """Minus the k-th Taylor coefficient of v(rho) int_0^rho g^{ij}(u) du.

    Returns the contravariant symmetric matrix (L_k)^{ij} (batch axes
    preserved when the expansion is batched).
    """
    if not 1 <= k <= a.K:
        raise OrderError(f"k = {k} outside 1..{a.K}")
    check_determinacy(a.n, m, k)
    product = l_operator_series(a, m)
    return -product.coeffs[k]


def l_operator_series(a: AmbientExpansion, m: float) -> RhoSeries:
    """The matrix series v(rho) * int_0^rho g^{ij}(u) du (order K)."""
    v = volume_series(a, m)
    ginv = a.g_series().matrix_inverse()
    return v * ginv.antiderivative()


def poincare_to_ambient(r_coeffs, tol: float = 1e-12) -> RhoSeries:
    """Substitute r^2 = -2 rho into an even series in r.

    The coefficient of r^{2k} becomes the coefficient of rho^k times
    (-2)^k.  Odd-power content above ``tol`` is rejected.
    """
    r = np.asarray(r_coeffs, dtype=float)
    if r.ndim != 1:
        raise DimensionMismatch("expected a 1-D array of r-coefficients")
    odd = r[1::2]
    if odd.size and np.max(np.abs(odd)) > tol:
        raise DomainError(
            f"odd powers of r present (max magnitude {np.max(np.abs(odd)):g})"
        )
    even = r[0::2]
    k = np.arange(even.size, dtype=float)
    return RhoSeries(even * (-2.0) ** k, "scalar")


# -- plain-text coefficient files ---------------------------------------------


def save_ambient_file(a: AmbientExpansion, m: float, mu: float, path):
    """Write `n m mu K` then `g k i j value` / `f k value` rows."""
    if a.gcoeffs.ndim != 3:
        raise DimensionMismatch("only unbatched expansions can be saved")
    n, K = a.n, a.K
    lines = [f"{n} {m:.17g} {mu:.17g} {K}"]
    for k in range(K + 1):
        for i in range(n):
            for j in range(n):
                lines.append(f"g {k} {i} {j} {a.gcoeffs[k, i, j]:.17g}")
    for k in range(K + 1):
        lines.append(f"f {k} {a.fcoeffs[k]:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_ambient_file(path):
    """Read a coefficient file; returns (expansion, m, mu)."""
    with open(path) as fh:
        raw = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not raw:
        raise DomainError(f"empty ambient coefficient file {path}")
    head = raw[0].split()
    if len(head) != 4:
        raise DomainError("header must be `n m mu K`")
    n, m, mu, K = int(head[0]), float(head[1]), float(head[2]), int(head[3])
    gcoeffs = np.zeros((K + 1, n, n))
    fcoeffs = np.zeros(K + 1)
    for ln in raw[1:]:
        parts = ln.split()
        if parts[0] == "g" and len(parts) == 5:
            k, i, j = int(parts[1]), int(parts[2]), int(parts[3])
            gcoeffs[k, i, j] = float(parts[4])
        elif parts[0] == "f" and len(parts) == 3:
            fcoeffs[int(parts[1])] = float(parts[2])
        else:
            raise DomainError(f"unrecognized row in ambient file: {ln!r}")
    gcoeffs = 0.5 * (gcoeffs + np.swapaxes(gcoeffs, -1, -2))
    return AmbientExpansion(gcoeffs=gcoeffs, fcoeffs=fcoeffs, mu=mu), m, mu
