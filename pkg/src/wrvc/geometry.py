"""Classical Riemannian quantities at a chart point from jet-valued metrics.

Curvature is evaluated exactly from the metric jets: Christoffel symbols
are kept as jets (one order below the metric) so their derivatives at the
point are exact coefficients rather than finite differences.

Sign convention: ``R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb}
+ Gamma^a_{ce} Gamma^e_{db} - Gamma^a_{de} Gamma^e_{cb}`` with
``Ric_{bd} = R^a_{bad}``, so the unit round sphere has ``Ric = (n-1) g``
and ``R = n(n-1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, DomainError, OrderError
from .jets import Jet


def _jet_matrix_det(g):
    """Determinant of a square matrix of jets by cofactor expansion (n <= 4)."""
    n = len(g)
    if n == 1:
        return g[0][0]
    det = None
    for j in range(n):
        minor = [
            [g[r][c] for c in range(n) if c != j]
            for r in range(1, n)
        ]
        term = g[0][j] * _jet_matrix_det(minor)
        if j % 2 == 1:
            term = -term
        det = term if det is None else det + term
    return det


def jet_matrix_inverse(g):
    """Inverse of a square matrix of jets via the adjugate (deterministic, n <= 4)."""
    n = len(g)
    det = _jet_matrix_det(g)
    if abs(det.value) < 1e-300:
        raise DomainError("singular constant-term matrix")
    inv_det = det.reciprocal()
    if n == 1:
        return [[inv_det]]
    inv = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [
                [g[r][c] for c in range(n) if c != i]
                for r in range(n) if r != j
            ]
            cof = _jet_matrix_det(minor)
            if (i + j) % 2 == 1:
                cof = -cof
            inv[i][j] = cof * inv_det
    return inv


class MetricAtPoint:
    """A Riemannian metric's jets at one chart point.

    ``g`` is an n x n nested list (or object array) of jets, symmetric
    coefficient-wise, with a positive-definite constant-term matrix.
    """

    def __init__(self, g, point):
        g = [list(row) for row in g]
        n = len(g)
        if any(len(row) != n for row in g):
            raise DimensionMismatch("metric must be square")
        dim = g[0][0].dim
        if dim != n:
            raise DimensionMismatch(
                f"metric size {n} does not match jet dimension {dim}"
            )
        for i in range(n):
            for j in range(n):
                if not np.allclose(g[i][j].coeffs, g[j][i].coeffs, atol=1e-12):
                    raise DomainError(f"metric jets not symmetric at ({i},{j})")
        g0 = np.array([[g[i][j].value for j in range(n)] for i in range(n)])
        try:
            np.linalg.cholesky(g0)
        except np.linalg.LinAlgError:
            raise DomainError("constant-term metric is not positive definite")
        self.n = n
        self.g = g
        self.point = np.asarray(point, dtype=float)
        self.order = min(g[i][j].order for i in range(n) for j in range(n))
        self._gamma = None

    @property
    def matrix(self) -> np.ndarray:
        """Constant-term metric matrix g_ij at the point."""
        return np.array(
            [[self.g[i][j].value for j in range(self.n)] for i in range(self.n)]
        )

    @property
    def inverse_matrix(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    def det_jet(self) -> Jet:
        return _jet_matrix_det(self.g)

    def rescale(self, factor: Jet) -> "MetricAtPoint":
        """Pointwise conformal rescale g -> factor * g (factor a positive jet)."""
        n = self.n
        return MetricAtPoint(
            [[factor * self.g[i][j] for j in range(n)] for i in range(n)],
            self.point,
        )


@dataclass
class CurvatureBundle:
    """Curvature data at the point: Christoffel jets and pointwise tensors."""

    gamma: list           # gamma[k][i][j]: jets of Gamma^k_{ij}
    riem: np.ndarray      # R_{ijkl}, antisymmetric pairs (ij) and (kl)
    ric: np.ndarray       # Ric_ij
    scalar: float

    @property
    def gamma_values(self) -> np.ndarray:
        n = len(self.gamma)
        return np.array(
            [[[self.gamma[k][i][j].value for j in range(n)] for i in range(n)]
             for k in range(n)]
        )


def christoffel(metric: MetricAtPoint):
    """Christoffel symbols Gamma^k_{ij} as jets (metric order - 1)."""
    if metric._gamma is not None:
        return metric._gamma
    if metric.order < 1:
        raise OrderError("christoffel needs metric jets of order >= 1")
    n = metric.n
    ginv = jet_matrix_inverse(metric.g)
    dg = [[[metric.g[i][j].derivative(l) for j in range(n)] for i in range(n)]
          for l in range(n)]
    order = metric.order - 1
    gamma = [[[None] * n for _ in range(n)] for _ in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(i, n):
                acc = Jet.constant(0.0, n, order)
                for l in range(n):
                    acc = acc + ginv[k][l].truncate(order) * (
                        dg[i][j][l] + dg[j][i][l] - dg[l][i][j]
                    )
                gamma[k][i][j] = gamma[k][j][i] = acc * 0.5
    metric._gamma = gamma
    return gamma


def curvature(metric: MetricAtPoint) -> CurvatureBundle:
    """Riemann, Ricci and scalar curvature values at the point."""
    if metric.order < 2:
        raise OrderError("curvature needs metric jets of order >= 2")
    n = metric.n
    gamma = christoffel(metric)
    g0 = metric.matrix
    ginv0 = metric.inverse_matrix
    gv = np.array(
        [[[gamma[k][i][j].value for j in range(n)] for i in range(n)]
         for k in range(n)]
    )
    dgv = np.array(
        [[[[gamma[k][i][j].partial(tuple(int(l == a) for a in range(n)))
            for j in range(n)] for i in range(n)] for k in range(n)]
         for l in range(n)]
    )  # dgv[l, k, i, j] = d_l Gamma^k_{ij}

    # R^a_{bcd} with the antisymmetric derivative pair in (c, d)
    up = (
        np.einsum("cadb->abcd", dgv)
        - np.einsum("dacb->abcd", dgv)
        + np.einsum("ace,edb->abcd", gv, gv)
        - np.einsum("ade,ecb->abcd", gv, gv)
    )
    riem = np.einsum("ae,ebcd->abcd", g0, up)
    ric = np.einsum("abad->bd", up)
    scalar = float(np.einsum("bd,bd->", ginv0, ric))
    return CurvatureBundle(gamma=gamma, riem=riem, ric=ric, scalar=scalar)


def hessian(u: Jet, metric: MetricAtPoint) -> np.ndarray:
    """Covariant Hessian (nabla^2 u)_ij at the point."""
    if u.order < 2:
        raise OrderError("hessian needs a jet of order >= 2")
    n = metric.n
    gamma = christoffel(metric)
    du = np.array([u.partial(tuple(int(i == a) for a in range(n)))
                   for i in range(n)])
    out = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            second = u.partial(tuple(int(i == a) + int(j == a) for a in range(n)))
            corr = sum(gamma[k][i][j].value * du[k] for k in range(n))
            out[i, j] = second - corr
    return out


def gradient(u: Jet, n: int) -> np.ndarray:
    return np.array([u.partial(tuple(int(i == a) for a in range(n)))
                     for i in range(n)])


def laplacian(u: Jet, metric: MetricAtPoint) -> float:
    return float(np.einsum("ij,ij->", metric.inverse_matrix, hessian(u, metric)))


def grad_norm2(u: Jet, metric: MetricAtPoint) -> float:
    du = gradient(u, metric.n)
    return float(du @ metric.inverse_matrix @ du)


def grad_inner(u: Jet, v: Jet, metric: MetricAtPoint) -> float:
    du = gradient(u, metric.n)
    dv = gradient(v, metric.n)
    return float(du @ metric.inverse_matrix @ dv)


def weighted_laplacian(u: Jet, phi: Jet, metric: MetricAtPoint) -> float:
    """Drift Laplacian: Delta u - <grad phi, grad u>_g."""
    return laplacian(u, metric) - grad_inner(phi, u, metric)
