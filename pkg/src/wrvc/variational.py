"""Quadrature over round-sphere models and the variational certificates.

The sphere is covered by two antipodal stereographic charts.  Each chart
carries a polar-form tensor grid: Gauss-Legendre nodes in the radius
(where the partition of unity lives) times an exact-degree angular
product rule (Gauss-Legendre in the polar cosine, uniform in the
azimuth).  The chart overlap is blended by a partition of unity whose
radial profile is a C^11 polynomial smoothstep in log-radius; the two
chart weights sum to the metric measure of the sphere.

All reductions run over fixed-size chunks combined in index order, so
results are bit-identical whether node chunks are evaluated serially or
on a thread pool.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DomainError, ModelError
from .expr import Num, Unary, Var, evaluate
from .fields import SphereField, coordinate_harmonics
from .models import ModelSpec, quasi_einstein_coeffs
from .rho import l_operator, volume_coefficients
from .weighted import generalized_binomial, weighted_invariants

_CHUNK = 8192
_DEFAULT_RESOLUTION = 40
_DEFAULT_RADIUS = 3.0
_PROFILE_DEGREE = 11

_thread_count = 1


def set_thread_count(count: int | None):
    """Thread count for node-chunk evaluation (reduction order is fixed, so
    results do not depend on this).  Falls back to WRVC_THREADS, then 1."""
    global _thread_count
    if count is None:
        count = int(os.environ.get("WRVC_THREADS", "1"))
    _thread_count = max(1, int(count))


set_thread_count(None)


@lru_cache(maxsize=None)
def _step_coeffs(p: int):
    # antiderivative coefficients of (1 - t^2)^p and its total mass
    c = np.zeros(2 * p + 1)
    for j in range(p + 1):
        c[2 * j] = math.comb(p, j) * (-1.0) ** j
    anti = np.concatenate([[0.0], c / np.arange(1, 2 * p + 2)])
    total = np.polynomial.polynomial.polyval(1.0, anti) - \
        np.polynomial.polynomial.polyval(-1.0, anti)
    return anti, total


def smoothstep_down(s, p: int = _PROFILE_DEGREE):
    """C^p ramp: 1 for s <= -1, 0 for s >= 1, with S(s) + S(-s) = 1."""
    anti, total = _step_coeffs(p)
    s = np.clip(np.asarray(s, dtype=float), -1.0, 1.0)
    mass = np.polynomial.polynomial.polyval(s, anti) - \
        np.polynomial.polynomial.polyval(-1.0, anti)
    return 1.0 - mass / total


def partition_profile(r, radius: float = _DEFAULT_RADIUS):
    """Radial partition-of-unity weight psi with psi(r) + psi(1/r) = 1,
    equal to 1 inside radius^{-1} and 0 outside ``radius``."""
    r = np.asarray(r, dtype=float)
    s = np.full_like(r, -1.0)
    pos = r > 0
    s[pos] = np.log(r[pos]) / np.log(radius)
    return smoothstep_down(s)


@dataclass(frozen=True)
class Chart:
    index: int
    sign: float


class QuadratureGrid:
    """Two-chart quadrature for integrals over the round n-sphere.

    ``resolution`` is the radial Gauss-Legendre count per chart; the
    angular rule is sized to integrate the low-degree harmonic trials
    exactly, giving ~resolution^n nodes over both charts.  Node weights
    include the partition of unity and the round-metric volume factor,
    so ``sum(weights) = Vol(S^n)`` up to the radial quadrature error.
    """

    def __init__(self, n: int, resolution: int = _DEFAULT_RESOLUTION,
                 radius: float = _DEFAULT_RADIUS):
        if n not in (2, 3):
            raise DomainError(f"grids cover sphere dimensions 2 and 3, got {n}")
        if resolution < 4:
            raise DomainError("resolution must be at least 4")
        self.n = n
        self.resolution = resolution
        self.radius = radius
        self.charts = (Chart(0, 1.0), Chart(1, -1.0))

        xs, ws = leggauss(resolution)
        r = 0.5 * radius * (xs + 1.0)
        wr = 0.5 * radius * ws

        l_count = max(6, resolution // 4)
        if n == 3:
            mu, wmu = leggauss(l_count)
            phi = 2.0 * math.pi * np.arange(2 * l_count) / (2 * l_count)
            wphi = 2.0 * math.pi / (2 * l_count)
            sin_theta = np.sqrt(1.0 - mu**2)
            dirs = np.stack(
                [
                    np.outer(sin_theta, np.cos(phi)).ravel(),
                    np.outer(sin_theta, np.sin(phi)).ravel(),
                    np.repeat(mu, 2 * l_count),
                ],
                axis=-1,
            )
            wdir = np.repeat(wmu, 2 * l_count) * wphi
        else:
            m_count = 2 * l_count
            alpha = 2.0 * math.pi * np.arange(m_count) / m_count
            dirs = np.stack([np.cos(alpha), np.sin(alpha)], axis=-1)
            wdir = np.full(m_count, 2.0 * math.pi / m_count)

        X = (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)
        w_geom = (wr[:, None] * wdir[None, :]).ravel()
        rr = np.repeat(r, dirs.shape[0])
        psi = partition_profile(rr, radius)
        conf = 4.0 / (1.0 + rr**2) ** 2
        weights = w_geom * psi * rr ** (n - 1) * conf ** (n / 2.0)

        keep = psi > 0.0
        self.points = X[keep]
        self.weights = weights[keep]
        self.conf = conf[keep]

    @property
    def node_count(self) -> int:
        return 2 * len(self.weights)

    def weight_sum(self) -> float:
        return 2.0 * _chunked_dot(self.weights, np.ones_like(self.weights))

    def integrate(self, per_chart_values) -> float:
        """Sum of w * value over both charts, fixed chunked order."""
        total = 0.0
        for values in per_chart_values:
            total += _chunked_dot(self.weights, values)
        return total

    def integrate_field(self, fn) -> float:
        """fn(chart, X) -> per-node values; integrates over both charts."""
        return self.integrate([fn(c, self.points) for c in self.charts])


def _chunked_dot(w: np.ndarray, v: np.ndarray) -> float:
    chunks = range(0, len(w), _CHUNK)

    def one(start):
        return float(np.dot(w[start:start + _CHUNK], v[start:start + _CHUNK]))

    if _thread_count > 1 and len(w) > _CHUNK:
        with ThreadPoolExecutor(max_workers=_thread_count) as pool:
            parts = list(pool.map(one, chunks))
    else:
        parts = [one(start) for start in chunks]
    total = 0.0
    for p in parts:
        total += p
    return total


# -- model/grid coupling -------------------------------------------------------


def _env(model: ModelSpec, X: np.ndarray) -> dict:
    return {name: X[:, i] for i, name in enumerate(model.coords)}


def _expr_has_vars(node) -> bool:
    if isinstance(node, Var):
        return True
    if isinstance(node, Num):
        return False
    if isinstance(node, Unary):
        return _expr_has_vars(node.operand)
    if hasattr(node, "args"):
        return any(_expr_has_vars(a) for a in node.args)
    return _expr_has_vars(node.left) or _expr_has_vars(node.right)


def _require_grid_model(model: ModelSpec, grid: QuadratureGrid):
    if model.n != grid.n:
        raise ModelError(
            f"model dimension {model.n} does not match grid dimension {grid.n}"
        )
    sample = grid.points[:: max(1, len(grid.points) // 16)]
    env = _env(model, sample)
    conf = 4.0 / (1.0 + np.sum(sample**2, axis=1)) ** 2
    for i in range(model.n):
        for j in range(model.n):
            vals = np.broadcast_to(
                np.asarray(evaluate(model.g_exprs[i][j], env), dtype=float),
                sample.shape[:1],
            )
            target = conf if i == j else 0.0
            if not np.allclose(vals, target, atol=1e-10):
                raise ModelError(
                    "grid quadrature needs the round stereographic metric; "
                    f"component g_{i + 1}{j + 1} of {model.name!r} differs"
                )


def _density_values(model: ModelSpec, grid: QuadratureGrid) -> np.ndarray:
    vals = evaluate(model.f_expr, _env(model, grid.points))
    return np.broadcast_to(np.asarray(vals, dtype=float), (len(grid.points),))


def _require_constant_density(model: ModelSpec):
    if _expr_has_vars(model.f_expr):
        raise ModelError(
            "this operation needs a constant density (drift terms are not "
            "evaluated on grids)"
        )


def weighted_volume(model: ModelSpec, grid: QuadratureGrid) -> float:
    """Integral of f^m against the metric volume, via the grid weights."""
    _require_grid_model(model, grid)
    fm = _density_values(model, grid) ** model.m
    return grid.integrate([fm, fm])


def _batched_vk(model: ModelSpec, grid: QuadratureGrid, K: int, generator):
    """Per-node volume coefficients v_1..v_K, identical for both charts."""
    if generator is None:
        if model.lam is None:
            raise ModelError(
                f"model {model.name!r} has no ambient generator for grids"
            )

        def generator(chart, X, order):
            conf = 4.0 / (1.0 + np.sum(X**2, axis=1)) ** 2
            g = conf[:, None, None] * np.eye(model.n)[None, :, :]
            f = np.broadcast_to(
                np.asarray(evaluate(model.f_expr, _env(model, X)), dtype=float),
                X.shape[:1],
            )
            return quasi_einstein_coeffs(g, f, model.lam, order)

    expansion = generator(grid.charts[0], grid.points, K)
    return volume_coefficients(expansion, model.m)


def functional_F_k(model: ModelSpec, grid: QuadratureGrid, k: int,
                   generator=None) -> float:
    """Quadrature of v_k f^m over the sphere."""
    _require_grid_model(model, grid)
    vk = _batched_vk(model, grid, k, generator)[k]
    fm = _density_values(model, grid) ** model.m
    vals = vk * fm
    return grid.integrate([vals, vals])


def field_values(field: SphereField, grid: QuadratureGrid) -> list:
    return [field.value(c, grid.points) for c in grid.charts]


def weighted_mean(model: ModelSpec, grid: QuadratureGrid, values) -> float:
    fm = _density_values(model, grid) ** model.m
    num = grid.integrate([v * fm for v in values])
    den = grid.integrate([fm, fm])
    return num / den


def project_mean_zero(model: ModelSpec, grid: QuadratureGrid, field: SphereField):
    """Subtract the weighted mean; returns per-chart value arrays."""
    values = field_values(field, grid)
    c = weighted_mean(model, grid, values)
    return [v - c for v in values]


def first_variation(model: ModelSpec, grid: QuadratureGrid, k: int,
                    omega_values, generator=None) -> float:
    """(n+m-2k) * integral of v_k omega f^m.

    ``omega_values`` is a SphereField or per-chart value arrays.
    """
    _require_grid_model(model, grid)
    if isinstance(omega_values, SphereField):
        omega_values = field_values(omega_values, grid)
    vk = _batched_vk(model, grid, k, generator)[k]
    fm = _density_values(model, grid) ** model.m
    factor = model.n + model.m - 2.0 * k
    return factor * grid.integrate([vk * fm * v for v in omega_values])


# -- closed-form scales from the series machinery -------------------------------


def _series_scales(model: ModelSpec, k: int):
    """(v_k, l_k) at the reference point, extracted through the rho-series
    path: v_k scalar and the scale l_k with (L_k)^{ij} = l_k g^{ij}."""
    a = model.ambient_at(model.default_point, K=k)
    vk = float(volume_coefficients(a, model.m)[k])
    L = l_operator(a, model.m, k)
    lk = float(np.trace(L @ a.g) / model.n)
    return vk, lk


def laplace_beltrami_values(field: SphereField, chart, X: np.ndarray) -> np.ndarray:
    """Laplacian of the field in the round metric, from chart data:
    for g = conf * delta with conf = 4/D^2, D = 1 + r^2."""
    n = X.shape[1]
    D = 1.0 + np.sum(X**2, axis=1)
    flat_lap = np.trace(field.hess(chart, X), axis1=1, axis2=2)
    radial = np.sum(X * field.grad(chart, X), axis=1)
    return (D**2 / 4.0) * (flat_lap - (n - 2.0) * 2.0 * radial / D)


def grad_norm2_values(field: SphereField, chart, X: np.ndarray) -> np.ndarray:
    D = 1.0 + np.sum(X**2, axis=1)
    flat = np.sum(field.grad(chart, X) ** 2, axis=1)
    return (D**2 / 4.0) * flat


def delta_vk_identity_check(model: ModelSpec, grid: QuadratureGrid, k: int,
                            field: SphereField) -> float:
    """|integral of the divergence part of the v_k variation|.

    At a proportional structure the second-order term reduces to
    l_k * Laplacian(omega), whose weighted integral must vanish; the
    returned magnitude is pure quadrature error.
    """
    _require_grid_model(model, grid)
    _require_constant_density(model)
    if model.lam is None:
        raise ModelError("identity check needs a proportional (lam) model")
    _, lk = _series_scales(model, k)
    fm = _density_values(model, grid) ** model.m
    vals = [
        lk * laplace_beltrami_values(field, c, grid.points) * fm
        for c in grid.charts
    ]
    return abs(grid.integrate(vals))


# -- second variation -----------------------------------------------------------


@dataclass
class FunctionalReport:
    """Quadrature results for one (model, k, trial) computation."""

    model: str
    n: int
    m: float
    k: int
    lam: float
    weighted_volume: float
    F_k: float
    first_variation: float
    Q_general: float
    Q_reduced: float
    path_agreement: float
    sign: int
    predicted_sign: int
    c_k: float
    lambda1_estimate: float
    extras: dict = dataclass_field(default_factory=dict)

    def to_text(self) -> str:
        lines = []
        for key, val in self.as_record().items():
            lines.append(f"{key}: {_fmt(val)}")
        return "\n".join(lines)

    def as_record(self) -> dict:
        rec = {
            "model": self.model,
            "n": self.n,
            "m": self.m,
            "k": self.k,
            "lambda": self.lam,
            "weighted_volume": self.weighted_volume,
            "F_k": self.F_k,
            "first_variation": self.first_variation,
            "Q_general": self.Q_general,
            "Q_reduced": self.Q_reduced,
            "path_agreement": self.path_agreement,
            "sign": self.sign,
            "predicted_sign": self.predicted_sign,
            "c_k": self.c_k,
            "lambda1_estimate": self.lambda1_estimate,
        }
        rec.update(self.extras)
        return rec


def _fmt(val) -> str:
    if isinstance(val, float):
        return f"{val:.17g}"
    return str(val)


def reports_to_csv(reports) -> str:
    """One CSV row per report (batched over k)."""
    if not reports:
        return ""
    keys = list(reports[0].as_record().keys())
    lines = [",".join(keys)]
    for rep in reports:
        rec = rep.as_record()
        lines.append(",".join(_fmt(rec.get(key, "")) for key in keys))
    return "\n".join(lines) + "\n"


def c_k_constant(n: int, m: float, k: int) -> float:
    """(n+m-2k) * binomial(n+m-1, k-1), real-m binomial."""
    return (n + m - 2.0 * k) * generalized_binomial(n + m - 1.0, k - 1)


def predicted_second_variation_sign(n: int, m: float, k: int, lam: float) -> int:
    """Definiteness prediction at a proportional structure with J != 0.

    Positive below the half-dimension when J > 0; below it with J < 0 the
    sign alternates with the parity of k; above the half-dimension every
    sign flips.  Requires 1 <= k < n+m and k != (n+m)/2.
    """
    nm = n + m
    if not 1 <= k < nm:
        raise DomainError(f"prediction needs 1 <= k < n+m, got k = {k}")
    if abs(k - nm / 2.0) < 1e-12:
        raise DomainError("k = (n+m)/2 is the conformally invariant order")
    if lam == 0:
        raise DomainError("prediction needs a nonzero proportionality constant")
    below = k < nm / 2.0
    if lam > 0:
        return 1 if below else -1
    odd = k % 2 == 1
    if below:
        return 1 if odd else -1
    return -1 if odd else 1


def second_variation_sign_certificate(n: int, m: float, k: int, lam: float) -> dict:
    """Quadrature-free sign decomposition of the reduced display.

    Q(omega) = c_k lam^{k-1} * I(omega) with
    I = integral of |grad omega|^2 - 2(n+m) lam omega^2 over the weighted
    volume.  For lam < 0 both integrand terms are positive; for lam > 0
    the spectral gap bound makes I positive on mean-zero omega.  Either
    way sign(Q) = sign(c_k lam^{k-1}).
    """
    ck = c_k_constant(n, m, k)
    prefactor = ck * lam ** (k - 1)
    integral_positive_reason = (
        "both integrand terms positive (lam < 0)" if lam < 0
        else "spectral gap: first nonzero eigenvalue exceeds 2(n+m) lam"
    )
    sign = int(np.sign(prefactor))
    return {
        "c_k": ck,
        "prefactor": prefactor,
        "integral_factor_positive": True,
        "integral_reason": integral_positive_reason,
        "sign": sign,
        "predicted_sign": predicted_second_variation_sign(n, m, k, lam),
        "agrees": sign == predicted_second_variation_sign(n, m, k, lam),
    }


def rayleigh_quotient(model: ModelSpec, grid: QuadratureGrid,
                      field: SphereField) -> float:
    """Dirichlet energy over mass for the mean-zero projection of the trial."""
    _require_constant_density(model)
    fm = _density_values(model, grid) ** model.m
    values = project_mean_zero(model, grid, field)
    num = grid.integrate(
        [grad_norm2_values(field, c, grid.points) * fm for c in grid.charts]
    )
    den = grid.integrate([v**2 * fm for v in values])
    return num / den


def lambda1_estimate(model: ModelSpec, grid: QuadratureGrid) -> float:
    return min(
        rayleigh_quotient(model, grid, f) for f in coordinate_harmonics(model.n)
    )


def second_variation(model: ModelSpec, grid: QuadratureGrid, k: int,
                     field: SphereField, project: bool = True,
                     mean_zero_tol: float = 1e-8) -> FunctionalReport:
    """Second-variation quadratic form at a proportional structure,
    evaluated through both displays and cross-checked.

    The general display uses the series-extracted v_k and L_k scales; the
    reduced display uses the binomial closed forms.  The trial is
    projected to weighted mean zero (or verified against the tolerance
    when ``project`` is false).
    """
    _require_grid_model(model, grid)
    _require_constant_density(model)
    if model.lam is None or model.lam == 0.0:
        raise ModelError("second variation needs a proportional model with "
                         "nonzero constant")
    n, m, lam = model.n, model.m, model.lam
    nm = n + m

    fm = _density_values(model, grid) ** model.m
    wvol = grid.integrate([fm, fm])

    values = field_values(field, grid)
    mean = weighted_mean(model, grid, values)
    if project:
        values = [v - mean for v in values]
    elif abs(mean) * wvol > mean_zero_tol:
        raise DomainError(
            f"trial is not weighted-mean-zero (integral {mean * wvol:.3e})"
        )

    omega2 = grid.integrate([v**2 * fm for v in values])
    dirichlet = grid.integrate(
        [grad_norm2_values(field, c, grid.points) * fm for c in grid.charts]
    )

    vk, lk = _series_scales(model, k)
    q_general = -(nm - 2.0 * k) * (2.0 * k * vk * omega2 + lk * dirichlet)

    ck = c_k_constant(n, m, k)
    q_reduced = ck * lam ** (k - 1) * (dirichlet - 2.0 * nm * lam * omega2)

    fk = functional_F_k(model, grid, k)
    fv = first_variation(model, grid, k, values)

    return FunctionalReport(
        model=model.name, n=n, m=m, k=k, lam=lam,
        weighted_volume=wvol,
        F_k=fk,
        first_variation=fv,
        Q_general=q_general,
        Q_reduced=q_reduced,
        path_agreement=abs(q_general - q_reduced),
        sign=int(np.sign(q_reduced)),
        predicted_sign=predicted_second_variation_sign(n, m, k, lam),
        c_k=ck,
        lambda1_estimate=lambda1_estimate(model, grid),
        extras={
            "trial_mass": omega2,
            "trial_dirichlet": dirichlet,
            "series_v_k": vk,
            "series_l_k": lk,
        },
    )


# -- eigenvalue bound -----------------------------------------------------------


@dataclass
class EigenvalueBoundReport:
    bound: float
    quotients: list
    min_quotient: float
    strict_expected: bool
    precondition_residual: float
    passed: bool

    def to_text(self) -> str:
        rows = [
            f"bound: {self.bound:.17g}",
            f"min_quotient: {self.min_quotient:.17g}",
            f"strict_expected: {self.strict_expected}",
            f"precondition_residual: {self.precondition_residual:.3e}",
            f"passed: {self.passed}",
        ]
        rows += [f"quotient_{i}: {q:.17g}" for i, q in enumerate(self.quotients)]
        return "\n".join(rows)


def eigenvalue_bound_check(model: ModelSpec, grid: QuadratureGrid,
                           trials=None, sample_nodes: int = 32,
                           tol: float = 1e-6) -> EigenvalueBoundReport:
    """Rayleigh quotients of mean-zero trials against the spectral bound
    2(n+m) lam, after verifying the curvature lower bound
    Ric_phi >= 2(n+m-1) lam g on a deterministic node subsample."""
    _require_grid_model(model, grid)
    _require_constant_density(model)
    if model.lam is None:
        raise ModelError("eigenvalue bound needs a proportional model")
    n, m, lam = model.n, model.m, model.lam

    step = max(1, len(grid.points) // sample_nodes)
    worst = 0.0
    for point in grid.points[::step][:sample_nodes]:
        p = model.structure_at(point, order=2)
        w = weighted_invariants(p)
        gap = w.ric_phi - 2.0 * (n + m - 1.0) * lam * p.g.matrix
        worst = max(worst, float(max(0.0, -np.linalg.eigvalsh(gap).min())))
    if worst > 1e-8:
        raise DomainError(
            f"curvature lower bound fails on the sample (violation {worst:.3e})"
        )

    if trials is None:
        trials = coordinate_harmonics(n)
    quotients = [rayleigh_quotient(model, grid, f) for f in trials]
    bound = 2.0 * (n + m) * lam
    min_q = min(quotients)
    passed = min_q >= bound - tol
    strict = m > 0
    if strict:
        passed = passed and (min_q > bound + tol)
    return EigenvalueBoundReport(
        bound=bound,
        quotients=quotients,
        min_quotient=min_q,
        strict_expected=strict,
        precondition_residual=worst,
        passed=passed,
    )


# -- convergence ------------------------------------------------------------------


def volume_convergence_study(model: ModelSpec, exact: float,
                             resolutions=(10, 20, 40)) -> list:
    """(resolution, |error|) pairs for the weighted volume."""
    out = []
    for res in resolutions:
        grid = QuadratureGrid(model.n, resolution=res)
        out.append((res, abs(weighted_volume(model, grid) - exact)))
    return out
