"""Built-in metric measure structures, ambient-expansion generators, and the
plain-text model file format.

A ``ModelSpec`` is symbolic: metric and density components are expression
ASTs over named coordinates, evaluated into jets at any interior chart
point.  Structures carrying a proportionality constant ``lam`` (so that
P = lam g and J = (n+m) lam pointwise) also generate their canonical
ambient expansion g_rho = (1+lam rho)^2 g, f_rho = (1+lam rho) f.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

import numpy as np

from .errors import ModelError
from .expr import Node, evaluate, parse_expression
from .geometry import MetricAtPoint
from .jets import Jet
from .rho import AmbientExpansion, load_ambient_file
from .weighted import MetricMeasurePoint

BUILTIN_NAMES = (
    "euclidean",
    "round_sphere_stereographic",
    "hyperbolic_upper_half",
    "qe_sphere",
)

_COORD_NAMES = ("x", "y", "z", "w")

DEFAULT_ORDER = 4


@dataclass
class ModelSpec:
    """Symbolic definition of a metric measure structure on one chart."""

    name: str
    n: int
    m: float
    mu: float
    coords: tuple
    g_exprs: list              # n x n nested list of expression ASTs
    f_expr: Node
    lam: float | None = None   # proportionality constant, when known
    ambient_file: str | None = None
    default_point: np.ndarray = None
    domain: str = "all points of the chart"

    def __post_init__(self):
        if self.default_point is None:
            self.default_point = np.zeros(self.n)
        self.default_point = np.asarray(self.default_point, dtype=float)

    # -- pointwise evaluation ------------------------------------------

    def _env(self, point, order):
        point = np.asarray(point, dtype=float)
        if point.shape != (self.n,):
            raise ModelError(
                f"model {self.name!r} needs a point with {self.n} coordinates"
            )
        return {
            name: Jet.variable(i, point[i], self.n, order)
            for i, name in enumerate(self.coords)
        }

    def metric_at(self, point, order: int = DEFAULT_ORDER) -> MetricAtPoint:
        env = self._env(point, order)
        zero = Jet.constant(0.0, self.n, order)
        g = [[None] * self.n for _ in range(self.n)]
        for i in range(self.n):
            for j in range(self.n):
                val = evaluate(self.g_exprs[i][j], env)
                if not isinstance(val, Jet):
                    val = zero + float(val)
                g[i][j] = val
        return MetricAtPoint(g, point)

    def density_at(self, point, order: int = DEFAULT_ORDER) -> Jet:
        val = evaluate(self.f_expr, self._env(point, order))
        if not isinstance(val, Jet):
            val = Jet.constant(float(val), self.n, order)
        return val

    def structure_at(self, point, order: int = DEFAULT_ORDER) -> MetricMeasurePoint:
        return MetricMeasurePoint(
            self.metric_at(point, order),
            self.density_at(point, order),
            self.m,
            self.mu,
        )

    def ambient_at(self, point, K: int) -> AmbientExpansion:
        """The model's ambient expansion at one chart point."""
        if self.lam is not None:
            g0 = self.metric_at(point, order=0).matrix
            f0 = self.density_at(point, order=0).value
            return quasi_einstein_coeffs(g0, f0, self.lam, K)
        if self.ambient_file is not None:
            expansion, _, _ = load_ambient_file(self.ambient_file)
            return expansion
        raise ModelError(
            f"model {self.name!r} carries no ambient generator "
            "(no proportionality constant and no coefficient file)"
        )

    def random_points(self, rng, count: int) -> np.ndarray:
        """Sample points in the documented interior region of the chart."""
        pts = rng.uniform(-0.8, 0.8, size=(count, self.n))
        if self.name == "hyperbolic_upper_half":
            pts[:, -1] = rng.uniform(0.5, 1.8, size=count)
        return pts


# -- builtin structures ---------------------------------------------------


def _delta_exprs(n, diagonal: str):
    g = [[parse_expression("0") for _ in range(n)] for _ in range(n)]
    for i in range(n):
        g[i][i] = parse_expression(diagonal)
    return g


def _r2_text(n):
    return "+".join(f"{_COORD_NAMES[i]}^2" for i in range(n))


def builtin_model(name: str, n: int = 3, m: float | None = None,
                  mu: float | None = None) -> ModelSpec:
    """Construct one of the built-in structures.

    euclidean / round_sphere_stereographic / hyperbolic_upper_half default
    to m = 0 with f = 1 (a caller may set m > 0, keeping the constant
    density); qe_sphere(n, m, mu) needs m > 1 and mu > 0 and carries the
    constant density that balances the proportionality conditions.
    """
    if name not in BUILTIN_NAMES:
        raise ModelError(
            f"unknown model {name!r}; available: {', '.join(BUILTIN_NAMES)}"
        )
    if not 2 <= n <= 4:
        raise ModelError(f"built-in models support 2 <= n <= 4, got n = {n}")
    coords = _COORD_NAMES[:n]
    if name == "qe_sphere":
        m = 2.0 if m is None else float(m)
        mu = 1.0 if mu is None else float(mu)
        if m <= 1 or mu <= 0:
            raise ModelError(
                f"qe_sphere needs m > 1 and mu > 0 (got m = {m}, mu = {mu}): "
                "the constant density would not be real"
            )
        c2 = (m - 1) * mu / (n - 1)
        lam = (n - 1) / (2.0 * (n + m - 1))
        return ModelSpec(
            name=name, n=n, m=m, mu=mu, coords=coords,
            g_exprs=_delta_exprs(n, f"4/(1+{_r2_text(n)})^2"),
            f_expr=parse_expression(f"{np.sqrt(c2):.17g}"),
            lam=lam,
            domain="any chart point (the chart covers the sphere minus a point)",
        )

    m = 0.0 if m is None else float(m)
    mu = 0.0 if mu is None else float(mu)
    f_expr = parse_expression("1")
    if name == "euclidean":
        return ModelSpec(
            name=name, n=n, m=m, mu=mu, coords=coords,
            g_exprs=_delta_exprs(n, "1"), f_expr=f_expr, lam=0.0,
            domain="all of the chart",
        )
    if name == "round_sphere_stereographic":
        lam = 0.5 if m == 0 else None
        return ModelSpec(
            name=name, n=n, m=m, mu=mu, coords=coords,
            g_exprs=_delta_exprs(n, f"4/(1+{_r2_text(n)})^2"),
            f_expr=f_expr, lam=lam,
            domain="any chart point (the chart covers the sphere minus a point)",
        )
    # hyperbolic_upper_half
    lam = -0.5 if m == 0 else None
    last = coords[-1]
    spec = ModelSpec(
        name=name, n=n, m=m, mu=mu, coords=coords,
        g_exprs=_delta_exprs(n, f"{last}^-2"), f_expr=f_expr, lam=lam,
        domain=f"points with {last} > 0",
    )
    spec.default_point = np.zeros(n)
    spec.default_point[-1] = 1.0
    return spec


# -- ambient generators -----------------------------------------------------


def quasi_einstein_coeffs(g, f, lam: float, K: int) -> AmbientExpansion:
    """Expansion of g_rho = (1+lam rho)^2 g, f_rho = (1+lam rho) f.

    Works batched: g may be (..., n, n) with f (...,) matching.
    """
    if K < 1:
        raise ModelError("ambient expansion needs K >= 1")
    g = np.asarray(g, dtype=float)
    f = np.asarray(f, dtype=float)
    gcoeffs = np.zeros((K + 1,) + g.shape)
    fcoeffs = np.zeros((K + 1,) + f.shape)
    gcoeffs[0] = g
    gcoeffs[1] = 2.0 * lam * g
    if K >= 2:
        gcoeffs[2] = lam**2 * g
    fcoeffs[0] = f
    fcoeffs[1] = lam * f
    return AmbientExpansion(
        gcoeffs=gcoeffs, fcoeffs=fcoeffs, self_consistent=True
    )


def quasi_einstein_ambient(spec: ModelSpec, point, K: int) -> AmbientExpansion:
    """The canonical expansion of a model carrying a proportionality constant."""
    if spec.lam is None:
        raise ModelError(f"model {spec.name!r} has no proportionality constant")
    g0 = spec.metric_at(point, order=0).matrix
    f0 = spec.density_at(point, order=0).value
    return quasi_einstein_coeffs(g0, f0, spec.lam, K)


def lcf_candidate_ambient(g, f, P, Y: float, m: float, K: int) -> AmbientExpansion:
    """Conformally-flat-type expansion from pointwise data (P, Y):

        g_rho = g (1 + rho g^{-1}P)^2 = g + 2 rho P + rho^2 P g^{-1} P,
        f_rho = f (1 + rho Y/m).

    The density slope Y/m is taken to be 0 at m = 0 (where Y vanishes).
    """
    if K < 1:
        raise ModelError("ambient expansion needs K >= 1")
    g = np.asarray(g, dtype=float)
    P = np.asarray(P, dtype=float)
    f = np.asarray(f, dtype=float)
    A = np.linalg.solve(g, P)
    gcoeffs = np.zeros((K + 1,) + g.shape)
    fcoeffs = np.zeros((K + 1,) + f.shape)
    gcoeffs[0] = g
    gcoeffs[1] = 2.0 * P
    if K >= 2:
        gcoeffs[2] = P @ A
    fcoeffs[0] = f
    fcoeffs[1] = f * (Y / m if m > 0 else 0.0)
    return AmbientExpansion(gcoeffs=gcoeffs, fcoeffs=fcoeffs, self_consistent=True)


# -- model files --------------------------------------------------------------


def load_model_file(path) -> ModelSpec:
    """Read the key/value model format.

    Sections: [space] with n, m, mu and optional coords; [metric] with
    component expressions g_ij (1-based indices, lower triangle
    sufficient, missing off-diagonal entries default to 0); [density]
    with f; optional [ambient] with lambda or a coefficients file path.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = cp.read(path)
    if not read:
        raise ModelError(f"cannot read model file {path!r}")
    if "space" not in cp or "metric" not in cp:
        raise ModelError("model file needs [space] and [metric] sections")
    try:
        n = cp.getint("space", "n")
        m = cp.getfloat("space", "m", fallback=0.0)
        mu = cp.getfloat("space", "mu", fallback=0.0)
    except ValueError as exc:
        raise ModelError(f"bad [space] entry: {exc}")
    if not 1 <= n <= 4:
        raise ModelError(f"model dimension must be 1..4, got {n}")
    coords_raw = cp.get("space", "coords", fallback=", ".join(_COORD_NAMES[:n]))
    coords = tuple(c.strip() for c in coords_raw.split(",") if c.strip())
    if len(coords) != n:
        raise ModelError(
            f"expected {n} coordinate names, got {len(coords)}: {coords}"
        )

    g_exprs = [[parse_expression("0") for _ in range(n)] for _ in range(n)]
    seen = set()
    for key, text in cp.items("metric"):
        if not (key.startswith("g_") and len(key) == 4):
            raise ModelError(f"bad metric key {key!r}; use g_ij with 1-based i, j")
        i, j = int(key[2]) - 1, int(key[3]) - 1
        if not (0 <= i < n and 0 <= j < n):
            raise ModelError(f"metric key {key!r} outside the {n}x{n} range")
        ast = parse_expression(text)
        g_exprs[i][j] = ast
        g_exprs[j][i] = ast
        seen.add((min(i, j), max(i, j)))
    for i in range(n):
        if (i, i) not in seen:
            raise ModelError(f"missing diagonal metric component g_{i + 1}{i + 1}")

    f_text = cp.get("density", "f", fallback="1")
    f_expr = parse_expression(f_text)

    lam = None
    ambient_file = None
    if "ambient" in cp:
        if cp.has_option("ambient", "lambda"):
            lam = cp.getfloat("ambient", "lambda")
        if cp.has_option("ambient", "coefficients"):
            ambient_file = cp.get("ambient", "coefficients")

    default_point = np.zeros(n)
    if cp.has_option("space", "point"):
        vals = [v.strip() for v in cp.get("space", "point").split(",")]
        if len(vals) != n:
            raise ModelError(f"default point needs {n} coordinates")
        default_point = np.array([float(v) for v in vals])

    return ModelSpec(
        name=str(path), n=n, m=m, mu=mu, coords=coords,
        g_exprs=g_exprs, f_expr=f_expr, lam=lam,
        ambient_file=ambient_file, default_point=default_point,
    )
