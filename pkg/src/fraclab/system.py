"""Symbol-level description of coupled quadratic parabolic systems.

Component i evolves as::

    d_t u_i + (-Delta)^(alpha_i/2) u_i + sum_jk Q_ijk(u_j u_k) + sum_j L_ij(u_j) = 0

where Q_ijk has a Fourier symbol homogeneous of order one and L_ij a bounded
symbol homogeneous of order zero. Symbol tables are sparse dictionaries keyed
by 0-based index tuples; absent entries are the zero symbol. All homogeneous
symbols are set to 0 at xi = 0.
"""

from __future__ import annotations

import ast
import hashlib
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from .spectral import FourierGrid, SpectralField, _to_physical, _to_spectral, dealias, evaluate_symbol

PRESETS = ("NavierStokes", "MHD", "Boussinesq", "KellerSegel", "Burgers1D")


@dataclass(frozen=True)
class Symbol:
    """Fourier symbol ``func(xi_1, ..., xi_d)`` with its claimed homogeneity order."""

    func: Callable[..., np.ndarray]
    order: int
    label: str = ""

    def __call__(self, *xi):
        return self.func(*xi)


# -- homogeneity checks --------------------------------------------------------


@dataclass(frozen=True)
class HomogeneityResult:
    passed: bool
    max_deviation: float
    sup_on_sphere: float


def sphere_samples(dimension: int, count: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, dimension))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def check_homogeneity(
    symbol: Callable,
    order: int,
    dimension: int,
    sample_count: int = 64,
    tol: float = 1e-12,
    scales=(0.5, 2.0, 10.0),
    seed: int = 0,
) -> HomogeneityResult:
    """Sample ``|m(lam xi) - lam^order m(xi)| <= tol (1 + |m(xi)|)`` on the unit sphere."""
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order}")
    xi = sphere_samples(dimension, sample_count, seed)

    def ev(points):
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.asarray(symbol(*points.T), dtype=complex)
        val = np.broadcast_to(val, (len(points),))
        if not np.all(np.isfinite(val)):
            raise FloatingPointError("symbol evaluation failed on a sphere sample")
        return val

    base = ev(xi)
    worst = 0.0
    for lam in scales:
        dev = np.abs(ev(lam * xi) - lam**order * base) / (1 + np.abs(base))
        worst = max(worst, float(dev.max()))
    return HomogeneityResult(worst <= tol, worst, float(np.abs(base).max()))


# -- Leray projector ------------------------------------------------------------


def leray_projector(xi) -> np.ndarray:
    """``P = I - xi xi^T / |xi|^2``; the zero matrix at xi = 0."""
    xi = np.asarray(xi, dtype=float)
    d = xi.size
    n2 = float(xi @ xi)
    if n2 == 0.0:
        return np.zeros((d, d))
    return np.eye(d) - np.outer(xi, xi) / n2


def leray_entry(m: int, l: int) -> Callable:
    """Scalar symbol ``P_ml(xi)`` (0 at the origin)."""

    def p(*xi):
        r2 = sum(x**2 for x in xi)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (1.0 if m == l else 0.0) - xi[m] * xi[l] / r2
        return np.where(r2 == 0, 0.0, val)

    return p


def leray_project(field: SpectralField, components=None) -> SpectralField:
    """Project the listed components (a d-vector block) onto divergence-free fields."""
    grid = field.grid
    d = grid.dimension
    comps = list(range(d)) if components is None else list(components)
    if len(comps) != d:
        raise ValueError(f"a velocity block needs {d} components, got {len(comps)}")
    xi = grid.wavenumbers
    r2 = grid.xi_norm**2
    safe = np.where(r2 == 0, 1.0, r2)
    block = field.coeffs[comps]
    div = sum(xi[l] * block[l] for l in range(d))
    out = np.array(field.coeffs)
    for m, c in enumerate(comps):
        out[c] = np.where(r2 == 0, 0.0, block[m] - xi[m] * div / safe)
    return field.with_coeffs(out)


def divergence_defect(field: SpectralField, components) -> float:
    """``|| xi . u_hat ||_2 / || |xi| u_hat ||_2`` for a vector block (0 for a zero block)."""
    grid = field.grid
    block = field.coeffs[list(components)]
    div = sum(x * block[l] for l, x in enumerate(grid.wavenumbers))
    scale = np.sqrt(np.sum(grid.xi_norm**2 * np.abs(block) ** 2))
    if scale == 0:
        return 0.0
    return float(np.sqrt(np.sum(np.abs(div) ** 2)) / scale)


# -- system instances -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SystemSpec:
    name: str
    grid: FourierGrid
    alpha: np.ndarray
    q_table: dict
    l_table: dict
    initial_data: SpectralField
    sobolev_index: float
    divergence_blocks: tuple = ()

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float)).copy()
        if alpha.size == 1 and self.initial_data.n > 1:
            alpha = np.full(self.initial_data.n, alpha[0])
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        n = self.n
        if alpha.size != n:
            raise ValueError(f"alpha has {alpha.size} entries for {n} components")
        if np.any(alpha <= 1):
            raise ValueError(f"every alpha_i must exceed 1 for the existence theory, got {alpha.tolist()}")
        if self.initial_data.grid != self.grid:
            raise ValueError("initial data lives on a different grid")
        if not self.initial_data.hermitian:
            raise ValueError("initial data must be real (Hermitian coefficients)")
        d = self.grid.dimension
        if not self.sobolev_index > d / 2:
            raise ValueError(f"Sobolev index s={self.sobolev_index} must exceed d/2={d / 2}")
        for key in self.q_table:
            if len(key) != 3 or not all(0 <= x < n for x in key):
                raise ValueError(f"bad Q index {key} for n={n}")
        for key in self.l_table:
            if len(key) != 2 or not all(0 <= x < n for x in key):
                raise ValueError(f"bad L index {key} for n={n}")

    @property
    def n(self) -> int:
        return self.initial_data.n

    def with_alpha(self, alpha) -> "SystemSpec":
        return SystemSpec(self.name, self.grid, alpha, self.q_table, self.l_table,
                          self.initial_data, self.sobolev_index, self.divergence_blocks)

    def with_initial_data(self, data: SpectralField) -> "SystemSpec":
        return SystemSpec(self.name, self.grid, self.alpha, self.q_table, self.l_table,
                          data, self.sobolev_index, self.divergence_blocks)

    def without_symbols(self) -> "SystemSpec":
        return SystemSpec(self.name + "-linear", self.grid, self.alpha, {}, {},
                          self.initial_data, self.sobolev_index, self.divergence_blocks)

    @cached_property
    def q_values(self) -> dict:
        return {k: evaluate_symbol(s, self.grid, at_zero=0.0) for k, s in self.q_table.items()}

    @cached_property
    def l_values(self) -> dict:
        return {k: evaluate_symbol(s, self.grid, at_zero=0.0) for k, s in self.l_table.items()}

    @cached_property
    def product_pairs(self) -> list:
        """Unordered (j, k) pairs whose products enter some Q entry."""
        return sorted({tuple(sorted(key[1:])) for key in self.q_table})

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.name, self.grid, self.alpha.tolist(), self.sobolev_index)).encode())
        h.update(repr(sorted((k, s.label) for k, s in self.q_table.items())).encode())
        h.update(repr(sorted((k, s.label) for k, s in self.l_table.items())).encode())
        h.update(np.ascontiguousarray(self.initial_data.coeffs).tobytes())
        return h.hexdigest()[:16]


# -- evaluation of the forcing -----------------------------------------------------


def quadratic_term(spec: SystemSpec, u: np.ndarray, v: np.ndarray | None = None) -> np.ndarray:
    """Coefficients of ``sum_jk Q_ijk(u_j v_k)`` for every i (v defaults to u)."""
    grid = spec.grid
    # leading axis indexes components; any extra axes (e.g. time) ride along
    out = np.zeros((spec.n,) + u.shape[1:], dtype=complex)
    if not spec.q_table:
        return out
    needed = sorted({c for key in spec.q_table for c in key[1:]})
    pu = {c: _to_physical(dealias(u[c], grid), grid) for c in needed}
    if v is None:
        pv = pu
        products = {}
        for j, k in spec.product_pairs:
            products[(j, k)] = dealias(_to_spectral(pu[j] * pu[k], grid), grid)
            products[(k, j)] = products[(j, k)]
    else:
        pv = {c: _to_physical(dealias(v[c], grid), grid) for c in needed}
        products = {}
        for key in spec.q_table:
            j, k = key[1:]
            if (j, k) not in products:
                products[(j, k)] = dealias(_to_spectral(pu[j] * pv[k], grid), grid)
    for (i, j, k), q in spec.q_values.items():
        out[i] += q * products[(j, k)]
    return out


def linear_term(spec: SystemSpec, u: np.ndarray) -> np.ndarray:
    """Coefficients of ``sum_j L_ij(u_j)`` for every i."""
    out = np.zeros((spec.n,) + u.shape[1:], dtype=complex)
    for (i, j), ell in spec.l_values.items():
        out[i] += ell * u[j]
    return out


def nonlinearity_eval(spec: SystemSpec, fields: SpectralField) -> SpectralField:
    """Full forcing N_i = sum_jk Q_ijk(u_j u_k) + sum_j L_ij(u_j).

    Sign convention: N enters the left-hand side, so ``d_t u = -|xi|^alpha u - N``.
    """
    if fields.grid != spec.grid or fields.n != spec.n:
        raise ValueError("field does not match the system's grid / component count")
    c = fields.coeffs
    return fields.with_coeffs(quadratic_term(spec, c) + linear_term(spec, c))


# -- presets ------------------------------------------------------------------------


def _transport_symbol(proj: Callable, k: int, sign: float = 1.0) -> Callable:
    """``sign * P_ml(xi) * i xi_k``: one entry of P div(a (x) b)."""

    def q(*xi):
        return sign * proj(*xi) * 1j * xi[k]

    return q


def _ns_block(q: dict, d: int, out: int, first: int, second: int, sign: float, tag: str):
    """Entries of ``sign * P div(a (x) b)`` with a = comps first.., b = comps second.., into out.."""
    for m in range(d):
        for l in range(d):
            proj = leray_entry(m, l)
            for k in range(d):
                q[(out + m, first + l, second + k)] = Symbol(
                    _transport_symbol(proj, k, sign), 1, f"{tag}:{sign:+g}P{m}{l}*i*xi{k}"
                )


def _keller_segel_symbol(m: int, j: int, k: int) -> Callable:
    """``-i xi_m xi_j xi_k / |xi|^2 + [j == k] i xi_m / 2``."""

    def q(*xi):
        r2 = sum(x**2 for x in xi)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = -1j * xi[m] * xi[j] * xi[k] / r2
        val = np.where(r2 == 0, 0.0, val)
        if j == k:
            val = val + 0.5j * xi[m]
        return val

    return q


def preset_symbols(model: str, dimension: int) -> tuple[dict, dict, tuple]:
    """Q table, L table and divergence-free blocks for a named model."""
    q: dict = {}
    ell: dict = {}
    d = dimension
    if model == "NavierStokes":
        _ns_block(q, d, 0, 0, 0, 1.0, "uu")
        blocks = (tuple(range(d)),)
    elif model == "MHD":
        _ns_block(q, d, 0, 0, 0, 1.0, "uu")
        _ns_block(q, d, 0, d, d, -1.0, "bb")
        _ns_block(q, d, d, d, 0, 1.0, "bu")
        _ns_block(q, d, d, 0, d, -1.0, "ub")
        blocks = (tuple(range(d)), tuple(range(d, 2 * d)))
    elif model == "Boussinesq":
        _ns_block(q, d, 0, 0, 0, 1.0, "uu")
        for m in range(d):
            proj = leray_entry(m, d - 1)
            # buoyancy -P(theta e_d) with unit gravity
            ell[(m, d)] = Symbol(lambda *xi, p=proj: -p(*xi), 0, f"-P{m}{d - 1}")
        for k in range(d):
            # div(theta u)
            q[(d, d, k)] = Symbol(lambda *xi, k=k: 1j * xi[k], 1, f"i*xi{k}")
        blocks = (tuple(range(d)),)
    elif model == "KellerSegel":
        for m in range(d):
            for j in range(d):
                for k in range(d):
                    q[(m, j, k)] = Symbol(_keller_segel_symbol(m, j, k), 1, f"ks{m}{j}{k}")
        blocks = ()
    elif model == "Burgers1D":
        # (1/2) d_x (u^2) = u u_x
        q[(0, 0, 0)] = Symbol(lambda xi: 0.5j * xi, 1, "0.5*i*xi")
        blocks = ()
    else:
        raise ValueError(f"unknown model {model!r}; choose one of {PRESETS}")
    return q, ell, blocks


def preset_shape(model: str) -> tuple[tuple[int, ...], Callable[[int], int]]:
    """Admissible dimensions and the component count as a function of d."""
    table = {
        "NavierStokes": ((3,), lambda d: d),
        "MHD": ((3,), lambda d: 2 * d),
        "Boussinesq": ((3,), lambda d: d + 1),
        "KellerSegel": ((1, 2), lambda d: d),
        "Burgers1D": ((1,), lambda d: 1),
    }
    if model not in table:
        raise ValueError(f"unknown model {model!r}; choose one of {PRESETS}")
    return table[model]


def build_preset(
    model: str,
    grid: FourierGrid,
    alpha,
    initial_data: SpectralField,
    sobolev_index: float | None = None,
) -> SystemSpec:
    """Assemble a named model; velocity and magnetic blocks of the data are Leray-projected."""
    dims, count = preset_shape(model)
    d = grid.dimension
    if d not in dims:
        raise ValueError(f"{model} needs dimension in {dims}, grid has d={d}")
    if initial_data.n != count(d):
        raise ValueError(f"{model} in d={d} has {count(d)} components, data has {initial_data.n}")
    q, ell, blocks = preset_symbols(model, d)
    data = initial_data
    for block in blocks:
        data = leray_project(data, block)
    s = sobolev_index if sobolev_index is not None else math.floor(d / 2) + 1
    return SystemSpec(model, grid, alpha, q, ell, data, s, blocks)


# -- symbol expressions (custom systems) ---------------------------------------------

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_ALLOWED_UNARY = (ast.UAdd, ast.USub)


class ExpressionError(ValueError):
    pass


def _validate_expression(tree: ast.AST, names: set, functions: set):
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.Load)):
            continue
        if isinstance(node, ast.BinOp):
            if not isinstance(node.op, _ALLOWED_BINOPS):
                raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, _ALLOWED_UNARY):
                raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float, complex)):
                raise ExpressionError(f"constant {node.value!r} not allowed")
        elif isinstance(node, ast.Name):
            if node.id not in names and node.id not in functions:
                raise ExpressionError(f"unknown name {node.id!r}")
        elif isinstance(node, ast.Call):
            if not (isinstance(node.func, ast.Name) and node.func.id in functions) or node.keywords:
                raise ExpressionError("only plain calls of whitelisted functions are allowed")
        elif isinstance(node, (ast.operator, ast.unaryop)):
            continue
        else:
            raise ExpressionError(f"syntax {type(node).__name__} not allowed")


def parse_symbol(text: str, dimension: int, order: int) -> Symbol:
    """Compile a symbol written with ``xi1..xi3``, ``absxi`` (= |xi|) and ``I`` (= sqrt(-1)).

    Example: ``"-I*xi1*xi1*xi1/absxi**2 + 0.5*I*xi1"``.
    """
    names = {f"xi{a + 1}" for a in range(dimension)} | {"absxi", "I"}
    try:
        tree = ast.parse(str(text), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse symbol {text!r}: {exc.msg}") from None
    _validate_expression(tree, names, set())
    code = compile(tree, "<symbol>", "eval")

    def func(*xi):
        env = {f"xi{a + 1}": np.asarray(x, dtype=float) for a, x in enumerate(xi)}
        env["absxi"] = np.sqrt(sum(np.asarray(x, dtype=float) ** 2 for x in xi))
        env["I"] = 1j
        with np.errstate(divide="ignore", invalid="ignore"):
            val = eval(code, {"__builtins__": {}}, env)
        return np.where(env["absxi"] == 0, 0.0, val)

    return Symbol(func, order, str(text))


_PHYSICAL_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "tanh": np.tanh, "sqrt": np.sqrt}


def evaluate_physical_expression(text: str, grid: FourierGrid) -> np.ndarray:
    """Evaluate a real expression of ``x1..x3`` (and sin, cos, exp, tanh, sqrt, pi) on the grid."""
    names = {f"x{a + 1}" for a in range(grid.dimension)} | {"pi", "L"}
    try:
        tree = ast.parse(str(text), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from None
    _validate_expression(tree, names, set(_PHYSICAL_FUNCS))
    env = {f"x{a + 1}": x for a, x in enumerate(grid.coordinates())}
    env.update(pi=math.pi, L=grid.length, **_PHYSICAL_FUNCS)
    val = eval(compile(tree, "<expr>", "eval"), {"__builtins__": {}}, env)
    val = np.broadcast_to(np.asarray(val, dtype=float), grid.shape)
    return np.array(val)


@dataclass(frozen=True)
class CustomSystem:
    """Symbol tables written as expressions; picklable, compiled on demand.

    ``q`` holds ``((i, j, k), text)`` pairs of order-1 symbols and ``l`` holds
    ``((i, j), text)`` pairs of order-0 symbols.
    """

    n: int
    q: tuple = ()
    l: tuple = ()
    divergence_blocks: tuple = ()
    name: str = "custom"

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"component count must be positive, got {self.n}")
        for key, _ in self.q:
            if len(key) != 3 or not all(0 <= x < self.n for x in key):
                raise ValueError(f"bad Q index {key} for n={self.n}")
        for key, _ in self.l:
            if len(key) != 2 or not all(0 <= x < self.n for x in key):
                raise ValueError(f"bad L index {key} for n={self.n}")

    def tables(self, dimension: int) -> tuple[dict, dict]:
        q = {tuple(k): parse_symbol(t, dimension, 1) for k, t in self.q}
        ell = {tuple(k): parse_symbol(t, dimension, 0) for k, t in self.l}
        return q, ell

    def build(self, grid: FourierGrid, alpha, initial_data: SpectralField,
              sobolev_index: float | None = None) -> SystemSpec:
        if initial_data.n != self.n:
            raise ValueError(f"system has {self.n} components, data has {initial_data.n}")
        q, ell = self.tables(grid.dimension)
        data = initial_data
        for block in self.divergence_blocks:
            data = leray_project(data, block)
        d = grid.dimension
        s = sobolev_index if sobolev_index is not None else math.floor(d / 2) + 1
        return SystemSpec(self.name, grid, alpha, q, ell, data, s, tuple(self.divergence_blocks))
