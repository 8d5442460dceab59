"""Mild solutions: existence times, Duhamel operators, Picard and ETD solvers.

The mild form used here is the one consistent with the forcing sitting on the
left-hand side of the evolution equation::

    u_i(t) = h_i(t) * u_0i - sum_j int_0^t h_i(t - tau) * L_ij(u_j) dtau
                          - sum_jk int_0^t h_i(t - tau) * Q_ijk(u_j u_k) dtau

i.e. the fixed-point problem ``e = e_0 - A(e) - B(e, e)`` with A and B the
positive Duhamel integrals. All existence times are relative to the generic
constant C (default 1).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, ConfigError, NonConvergenceError
from .kernels import semigroup_symbol
from .spectral import Hs, SpectralField, component_norms, dealiased_product, norm
from .system import SystemSpec, linear_term, quadratic_term

GLOBAL_PICARD = "GlobalPicard"
ETD_MARCHING = "ETDMarching"


# -- existence times -------------------------------------------------------------


def _validate_constant(C: float):
    if not C > 0:
        raise ValueError(f"generic constant C must be positive, got {C}")


def existence_time_alpha(alpha, data_norms, n: int | None = None, C: float = 1.0) -> float:
    """Picard window ``T_alpha`` for fractional powers ``alpha`` and data H^s norms."""
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    norms = np.atleast_1d(np.asarray(data_norms, dtype=float))
    n = alpha.size if n is None else n
    _validate_constant(C)
    if np.any(alpha <= 1):
        raise ValueError(f"existence time degenerates unless every alpha_i > 1, got {alpha.tolist()}")
    if np.any(norms < 0):
        raise ValueError("data norms must be nonnegative")
    best = 1.0 / (3 * n * C)
    for a in alpha:
        for u in norms:
            if u == 0:
                continue  # this branch is +inf
            with np.errstate(over="ignore"):  # tiny data: the branch tends to +inf
                best = min(best, ((1 - 1 / a) / (9 * n**2 * C * u)) ** (a / (a - 1)))
    return 0.5 * best


def existence_time_classical(data_norms, n: int | None = None, C: float = 1.0) -> float:
    """Picard window ``T_2`` of the classical (alpha = 2) system."""
    norms = np.atleast_1d(np.asarray(data_norms, dtype=float))
    n = norms.size if n is None else n
    _validate_constant(C)
    if np.any(norms < 0):
        raise ValueError("data norms must be nonnegative")
    best = 1.0 / (3 * n * C)
    for u in norms:
        if u > 0:
            best = min(best, (1 / (18 * n**2 * C * u)) ** 2)
    return 0.5 * best


def phi_floor(delta: float, beta_min: float, norm_classical: float, n: int, C: float = 1.0) -> float:
    """``(1 - 1/(2 - delta)) / (9 n^2 C ||u_02|| + delta^beta)``."""
    return (1 - 1 / (2 - delta)) / (9 * n**2 * C * norm_classical + delta**beta_min)


def existence_time_floor(delta: float, beta_min: float, classical_norms, n: int | None = None,
                         C: float = 1.0) -> float:
    """alpha-independent lower bound ``T_0`` on ``T_alpha`` over the delta-window."""
    if not 0 < delta < 1 / 6:
        raise ValueError(f"delta must lie in (0, 1/6), got {delta}")
    if not beta_min > 0:
        raise ValueError(f"beta must be positive, got {beta_min}")
    _validate_constant(C)
    norms = np.atleast_1d(np.asarray(classical_norms, dtype=float))
    n = norms.size if n is None else n
    best = 1.0 / (3 * n * C)
    for u in norms:
        phi = phi_floor(delta, beta_min, u, n, C)
        with np.errstate(over="ignore"):
            best = min(best, phi ** ((2 + delta) / (1 - delta)), phi ** ((2 - delta) / (1 + delta)))
    return 0.5 * best


def data_norms(spec: SystemSpec) -> np.ndarray:
    return component_norms(spec.initial_data, Hs(spec.sobolev_index))


def existence_time_for(spec: SystemSpec, C: float = 1.0) -> float:
    return existence_time_alpha(spec.alpha, data_norms(spec), spec.n, C)


# -- configuration and trajectories -----------------------------------------------


@dataclass(frozen=True)
class SolverConfig:
    substeps: int = 512
    picard_tol: float = 1e-10
    picard_max_iters: int = 50
    generic_constant: float = 1.0
    mode: str = ETD_MARCHING
    dt: float | None = None
    enforce_existence: bool = False

    def __post_init__(self):
        if self.substeps < 1:
            raise ValueError(f"substeps must be a positive integer, got {self.substeps}")
        if not 0 < self.picard_tol < 1:
            raise ValueError(f"picard_tol must lie in (0, 1), got {self.picard_tol}")
        if self.picard_max_iters < 1:
            raise ValueError("picard_max_iters must be positive")
        _validate_constant(self.generic_constant)
        if self.mode not in (GLOBAL_PICARD, ETD_MARCHING):
            raise ValueError(f"mode must be {GLOBAL_PICARD} or {ETD_MARCHING}, got {self.mode!r}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"time step must be positive, got {self.dt}")

    def time_nodes(self, T: float) -> np.ndarray:
        if not T > 0:
            raise ValueError(f"horizon must be positive, got {T}")
        steps = self.substeps if self.dt is None else max(1, math.ceil(T / self.dt - 1e-12))
        return np.linspace(0.0, T, steps + 1)


@dataclass
class SolutionTrajectory:
    times: np.ndarray
    states: np.ndarray      # (len(times), n, N, ..., N) coefficients
    spec: SystemSpec
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("trajectory times must start at 0 and increase strictly")
        if self.states.shape[0] != t.size:
            raise ValueError("one state per time node required")
        if not np.all(np.isfinite(self.states)):
            raise BlowUpError("trajectory contains non-finite coefficients")
        self.times = t

    @property
    def grid(self):
        return self.spec.grid

    def __len__(self) -> int:
        return self.times.size

    def state(self, m: int) -> SpectralField:
        return SpectralField(self.spec.grid, self.states[m], hermitian=True)

    def index_of(self, t: float) -> int:
        m = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[m], t, rel_tol=1e-12, abs_tol=1e-15):
            raise ValueError(f"time {t} is not a node of the trajectory grid")
        return m

    def hs_norms(self, s: float | None = None) -> np.ndarray:
        """Component H^s norms at every node, shape ``(len(times), n)``."""
        s = self.spec.sobolev_index if s is None else s
        grid = self.spec.grid
        w = (1.0 + grid.xi_norm**2) ** s
        axes = tuple(range(2, self.states.ndim))
        return np.sqrt(np.sum(w * np.abs(self.states) ** 2, axis=axes))


def linear_evolution(spec: SystemSpec, times: np.ndarray) -> np.ndarray:
    """``e_0``: the semigroup applied to the data at every node."""
    c = spec.initial_data.coeffs
    return np.stack([semigroup_symbol(spec.grid, spec.alpha, t, spec.n) * c for t in times])


# -- Duhamel operators ------------------------------------------------------------------


def _duhamel(spec: SystemSpec, forcing: np.ndarray, times: np.ndarray) -> np.ndarray:
    """Product integration of ``int_0^t h(t - tau) F(tau) dtau`` at every node.

    F is frozen at the left end of each substep and the kernel is integrated
    exactly, ``int_{tau_l}^{tau_{l+1}} exp(-(t - tau) lam) dtau
    = (exp(-(t - tau_{l+1}) lam) - exp(-(t - tau_l) lam)) / lam`` (``tau_{l+1} - tau_l``
    at lam = 0). Splitting ``exp(-(t_m - tau) lam) = exp(-h_m lam) exp(-(t_{m-1} - tau) lam)``
    turns the sum into a one-pass recursion over the nodes.
    """
    out = np.zeros_like(forcing)
    for m in range(1, times.size):
        h = times[m] - times[m - 1]
        decay, phi = _step_factors(spec, h)
        out[m] = decay * out[m - 1] + phi * forcing[m - 1]
    return out


def _step_factors(spec: SystemSpec, h: float) -> tuple[np.ndarray, np.ndarray]:
    lam = np.stack([spec.grid.xi_norm**a for a in spec.alpha])
    decay = np.exp(-h * lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        phi = np.where(lam == 0, h, -np.expm1(-h * lam) / np.where(lam == 0, 1.0, lam))
    return decay, phi


def _by_time(f):
    """Apply a component-leading evaluator to a time-leading stack."""

    def wrapped(spec, *stacks):
        moved = [np.moveaxis(s, 0, 1) for s in stacks]
        return np.moveaxis(f(spec, *moved), 1, 0)

    return wrapped


_linear_stack = _by_time(linear_term)
_quadratic_stack = _by_time(quadratic_term)


def _coeff_stack(traj) -> tuple[np.ndarray, np.ndarray]:
    return np.asarray(traj.times), traj.states


def operator_A_all(spec: SystemSpec, times: np.ndarray, states: np.ndarray) -> np.ndarray:
    return _duhamel(spec, _linear_stack(spec, states), times)


def operator_B_all(spec: SystemSpec, times: np.ndarray, u: np.ndarray, v: np.ndarray | None = None) -> np.ndarray:
    if v is None:
        forcing = _quadratic_stack(spec, u)
    else:
        forcing = _by_time(quadratic_term)(spec, u, v)
    return _duhamel(spec, forcing, times)


def operator_A(spec: SystemSpec, trajectory: SolutionTrajectory, t: float) -> SpectralField:
    """``A_i = sum_j int_0^t h_i(t - tau) * L_ij(u_j)(tau) dtau`` at a node t."""
    times, states = _coeff_stack(trajectory)
    m = trajectory.index_of(t)
    return SpectralField(spec.grid, operator_A_all(spec, times[: m + 1], states[: m + 1])[m])


def operator_B(spec: SystemSpec, traj_u: SolutionTrajectory, traj_v: SolutionTrajectory, t: float) -> SpectralField:
    """``B_i = sum_jk int_0^t h_i(t - tau) * Q_ijk(u_j v_k)(tau) dtau`` at a node t."""
    if traj_u.times.shape != traj_v.times.shape or np.any(traj_u.times != traj_v.times):
        raise ValueError("operator_B needs both trajectories on the same quadrature grid")
    m = traj_u.index_of(t)
    times = traj_u.times[: m + 1]
    out = operator_B_all(spec, times, traj_u.states[: m + 1], traj_v.states[: m + 1])
    return SpectralField(spec.grid, out[m])


# -- Picard construction ------------------------------------------------------------------


@dataclass
class PicardReport:
    iterations: int
    differences: list
    ratios: list
    converged: bool
    C_A: float
    C_B: float
    delta0: float

    @property
    def conditions(self) -> dict:
        return {
            "3*C_A < 1": 3 * self.C_A < 1,
            "9*C_B*delta0 < 1": 9 * self.C_B * self.delta0 < 1,
            "C_A + 6*C_B*delta0 < 1": self.C_A + 6 * self.C_B * self.delta0 < 1,
        }

    @property
    def conditions_hold(self) -> bool:
        return all(self.conditions.values())

    @property
    def contraction_bound(self) -> float:
        return self.C_A + 6 * self.C_B * self.delta0

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "differences": self.differences,
            "ratios": self.ratios,
            "converged": self.converged,
            "C_A": self.C_A,
            "C_B": self.C_B,
            "delta0": self.delta0,
            "conditions": self.conditions,
            "conditions_hold": self.conditions_hold,
            "contraction_bound": self.contraction_bound,
        }


def picard_constants(spec: SystemSpec, T: float, C: float = 1.0) -> tuple[float, float, float]:
    """``(C_A, C_B, delta0)`` of the contraction argument on ``[0, T]``."""
    n = spec.n
    C_A = C * n * T
    C_B = C * sum(T ** (1 - 1 / a) / (1 - 1 / a) for a in spec.alpha)
    delta0 = C * float(np.sum(data_norms(spec)))
    return C_A, C_B, delta0


def _trajectory_distance(spec: SystemSpec, a: np.ndarray, b: np.ndarray) -> float:
    """``sup_t sum_i ||a_i(t) - b_i(t)||_{H^s}`` (the norm of the product space)."""
    w = (1.0 + spec.grid.xi_norm**2) ** spec.sobolev_index
    axes = tuple(range(2, a.ndim))
    per = np.sqrt(np.sum(w * np.abs(a - b) ** 2, axis=axes))
    return float(per.sum(axis=1).max())


def _metadata(spec: SystemSpec, config: SolverConfig, mode: str) -> dict:
    return {
        "alpha": spec.alpha.tolist(),
        "system": spec.name,
        "spec_hash": spec.digest(),
        "config_hash": hashlib.sha256(repr(config).encode()).hexdigest()[:16],
        "mode": mode,
    }


def picard_solve(spec: SystemSpec, T: float, config: SolverConfig | None = None):
    """Iterate ``e_{k+1} = e_0 - A(e_k) - B(e_k, e_k)`` on the whole window ``[0, T]``.

    Returns ``(trajectory, report)``. Raises NonConvergenceError when the
    successive differences do not drop below ``picard_tol`` and BlowUpError on
    non-finite iterates.
    """
    config = config or SolverConfig(mode=GLOBAL_PICARD)
    C = config.generic_constant
    if config.enforce_existence:
        T_alpha = existence_time_for(spec, C)
        if T > T_alpha * (1 + 1e-12):
            raise ConfigError(f"horizon {T} exceeds the existence time T_alpha={T_alpha} (relative to C={C})")
    times = config.time_nodes(T)
    e0 = linear_evolution(spec, times)
    current = e0
    diffs: list = []
    ratios: list = []
    converged = False
    for it in range(1, config.picard_max_iters + 1):
        nxt = e0 - operator_A_all(spec, times, current) - operator_B_all(spec, times, current)
        if not np.all(np.isfinite(nxt)):
            raise BlowUpError(f"Picard iterate {it} is not finite")
        diff = _trajectory_distance(spec, nxt, current)
        if diffs and diffs[-1] > 0:
            ratios.append(diff / diffs[-1])
        diffs.append(diff)
        current = nxt
        if diff < config.picard_tol:
            converged = True
            break
    C_A, C_B, delta0 = picard_constants(spec, T, C)
    report = PicardReport(len(diffs), diffs, ratios, converged, C_A, C_B, delta0)
    if not converged:
        last = ratios[-1] if ratios else float("nan")
        raise NonConvergenceError(
            f"Picard iteration did not reach tol={config.picard_tol} in "
            f"{config.picard_max_iters} iterations (last ratio {last:.3g})"
        )
    traj = SolutionTrajectory(times, current, spec, _metadata(spec, config, GLOBAL_PICARD))
    return traj, report


# -- exponential time differencing -------------------------------------------------------


def etd_march(spec: SystemSpec, T: float, config: SolverConfig | None = None) -> SolutionTrajectory:
    """First-order exponential integrator.

    Per step: ``u <- exp(-dt lam) u - (1 - exp(-dt lam)) / lam * N(u)`` (dt at lam = 0).
    The linear part is carried exactly as ``exp(-t lam) u_0`` and only the
    Duhamel accumulator is stepped; this is the same scheme, rearranged.
    """
    config = config or SolverConfig(mode=ETD_MARCHING)
    times = config.time_nodes(T)
    c0 = spec.initial_data.coeffs
    states = np.empty((times.size,) + c0.shape, dtype=complex)
    states[0] = c0
    acc = np.zeros_like(c0)
    cache: dict = {}
    for m in range(1, times.size):
        h = times[m] - times[m - 1]
        key = round(h / T, 12)
        if key not in cache:
            cache[key] = _step_factors(spec, h)
        decay, phi = cache[key]
        u = states[m - 1]
        forcing = quadratic_term(spec, u) + linear_term(spec, u)
        acc = decay * acc - phi * forcing
        states[m] = semigroup_symbol(spec.grid, spec.alpha, times[m], spec.n) * c0 + acc
        if not np.all(np.isfinite(states[m])):
            raise BlowUpError(f"ETD march blew up at step {m} (t={times[m]:.6g})")
    return SolutionTrajectory(times, states, spec, _metadata(spec, config, ETD_MARCHING))


def solve(spec: SystemSpec, T: float, config: SolverConfig) -> SolutionTrajectory:
    if config.mode == GLOBAL_PICARD:
        return picard_solve(spec, T, config)[0]
    return etd_march(spec, T, config)


# -- diagnostics --------------------------------------------------------------------------


def uniform_product_bound(trajectory: SolutionTrajectory, s: float | None = None) -> float:
    """``max_t max_{j<=k} ||u_j u_k(t)||_{H^s}`` using the dealiased product."""
    s = trajectory.spec.sobolev_index if s is None else s
    best = 0.0
    n = trajectory.spec.n
    for m in range(len(trajectory)):
        f = trajectory.state(m)
        comps = [f.component(i) for i in range(n)]
        for j in range(n):
            for k in range(j, n):
                best = max(best, norm(dealiased_product(comps[j], comps[k]), Hs(s)))
    return best
