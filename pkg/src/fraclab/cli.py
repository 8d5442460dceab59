"""Command-line front end.

Commands: kernel-verify, existence-time, solve, rate-study, presets.
Every command reads the same YAML config (missing keys take defaults) and
writes its artifacts into ``--out``. Flags may also come from environment
variables ``FRACLAB_CONFIG``, ``FRACLAB_OUT``, ``FRACLAB_SEED``,
``FRACLAB_WORKERS`` and ``FRACLAB_PLOTS``; explicit flags win.

Exit codes: 0 success, 1 other failure, 2 config error, 3 solver
non-convergence, 4 blow-up, 5 rate fit below the noise floor.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .convergence import (
    DEFAULT_SEED,
    UP_TO_T,
    UP_TO_T2,
    DataConfig,
    RateStudyConfig,
    RateStudyReport,
    build_system,
    classical_datum,
    existence_table,
    run_rate_study,
)
from .errors import ConfigError, FraclabError
from .export import dump_coefficients, write_csv, write_norm_table
from .kernels import KernelRateReport, kernel_rate_check
from .solver import (
    ETD_MARCHING,
    GLOBAL_PICARD,
    SolverConfig,
    data_norms,
    existence_time_alpha,
    picard_solve,
    solve,
)
from .system import PRESETS, CustomSystem, preset_shape, preset_symbols

log = logging.getLogger("fraclab")

COMMANDS = ("kernel-verify", "existence-time", "solve", "rate-study", "presets")
ENV_PREFIX = "FRACLAB_"
RATE_COLUMNS = ("alpha", "gap_Hs", "gap_L2", "gap_Linf", "gap_Wsp", "eta", "horizon", "runtime_s")
KERNEL_COLUMNS = ("alpha", "sup_weighted_gap", "sup_weighted_grad_gap", "ratio_gap", "ratio_grad_gap")
EXISTENCE_COLUMNS = ("alpha", "T_alpha", "T_2", "T_0", "abs_T_alpha_minus_T_2", "T_0_le_T_alpha")
KERNEL_ALPHAS = (1.85, 1.90, 1.95, 1.99, 2.01, 2.05, 2.10, 2.15)

# wording attached to range errors: the condition each check enforces
WINDOW_CONDITION = "window condition 0 < delta < 1/6 with 2 - delta <= alpha <= 2 + delta, alpha != 2"
SOBOLEV_CONDITION = "regularity condition s > d/2"
RATE_CONDITION = "data-rate condition beta_i > 0, c > 0"
NORM_CONDITION = "norm-range condition 2 <= p <= inf, 0 < sigma < s"
ALPHA_CONDITION = "existence condition alpha_i > 1"


@dataclass(frozen=True)
class KernelConfig:
    alphas: tuple = KERNEL_ALPHAS
    delta: float = 0.15
    horizon: float = 1.0
    n_times: int = 121


@dataclass(frozen=True)
class SolveConfig:
    alpha: tuple = (1.9,)
    horizon: float | None = None      # None: the existence time T_alpha
    dump: bool = False


@dataclass(frozen=True)
class StudyConfig:
    rate: RateStudyConfig = field(default_factory=RateStudyConfig)
    kernel: KernelConfig = field(default_factory=KernelConfig)
    solve: SolveConfig = field(default_factory=SolveConfig)


# -- parsing ------------------------------------------------------------------------------

_SECTIONS = {
    "grid": {"dimension", "modes", "length"},
    "data": {"norm", "k_max", "decay", "expressions"},
    "solver": {"substeps", "picard_tol", "picard_max_iters", "generic_constant", "mode", "dt",
               "enforce_existence"},
    "norms": {"sigma", "p"},
    "kernel": {"alphas", "delta", "horizon", "n_times"},
    "solve": {"alpha", "horizon", "dump"},
    "custom": {"n", "q", "l", "divergence_blocks"},
}
_TOP = {"preset", "alphas", "delta", "beta", "c", "s", "horizon_policy", "horizon", "epsilon",
        "slope_tolerance", "noise_check"} | set(_SECTIONS)


def _section(raw: dict, name: str) -> dict:
    sec = raw.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"key '{name}' must be a mapping")
    unknown = set(sec) - _SECTIONS[name]
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in '{name}'; allowed: {sorted(_SECTIONS[name])}")
    return sec


def _num(sec: dict, key: str, default, where: str, kind=float):
    val = sec.get(key, default)
    if val is None:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"key '{where}{key}' must be a number, got {val!r}")
    if kind is int:
        if val != int(val):
            raise ConfigError(f"key '{where}{key}' must be an integer, got {val!r}")
        return int(val)
    return float(val)


def _num_list(val, key: str) -> tuple:
    if isinstance(val, (int, float)) and not isinstance(val, bool):
        val = [val]
    if not isinstance(val, list) or not val:
        raise ConfigError(f"key '{key}' must be a number or a nonempty list of numbers")
    for v in val:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"key '{key}' has non-numeric entry {v!r}")
    return tuple(float(v) for v in val)


def _check_window(alphas: tuple, delta: float, key: str):
    if not 0 < delta < 1 / 6:
        raise ConfigError(f"key '{key.rsplit('alphas', 1)[0]}delta'={delta} outside (0, 1/6); {WINDOW_CONDITION}")
    if 2.0 in alphas:
        raise ConfigError(f"key '{key}' contains the classical value 2.0; {WINDOW_CONDITION}")
    bad = [a for a in alphas if not 2 - delta <= a <= 2 + delta]
    if bad:
        raise ConfigError(f"key '{key}' has {bad} outside [{2 - delta:g}, {2 + delta:g}]; {WINDOW_CONDITION}")


def _index(text, n_expected: int, key: str) -> tuple:
    try:
        idx = tuple(int(x) for x in str(text).split(","))
    except ValueError:
        raise ConfigError(f"key '{key}' has a bad index {text!r}; use comma-separated integers") from None
    if len(idx) != n_expected:
        raise ConfigError(f"key '{key}' index {text!r} needs {n_expected} entries")
    return idx


def _custom(raw: dict, dimension: int) -> CustomSystem | None:
    if "custom" not in raw:
        return None
    sec = _section(raw, "custom")
    n = _num(sec, "n", None, "custom.", int)
    if n is None or n < 1:
        raise ConfigError("key 'custom.n' must be a positive integer")
    q = tuple(sorted((_index(k, 3, "custom.q"), str(v)) for k, v in (sec.get("q") or {}).items()))
    ell = tuple(sorted((_index(k, 2, "custom.l"), str(v)) for k, v in (sec.get("l") or {}).items()))
    blocks = tuple(tuple(int(i) for i in b) for b in sec.get("divergence_blocks") or ())
    try:
        system = CustomSystem(n, q, ell, blocks)
        system.tables(dimension)
    except ValueError as exc:
        raise ConfigError(f"key 'custom': {exc}") from None
    return system


def parse_config(source=None, seed: int | None = None) -> StudyConfig:
    """Validate a YAML config (file path or already-loaded mapping) into a StudyConfig.

    Every failure raises ConfigError naming the offending key; range
    violations also name the condition they enforce.
    """
    if source is None:
        raw = {}
    elif isinstance(source, dict):
        raw = source
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        try:
            raw = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ConfigError(f"cannot parse {path}{where}: {getattr(exc, 'problem', exc)}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping of keys to values")
    unknown = set(raw) - _TOP
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)}; allowed: {sorted(_TOP)}")

    grid = _section(raw, "grid")
    has_custom = "custom" in raw
    preset = str(raw.get("preset", "custom" if has_custom else "Burgers1D"))
    if not has_custom and preset not in PRESETS:
        raise ConfigError(f"key 'preset'={preset!r} unknown; choose one of {list(PRESETS)} or give 'custom'")
    default_dim = 1 if has_custom else preset_shape(preset)[0][0]
    dimension = _num(grid, "dimension", default_dim, "grid.", int)
    modes = _num(grid, "modes", 256 if dimension == 1 else 16, "grid.", int)
    length = _num(grid, "length", 2 * math.pi, "grid.")
    if dimension not in (1, 2, 3):
        raise ConfigError(f"key 'grid.dimension'={dimension} must be 1, 2 or 3")
    if not has_custom and dimension not in preset_shape(preset)[0]:
        raise ConfigError(f"key 'grid.dimension'={dimension} not available for {preset}; use {preset_shape(preset)[0]}")
    if modes < 4 or modes % 2:
        raise ConfigError(f"key 'grid.modes'={modes} must be even and >= 4")
    if not length > 0:
        raise ConfigError(f"key 'grid.length'={length} must be positive")
    custom = _custom(raw, dimension)

    delta = _num(raw, "delta", 0.15, "")
    if "alphas" in raw:
        alphas = _num_list(raw["alphas"], "alphas")
    else:
        alphas = tuple(a for a in RateStudyConfig.alphas if abs(2 - a) <= delta + 1e-12)
    _check_window(alphas, delta, "alphas")
    beta = _num_list(raw.get("beta", 0.5), "beta")
    if any(b <= 0 for b in beta):
        raise ConfigError(f"key 'beta'={list(beta)} must be positive; {RATE_CONDITION}")
    c = _num(raw, "c", 0.1, "")
    if not c > 0:
        raise ConfigError(f"key 'c'={c} must be positive; {RATE_CONDITION}")
    s = _num(raw, "s", 2.0, "")
    if not s > dimension / 2:
        raise ConfigError(f"key 's'={s} must exceed d/2={dimension / 2}; {SOBOLEV_CONDITION}")
    policy = str(raw.get("horizon_policy", UP_TO_T2))
    if policy not in (UP_TO_T2, UP_TO_T):
        raise ConfigError(f"key 'horizon_policy'={policy!r} must be {UP_TO_T2} or {UP_TO_T}")
    horizon = _num(raw, "horizon", None, "")
    if policy == UP_TO_T and not (horizon and horizon > 0):
        raise ConfigError(f"key 'horizon' must be positive under horizon_policy {UP_TO_T}")
    epsilon = _num(raw, "epsilon", None, "")
    if epsilon is not None and not epsilon > 0:
        raise ConfigError(f"key 'epsilon'={epsilon} must be positive")
    norms = _section(raw, "norms")
    sigma = _num(norms, "sigma", 1.0, "norms.")
    p = _num(norms, "p", 2.0, "norms.")
    if not 0 < sigma < s:
        raise ConfigError(f"key 'norms.sigma'={sigma} must lie in (0, s={s}); {NORM_CONDITION}")
    if not 2 <= p < math.inf:
        raise ConfigError(f"key 'norms.p'={p} must satisfy 2 <= p < inf for the W^(sigma,p) gap; {NORM_CONDITION}")
    tol = _num(raw, "slope_tolerance", 0.2, "")
    if not tol > 0:
        raise ConfigError(f"key 'slope_tolerance'={tol} must be positive")
    noise_check = raw.get("noise_check", True)
    if not isinstance(noise_check, bool):
        raise ConfigError("key 'noise_check' must be true or false")

    d = _section(raw, "data")
    exprs = d.get("expressions")
    if exprs is not None:
        if isinstance(exprs, str):
            exprs = [exprs]
        exprs = tuple(str(e) for e in exprs)
    data_norm = _num(d, "norm", None if exprs is not None else 0.02, "data.")
    if data_norm is not None:
        if not data_norm > 0:
            raise ConfigError(f"key 'data.norm'={data_norm} must be positive")
    data = DataConfig(
        norm=data_norm,
        k_max=_num(d, "k_max", 12.0, "data."),
        decay=_num(d, "decay", 0.5, "data."),
        seed=DEFAULT_SEED if seed is None else seed,
        expressions=exprs,
    )

    sv = _section(raw, "solver")
    mode = str(sv.get("mode", ETD_MARCHING))
    if mode not in (ETD_MARCHING, GLOBAL_PICARD):
        raise ConfigError(f"key 'solver.mode'={mode!r} must be {ETD_MARCHING} or {GLOBAL_PICARD}")
    substeps = _num(sv, "substeps", 512, "solver.", int)
    picard_tol = _num(sv, "picard_tol", 1e-10, "solver.")
    iters = _num(sv, "picard_max_iters", 50, "solver.", int)
    C = _num(sv, "generic_constant", 1.0, "solver.")
    dt = _num(sv, "dt", None, "solver.")
    if substeps < 1:
        raise ConfigError(f"key 'solver.substeps'={substeps} must be a positive integer")
    if not 0 < picard_tol < 1:
        raise ConfigError(f"key 'solver.picard_tol'={picard_tol} must lie in (0, 1)")
    if iters < 1:
        raise ConfigError(f"key 'solver.picard_max_iters'={iters} must be positive")
    if not C > 0:
        raise ConfigError(f"key 'solver.generic_constant'={C} must be positive")
    if dt is not None and not dt > 0:
        raise ConfigError(f"key 'solver.dt'={dt} must be positive")
    enforce = sv.get("enforce_existence", False)
    if not isinstance(enforce, bool):
        raise ConfigError("key 'solver.enforce_existence' must be true or false")
    solver = SolverConfig(substeps, picard_tol, iters, C, mode, dt, enforce)

    k = _section(raw, "kernel")
    k_delta = _num(k, "delta", delta, "kernel.")
    if "alphas" in k:
        k_alphas = _num_list(k["alphas"], "kernel.alphas")
    else:
        # the default grid, clipped to the chosen window
        k_alphas = tuple(a for a in KERNEL_ALPHAS if abs(2 - a) <= k_delta + 1e-12)
    _check_window(k_alphas, k_delta, "kernel.alphas")
    if len(k_alphas) < 2:
        raise ConfigError("key 'kernel.alphas' needs at least 2 values for a slope fit")
    k_horizon = _num(k, "horizon", 1.0, "kernel.")
    n_times = _num(k, "n_times", 121, "kernel.", int)
    if not k_horizon > 0:
        raise ConfigError(f"key 'kernel.horizon'={k_horizon} must be positive")
    if n_times < 3:
        raise ConfigError(f"key 'kernel.n_times'={n_times} must be at least 3")

    so = _section(raw, "solve")
    s_alpha = _num_list(so.get("alpha", 1.9), "solve.alpha")
    if any(a <= 1 for a in s_alpha):
        raise ConfigError(f"key 'solve.alpha'={list(s_alpha)} must exceed 1; {ALPHA_CONDITION}")
    s_horizon = _num(so, "horizon", None, "solve.")
    if s_horizon is not None and not s_horizon > 0:
        raise ConfigError(f"key 'solve.horizon'={s_horizon} must be positive")
    dump = so.get("dump", False)
    if not isinstance(dump, bool):
        raise ConfigError("key 'solve.dump' must be true or false")

    try:
        rate = RateStudyConfig(
            preset=preset, dimension=dimension, modes=modes, length=length, alphas=alphas,
            delta=delta, beta=beta, c=c, s=s, horizon_policy=policy, horizon=horizon,
            epsilon=epsilon, sigma=sigma, wsp_p=p, slope_tolerance=tol, noise_check=noise_check,
            data=data, solver=solver, custom=custom,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if len(s_alpha) not in (1, rate.n):
        raise ConfigError(f"key 'solve.alpha' needs 1 or {rate.n} entries, got {len(s_alpha)}")
    return StudyConfig(
        rate=rate,
        kernel=KernelConfig(k_alphas, k_delta, k_horizon, n_times),
        solve=SolveConfig(s_alpha, s_horizon, dump),
    )


# -- report writers -----------------------------------------------------------------------


def _write_json(path: Path, payload) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n")
    return path


def rate_rows(report: RateStudyReport, timing: bool = False) -> list[dict]:
    eta = report.config.eta
    return [
        {
            "alpha": r.alpha,
            "gap_Hs": r.gap_hs,
            "gap_L2": r.gap_l2,
            "gap_Linf": r.gap_linf,
            "gap_Wsp": r.gap_wsp,
            "eta": eta,
            "horizon": r.horizon,
            "runtime_s": r.runtime_s if timing else None,
        }
        for r in report.results
    ]


def kernel_rows(report: KernelRateReport) -> list[dict]:
    return [
        {
            "alpha": float(a),
            "sup_weighted_gap": float(g),
            "sup_weighted_grad_gap": float(h),
            "ratio_gap": float(rg),
            "ratio_grad_gap": float(rh),
        }
        for a, g, h, rg, rh in zip(report.alphas, report.sup_gap, report.sup_grad_gap,
                                   report.ratio_gap, report.ratio_grad_gap)
    ]


# -- plots -------------------------------------------------------------------------------------


def _gnuplot_block(name: str, rows) -> str:
    body = "\n".join(" ".join(f"{v:.17g}" for v in row) for row in rows)
    return f"${name} << EOD\n{body}\nEOD\n"


def emit_plots(report, out_dir) -> list[Path]:
    """Self-contained gnuplot scripts: one per norm kind for a rate study,
    one weighted-gap profile per alpha for a kernel check."""
    out = Path(out_dir)
    paths: list[Path] = []
    if isinstance(report, RateStudyReport) and report.results:
        x = np.abs(2 - report.alphas)
        ref = report.predicted_rate
        for metric, rf in report.fits.items():
            y = report.gaps(metric)
            fit = rf.fit
            anchor = float(np.exp(np.mean(np.log(y[y > 0])) - ref * np.mean(np.log(x[y > 0]))))
            script = (
                f"# log-log gap {metric} against |2 - alpha|\n"
                + _gnuplot_block("gaps", zip(x, y))
                + f"set logscale xy\nset xlabel '|2 - alpha|'\nset ylabel '{metric}'\n"
                + f"set title 'fitted slope {fit.slope:.4f}, reference {ref:g}'\n"
                + f"fit_line(z) = {fit.prefactor:.17g} * z**{fit.slope:.17g}\n"
                + f"ref_line(z) = {anchor:.17g} * z**{ref:.17g}\n"
                + "plot $gaps with points pt 7 title 'gap', fit_line(x) title 'fit', "
                + "ref_line(x) dashtype 2 title 'min(beta,1)'\n"
            )
            p = out / f"rate_{metric}.gp"
            p.write_text(script)
            paths.append(p)
    elif isinstance(report, KernelRateReport) and len(report.profiles):
        for prof in report.profiles:
            rows = [(t, g, h) for t, g, h in zip(prof.times[1:], prof.weighted_gap[1:], prof.weighted_grad_gap[1:])]
            script = (
                f"# weighted kernel gaps for alpha = {prof.alpha:g}, delta = {prof.delta:g}\n"
                + _gnuplot_block("profile", rows)
                + "set logscale x\nset xlabel 't'\n"
                + "plot $profile using 1:2 with lines title 't^eta sup|h_alpha - h_2|', "
                + "$profile using 1:3 with lines title 't^kappa sup|xi||h_alpha - h_2|'\n"
            )
            p = out / f"kernel_profile_alpha_{prof.alpha:.4f}.gp"
            p.write_text(script)
            paths.append(p)
    else:
        warnings.warn("empty report: no plot scripts written", stacklevel=2)
    return paths


# -- commands ----------------------------------------------------------------------------------


def cmd_kernel_verify(cfg: StudyConfig, out: Path, args) -> tuple[int, object]:
    k = cfg.kernel
    report = kernel_rate_check(k.alphas, k.delta, k.horizon, k.n_times)
    write_csv(out / "kernel.csv", kernel_rows(report), KERNEL_COLUMNS)
    _write_json(out / "kernel.json", report.to_dict())
    print(f"kernel gap slope {report.fit_gap.slope:.4f}, gradient gap slope {report.fit_grad_gap.slope:.4f}: "
          f"{'PASS' if report.passed else 'FAIL'}")
    return (0 if report.passed else 1), report


def cmd_existence_time(cfg: StudyConfig, out: Path, args) -> tuple[int, object]:
    rows = existence_table(cfg.rate)
    table = [
        {
            "alpha": r.alpha,
            "T_alpha": r.T_alpha,
            "T_2": r.T2,
            "T_0": r.T0,
            "abs_T_alpha_minus_T_2": r.gap,
            "T_0_le_T_alpha": r.floor_holds,
        }
        for r in rows
    ]
    write_csv(out / "existence_times.csv", table, EXISTENCE_COLUMNS)
    for row in table:
        print(f"alpha={row['alpha']:.4f}  T_alpha={row['T_alpha']:.6e}  T_2={row['T_2']:.6e}  T_0={row['T_0']:.6e}")
    return 0, None


def cmd_solve(cfg: StudyConfig, out: Path, args) -> tuple[int, object]:
    rate = cfg.rate
    spec2, _ = classical_datum(rate)
    spec = build_system(rate, spec2.grid, np.asarray(cfg.solve.alpha), spec2.initial_data)
    C = rate.solver.generic_constant
    T_alpha = existence_time_alpha(spec.alpha, data_norms(spec), spec.n, C)
    horizon = cfg.solve.horizon if cfg.solve.horizon is not None else T_alpha
    summary = {"T_alpha": T_alpha, "horizon": horizon, "spec": spec.digest(), "mode": rate.solver.mode}
    if rate.solver.mode == GLOBAL_PICARD:
        traj, picard = picard_solve(spec, horizon, rate.solver)
        summary["picard"] = picard.to_dict()
    else:
        traj = solve(spec, horizon, rate.solver)
    summary["metadata"] = traj.metadata
    write_norm_table(traj, out / "trajectory_norms.csv")
    if cfg.solve.dump:
        dump_coefficients(traj, out / "trajectory.bin")
    _write_json(out / "solve.json", summary)
    print(f"solved {spec.name} on [0, {horizon:.6g}] with {len(traj) - 1} steps")
    return 0, traj


def cmd_rate_study(cfg: StudyConfig, out: Path, args) -> tuple[int, object]:
    report = run_rate_study(cfg.rate, workers=args.workers)
    write_csv(out / "rate_study.csv", rate_rows(report, args.timing), RATE_COLUMNS)
    _write_json(out / "rate_study.json", report.to_dict(include_timing=args.timing))
    print(f"fitted slope {report.slope:.4f} against predicted {report.predicted_rate:g}: "
          f"{'PASS' if report.passed else 'FAIL'}")
    return (0 if report.passed else 1), report


def cmd_presets(cfg: StudyConfig, out: Path, args) -> tuple[int, object]:
    lines = []
    for name in PRESETS:
        dims, count = preset_shape(name)
        for d in dims:
            q, ell, blocks = preset_symbols(name, d)
            lines.append(f"{name}\td={d}\tn={count(d)}\tQ entries={len(q)}\tL entries={len(ell)}"
                         f"\tprojected blocks={[list(b) for b in blocks]}")
    text = "\n".join(lines) + "\n"
    (out / "presets.txt").write_text(text)
    print(text, end="")
    return 0, None


HANDLERS = {
    "kernel-verify": cmd_kernel_verify,
    "existence-time": cmd_existence_time,
    "solve": cmd_solve,
    "rate-study": cmd_rate_study,
    "presets": cmd_presets,
}


# -- entry point ----------------------------------------------------------------------------


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name, default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fraclab",
        description="Fractional-to-classical diffusion limits of quadratic parabolic systems.",
        epilog="Environment overrides: FRACLAB_CONFIG, FRACLAB_OUT, FRACLAB_SEED, FRACLAB_WORKERS, FRACLAB_PLOTS.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", default=_env("CONFIG"), help="YAML config file (defaults if omitted)")
    parser.add_argument("--out", default=_env("OUT", "fraclab_out"), help="output directory")
    parser.add_argument("--seed", type=int, default=int(_env("SEED", DEFAULT_SEED)),
                        help=f"unsigned 64-bit seed for the random data (default {DEFAULT_SEED})")
    parser.add_argument("--workers", type=int, default=int(_env("WORKERS", os.cpu_count() or 1)),
                        help="worker processes for per-alpha runs (default: all cores)")
    parser.add_argument("--plots", action="store_true",
                        default=_env("PLOTS", "0").lower() in ("1", "true", "yes"),
                        help="also write gnuplot scripts")
    parser.add_argument("--timing", action="store_true",
                        help="record wall-clock runtimes (breaks byte-identical output)")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if not 0 <= args.seed < 2**64:
            raise ConfigError(f"--seed {args.seed} must be an unsigned 64-bit integer")
        if args.workers < 1:
            raise ConfigError(f"--workers {args.workers} must be at least 1")
        cfg = parse_config(args.config, seed=args.seed)
        out = Path(args.out)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"output directory {out} is not writable: {exc}") from None
        if not os.access(out, os.W_OK):
            raise ConfigError(f"output directory {out} is not writable")
        start = time.perf_counter()
        status, report = HANDLERS[args.command](cfg, out, args)
        if args.plots and args.command in ("rate-study", "kernel-verify"):
            emit_plots(report, out)
        log.info("%s finished in %.2f s", args.command, time.perf_counter() - start)
        return status
    except FraclabError as exc:
        print(f"fraclab: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        # invalid input detected below the parser (e.g. data incompatible with the system)
        print(f"fraclab: error: {exc}", file=sys.stderr)
        return ConfigError.exit_code


if __name__ == "__main__":
    sys.exit(main())
