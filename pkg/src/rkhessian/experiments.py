"""Reproducible benchmark experiments producing CSV tables and summaries."""

from __future__ import annotations

import copy
import io
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources

import numpy as np

from .krylov import conjugate_residual, cond_inf, degree_of_asymmetry, perturbation_bound
from .lmrn import lmrn_minimize
from .odecore import integrate
from .problems import allen_cahn, pendulum, wave
from .sensitivity import assemble_hessian, make_hvp_operator
from .tableau import make_tableau

__all__ = [
    "ExperimentConfig",
    "ConfigError",
    "ConvergenceFailure",
    "CsvReport",
    "EXPERIMENTS",
    "default_config",
    "load_reference",
    "matching_digits",
    "run_experiment",
]

WAVE_H_LIST = [0.2, 0.1, 0.05, 0.04, 0.025, 0.02, 0.01, 0.005, 0.004]

DEFAULTS = {
    "pendulum": dict(
        h=0.01, steps=5, mode="both",
        params={"theta": [1.0, 1.0], "tableau": "explicit-euler"},
        tolerances={},
    ),
    "allen-cahn": dict(
        h=0.001, steps=20, mode="both",
        params={"d": 150, "alpha": 10.0, "beta": 0.001, "kappa": -1.0,
                "theta_scale": 1.05, "tableau": "implicit-euler"},
        tolerances={"cr_tol": 1e-8, "cr_max_iter": 1500},
    ),
    "wave-asymmetry": dict(
        h=None, steps=None, mode="both",
        params={"L": 64.0, "d": 64, "t_obs_step": 0.2, "t_obs_count": 11,
                "h_list": WAVE_H_LIST, "tableau": "heun"},
        tolerances={},
    ),
    "wave-optimize": dict(
        h=0.2, steps=None, mode="both",
        params={"L": 64.0, "d": 64, "t_obs_step": 0.2, "t_obs_count": 11,
                "W0": 0.5, "tableau": "heun"},
        tolerances={"grad_tol": 1e-14, "cr_tol": 1e-8, "max_iter": 200},
    ),
}

EXPERIMENTS = tuple(DEFAULTS)


class ConfigError(ValueError):
    pass


class ConvergenceFailure(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    h: float | None = None
    steps: int | None = None
    mode: str = "both"
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    out: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(raw) - {"experiment", "h", "steps", "mode", "params", "tolerances", "out"}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        name = raw.get("experiment")
        if name not in DEFAULTS:
            raise ConfigError(f"experiment must be one of {list(EXPERIMENTS)}, got {name!r}")
        cfg = default_config(name)
        for key in ("h", "steps", "mode", "out"):
            if key in raw and raw[key] is not None:
                setattr(cfg, key, raw[key])
        for key in ("params", "tolerances"):
            extra = raw.get(key) or {}
            if not isinstance(extra, dict):
                raise ConfigError(f"{key} must be an object")
            bad = set(extra) - set(getattr(cfg, key))
            if bad:
                raise ConfigError(f"unknown {key} for {name}: {sorted(bad)}")
            getattr(cfg, key).update(extra)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON config: {exc}") from None
        return cls.from_dict(raw)

    def validate(self):
        if self.mode not in ("exact", "naive", "both"):
            raise ConfigError(f"mode must be exact, naive or both, got {self.mode!r}")
        if self.h is not None and not (isinstance(self.h, (int, float)) and self.h > 0):
            raise ConfigError("h must be a positive number")
        if self.steps is not None and not (isinstance(self.steps, int) and self.steps >= 0):
            raise ConfigError("steps must be a non-negative integer")

    @property
    def modes(self) -> tuple[str, ...]:
        return ("exact", "naive") if self.mode == "both" else (self.mode,)


def default_config(name: str) -> ExperimentConfig:
    return ExperimentConfig(experiment=name, **copy.deepcopy(DEFAULTS[name]))


def load_reference() -> dict:
    text = resources.files("rkhessian").joinpath("data/reference_values.json").read_text()
    return json.loads(text)


def matching_digits(value: float, reference: float) -> int:
    """Number of leading significant digits shared with ``reference`` (max 17)."""
    if value == reference:
        return 17
    rel = abs(value - reference) / abs(reference)
    return max(0, min(17, int(math.floor(-math.log10(rel)))))


@dataclass
class CsvReport:
    header: list[str]
    rows: list[list]
    summary: list[str] = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.header) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
        return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.16e}"


def _ensure_finite(M, what):
    if not np.all(np.isfinite(M)):
        raise FloatingPointError(f"non-finite entries in {what}")


# ---------------------------------------------------------------------------


def run_pendulum(cfg: ExperimentConfig) -> CsvReport:
    p, ref = cfg.params, load_reference()["pendulum"]
    sys, cost = pendulum()
    t = make_tableau(p["tableau"])
    report = CsvReport(["mode", "row", "col", "value", "reference", "matching_digits"], [])
    for mode in cfg.modes:
        op = make_hvp_operator(sys, cost, t, p["theta"], cfg.h, cfg.steps, mode)
        H = assemble_hessian(op)
        _ensure_finite(H, f"{mode} Hessian")
        R = np.array(ref[f"{mode}_hessian"])
        digits = [[matching_digits(H[i, j], R[i, j]) for j in range(2)] for i in range(2)]
        for i in range(2):
            for j in range(2):
                report.rows.append([mode, i, j, H[i, j], R[i, j], digits[i][j]])
        report.data[mode] = H
        report.summary.append(
            f"{mode}: H = [[{H[0,0]:.15g}, {H[0,1]:.15g}], [{H[1,0]:.15g}, {H[1,1]:.15g}]]"
        )
        report.summary.append(
            f"{mode}: matching digits vs reference {digits}, asymmetry {degree_of_asymmetry(H):.3e}"
        )
    return report


def _cr_history(H, r, v_ref, tol, max_iter):
    res = conjugate_residual(H, r, tol, max_iter, v_ref)
    return res


def run_allen_cahn(cfg: ExperimentConfig) -> CsvReport:
    p, tol = cfg.params, cfg.tolerances
    t = make_tableau(p["tableau"])
    sys, cost = allen_cahn(p["d"], p["alpha"], p["beta"], p["kappa"], h=cfg.h, N=cfg.steps, tableau=t)
    theta = p["theta_scale"] * sys.theta_hat
    mats = {}
    for mode in cfg.modes:
        mats[mode] = assemble_hessian(make_hvp_operator(sys, cost, t, theta, cfg.h, cfg.steps, mode))
        _ensure_finite(mats[mode], f"{mode} Hessian")
    # right-hand side is built from the exact Hessian when available
    Hr = mats.get("exact", next(iter(mats.values())))
    v_exact = np.zeros(sys.dim)
    v_exact[0] = 1.0
    r = Hr @ v_exact
    runs = {m: _cr_history(M, r, v_exact, tol["cr_tol"], tol["cr_max_iter"]) for m, M in mats.items()}
    report = CsvReport(["iteration", "residual_exact", "error_exact", "residual_naive", "error_naive"], [])
    length = max(len(run.residual_history) for run in runs.values())
    for k in range(length):
        row = [k]
        for mode in ("exact", "naive"):
            run = runs.get(mode)
            if run is None or k >= len(run.residual_history):
                row += [None, None]
            else:
                row += [run.residual_history[k], run.error_history[k]]
        report.rows.append(row)
    d = report.data
    for mode, M in mats.items():
        d[f"tau_{mode}"] = degree_of_asymmetry(M)
        d[f"cond_inf_{mode}"] = cond_inf(M)
        d[f"norm_max_{mode}"] = float(np.max(np.abs(M)))
        d[f"cr_iterations_{mode}"] = runs[mode].iterations
        d[f"cr_converged_{mode}"] = runs[mode].converged
        d[f"cr_final_error_{mode}"] = runs[mode].error_history[-1]
        report.summary.append(
            f"{mode}: tau={d[f'tau_{mode}']:.4e} cond_inf={d[f'cond_inf_{mode}']:.4e} "
            f"CR iterations={runs[mode].iterations} converged={runs[mode].converged} "
            f"final error={d[f'cr_final_error_{mode}']:.4e}"
        )
    if len(mats) == 2:
        H, Ht = mats["exact"], mats["naive"]
        d["diff_max"] = float(np.max(np.abs(H - Ht)))
        d["diff_inf"] = float(np.linalg.norm(H - Ht, np.inf))
        d["perturbation_bound"] = perturbation_bound(H, Ht)
        report.summary.append(
            f"||H - H~||_max={d['diff_max']:.4e} ||H - H~||_inf={d['diff_inf']:.4e} "
            f"perturbation bound={d['perturbation_bound']:.4e}"
        )
    d["H"] = mats
    for mode, run in runs.items():
        if not run.converged:
            raise ConvergenceFailure(f"CR on the {mode} Hessian did not converge: {run.message}")
    return report


def _wave_setup(p, h):
    T_obs = [p["t_obs_step"] * j for j in range(p["t_obs_count"])]
    t = make_tableau(p["tableau"])
    sys, cost, W_true = wave(p["L"], p["d"], None, T_obs, h, tableau=t)
    return sys, cost, W_true, t


def run_wave_asymmetry(cfg: ExperimentConfig) -> CsvReport:
    p = cfg.params
    h_list = [cfg.h] if cfg.h is not None else list(p["h_list"])
    report = CsvReport(["h", "tau_exact", "tau_naive"], [])
    taus = {}
    for h in h_list:
        sys, cost, W_true, t = _wave_setup(p, h)
        theta = sys.initial_state(W_true)
        row = {}
        for mode in cfg.modes:
            op = make_hvp_operator(sys, cost, t, theta, h, sys.n_steps, mode, param_slice=sys.param_slice)
            M = assemble_hessian(op)
            _ensure_finite(M, f"{mode} Hessian")
            row[mode] = degree_of_asymmetry(M)
        taus[h] = row
        report.rows.append([h, row.get("exact"), row.get("naive")])
        report.summary.append(
            "h=%g " % h + " ".join(f"tau_{m}={v:.6e}" for m, v in row.items())
        )
    report.data["tau"] = taus
    if "naive" in cfg.modes and len(h_list) >= 2:
        hs = np.array(h_list)
        tn = np.array([taus[h]["naive"] for h in h_list])
        slope = float(np.polyfit(np.log(hs), np.log(tn), 1)[0])
        report.data["naive_slope"] = slope
        report.summary.append(f"log-log slope of tau_naive vs h: {slope:.4f}")
    return report


def run_wave_optimize(cfg: ExperimentConfig) -> CsvReport:
    p, tol = cfg.params, cfg.tolerances
    sys, cost, W_true, t = _wave_setup(p, cfg.h)
    N = sys.n_steps if cfg.steps is None else cfg.steps
    W0 = np.full(p["d"], float(p["W0"]))
    report = CsvReport(["mode", "backward_evals", "cost"], [])
    states = {}
    for mode in cfg.modes:
        st = lmrn_minimize(
            sys, cost, t, W0, cfg.h, N, tol["grad_tol"], tol["cr_tol"], mode,
            embed=sys.initial_state, param_slice=sys.param_slice, max_iter=tol["max_iter"],
        )
        states[mode] = st
        for evals, c in st.history:
            report.rows.append([mode, evals, c])
        werr = float(np.max(np.abs(st.W - W_true)))
        report.summary.append(
            f"{mode}: converged={st.converged} cost={st.cost:.6e} backward_evals={st.backward_evals} "
            f"accepted={st.accepted} max|W - W_true|={werr:.3e}"
        )
        report.data[mode] = {"state": st, "w_error": werr}
    if len(states) == 2:
        ratio = states["naive"].backward_evals / states["exact"].backward_evals
        report.data["ratio"] = ratio
        report.summary.append(f"backward evaluation ratio naive/exact: {ratio:.3f}")
    failed = [m for m, s in states.items() if not s.converged]
    if failed:
        report.data["failed"] = failed
    return report


RUNNERS = {
    "pendulum": run_pendulum,
    "allen-cahn": run_allen_cahn,
    "wave-asymmetry": run_wave_asymmetry,
    "wave-optimize": run_wave_optimize,
}


def run_experiment(cfg: ExperimentConfig) -> CsvReport:
    cfg.validate()
    return RUNNERS[cfg.experiment](cfg)
