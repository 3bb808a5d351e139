"""Command-line front end.

Usage::

    modmap run CONFIG [--out DIR] [--seed INT] [--max-iter INT] [--quiet]
    modmap validate CONFIG
    modmap simulate CONFIG [--out DIR] [--seed INT] [--quiet]

Configs are YAML with a mandatory ``schema_version: 1``. Top-level keys:

``mode``
    One of ``ssml-gaussian``, ``ssml-sparse``, ``specp-group``,
    ``specp-nuclear``, ``custom``.
``admm``
    ``rho``, ``beta``, ``eps_rel``, ``eps_abs``, ``max_iter``, ``seed``.
    Missing keys take per-mode defaults.
``simulation``
    Fields of :class:`~modmap.experiments.LearningSimConfig` (ssml modes) or
    :class:`~modmap.experiments.SpectroConfig` (specp modes).
``inputs``
    custom mode only: ``y`` (CSV, K or P rows by N columns), optional ``F``
    (CSV ``P x K`` shared by every column, ``.npy`` of shape ``(P, K)`` or
    ``(N, P, K)``, or the string ``fourier``), optional ``truth`` (CSV),
    optional ``D`` (scalar, list, or nested list). Relative paths resolve
    against the config file's directory.
``prior``
    custom mode only: ``name`` in gaussian/l1/group/nuclear, plus
    ``gamma`` and ``sigma_v`` for gaussian.
``output``
    Default output directory (``--out`` wins).

Exit status is 0 on success, 2 on a configuration error and 3 on a numeric
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import io
import json
import logging
import math
import os
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import yaml

from . import _backend
from .admm import run as admm_run
from .consensus import ConsensusSolver
from .core import AdmmConfig, ConfigError, ModmapError, ShapeError, TransitionModel
from .experiments import (
    LearningSimConfig,
    SpectroConfig,
    build_fourier_windows,
    fourier_measurement,
    lrsd_config,
    power,
    rmse,
    simulate_learning,
    simulate_spectro_signal,
)
from .measurement import LearningMeasurement, LinearGaussianMeasurement
from .priors import PRIORS, GaussianPrior, L1Prior

logger = logging.getLogger("modmap")

SCHEMA_VERSION = 1
MODES = ("ssml-gaussian", "ssml-sparse", "specp-group", "specp-nuclear", "custom")
TOP_KEYS = ("schema_version", "mode", "admm", "simulation", "inputs", "prior", "output")
INPUT_KEYS = ("y", "F", "truth", "D")
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

ADMM_DEFAULTS = {
    "ssml-gaussian": dict(rho=30.0, beta=1.0, max_iter=25),
    "ssml-sparse": dict(rho=30.0, beta=15.0, max_iter=75),
    "custom": dict(),
}
SIM_DEFAULTS = {
    "ssml-gaussian": dict(),
    "ssml-sparse": dict(N=50, sparse=True, p=0.9, sigma=0.1),
}


@dataclasses.dataclass
class RunConfig:
    mode: str
    admm: AdmmConfig
    simulation: object = None
    inputs: dict = dataclasses.field(default_factory=dict)
    prior: dict = dataclasses.field(default_factory=dict)
    output: str | None = None
    base_dir: Path = Path(".")


# ---------------------------------------------------------------------------
# config parsing


def _coerce(cls, section: str, raw, errors: list[str]) -> dict:
    """Type-coerce ``raw`` against the dataclass fields of ``cls``."""
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        errors.append(f"{section} must be a mapping, got {type(raw).__name__}")
        return {}
    fields = {f.name: f for f in dataclasses.fields(cls)}
    out = {}
    for key, value in raw.items():
        if key not in fields:
            errors.append(f"{section}.{key} is not a recognised field")
            continue
        default = fields[key].default
        try:
            if isinstance(default, bool):
                if not isinstance(value, bool):
                    raise TypeError
                out[key] = value
            elif isinstance(default, int):
                if isinstance(value, bool) or float(value) != int(float(value)):
                    raise TypeError
                out[key] = int(float(value))
            elif isinstance(default, float):
                if isinstance(value, bool):
                    raise TypeError
                out[key] = float(value)
            elif isinstance(default, tuple):
                out[key] = tuple(float(v) for v in value)
            else:
                out[key] = str(value)
        except (TypeError, ValueError):
            errors.append(f"{section}.{key} has the wrong type: {value!r}")
    return out


def _build(cls, section: str, kwargs: dict, errors: list[str]):
    try:
        return cls(**kwargs)
    except ConfigError as exc:
        errors.extend(f"{section}.{msg}" for msg in str(exc).split("; "))
        return None


def _resolve(base: Path, value) -> Path:
    path = Path(str(value)).expanduser()
    return path if path.is_absolute() else base / path


def parse_config(data, base_dir: Path = Path(".")) -> tuple[RunConfig | None, list[str]]:
    """Turn a loaded YAML document into a :class:`RunConfig`.

    Returns the config (``None`` when invalid) and every problem found.
    """
    errors: list[str] = []
    if not isinstance(data, dict):
        return None, ["config must be a mapping at the top level"]

    for key in data:
        if key not in TOP_KEYS:
            errors.append(f"{key} is not a recognised top-level key")
    version = data.get("schema_version")
    if version is None:
        errors.append("schema_version is required")
    elif version != SCHEMA_VERSION:
        errors.append(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    mode = data.get("mode")
    if mode not in MODES:
        errors.append(f"mode must be one of {', '.join(MODES)}, got {mode!r}")
        mode = None

    admm_raw = _coerce(AdmmConfig, "admm", data.get("admm"), errors)
    sim_raw = data.get("simulation")
    sim = None

    if mode in ("ssml-gaussian", "ssml-sparse"):
        kw = {**SIM_DEFAULTS[mode], **_coerce(LearningSimConfig, "simulation", sim_raw, errors)}
        if "seed" in admm_raw and "seed" not in kw:
            kw["seed"] = admm_raw["seed"]
        sim = _build(LearningSimConfig, "simulation", kw, errors)
        admm_kw = {**ADMM_DEFAULTS[mode], **admm_raw}
    elif mode in ("specp-group", "specp-nuclear"):
        kw = _coerce(SpectroConfig, "simulation", sim_raw, errors)
        if "seed" in admm_raw and "seed" not in kw:
            kw["seed"] = admm_raw["seed"]
        # admm-level penalty settings and the spectro config must agree
        copied = [key for key in ("rho", "beta", "max_iter") if key in admm_raw]
        kw.update({key: admm_raw[key] for key in copied})
        try:
            sim = lrsd_config(**kw) if mode == "specp-nuclear" else SpectroConfig(**kw)
        except ConfigError as exc:
            # copied keys are reported once, under admm
            errors.extend(f"simulation.{msg}" for msg in str(exc).split("; ")
                          if msg.split(" ", 1)[0] not in copied)
        admm_kw = dict(admm_raw)
        if sim is not None:
            admm_kw.update(rho=sim.rho, beta=sim.beta, max_iter=sim.max_iter)
    else:
        if sim_raw is not None and mode == "custom":
            errors.append("simulation is not used in custom mode")
        admm_kw = dict(admm_raw)

    admm = _build(AdmmConfig, "admm", admm_kw, errors)

    inputs = data.get("inputs") or {}
    prior = data.get("prior") or {}
    if mode == "custom":
        inputs, prior = _check_custom(inputs, prior, base_dir, errors)
    else:
        if data.get("inputs") is not None:
            errors.append("inputs is only used in custom mode")
        if data.get("prior") is not None:
            errors.append("prior is only used in custom mode")

    output = data.get("output")
    if errors:
        return None, errors
    return RunConfig(mode, admm, sim, inputs, prior, output, base_dir), []


def _transition(D) -> TransitionModel:
    """Scalar, diagonal given as a flat list, or a full nested list."""
    D = np.asarray(D, dtype=float)
    return TransitionModel(np.diag(D) if D.ndim == 1 else D)


def _check_custom(inputs, prior, base_dir: Path, errors: list[str]):
    if not isinstance(inputs, dict):
        errors.append("inputs must be a mapping")
        inputs = {}
    if not isinstance(prior, dict):
        errors.append("prior must be a mapping")
        prior = {}
    for key in inputs:
        if key not in INPUT_KEYS:
            errors.append(f"inputs.{key} is not a recognised field")
    if "y" not in inputs:
        errors.append("inputs.y is required in custom mode")
    for key in ("y", "truth"):
        if key in inputs and not _resolve(base_dir, inputs[key]).is_file():
            errors.append(f"inputs.{key} file not found: {inputs[key]}")
    F = inputs.get("F")
    if F is not None and F != "fourier" and not _resolve(base_dir, F).is_file():
        errors.append(f"inputs.F file not found: {F}")
    if "D" in inputs:
        try:
            _transition(inputs["D"])
        except (ModmapError, TypeError, ValueError) as exc:
            errors.append(f"inputs.D is invalid: {exc}")

    name = prior.get("name", "gaussian")
    if name not in PRIORS:
        errors.append(f"prior.name must be one of {', '.join(PRIORS)}, got {name!r}")
    allowed = {"name", "gamma", "sigma_v"} if name == "gaussian" else {"name"}
    for key in prior:
        if key not in allowed:
            errors.append(f"prior.{key} is not a recognised field for prior {name!r}")
    if name == "gaussian":
        try:
            sv = float(prior.get("sigma_v", 1.0))
            float(prior.get("gamma", 0.0))
            if not sv > 0:
                errors.append(f"prior.sigma_v must be > 0, got {sv}")
        except (TypeError, ValueError):
            errors.append("prior.gamma and prior.sigma_v must be numbers")
    return dict(inputs), {**prior, "name": name}


def load_config(path) -> tuple[RunConfig | None, list[str]]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        return None, [f"cannot read config: {exc}"]
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        return None, [f"config is not valid YAML: {exc}"]
    return parse_config(data, path.resolve().parent)


def apply_overrides(cfg: RunConfig, seed: int | None, max_iter: int | None) -> RunConfig:
    """Apply ``--seed`` and ``--max-iter`` on top of a parsed config."""
    admm = cfg.admm
    sim = cfg.simulation
    if seed is not None:
        admm = dataclasses.replace(admm, seed=seed)
        if sim is not None:
            sim = sim.replace(seed=seed)
    if max_iter is not None:
        admm = dataclasses.replace(admm, max_iter=max_iter)
        if isinstance(sim, SpectroConfig):
            sim = sim.replace(max_iter=max_iter)
    return dataclasses.replace(cfg, admm=admm, simulation=sim)


# ---------------------------------------------------------------------------
# problem assembly


def read_matrix(path) -> np.ndarray:
    """Load a CSV matrix, skipping a non-numeric header row if present."""
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path)
    with open(path) as fh:
        first = fh.readline()
    try:
        [float(v) for v in first.strip().split(",")]
        skip = 0
    except ValueError:
        skip = 1
    return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=skip, dtype=float))


def build_problem(cfg: RunConfig):
    """Return ``(meas, prior, transition, x_true, y)`` for the configured mode."""
    if cfg.mode in ("ssml-gaussian", "ssml-sparse"):
        sim = simulate_learning(cfg.simulation)
        if sim.clipped:
            logger.warning("%d spike bins had intensity * dt > 1 and were clipped", sim.clipped)
        prior = cfg.simulation.gaussian_prior() if cfg.mode == "ssml-gaussian" else L1Prior()
        meas = LearningMeasurement(sim.observations)
        return meas, prior, cfg.simulation.transition, sim.x_true, None
    if cfg.mode in ("specp-group", "specp-nuclear"):
        sc = cfg.simulation
        y = simulate_spectro_signal(sc)
        prior = PRIORS[sc.prior]()
        return build_fourier_windows(sc, y), prior, sc.transition, None, y

    inputs = cfg.inputs
    y = read_matrix(_resolve(cfg.base_dir, inputs["y"]))
    N = y.shape[1]
    F = inputs.get("F")
    if F is None:
        meas = LinearGaussianMeasurement.identity(y)
    elif F == "fourier":
        K = _transition(inputs["D"]).K if "D" in inputs else None
        if K is None:
            raise ConfigError("inputs.F = fourier needs inputs.D to fix K")
        meas = fourier_measurement(K, y)
    else:
        meas = LinearGaussianMeasurement(read_matrix(_resolve(cfg.base_dir, F)), y)
    t = _transition(inputs["D"]) if "D" in inputs else TransitionModel.identity(meas.K)
    if t.K != meas.K:
        raise ConfigError(f"inputs.D is {t.K}x{t.K} but the state dimension is {meas.K}")
    p = cfg.prior
    if p["name"] == "gaussian":
        prior = GaussianPrior(float(p.get("gamma", 0.0)), float(p.get("sigma_v", 1.0)))
    else:
        prior = PRIORS[p["name"]]()
    x_true = None
    if "truth" in inputs:
        x_true = read_matrix(_resolve(cfg.base_dir, inputs["truth"]))
        if x_true.shape != (meas.K, N):
            raise ConfigError(f"inputs.truth has shape {x_true.shape}, expected {(meas.K, N)}")
    return meas, prior, t, x_true, y


# ---------------------------------------------------------------------------
# output


def matrix_csv(a) -> str:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    buf = io.StringIO()
    header = ",".join(f"t_{n}" for n in range(1, a.shape[1] + 1))
    np.savetxt(buf, a, fmt="%.17g", delimiter=",", header=header, comments="")
    return buf.getvalue()


def _finite_or_none(v: float):
    return v if math.isfinite(v) else None


def trace_json(report) -> str:
    rows = [{k: _finite_or_none(float(v)) if k != "iter" else int(v) for k, v in r.as_dict().items()}
            for r in report.records]
    return json.dumps(rows, indent=1) + "\n"


class Staging:
    """Collect output files in a temp dir, then move them into place.

    Nothing lands in the target directory unless every file was staged, and
    a failure while committing removes what was already moved.
    """

    def __init__(self, out: Path):
        self.out = Path(out)
        self.files: dict[str, str] = {}

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def commit(self) -> list[Path]:
        self.out.mkdir(parents=True, exist_ok=True)
        tmp = Path(tempfile.mkdtemp(prefix=".modmap-", dir=self.out))
        moved: list[Path] = []
        try:
            for name, text in self.files.items():
                (tmp / name).write_text(text)
            for name in self.files:
                dest = self.out / name
                os.replace(tmp / name, dest)
                moved.append(dest)
        except BaseException:
            for path in moved:
                path.unlink(missing_ok=True)
            raise
        finally:
            shutil.rmtree(tmp, ignore_errors=True)
        return moved


# ---------------------------------------------------------------------------
# subcommands


def run_experiment(cfg: RunConfig, out: Path) -> dict:
    """Solve the configured problem and write all artifacts to ``out``."""
    meas, prior, t, x_true, _ = build_problem(cfg)
    solver = ConsensusSolver(t, meas.N)
    t0 = time.perf_counter()
    x_hat, report = admm_run(meas, prior, solver, cfg.admm)
    wall = time.perf_counter() - t0

    metrics = {
        "rmse": rmse(x_hat, x_true) if x_true is not None else None,
        "iterations": report.iterations,
        "converged": report.converged,
        "wall_time_seconds": wall,
    }
    stage = Staging(out)
    stage.add("estimate.csv", matrix_csv(x_hat))
    stage.add("trace.json", trace_json(report))
    stage.add("metrics.json", json.dumps(metrics, indent=1) + "\n")
    if cfg.mode in ("specp-group", "specp-nuclear"):
        stage.add("power.csv", matrix_csv(power(x_hat)))
    stage.commit()
    return metrics


def simulate_only(cfg: RunConfig, out: Path) -> list[Path]:
    """Write simulated ground truth and observations without solving."""
    stage = Staging(out)
    if cfg.mode in ("ssml-gaussian", "ssml-sparse"):
        sim = simulate_learning(cfg.simulation)
        obs = sim.observations
        stage.add("truth.csv", matrix_csv(sim.x_true))
        stage.add("behavior.csv", matrix_csv(np.vstack([obs.b, obs.r])))
        stage.add("spikes.csv", matrix_csv(obs.spikes.T))
        stage.add("simulation.json", json.dumps(
            {"mode": cfg.mode, "clipped": sim.clipped, **dataclasses.asdict(cfg.simulation)},
            indent=1) + "\n")
    elif cfg.mode in ("specp-group", "specp-nuclear"):
        y = simulate_spectro_signal(cfg.simulation)
        stage.add("y.csv", matrix_csv(y))
        stage.add("simulation.json", json.dumps(
            {"mode": cfg.mode, **dataclasses.asdict(cfg.simulation)}, indent=1) + "\n")
    else:
        raise ConfigError("simulate needs a simulation mode, not custom")
    return stage.commit()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="modmap", description="Consensus-ADMM MAP estimation of latent time series")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, solve: bool):
        p.add_argument("config", help="YAML config file")
        p.add_argument("--out", metavar="DIR", help="output directory (default: config 'output' or ./out)")
        p.add_argument("--seed", type=int, help="override the simulation and ADMM seed")
        if solve:
            p.add_argument("--max-iter", type=int, dest="max_iter", help="override admm.max_iter")
        p.add_argument("--quiet", action="store_true", help="only report errors")

    common(sub.add_parser("run", help="solve and write estimate, trace, metrics"), solve=True)
    common(sub.add_parser("simulate", help="write simulated data only"), solve=False)
    v = sub.add_parser("validate", help="check a config without running anything")
    v.add_argument("config", help="YAML config file")
    v.add_argument("--quiet", action="store_true", help="only report errors")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)

    cfg, errors = load_config(args.config)
    if not errors and args.command != "validate":
        max_iter = getattr(args, "max_iter", None)
        if max_iter is not None and max_iter < 1:
            errors.append(f"--max-iter must be >= 1, got {max_iter}")
        else:
            try:
                cfg = apply_overrides(cfg, args.seed, max_iter)
            except ConfigError as exc:
                errors.extend(str(exc).split("; "))
    if errors:
        for msg in errors:
            print(f"error: {msg}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        if not args.quiet:
            print(f"{args.config}: ok")
        return EXIT_OK

    out = Path(args.out or cfg.output or "out")
    try:
        if args.command == "simulate":
            written = simulate_only(cfg, out)
            logger.info("wrote %s", ", ".join(p.name for p in written))
        else:
            logger.info("mode %s, backend %s, %d thread(s)", cfg.mode, _backend.NAME, _backend.thread_count())
            metrics = run_experiment(cfg, out)
            logger.info("iterations=%d converged=%s rmse=%s wall=%.2fs -> %s",
                        metrics["iterations"], metrics["converged"], metrics["rmse"],
                        metrics["wall_time_seconds"], out)
    except (ConfigError, ShapeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModmapError, ArithmeticError, np.linalg.LinAlgError) as exc:
        where = f" at iteration {exc.iteration}" if hasattr(exc, "iteration") else ""
        print(f"numeric failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
