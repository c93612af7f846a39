"""End-to-end optimization loop for ES, NES and CoNES plus run telemetry.

Each iteration draws an antithetic batch from the belief, evaluates it,
builds the rank-shaped ES gradient, maps it to an update direction
(identity, Fisher preconditioning, or the KL-ball solve) and hands that
direction to Adam.

The recorded ``loss`` is the batch mean of the candidate losses, i.e. the
Monte-Carlo estimate of the expected loss under the belief that drew them.
The loss at the belief mean is kept alongside as ``loss_at_mean``; it costs
one extra evaluation per iteration that is not counted in ``evals``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import benchmarks
from .belief import BeliefParams, sample_antithetic
from .cones import solve
from .estimator import es_gradient
from .natgrad import natural_gradient
from .optimizer import AdamState, adam_step

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
METHODS = ("es", "nes", "cones")
TRACE_HEADER = ("iter", "evals", "loss", "step_size", "kl", "wall_ms")
DEFAULT_EPSILON = 100.0


class ConfigError(ValueError):
    pass


class NumericalAbort(RuntimeError):
    def __init__(self, message, iteration=None, candidate=None):
        super().__init__(message)
        self.iteration = iteration
        self.candidate = candidate


@dataclass(frozen=True)
class RunConfig:
    method: str
    benchmark: str
    dim: int
    pop: int = 100
    iters: int = 500
    lr_mean: float = 0.1
    lr_logvar: float = 0.1
    epsilon: Optional[float] = None
    init_mean: float = 0.0
    init_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.method == "cones" and self.epsilon is None:
            object.__setattr__(self, "epsilon", DEFAULT_EPSILON)
        self.validate()

    def validate(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.benchmark not in benchmarks.BENCHMARKS:
            raise ConfigError(f"unknown benchmark {self.benchmark!r}")
        for name in ("dim", "pop", "iters", "seed"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        if self.dim < 1:
            raise ConfigError("dim must be positive")
        if self.benchmark in ("rosenbrock", "lunacek") and self.dim < 2:
            raise ConfigError(f"{self.benchmark} needs dim >= 2")
        if self.pop < 2 or self.pop % 2:
            raise ConfigError(f"pop must be an even integer >= 2, got {self.pop}")
        if self.iters < 1:
            raise ConfigError("iters must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        for name in ("lr_mean", "lr_logvar", "init_std"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be positive, got {value!r}")
        if not math.isfinite(self.init_mean):
            raise ConfigError("init_mean must be finite")
        if self.method == "cones":
            if not (math.isfinite(self.epsilon) and self.epsilon > 0):
                raise ConfigError(f"epsilon must be positive, got {self.epsilon!r}")
        elif self.epsilon is not None:
            raise ConfigError("epsilon only applies to method 'cones'")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class TraceRow:
    iter: int
    evals: int
    loss: float
    step_size: float
    kl: Optional[float]
    wall_ms: int
    loss_at_mean: float


@dataclass(eq=False)
class RunRecord:
    config: RunConfig
    rows: list = field(default_factory=list)
    final_mean: np.ndarray = None
    final_logvar: np.ndarray = None

    def __eq__(self, other):
        if not isinstance(other, RunRecord):
            return NotImplemented
        return (
            self.config == other.config
            and self.rows == other.rows
            and np.array_equal(self.final_mean, other.final_mean)
            and np.array_equal(self.final_logvar, other.final_logvar)
        )

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.rows], dtype=float)


def update_direction(method: str, params: BeliefParams, grad, epsilon=None):
    """Turn an ES gradient into what Adam consumes; returns ``(direction, kl)``."""
    if method == "es":
        return grad, None
    if method == "nes":
        return natural_gradient(params, grad), None
    if method == "cones":
        sol = solve(params, grad, epsilon)
        return sol.delta, sol.achieved_kl
    raise ConfigError(f"unknown method {method!r}")


def _evaluate(loss_fn, points, executor):
    if executor is None:
        losses = loss_fn(points)
    else:
        # map preserves order, so the record cannot depend on scheduling
        losses = list(executor.map(loss_fn, list(points)))
    return np.asarray(losses, dtype=np.float64).reshape(len(points))


def run(
    config: RunConfig,
    *,
    loss_fn: Callable = None,
    executor=None,
    timing: bool = False,
    callback: Callable = None,
) -> RunRecord:
    """Optimize ``config.benchmark`` (or ``loss_fn``) with ``config.method``.

    ``wall_ms`` is only measured when ``timing`` is set; otherwise it is 0 so
    that repeated runs produce identical records.  ``callback`` is invoked as
    ``callback(iteration, params, grad, direction)`` before each Adam step.
    """
    config.validate()
    loss_fn = loss_fn or benchmarks.get(config.benchmark)
    n = config.dim
    rng = np.random.default_rng(config.seed)
    params = BeliefParams.isotropic(n, config.init_mean, config.init_std)
    theta = params.theta
    state = AdamState.zeros(2 * n)
    record = RunRecord(config)
    start = time.perf_counter()

    for it in range(1, config.iters + 1):
        params = BeliefParams.from_theta(theta)
        batch = sample_antithetic(params, config.pop, rng)
        losses = _evaluate(loss_fn, batch.points, executor)
        bad = np.flatnonzero(~np.isfinite(losses))
        if bad.size:
            raise NumericalAbort(
                f"non-finite loss at iteration {it}, candidate {int(bad[0])}",
                iteration=it,
                candidate=int(bad[0]),
            )
        grad = es_gradient(params, batch, losses)
        try:
            direction, kl = update_direction(config.method, params, grad, config.epsilon)
            if callback is not None:
                callback(it, params, grad, direction)
            state, new_theta = adam_step(state, theta, direction, config.lr_mean, config.lr_logvar)
        except (ValueError, RuntimeError) as exc:
            raise NumericalAbort(f"iteration {it}: {exc}", iteration=it) from exc
        if not np.all(np.isfinite(new_theta)):
            raise NumericalAbort(f"belief parameters became non-finite at iteration {it}", iteration=it)
        step = float(np.linalg.norm(new_theta[:n] - theta[:n]))
        theta = new_theta
        wall = int((time.perf_counter() - start) * 1000) if timing else 0
        record.rows.append(
            TraceRow(
                iter=it,
                evals=it * config.pop,
                loss=float(np.mean(losses)),
                step_size=step,
                kl=kl,
                wall_ms=wall,
                loss_at_mean=float(np.asarray(loss_fn(params.mean)).reshape(())),
            )
        )
        if it % 100 == 0:
            log.debug("iter %d loss %.6g step %.3g", it, record.rows[-1].loss, step)

    final = BeliefParams.from_theta(theta)
    record.final_mean = final.mean
    record.final_logvar = final.logvar
    return record


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def trace_csv(record: RunRecord) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_HEADER)
    for r in record.rows:
        writer.writerow([_fmt(getattr(r, k)) for k in TRACE_HEADER])
    return buf.getvalue()


def run_json(record: RunRecord) -> str:
    last = record.rows[-1] if record.rows else None
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": record.config.to_dict(),
        "final": {
            "iters": len(record.rows),
            "evals": last.evals if last else 0,
            "loss": last.loss if last else None,
            "loss_at_mean": last.loss_at_mean if last else None,
            "mean": [float(v) for v in record.final_mean],
            "logvar": [float(v) for v in record.final_logvar],
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write(path: Path, text: str):
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit(record: RunRecord, out_dir) -> tuple[Path, Path]:
    """Write ``run.json`` and ``trace.csv`` into ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out}: {exc.strerror or exc}") from exc
    run_path, trace_path = out / "run.json", out / "trace.csv"
    _write(run_path, run_json(record))
    _write(trace_path, trace_csv(record))
    return run_path, trace_path


def load_run(path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported run.json schema {doc.get('schema_version')!r}")
    return doc


def load_config(path) -> RunConfig:
    return RunConfig.from_dict(load_run(path)["config"])


def read_trace(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def sweep(config: RunConfig, seeds, out_dir=None, *, timing: bool = False) -> dict:
    """Repeat ``config`` over ``seeds``; optionally emit per-seed traces and ``summary.csv``."""
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ConfigError("need at least one seed")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")
    records = {}
    for s in seeds:
        rec = run(dataclasses.replace(config, seed=s), timing=timing)
        records[s] = rec
        if out_dir is not None:
            emit(rec, Path(out_dir) / f"seed_{s}")
    if out_dir is not None:
        _write(Path(out_dir) / "summary.csv", summary_csv(list(records.values())))
    return records


SUMMARY_HEADER = (
    "iter", "evals",
    "loss_median", "loss_std",
    "step_size_median", "step_size_std",
    "kl_median", "kl_std",
)


def summary_csv(records) -> str:
    """Per-iteration median and standard deviation across seeds."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_HEADER)
    first = records[0]
    cols = {}
    for name in ("loss", "step_size", "kl"):
        cols[name] = np.stack([r.column(name) for r in records])
    for i, row in enumerate(first.rows):
        out = [str(row.iter), str(row.evals)]
        for name in ("loss", "step_size", "kl"):
            vals = cols[name][:, i]
            if np.all(np.isnan(vals)):
                out += ["", ""]
            else:
                out += [_fmt(np.median(vals)), _fmt(np.std(vals))]
        writer.writerow(out)
    return buf.getvalue()

