"""Config-file loading: one TOML document describes a whole run.

The file mirrors `RunConfig` plus driver options (output directory,
seed lists, plotting). Parsing is strict — unknown sections or keys,
missing required keys, type mismatches, and out-of-range values are all
rejected up front with the offending dotted key named, so a sweep never
dies halfway through on a typo.

Command-line ``--set section.key=value`` overrides are applied to the
parsed document before validation.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - version-dependent import
    import tomli as tomllib

from .errors import ConfigError, DomainError
from .federation import (AggregationMode, FixedInterval, IntervalSchedule,
                         LogAdaptiveInterval, RunConfig, VhatAggregation)
from .objectives import ObjectiveSpec, make_oracles, smoothness_constant
from .optimizer import HyperParams
from .theory import schedule_iterations, step_size_cap

# Schema: section -> key -> (type tag, required, default).
# Type tags: int, float (accepts ints), bool, str, float_list, int_list,
# alpha (float or the literal string "theory").
_SCHEMA: Dict[str, Dict[str, Tuple[str, bool, Any]]] = {
    "run": {
        "rounds": ("int", True, None),
        "seed": ("int", True, None),
        "out_dir": ("str", False, "results"),
        "parallel": ("bool", False, False),
        "record_history": ("bool", False, False),
        "per_step_metrics": ("bool", False, False),
        "enforce_theory_lr": ("bool", False, False),
        "plot": ("bool", False, True),
        "x0": ("float_list", False, None),
    },
    "federation": {
        "n_clients": ("int", True, None),
        "participants_per_round": ("int", False, None),
        "aggregation": ("str", False, "average"),
        "restart_momentum": ("bool", False, False),
    },
    "optimizer": {
        "alpha": ("alpha", True, None),
        "beta1": ("float", False, 0.9),
        "beta2": ("float", False, 0.99),
        "epsilon": ("float", True, None),
        "g_inf_clip": ("float", False, None),
        "lr_decay": ("float", False, 1.0),
        "smoothness": ("float", False, None),
    },
    "schedule": {
        "kind": ("str", True, None),
        "k": ("int", False, None),
        "k_init": ("int", False, None),
        "k_alpha": ("float", False, None),
    },
    "objective": {
        "kind": ("str", True, None),
        "dim": ("int", True, None),
        "sigma": ("float", False, 0.0),
        "clip": ("float", False, None),
        "a_min": ("float", False, 0.5),
        "a_max": ("float", False, 2.0),
        "b_scale": ("float", False, 1.0),
        "n_samples": ("int", False, 64),
        "batch_size": ("int", False, 8),
        "hidden": ("int", False, 8),
    },
    "sweep": {
        "seeds": ("int_list", False, None),
        "n_seeds": ("int", False, None),
    },
}

_OPTIONAL_SECTIONS = {"sweep"}


@dataclass
class AppConfig:
    """Validated configuration document, one attribute per section."""

    run: Dict[str, Any]
    federation: Dict[str, Any]
    optimizer: Dict[str, Any]
    schedule: Dict[str, Any]
    objective: Dict[str, Any]
    sweep: Dict[str, Any] = field(default_factory=dict)

    @property
    def alpha_is_theory(self) -> bool:
        return self.optimizer["alpha"] == "theory"

    def seeds(self) -> List[int]:
        """Seed list for sweeps: explicit list, or 0..n_seeds−1."""
        if self.sweep.get("seeds") is not None:
            return [int(s) for s in self.sweep["seeds"]]
        n = self.sweep.get("n_seeds")
        if n is not None:
            if n < 1:
                raise ConfigError("sweep.n_seeds must be positive")
            return list(range(n))
        return [self.run["seed"]]


def _type_ok(tag: str, value: Any) -> bool:
    if tag == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if tag == "float":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if tag == "bool":
        return isinstance(value, bool)
    if tag == "str":
        return isinstance(value, str)
    if tag == "alpha":
        return value == "theory" or _type_ok("float", value)
    if tag == "float_list":
        return (isinstance(value, list) and len(value) > 0
                and all(_type_ok("float", v) for v in value))
    if tag == "int_list":
        return (isinstance(value, list) and len(value) > 0
                and all(_type_ok("int", v) for v in value))
    raise AssertionError(f"unknown schema tag {tag}")


def _validate(document: Dict[str, Any]) -> AppConfig:
    for section in document:
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(document[section], dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in document[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}")

    filled: Dict[str, Dict[str, Any]] = {}
    for section, keys in _SCHEMA.items():
        if section not in document and section not in _OPTIONAL_SECTIONS:
            raise ConfigError(f"missing required section [{section}]")
        given = document.get(section, {})
        out: Dict[str, Any] = {}
        for key, (tag, required, default) in keys.items():
            if key in given:
                value = given[key]
                if not _type_ok(tag, value):
                    raise ConfigError(
                        f"{section}.{key} has the wrong type "
                        f"(expected {tag}, got {type(value).__name__})")
                if tag == "float" and not isinstance(value, float):
                    value = float(value)
                out[key] = value
            elif required:
                raise ConfigError(f"missing required key {section}.{key}")
            else:
                out[key] = default
        filled[section] = out
    return AppConfig(**filled)


def _parse_override(raw: str) -> Tuple[str, str, Any]:
    """Split 'section.key=value' and type the value via a TOML parse."""
    if "=" not in raw:
        raise ConfigError(f"override {raw!r} is not of the form section.key=value")
    dotted, text = raw.split("=", 1)
    dotted = dotted.strip()
    if dotted.count(".") != 1:
        raise ConfigError(f"override key {dotted!r} must be section.key")
    section, key = dotted.split(".")
    try:
        value = tomllib.loads(f"v = {text.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = text.strip()  # bare words read as strings
    return section, key, value


def load_config(path: str, overrides: Sequence[str] = ()) -> AppConfig:
    """Read, override, and validate a config file."""
    try:
        with open(path, "rb") as fh:
            document = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse failure in {path}: {exc}")
    for raw in overrides:
        section, key, value = _parse_override(raw)
        document.setdefault(section, {})[key] = value
    return _validate(document)


# ---------------------------------------------------------------------------
# AppConfig -> runnable objects


def build_schedule(app: AppConfig) -> IntervalSchedule:
    sched = app.schedule
    try:
        if sched["kind"] == "fixed":
            if sched["k"] is None:
                raise ConfigError("schedule.k is required when kind = 'fixed'")
            return FixedInterval(k=sched["k"])
        if sched["kind"] == "log":
            if sched["k_init"] is None or sched["k_alpha"] is None:
                raise ConfigError(
                    "schedule.k_init and schedule.k_alpha are required "
                    "when kind = 'log'")
            return LogAdaptiveInterval(k_init=sched["k_init"],
                                       k_alpha=sched["k_alpha"])
    except DomainError as exc:
        raise ConfigError(f"schedule: {exc}")
    raise ConfigError(f"schedule.kind must be 'fixed' or 'log', "
                      f"got {sched['kind']!r}")


def build_objective(app: AppConfig) -> ObjectiveSpec:
    obj = app.objective
    try:
        return ObjectiveSpec(
            kind=obj["kind"], dim=obj["dim"], sigma=obj["sigma"],
            clip=obj["clip"], a_min=obj["a_min"], a_max=obj["a_max"],
            b_scale=obj["b_scale"], n_samples=obj["n_samples"],
            batch_size=obj["batch_size"], hidden=obj["hidden"],
        )
    except DomainError as exc:
        raise ConfigError(f"objective: {exc}")


def _smoothness_for(app: AppConfig, spec: ObjectiveSpec, n_clients: int,
                    seed: int) -> float:
    explicit = app.optimizer["smoothness"]
    if explicit is not None:
        if explicit <= 0.0:
            raise ConfigError("optimizer.smoothness must be positive")
        return explicit
    if spec.kind == "het_quadratic":
        return smoothness_constant(make_oracles(spec, n_clients, seed))
    raise ConfigError(
        "optimizer.smoothness is required for the theory step size or "
        "enforcement on non-quadratic objectives")


def build_run_config(app: AppConfig, *, seed: Optional[int] = None,
                     n_clients: Optional[int] = None) -> RunConfig:
    """Materialize a RunConfig, resolving alpha='theory' and the cap check.

    ``seed``/``n_clients`` override the file values (sweeps vary them).
    """
    fed, opt, run = app.federation, app.optimizer, app.run
    n = fed["n_clients"] if n_clients is None else n_clients
    the_seed = run["seed"] if seed is None else seed
    schedule = build_schedule(app)
    objective = build_objective(app)

    try:
        rounds = run["rounds"]
        cap = None
        if app.alpha_is_theory or run["enforce_theory_lr"]:
            if rounds < 1:
                raise ConfigError("theory step size needs rounds >= 1")
            smoothness = _smoothness_for(app, objective, n, the_seed)
            cap = step_size_cap(opt["epsilon"], smoothness)
        if app.alpha_is_theory:
            budget = schedule_iterations(schedule, rounds)
            alpha = min((n / budget) ** 0.5, cap)
        else:
            alpha = opt["alpha"]
        if run["enforce_theory_lr"] and alpha > cap:
            raise ConfigError(
                f"optimizer.alpha={alpha:.6g} exceeds the admissible cap "
                f"3*epsilon/(20*L)={cap:.6g} and run.enforce_theory_lr is on")

        hp = HyperParams(alpha=alpha, beta1=opt["beta1"], beta2=opt["beta2"],
                         epsilon=opt["epsilon"], g_inf_clip=opt["g_inf_clip"])
        x0 = None if run["x0"] is None else tuple(float(v) for v in run["x0"])
        return RunConfig(
            n_clients=n,
            rounds=rounds,
            hp=hp,
            schedule=schedule,
            objective=objective,
            seed=the_seed,
            participants_per_round=fed["participants_per_round"],
            mode=AggregationMode(
                variant=_aggregation(fed["aggregation"]),
                restart_momentum=fed["restart_momentum"]),
            lr_decay=opt["lr_decay"],
            x0=x0,
        )
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc))


def _aggregation(name: str) -> VhatAggregation:
    try:
        return VhatAggregation(name)
    except ValueError:
        raise ConfigError(
            f"federation.aggregation must be 'average' or 'max', got {name!r}")
