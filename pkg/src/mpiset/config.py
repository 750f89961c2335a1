"""Run configuration: a YAML file with dynamics and constraints as
polynomial strings plus hierarchy, solver and validation options."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import yaml

from .polynomials import Polynomial, PolynomialParseError, parse_polynomial
from .sets import SemialgebraicSet
from .hierarchy import MODE_FORCED, MODE_SLACK, OdeSystem
from .solver import SolverOptions
from .validation import ValidationConfig

MODE_BOTH = "both"
VALID_MODES = (MODE_SLACK, MODE_FORCED, MODE_BOTH)


class ConfigError(ValueError):
    """Invalid run configuration; message carries key and position context."""


_TOP_KEYS = {
    "dimension", "dynamics", "constraints", "ball_radius",
    "k_min", "k_max", "time_bound", "mode",
    "solver", "validation", "seed", "out_dir", "grid",
    "mc_samples", "slice_anchor",
}
_SOLVER_KEYS = {"gap_tol", "feas_tol", "max_iter", "verbose", "backend"}
_VALIDATION_KEYS = {
    "enabled", "residual_interior", "residual_boundary", "invariance_points",
    "volume_samples", "horizons", "t_sim", "step", "v_check_interval",
    "v_slack", "seed", "estimate_tau", "tau_samples", "tau_horizon",
}


@dataclass
class RunConfig:
    dimension: int
    dynamics: list[str]
    constraints: list[str]
    k_min: int
    k_max: int
    time_bound: float | str = "auto"
    mode: str = MODE_SLACK
    ball_radius: float | None = None
    solver: SolverOptions = field(default_factory=SolverOptions)
    validation_enabled: bool = True
    validation: ValidationConfig = field(default_factory=ValidationConfig)
    seed: int = 0
    out_dir: str = "out"
    grid: int = 101
    mc_samples: int = 1_000_000
    slice_anchor: list[float] | None = None

    # -- construction ----------------------------------------------------

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        for key in ("dimension", "dynamics", "constraints", "k_min", "k_max"):
            if key not in data:
                raise ConfigError(f"missing required key {key!r}")

        n = data["dimension"]
        if not isinstance(n, int) or n < 1:
            raise ConfigError(f"dimension must be a positive integer, got {n!r}")
        dynamics = _string_list(data, "dynamics")
        if len(dynamics) != n:
            raise ConfigError(
                f"dynamics has {len(dynamics)} components, expected {n}"
            )
        constraints = _string_list(data, "constraints")
        if not constraints:
            raise ConfigError("constraints must be a nonempty list")
        for key_name, strings in (("dynamics", dynamics), ("constraints", constraints)):
            for i, s in enumerate(strings):
                try:
                    parse_polynomial(s, n)
                except PolynomialParseError as exc:
                    raise ConfigError(f"{key_name}[{i}]: {exc}") from exc

        k_min, k_max = data["k_min"], data["k_max"]
        if not (isinstance(k_min, int) and isinstance(k_max, int)):
            raise ConfigError("k_min and k_max must be integers")
        if k_min < 1 or k_max < k_min:
            raise ConfigError(f"need 1 <= k_min <= k_max, got {k_min}..{k_max}")

        time_bound = data.get("time_bound", "auto")
        if time_bound != "auto":
            try:
                time_bound = float(time_bound)
            except (TypeError, ValueError):
                raise ConfigError(
                    f"time_bound must be a positive number or 'auto', got {time_bound!r}"
                )
            if not time_bound > 0:
                raise ConfigError(f"time_bound must be positive, got {time_bound}")

        mode = data.get("mode", MODE_SLACK)
        if mode not in VALID_MODES:
            raise ConfigError(f"mode must be one of {VALID_MODES}, got {mode!r}")

        ball_radius = data.get("ball_radius")
        if ball_radius is not None:
            ball_radius = float(ball_radius)
            if not ball_radius > 0:
                raise ConfigError(f"ball_radius must be positive, got {ball_radius}")

        solver_data = data.get("solver") or {}
        unknown = set(solver_data) - _SOLVER_KEYS
        if unknown:
            raise ConfigError(f"unknown solver keys: {sorted(unknown)}")
        solver = SolverOptions(**solver_data)

        val_data = dict(data.get("validation") or {})
        unknown = set(val_data) - _VALIDATION_KEYS
        if unknown:
            raise ConfigError(f"unknown validation keys: {sorted(unknown)}")
        enabled = bool(val_data.pop("enabled", True))
        if "horizons" in val_data:
            val_data["horizons"] = tuple(float(t) for t in val_data["horizons"])
        seed = int(data.get("seed", 0))
        val_data.setdefault("seed", seed)
        validation = ValidationConfig(**val_data)

        grid = int(data.get("grid", 101))
        if grid < 2:
            raise ConfigError(f"grid resolution must be >= 2, got {grid}")

        anchor = data.get("slice_anchor")
        if anchor is not None:
            anchor = [float(a) for a in anchor]
            if len(anchor) != n:
                raise ConfigError(
                    f"slice_anchor has {len(anchor)} coordinates, expected {n}"
                )

        return RunConfig(
            dimension=n,
            dynamics=dynamics,
            constraints=constraints,
            k_min=k_min,
            k_max=k_max,
            time_bound=time_bound,
            mode=mode,
            ball_radius=ball_radius,
            solver=solver,
            validation_enabled=enabled,
            validation=validation,
            seed=seed,
            out_dir=str(data.get("out_dir", "out")),
            grid=grid,
            mc_samples=int(data.get("mc_samples", 1_000_000)),
            slice_anchor=anchor,
        )

    @staticmethod
    def from_yaml(path: str) -> "RunConfig":
        with open(path) as fh:
            text = fh.read()
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ConfigError(f"YAML parse error in {path}{where}: {exc}") from exc
        if data is None:
            raise ConfigError(f"{path} is empty")
        try:
            return RunConfig.from_dict(data)
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def to_dict(self) -> dict:
        out: dict[str, Any] = {
            "dimension": self.dimension,
            "dynamics": list(self.dynamics),
            "constraints": list(self.constraints),
            "k_min": self.k_min,
            "k_max": self.k_max,
            "time_bound": self.time_bound,
            "mode": self.mode,
            "solver": {
                "gap_tol": self.solver.gap_tol,
                "feas_tol": self.solver.feas_tol,
                "max_iter": self.solver.max_iter,
                "verbose": self.solver.verbose,
                "backend": self.solver.backend,
            },
            "validation": {"enabled": self.validation_enabled, **self.validation.to_dict()},
            "seed": self.seed,
            "out_dir": self.out_dir,
            "grid": self.grid,
            "mc_samples": self.mc_samples,
        }
        out["validation"]["horizons"] = list(self.validation.horizons)
        if self.ball_radius is not None:
            out["ball_radius"] = self.ball_radius
        if self.slice_anchor is not None:
            out["slice_anchor"] = list(self.slice_anchor)
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    # -- domain objects ----------------------------------------------------

    def build_system(self) -> OdeSystem:
        n = self.dimension
        return OdeSystem(tuple(parse_polynomial(s, n) for s in self.dynamics))

    def build_set(self) -> SemialgebraicSet:
        n = self.dimension
        X = SemialgebraicSet([parse_polynomial(s, n) for s in self.constraints])
        if self.ball_radius is not None:
            X = X.ensure_ball_constraint(self.ball_radius)
        if X.ball_index is None:
            raise ConfigError(
                "constraint set has no bounding ball R^2 - |x|^2; "
                "add one to `constraints` or set `ball_radius`"
            )
        if self.k_min < X.k_min:
            raise ConfigError(
                f"k_min = {self.k_min} is below the set's minimum order {X.k_min}"
            )
        if self.k_max < X.k_min:
            raise ConfigError(
                f"k_max = {self.k_max} is below the set's minimum order {X.k_min}"
            )
        return X


def _string_list(data: dict, key: str) -> list[str]:
    val = data.get(key)
    if not isinstance(val, list) or not all(isinstance(s, str) for s in val):
        raise ConfigError(f"{key} must be a list of polynomial strings")
    return list(val)
