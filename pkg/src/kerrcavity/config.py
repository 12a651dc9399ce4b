"""Run configuration schema (TOML on disk) and conversion to SystemParams."""

import hashlib
import json
import sys
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticError, model_validator

from .errors import ConfigError
from .model import SystemParams, validate

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SystemSection(_Strict):
    kind: Literal["single", "three"] = "three"
    delta: Optional[List[float]] = None
    delta0: float = -3.0
    delta_d: float = 0.0
    spacing: float = 1.0
    v0: float = 1.0
    omega0: float = 0.0
    gamma: Union[float, List[float]] = 1.0
    n_th: float = 0.0
    pump: Optional[int] = None
    xpm: float = 2.0
    exch: float = 1.0

    def params(self):
        if self.delta is not None:
            n = len(self.delta)
            gamma = self.gamma if isinstance(self.gamma, list) else [self.gamma] * n
            p = SystemParams(delta=tuple(self.delta), gamma=tuple(gamma), v0=self.v0,
                             omega0=self.omega0, pump=self.pump, n_th=self.n_th, xpm=self.xpm,
                             exch=self.exch)
        elif self.kind == "single":
            g = self.gamma[0] if isinstance(self.gamma, list) else self.gamma
            p = SystemParams.single_mode(self.delta0, self.v0, self.omega0, gamma=g, n_th=self.n_th)
        else:
            g = tuple(self.gamma) if isinstance(self.gamma, list) else self.gamma
            p = SystemParams.three_mode(self.delta0, self.v0, self.omega0, delta_d=self.delta_d,
                                        spacing=self.spacing, gamma=g, n_th=self.n_th,
                                        xpm=self.xpm, exch=self.exch)
        return validate(p)


class SolverSection(_Strict):
    n_traj: int = Field(2000, ge=2)
    dt: float = Field(1e-3, gt=0)
    t_final: float = Field(60.0, gt=0)
    settle_time: float = Field(50.0, ge=0)
    scheme: Literal["euler", "midpoint"] = "euler"
    n_seeds: int = Field(16, ge=1)
    n_max: Optional[List[int]] = None
    tail_tol: float = Field(1e-6, gt=0)
    tau_max: float = Field(4.0, gt=0)
    dtau: float = Field(0.02, gt=0)
    n_list: Optional[List[float]] = None
    v0_list: Optional[List[float]] = None
    n_eigs: int = Field(3, ge=2)
    mcwf_trajectories: int = Field(500, ge=1)
    mcwf_t_final: float = Field(10.0, gt=0)
    mcwf_dt: float = Field(0.05, gt=0)
    dwell_t_final: float = Field(2000.0, gt=0)


class AxisSpec(_Strict):
    start: Optional[float] = None
    stop: Optional[float] = None
    num: Optional[int] = Field(None, ge=1)
    values: Optional[List[float]] = None

    @model_validator(mode="after")
    def _complete(self):
        if self.values is None and None in (self.start, self.stop, self.num):
            raise ValueError("axis needs either values or start/stop/num")
        return self

    def grid(self):
        import numpy as np
        if self.values is not None:
            return np.asarray(self.values, float)
        return np.linspace(self.start, self.stop, self.num)


AXIS_NAMES = ("omega0", "v0", "n_th", "delta0", "delta_d")


class SweepSection(_Strict):
    axes: Dict[str, AxisSpec] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _names(self):
        bad = [k for k in self.axes if k not in AXIS_NAMES]
        if bad:
            raise ValueError(f"unknown sweep axes {bad}; allowed {list(AXIS_NAMES)}")
        return self


class OutputSection(_Strict):
    directory: str = "out"
    formats: List[Literal["csv", "json", "svg"]] = Field(default_factory=lambda: ["csv", "json"])
    checkpoint_interval: float = Field(600.0, gt=0)


class RunConfig(_Strict):
    recipe: str
    seed: int = 0
    workers: Optional[int] = Field(None, ge=1)
    system: SystemSection = Field(default_factory=SystemSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    output: OutputSection = Field(default_factory=OutputSection)

    def digest(self):
        """Hash of everything that determines the numbers (not workers or output)."""
        blob = json.dumps(self.model_dump(mode="json", exclude={"workers", "output"}),
                          sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _merge(base, over):
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_config(data, defaults=None):
    """Validate a mapping (optionally layered over recipe defaults)."""
    merged = _merge(defaults or {}, data)
    try:
        cfg = RunConfig.model_validate(merged)
    except PydanticError as e:
        raise ConfigError("invalid configuration", errors=json.dumps(
            [{"loc": ".".join(map(str, x["loc"])), "msg": x["msg"]} for x in e.errors()]))
    cfg.system.params()
    return cfg


def load_toml(path):
    p = Path(path)
    try:
        with p.open("rb") as fh:
            return tomllib.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read {p}: {e.strerror}", path=str(p))
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"malformed TOML in {p}: {e}", path=str(p))
