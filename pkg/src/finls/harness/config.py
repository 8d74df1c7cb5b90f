"""Strict JSON experiment configuration.

Every section forbids unknown keys. Only two environment variables are
honoured, and only for where results go and how many sweep workers run:
FINLS_OUTPUT_DIR and FINLS_WORKERS.
"""

import hashlib
import json
import math
import os
from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticError, field_validator

from ..diagnostics import MQuadrature
from ..dynamics import EvolveControls
from ..errors import ValidationError
from ..ground_state import GroundStateOptions
from ..model import ModelParams
from ..spectral import Grid

__all__ = [
    "ExperimentConfig",
    "SweepSpec",
    "load_config",
    "load_sweep",
    "config_hash",
    "ENV_OUTPUT_DIR",
    "ENV_WORKERS",
]

ENV_OUTPUT_DIR = "FINLS_OUTPUT_DIR"
ENV_WORKERS = "FINLS_WORKERS"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ParamsSection(_Strict):
    dim: int = 2
    s: float = 0.8
    b: float = 0.4
    p: float = 3.0
    sign: Literal["focusing", "defocusing"] = "focusing"

    def build(self):
        return ModelParams(self.dim, self.s, self.b, self.p, self.sign)


class GridSection(_Strict):
    points_per_axis: int = 256
    half_width: float = 16.0
    weight_origin: Literal["cell_average", "lattice"] = "cell_average"

    def build(self, dim):
        return Grid(dim, self.points_per_axis, self.half_width)


class ControlsSection(_Strict):
    dt: float = 1e-3
    t_end: float = 1.0
    snapshot_stride: int = 10
    dt_floor: float | None = None
    gradient_cap: float = 10.0
    dealias: bool = False
    adaptive: bool = False
    boundary_tol: float = 1e-6
    boundary_reference: Literal["absolute", "initial"] = "absolute"
    scattering_samples: int = 6

    def build(self):
        return EvolveControls(**self.model_dump())


class GroundSection(_Strict):
    max_iter: int = 3000
    tol: float = 1e-10
    residual_target: float = 1e-8
    radialize_every: int = 10

    def build(self):
        return GroundStateOptions(**self.model_dump())


class GroundScaled(_Strict):
    kind: Literal["ground_scaled"]
    c: float

    @field_validator("c")
    @classmethod
    def _finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("amplitude must be finite")
        return v


class GaussianData(_Strict):
    kind: Literal["gaussian"]
    width: float = 1.0
    amplitude: float = 1.0
    drift: list[float] = Field(default_factory=list)

    @field_validator("width", "amplitude")
    @classmethod
    def _finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("must be finite")
        return v


class FileData(_Strict):
    kind: Literal["file"]
    path: str


InitialData = Annotated[Union[GroundScaled, GaussianData, FileData], Field(discriminator="kind")]


class DiagnosticsSection(_Strict):
    radii: list[float] = Field(default_factory=lambda: [2.0, 4.0, 8.0])
    virial_radius: float | None = None
    m_nodes: int = 128
    m_tail_tol: float = 1e-6
    scattering_tol: float = 1e-2

    def quadrature(self):
        return MQuadrature(self.m_nodes, self.m_tail_tol)


class LinearSection(_Strict):
    times: list[float] = Field(default_factory=lambda: [1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0])
    exponents: list[Union[float, Literal["inf"]]] = Field(default_factory=lambda: [2.0, 4.0, "inf"])
    boundary_tol: float = 1e-4

    def exponent_values(self):
        return [math.inf if e == "inf" else float(e) for e in self.exponents]


class VerifySection(_Strict):
    corpus_size: int = 50
    sobolev_corpus_size: int = 20
    subthreshold_epsilon: float = 0.05
    gn_slack: float = 1e-3
    identity_tol: float = 1e-3
    balakrishnan_gauss_tol: float = 5e-3
    balakrishnan_mode_tol: float = 1e-3
    cutoff_tol: float = 1e-12
    energy_slack_floor: float = -1e-6
    ground_snapshot: str | None = None


class ExperimentConfig(_Strict):
    params: ParamsSection = ParamsSection()
    grid: GridSection = GridSection()
    controls: ControlsSection = ControlsSection()
    initial_data: InitialData = GroundScaled(kind="ground_scaled", c=0.8)
    ground: GroundSection = GroundSection()
    diagnostics: DiagnosticsSection = DiagnosticsSection()
    linear: LinearSection = LinearSection()
    verify: VerifySection = VerifySection()
    seed: int = 0
    output_dir: str = "finls_out"

    def model_params(self):
        return self.params.build()

    def build_grid(self):
        return self.grid.build(self.params.dim)

    def canonical(self):
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


class SweepAxes(_Strict):
    s: list[float] = Field(default_factory=list)
    b: list[float] = Field(default_factory=list)
    p: list[float] = Field(default_factory=list)
    c: list[float] = Field(default_factory=list)


class SweepSpec(_Strict):
    axes: SweepAxes
    template: ExperimentConfig = ExperimentConfig()
    workers: int = 1
    resume: bool = False

    def canonical(self):
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))


def config_hash(cfg):
    return hashlib.sha256(cfg.canonical().encode()).hexdigest()


def _format_errors(err):
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e["loc"])
        parts.append(f"{loc}: {e['msg']}")
    return "; ".join(parts)


def _read_json(path):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"config file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc


def _apply_env(data, env, keys):
    out = dict(data)
    if "output_dir" in keys and env.get(ENV_OUTPUT_DIR):
        out["output_dir"] = env[ENV_OUTPUT_DIR]
    if "workers" in keys and env.get(ENV_WORKERS):
        try:
            out["workers"] = int(env[ENV_WORKERS])
        except ValueError as exc:
            raise ValidationError(f"{ENV_WORKERS} must be an integer") from exc
    return out


def _check_referenced_files(cfg, base):
    init = cfg.initial_data
    if isinstance(init, FileData):
        p = Path(init.path)
        if not p.is_absolute():
            p = Path(base) / p
        if not p.is_file():
            raise ValidationError(f"initial_data.path does not exist: {p}")


def load_config(path, env=None, overrides=None):
    """Parse and validate an ExperimentConfig. Physical admissibility is checked too."""
    env = os.environ if env is None else env
    data = _apply_env(_read_json(path), env, {"output_dir"})
    if overrides:
        data.update(overrides)
    try:
        cfg = ExperimentConfig.model_validate(data)
    except PydanticError as exc:
        raise ValidationError(_format_errors(exc)) from exc
    validate_physics(cfg)
    _check_referenced_files(cfg, Path(path).parent)
    return cfg


def validate_physics(cfg):
    """Build every derived object so bad parameters fail before any compute."""
    params = cfg.model_params()
    params.exponents
    cfg.build_grid()
    cfg.controls.build()
    if cfg.params.dim != 2 and cfg.params.dim != 3:
        raise ValidationError("dim must be 2 or 3")


def load_sweep(path, env=None, overrides=None):
    env = os.environ if env is None else env
    data = _read_json(path)
    data = _apply_env(data, env, {"workers"})
    tmpl = dict(data.get("template", {}))
    if env.get(ENV_OUTPUT_DIR):
        tmpl["output_dir"] = env[ENV_OUTPUT_DIR]
    data["template"] = tmpl
    if overrides:
        data.update(overrides)
    try:
        spec = SweepSpec.model_validate(data)
    except PydanticError as exc:
        raise ValidationError(_format_errors(exc)) from exc
    if spec.workers < 1:
        raise ValidationError("workers must be >= 1")
    return spec
