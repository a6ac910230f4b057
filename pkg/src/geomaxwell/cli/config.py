"""Scenario configuration: a YAML key-value tree parsed into dataclasses.

Every section is optional except ``scenario``.  Unknown keys and ill-typed
values raise :class:`ConfigError` carrying a dotted field path, e.g.
``evolution.dt``.  See ``docs/config.md`` for the schema.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import yaml

from ..errors import ConfigError

SCENARIOS = ("vacuum_wave", "kerr_wave", "dispersive_wave", "boost_check",
             "vlasov_two_stream", "invariant_battery")
WAVE_SCENARIOS = ("vacuum_wave", "kerr_wave", "dispersive_wave")
MEDIA = ("vacuum", "linear", "kerr", "nonlocal_dispersive", "born_infeld")
INTEGRATORS = ("implicit_midpoint", "lie_splitting")


@dataclass
class MeshSpec:
    dimension: int = 1
    cells: List[int] = field(default_factory=lambda: [64])
    extent: List[float] = field(default_factory=lambda: [1.0])
    metric: List[float] = field(default_factory=lambda: [1.0])


@dataclass
class MediaSpec:
    """Medium parameters; ``alpha``/``beta`` are the permittivity-form coefficients."""

    type: str = "vacuum"
    chi_e: float = 0.0
    chi_m: float = 0.0
    chi1: float = 0.0
    chi3: float = 0.0
    alpha: float = 1.0
    beta: float = 0.0
    born_infeld_b: float = 1.0


@dataclass
class EvolutionSpec:
    """``dt`` overrides ``cfl`` (dt = cfl * h / c) when given."""

    dt: Optional[float] = None
    cfl: float = 0.5
    n_steps: int = 100
    integrator: str = "implicit_midpoint"
    tol: float = 1e-12
    max_iter: int = 100
    monitor_stride: int = 1
    c: float = 1.0


@dataclass
class ExcitationSpec:
    modes: List[int] = field(default_factory=lambda: [1])
    amplitude: float = 1e-6


@dataclass
class OutputSpec:
    dir: str = "output"
    prefix: Optional[str] = None


@dataclass
class VlasovSpec:
    n_u: int = 32
    u_max: float = 0.8
    q: float = -1.0
    m: float = 1.0
    density: float = 0.07957747154594767
    drift: float = 0.2
    sigma: float = 0.07
    perturbation: float = 0.01
    mode: int = 1
    seed_field: float = 0.05
    test_modes: List[int] = field(default_factory=lambda: [0, 1, 2])


@dataclass
class BoostSpec:
    samples: int = 1000
    v_max: float = 0.99


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int = 0
    mesh: MeshSpec = field(default_factory=MeshSpec)
    media: MediaSpec = field(default_factory=MediaSpec)
    evolution: EvolutionSpec = field(default_factory=EvolutionSpec)
    excitation: ExcitationSpec = field(default_factory=ExcitationSpec)
    probes: List[int] = field(default_factory=lambda: [0])
    output: OutputSpec = field(default_factory=OutputSpec)
    vlasov: VlasovSpec = field(default_factory=VlasovSpec)
    boost: BoostSpec = field(default_factory=BoostSpec)

    @property
    def prefix(self):
        return self.output.prefix or self.scenario


_SECTIONS = {"mesh": MeshSpec, "media": MediaSpec, "evolution": EvolutionSpec,
             "excitation": ExcitationSpec, "output": OutputSpec, "vlasov": VlasovSpec,
             "boost": BoostSpec}


def _scalar(value, kind, path):
    if kind is bool or isinstance(value, bool):
        raise ConfigError(path, f"expected {kind.__name__}, got {value!r}")
    if kind is int:
        if isinstance(value, int):
            return value
        if isinstance(value, float) and value.is_integer():
            return int(value)
    elif kind is float:
        if isinstance(value, (int, float)):
            return float(value)
    elif kind is str:
        if isinstance(value, str):
            return value
    raise ConfigError(path, f"expected {kind.__name__}, got {value!r}")


def _coerce(value, annotation, path):
    ann = str(annotation)
    if ann.startswith("Optional["):
        if value is None:
            return None
        ann = ann[len("Optional["):-1]
    if ann.startswith("List["):
        inner = {"int": int, "float": float}[ann[5:-1]]
        items = value if isinstance(value, list) else [value]
        if not items:
            raise ConfigError(path, "must not be empty")
        return [_scalar(v, inner, f"{path}[{i}]") for i, v in enumerate(items)]
    return _scalar(value, {"int": int, "float": float, "str": str}[ann], path)


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected a mapping, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        sub = f"{path}.{key}" if path else str(key)
        if key not in names:
            raise ConfigError(sub, "unknown key")
        if key in _SECTIONS and cls is ScenarioConfig:
            kwargs[key] = _build(_SECTIONS[key], value if value is not None else {}, sub)
        else:
            kwargs[key] = _coerce(value, names[key].type, sub)
    missing = [f.name for f in dataclasses.fields(cls)
               if f.name not in kwargs and f.default is dataclasses.MISSING
               and f.default_factory is dataclasses.MISSING]
    if missing:
        raise ConfigError(f"{path}.{missing[0]}" if path else missing[0], "required key missing")
    return cls(**kwargs)


def _positive(value, path, strict=True):
    if not (value > 0 if strict else value >= 0):
        raise ConfigError(path, f"must be {'positive' if strict else 'non-negative'}, got {value}")


def validate(cfg):
    """Semantic checks beyond types; raises ConfigError with the field path."""
    if cfg.scenario not in SCENARIOS:
        raise ConfigError("scenario", f"must be one of {SCENARIOS}, got {cfg.scenario!r}")
    m = cfg.mesh
    if m.dimension not in (1, 2, 3):
        raise ConfigError("mesh.dimension", f"must be 1, 2 or 3, got {m.dimension}")
    for name in ("cells", "extent", "metric"):
        vals = getattr(m, name)
        if len(vals) not in (1, m.dimension):
            raise ConfigError(f"mesh.{name}", f"needs 1 or {m.dimension} entries")
        for i, v in enumerate(vals):
            if name == "cells" and v < 2:
                raise ConfigError(f"mesh.cells[{i}]", "needs at least 2 cells")
            _positive(v, f"mesh.{name}[{i}]")
    md = cfg.media
    if md.type not in MEDIA:
        raise ConfigError("media.type", f"must be one of {MEDIA}, got {md.type!r}")
    if md.type == "nonlocal_dispersive":
        _positive(md.alpha, "media.alpha")
        _positive(md.beta, "media.beta", strict=False)
    if md.type == "born_infeld":
        _positive(md.born_infeld_b, "media.born_infeld_b")
    ev = cfg.evolution
    if ev.dt is not None:
        _positive(ev.dt, "evolution.dt")
    _positive(ev.cfl, "evolution.cfl")
    _positive(ev.n_steps, "evolution.n_steps", strict=False)
    _positive(ev.tol, "evolution.tol")
    _positive(ev.max_iter, "evolution.max_iter")
    _positive(ev.monitor_stride, "evolution.monitor_stride")
    _positive(ev.c, "evolution.c")
    if ev.integrator not in INTEGRATORS:
        raise ConfigError("evolution.integrator", f"must be one of {INTEGRATORS}")
    linear = md.type in ("vacuum", "linear") or (md.type == "kerr" and md.chi3 == 0.0)
    if ev.integrator == "lie_splitting" and not linear:
        raise ConfigError("evolution.integrator", "lie_splitting needs a pointwise linear medium")
    for i, k in enumerate(cfg.excitation.modes):
        if k < 1:
            raise ConfigError(f"excitation.modes[{i}]", "modes start at 1")
        if 2 * k >= _cells(cfg)[0]:
            raise ConfigError(f"excitation.modes[{i}]", "mode is not resolved by the mesh")
    if cfg.scenario in WAVE_SCENARIOS and ev.n_steps // ev.monitor_stride < 2048:
        raise ConfigError("evolution.n_steps", "wave runs need at least 2048 recorded samples")
    if not cfg.excitation.amplitude > 0:
        raise ConfigError("excitation.amplitude", "must be positive")
    nv = 1
    for c in _cells(cfg):
        nv *= c
    for i, p in enumerate(cfg.probes):
        if not 0 <= p < nv:
            raise ConfigError(f"probes[{i}]", f"vertex index must lie in [0, {nv})")
    vs = cfg.vlasov
    if vs.n_u < 4:
        raise ConfigError("vlasov.n_u", "needs at least 4 cells")
    for name in ("u_max", "m", "density", "sigma"):
        _positive(getattr(vs, name), f"vlasov.{name}")
    if vs.q == 0:
        raise ConfigError("vlasov.q", "must be non-zero")
    if vs.mode < 1:
        raise ConfigError("vlasov.mode", "modes start at 1")
    if cfg.scenario == "vlasov_two_stream" and m.dimension != 1:
        raise ConfigError("mesh.dimension", "vlasov_two_stream runs on a 1D mesh")
    b = cfg.boost
    if b.samples < 1:
        raise ConfigError("boost.samples", "must be at least 1")
    if not 0 < b.v_max < 1:
        raise ConfigError("boost.v_max", "must lie in (0, 1) as a fraction of c")
    return cfg


def _cells(cfg):
    cells = cfg.mesh.cells
    return cells * cfg.mesh.dimension if len(cells) == 1 else cells


def parse_config(data):
    """Build and validate a ScenarioConfig from a plain mapping."""
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    return validate(_build(ScenarioConfig, data, ""))


def load_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"invalid YAML: {exc}") from None
    return parse_config(data)


def to_dict(cfg):
    return dataclasses.asdict(cfg)


def dump_config(cfg):
    """Serialise to YAML; ``parse_config(yaml.safe_load(dump_config(c))) == c``."""
    return yaml.safe_dump(to_dict(cfg), sort_keys=True)
