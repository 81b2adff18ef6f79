"""Scenario files: TOML documents describing one end-to-end experiment.

A scenario names a frequency sweep, a full (candidate) topology, the imaging
region, reference-pattern and synthesis settings, baselines and evaluation
scenes.  Unknown keys are rejected; optional keys get the defaults listed in
``_SCHEMA``.  See ``scenarios/`` for complete examples.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import topologies
from .errors import ParseError, SynthError, ValidationError
from .io import read_topology
from .model import ArrayTopology, FrequencyGrid, Scene
from .synthesis.reference import WINDOWS
from .synthesis.solver import SynthesisConfig

REQUIRED = object()

# section -> key -> default (REQUIRED marks mandatory keys)
_SCHEMA = {
    "frequency": {"f_start": REQUIRED, "f_stop": REQUIRED, "n_steps": REQUIRED},
    "topology": {
        "generator": REQUIRED, "path": None,
        "n_tx": None, "tx_pitch": None, "n_rx": None, "rx_pitch": None,
        "n_tx_x": None, "n_tx_z": None, "n_rx_x": None, "n_rx_z": None,
        "tx_spacing": None, "pitch": None,
    },
    "region": {"R0": REQUIRED, "D_x": REQUIRED, "D_z": 0.0,
               "beamwidth_x": None, "beamwidth_z": None},
    "reference": {"apodization": "uniform", "apodize_fixed": True},
    "synthesis": {"order": "rx_first", "rounds": 1, "rx": None, "tx": None},
    "baselines": {"equally_spaced": None, "random": None},
    "imaging": {"display_pitch": None, "range_span": 0.0, "range_step": 0.005,
                "projection": "none"},
    "metrics": {"baseline": "full", "dynamic_range": 15.0, "bins": 256},
    "output": {"dir": None},
}
_SIDE_KEYS = {"top_n", "epsilon", "relative_epsilon", "reweight_iterations",
              "reweight_delta", "threshold", "uniform_weights", "max_iter", "solver_tol"}
_GENERATOR_KEYS = {
    "uniform-linear": ("n_tx", "tx_pitch", "n_rx", "rx_pitch"),
    "uniform-planar": ("n_tx_x", "n_tx_z", "tx_pitch", "n_rx_x", "n_rx_z", "rx_pitch"),
    "t-shaped": ("n_tx", "n_rx", "pitch"),
    "corners-tx": ("tx_spacing", "n_rx_x", "n_rx_z", "rx_pitch"),
    "file": ("path",),
}
TOPOLOGY_NAMES = ("synthesized", "equally_spaced", "random", "full")


@dataclass(frozen=True)
class EvalScene:
    name: str
    scene: Scene


@dataclass(frozen=True)
class EquallySpaced:
    """Per-side lattice: ``shape`` is ``(n,)`` for a line or ``(n_x, n_z)``."""

    shape: Tuple[int, ...]
    pitch: float


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    source: Optional[Path]
    freqs: FrequencyGrid
    full: ArrayTopology
    R0: float
    D_x: float
    D_z: float
    beamwidth_x: Optional[float]
    beamwidth_z: Optional[float]
    apodization: str
    apodize_fixed: bool
    configs: Dict[str, SynthesisConfig]
    order: str
    rounds: int
    equally_spaced: Dict[str, EquallySpaced]
    seed: Optional[int]
    display_pitch: float
    range_span: float
    range_step: float
    projection: str
    metrics_baseline: str
    dynamic_range: float
    bins: int
    scenes: List[EvalScene] = field(default_factory=list)
    output_dir: Path = Path("out")


def _check_keys(table: dict, allowed, path: str):
    if not isinstance(table, dict):
        raise ValidationError("expected a table", path)
    for key in table:
        if key not in allowed:
            raise ValidationError(f"unknown key {key!r}", f"{path}.{key}" if path else key)


def _section(doc: dict, name: str) -> dict:
    schema = _SCHEMA[name]
    raw = doc.get(name, {})
    _check_keys(raw, schema, name)
    out = {}
    missing = []
    for key, default in schema.items():
        if key in raw:
            out[key] = raw[key]
        elif default is REQUIRED:
            missing.append(f"{name}.{key}")
        else:
            out[key] = default
    if missing:
        raise ValidationError("missing required field(s): " + ", ".join(missing), name)
    return out


def _number(value, path: str, *, positive=False, nonneg=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"expected a number, got {value!r}", path)
    if integer and int(value) != value:
        raise ValidationError(f"expected an integer, got {value!r}", path)
    if not np.isfinite(value):
        raise ValidationError("must be finite", path)
    if positive and not value > 0:
        raise ValidationError(f"must be positive, got {value!r}", path)
    if nonneg and value < 0:
        raise ValidationError(f"must be non-negative, got {value!r}", path)
    return int(value) if integer else float(value)


def _build_topology(sec: dict, base: Optional[Path]) -> ArrayTopology:
    gen = sec["generator"]
    if gen not in _GENERATOR_KEYS:
        raise ValidationError(
            f"unknown generator {gen!r}; expected one of {sorted(_GENERATOR_KEYS)}",
            "topology.generator")
    needed = _GENERATOR_KEYS[gen]
    for key, value in sec.items():
        if key != "generator" and value is not None and key not in needed:
            raise ValidationError(f"not used by generator {gen!r}", f"topology.{key}")
    missing = [f"topology.{k}" for k in needed if sec[k] is None]
    if missing:
        raise ValidationError("missing required field(s): " + ", ".join(missing), "topology")
    if gen == "file":
        path = Path(sec["path"])
        if base is not None and not path.is_absolute():
            path = base / path
        if not path.is_file():
            raise ValidationError(f"file not found: {path}", "topology.path")
        return read_topology(path)
    args = {}
    for key in needed:
        integer = key.startswith("n_")
        args[key] = _number(sec[key], f"topology.{key}", positive=True, integer=integer)
    if gen == "uniform-linear":
        return topologies.uniform_linear(args["n_tx"], args["tx_pitch"],
                                         args["n_rx"], args["rx_pitch"])
    if gen == "uniform-planar":
        return ArrayTopology(
            topologies.plane(args["n_tx_x"], args["n_tx_z"], args["tx_pitch"]),
            topologies.plane(args["n_rx_x"], args["n_rx_z"], args["rx_pitch"]))
    if gen == "t-shaped":
        return topologies.t_shaped(args["n_tx"], args["n_rx"], args["pitch"])
    return topologies.corners_tx_planar_rx(args["tx_spacing"], args["n_rx_x"],
                                           args["n_rx_z"], args["rx_pitch"])


def _side_config(raw, path: str) -> SynthesisConfig:
    _check_keys(raw, _SIDE_KEYS, path)
    kwargs = dict(raw)
    try:
        return SynthesisConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ValidationError(str(exc), path) from None


def _equally_spaced(raw) -> Dict[str, EquallySpaced]:
    if raw is None:
        return {}
    _check_keys(raw, {"tx", "rx"}, "baselines.equally_spaced")
    out = {}
    for side, spec in raw.items():
        path = f"baselines.equally_spaced.{side}"
        _check_keys(spec, {"shape", "pitch"}, path)
        if "shape" not in spec or "pitch" not in spec:
            raise ValidationError("needs 'shape' and 'pitch'", path)
        shape = spec["shape"]
        if not isinstance(shape, list) or len(shape) not in (1, 2):
            raise ValidationError("shape must be [n] or [n_x, n_z]", f"{path}.shape")
        shape = tuple(_number(v, f"{path}.shape", positive=True, integer=True)
                      for v in shape)
        out[side] = EquallySpaced(shape, _number(spec["pitch"], f"{path}.pitch",
                                                 positive=True))
    return out


def _seed(raw) -> Optional[int]:
    if raw is None:
        return None
    _check_keys(raw, {"seed"}, "baselines.random")
    if "seed" not in raw:
        raise ValidationError("missing required field", "baselines.random.seed")
    return parse_seed(raw["seed"], "baselines.random.seed")


def parse_seed(value, path: str = "seed") -> int:
    if isinstance(value, str):
        try:
            value = int(value, 0)
        except ValueError:
            raise ValidationError(f"not an integer: {value!r}", path) from None
    if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2 ** 64:
        raise ValidationError("seed must be an unsigned 64-bit integer", path)
    return value


def _scenes(raw, R0: float, full: ArrayTopology) -> List[EvalScene]:
    if raw is None:
        # center and aperture-edge point targets in the focal plane
        rx = full.rx_positions
        edge = 0.5 * (rx[:, 0].max() - rx[:, 0].min())
        return [EvalScene("center", Scene.points([[0.0, R0, 0.0]])),
                EvalScene("edge", Scene.points([[edge, R0, 0.0]]))]
    if not isinstance(raw, list) or not raw:
        raise ValidationError("expected a non-empty array of tables", "scenes")
    out, names = [], set()
    for i, item in enumerate(raw):
        path = f"scenes[{i}]"
        _check_keys(item, {"name", "points", "reflectivity"}, path)
        name = item.get("name")
        if not isinstance(name, str) or not name or not name.replace("_", "").replace("-", "").isalnum():
            raise ValidationError("name must be a non-empty identifier", f"{path}.name")
        if name in names:
            raise ValidationError(f"duplicate scene name {name!r}", f"{path}.name")
        names.add(name)
        pts = item.get("points")
        try:
            pos = np.array(pts, dtype=float).reshape(-1, 3)
        except (TypeError, ValueError):
            raise ValidationError("points must be a list of [x, y, z]", f"{path}.points") from None
        if pos.shape[0] == 0 or np.array(pts, dtype=object).ndim != 2:
            raise ValidationError("points must be a list of [x, y, z]", f"{path}.points")
        refl = item.get("reflectivity", 1.0)
        if isinstance(refl, list):
            refl = np.array([complex(v[0], v[1]) if isinstance(v, list) else v
                             for v in refl], complex)
            if refl.shape != (pos.shape[0],):
                raise ValidationError("one reflectivity per point", f"{path}.reflectivity")
        try:
            out.append(EvalScene(name, Scene(pos, refl)))
        except SynthError as exc:
            raise ValidationError(str(exc), path) from None
    return out


def parse_scenario(text: str, source: Optional[Path] = None) -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ParseError(str(exc), getattr(exc, "lineno", None)) from None
    _check_keys(doc, set(_SCHEMA) | {"name", "scenes"}, "")
    missing = [f"{s}.{k}" for s in ("frequency", "topology", "region")
               for k, d in _SCHEMA[s].items() if d is REQUIRED
               and k not in doc.get(s, {})]
    if missing:
        raise ValidationError("missing required field(s): " + ", ".join(missing))
    base = source.parent if source is not None else None

    fr = _section(doc, "frequency")
    try:
        freqs = FrequencyGrid(
            _number(fr["f_start"], "frequency.f_start"),
            _number(fr["f_stop"], "frequency.f_stop"),
            _number(fr["n_steps"], "frequency.n_steps", integer=True))
    except ValidationError:
        raise
    except SynthError as exc:
        raise ValidationError(str(exc), "frequency") from None

    try:
        full = _build_topology(_section(doc, "topology"), base)
    except (ValidationError, ParseError):
        raise
    except SynthError as exc:
        raise ValidationError(str(exc), "topology") from None

    rg = _section(doc, "region")
    R0 = _number(rg["R0"], "region.R0", positive=True)
    D_x = _number(rg["D_x"], "region.D_x", nonneg=True)
    D_z = _number(rg["D_z"], "region.D_z", nonneg=True)
    bw = {k: None if rg[k] is None else _number(rg[k], f"region.{k}", positive=True)
          for k in ("beamwidth_x", "beamwidth_z")}

    ref = _section(doc, "reference")
    if ref["apodization"] not in WINDOWS:
        raise ValidationError(f"unknown window {ref['apodization']!r}; "
                              f"expected one of {sorted(WINDOWS)}", "reference.apodization")
    if not isinstance(ref["apodize_fixed"], bool):
        raise ValidationError("expected true or false", "reference.apodize_fixed")

    syn = _section(doc, "synthesis")
    if syn["order"] not in ("rx_first", "tx_first"):
        raise ValidationError("must be 'rx_first' or 'tx_first'", "synthesis.order")
    rounds = _number(syn["rounds"], "synthesis.rounds", positive=True, integer=True)
    configs = {side: _side_config(syn[side], f"synthesis.{side}")
               for side in ("rx", "tx") if syn[side] is not None}
    if not configs:
        raise ValidationError("configure at least one of [synthesis.rx], [synthesis.tx]",
                              "synthesis")
    for side, cfg in configs.items():
        n = full.positions(side).shape[0]
        if cfg.top_n is not None and cfg.top_n > n:
            raise ValidationError(f"top_n = {cfg.top_n} exceeds {n} candidates",
                                  f"synthesis.{side}.top_n")

    bl = _section(doc, "baselines")
    equally = _equally_spaced(bl["equally_spaced"])
    seed = _seed(bl["random"])

    im = _section(doc, "imaging")
    pitch = (freqs.lambda_center / 4 if im["display_pitch"] is None
             else _number(im["display_pitch"], "imaging.display_pitch", positive=True))
    span = _number(im["range_span"], "imaging.range_span", nonneg=True)
    step = _number(im["range_step"], "imaging.range_step", positive=True)
    if im["projection"] not in ("none", "z", "x"):
        raise ValidationError("must be 'none', 'z' or 'x'", "imaging.projection")

    mt = _section(doc, "metrics")
    if mt["baseline"] not in TOPOLOGY_NAMES:
        raise ValidationError(f"must be one of {list(TOPOLOGY_NAMES)}", "metrics.baseline")
    dr = _number(mt["dynamic_range"], "metrics.dynamic_range", positive=True)
    bins = _number(mt["bins"], "metrics.bins", positive=True, integer=True)

    name = doc.get("name", source.stem if source is not None else "scenario")
    if not isinstance(name, str) or not name:
        raise ValidationError("expected a non-empty string", "name")

    out = _section(doc, "output")
    if out["dir"] is not None and not isinstance(out["dir"], str):
        raise ValidationError("expected a string", "output.dir")
    out_dir = Path("out") / name if out["dir"] is None else Path(out["dir"])
    if base is not None and not out_dir.is_absolute():
        out_dir = base / out_dir

    return Scenario(
        name=name, source=source, freqs=freqs, full=full, R0=R0, D_x=D_x, D_z=D_z,
        beamwidth_x=bw["beamwidth_x"], beamwidth_z=bw["beamwidth_z"],
        apodization=ref["apodization"], apodize_fixed=ref["apodize_fixed"],
        configs=configs, order=syn["order"], rounds=rounds,
        equally_spaced=equally, seed=seed, display_pitch=pitch, range_span=span,
        range_step=step, projection=im["projection"],
        metrics_baseline=mt["baseline"], dynamic_range=dr, bins=bins,
        scenes=_scenes(doc.get("scenes"), R0, full), output_dir=out_dir)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc}") from None
    return parse_scenario(text, path)
