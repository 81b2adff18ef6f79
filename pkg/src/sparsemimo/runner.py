"""End-to-end scenario commands: synthesize, image, psf, metrics, compare.

Every command writes its artifacts under the output directory and returns a
JSON-ready summary.  Payloads carry no timestamps, so rerunning a scenario
with the same seed reproduces every file byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from . import io as fio
from .errors import SynthError, ValidationError
from .imaging import ImageField, ImageGrid, bp_image, project_max_axis, project_max_range
from .metrics import full_report
from .model import ArrayTopology, forward_scatter
from .psf import psf_analyze
from .scenario import Scenario
from .synthesis import ReferenceSpec, ResolutionSpec, sampling_grid, synthesize_sequential
from .topologies import equally_spaced, equally_spaced_plane, random_sparse

log = logging.getLogger(__name__)

COMMANDS = ("synthesize", "image", "psf", "metrics", "compare")
SYNTH_FILE = "synthesized_topology.csv"
SYNTH_REPORT = "synthesis.json"


def to_json(obj) -> str:
    """Deterministic JSON; non-finite floats become the strings
    ``"inf"``, ``"-inf"`` and ``"nan"``."""
    def clean(o):
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        if isinstance(o, (np.floating, float)):
            o = float(o)
            return o if np.isfinite(o) else str(o)
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, Path):
            return str(o)
        return o
    return json.dumps(clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    return fio.atomic_write(path, to_json(obj).encode("utf-8"))


def _fingerprint(scn: Scenario) -> Optional[str]:
    if scn.source is None or not Path(scn.source).is_file():
        return None
    return hashlib.sha256(Path(scn.source).read_bytes()).hexdigest()


# -- topologies ---------------------------------------------------------------

def reference_spec(scn: Scenario) -> ReferenceSpec:
    res = ResolutionSpec.from_geometry(scn.full, scn.R0, scn.freqs, scn.D_x, scn.D_z,
                                       scn.beamwidth_x, scn.beamwidth_z)
    return ReferenceSpec(scn.freqs, sampling_grid(res, scn.R0), scn.apodization)


def synthesize(scn: Scenario):
    """Run the configured sequential synthesis; returns ``(topology, report)``."""
    spec = reference_spec(scn)
    topo, diag = synthesize_sequential(scn.full, spec, scn.configs, scn.order, scn.rounds)
    n_full, n_syn = scn.full.n_elements, topo.n_elements
    report = {
        "scenario": scn.name,
        "fingerprint": _fingerprint(scn),
        "sampling": {"M_x": spec.grid.M_x, "M_z": spec.grid.M_z,
                     "delta_x_m": spec.grid.delta_x, "delta_z_m": spec.grid.delta_z},
        "half_rounds": [
            {**d.as_dict(), "reweight_history": d.result.reweight_history,
             "feasible": d.result.residual <= d.result.epsilon}
            for d in diag],
        "elements": {"full": n_full, "synthesized": n_syn,
                     "n_tx": topo.n_tx, "n_rx": topo.n_rx,
                     "reduction_percent": 100.0 * (1 - n_syn / n_full)},
    }
    return topo, report


def synthesized_topology(scn: Scenario, out: Path, force: bool = False) -> ArrayTopology:
    """Reuse a synthesized topology from ``out`` when it was produced from the
    identical scenario file; otherwise synthesize and store it."""
    fp = _fingerprint(scn)
    csv_path, rep_path = out / SYNTH_FILE, out / SYNTH_REPORT
    if not force and fp is not None and csv_path.is_file() and rep_path.is_file():
        try:
            stored = json.loads(rep_path.read_text("utf-8")).get("fingerprint")
        except (OSError, ValueError):
            stored = None
        if stored == fp:
            log.info("reusing %s", csv_path)
            return fio.read_topology(csv_path)
    topo, report = synthesize(scn)
    fio.write_topology(csv_path, topo)
    write_json(rep_path, report)
    return topo


def _equally_spaced_side(full_pos: np.ndarray, shape, pitch) -> np.ndarray:
    if len(shape) == 2:
        return equally_spaced_plane(full_pos, shape[0], shape[1], pitch)
    spans = np.ptp(full_pos, axis=0) if full_pos.shape[0] > 1 else np.zeros(3)
    axis = "z" if spans[2] > spans[0] else "x"
    return equally_spaced(full_pos, shape[0], pitch, axis)


def equally_spaced_topology(scn: Scenario) -> ArrayTopology:
    if not scn.equally_spaced:
        raise ValidationError("no equally spaced baseline configured", "baselines.equally_spaced")
    sides = {side: scn.full.positions(side) for side in ("tx", "rx")}
    for side, spec in scn.equally_spaced.items():
        sides[side] = _equally_spaced_side(scn.full.positions(side), spec.shape, spec.pitch)
    return ArrayTopology(sides["tx"], sides["rx"])


def random_topology(scn: Scenario, synthesized: ArrayTopology, seed: int) -> ArrayTopology:
    """Seeded random subsets matching the synthesized element counts of the
    optimized sides."""
    counts = {side: synthesized.positions(side).shape[0] for side in scn.configs}
    return random_sparse(scn.full, counts, seed)


def topology_set(scn: Scenario, out: Path, seed: Optional[int], *,
                 require_all: bool = False) -> Dict[str, ArrayTopology]:
    topos = {"synthesized": synthesized_topology(scn, out)}
    if scn.equally_spaced or require_all:
        topos["equally_spaced"] = equally_spaced_topology(scn)
    if seed is not None:
        topos["random"] = random_topology(scn, topos["synthesized"], seed)
    elif require_all:
        raise ValidationError("a seed is required (scenario or --seed)", "baselines.random.seed")
    topos["full"] = scn.full
    return topos


# -- imaging and analysis -------------------------------------------------------

def display_grid(scn: Scenario, R: float) -> ImageGrid:
    return ImageGrid.with_pitch(scn.D_x, scn.D_z, scn.display_pitch, R)


def range_offsets(scn: Scenario) -> np.ndarray:
    if scn.range_span == 0:
        return np.zeros(1)
    n = int(np.floor(0.5 * scn.range_span / scn.range_step + 1e-9))
    return scn.range_step * np.arange(-n, n + 1)


def image_scene(scn: Scenario, topo: ArrayTopology, scene) -> ImageField:
    """Back-projected image of ``scene``; with a range span, the per-pixel
    maximum over the range slices (magnitude only)."""
    fld = forward_scatter(scene, topo, scn.freqs)
    offsets = range_offsets(scn)
    if offsets.size == 1:
        return bp_image(fld, topo, display_grid(scn, scn.R0 + offsets[0]))
    slices = [bp_image(fld, topo, display_grid(scn, scn.R0 + d)) for d in offsets]
    proj = project_max_range(slices)
    return ImageField(display_grid(scn, scn.R0), proj.values)


def analysis_view(scn: Scenario, image: ImageField) -> ImageField:
    if scn.projection == "none":
        return image
    return project_max_axis(image, scn.projection)


def psf_reports(scn: Scenario, topos: Dict[str, ArrayTopology], images=None) -> dict:
    out = {}
    for name, topo in topos.items():
        out[name] = {}
        for es in scn.scenes:
            if len(es.scene) != 1:
                continue
            img = images[name][es.name] if images else image_scene(scn, topo, es.scene)
            rep = psf_analyze(analysis_view(scn, img), es.scene.positions[0])
            out[name][es.name] = rep.as_dict()
    return out


def metric_reports(scn: Scenario, images: dict, dynamic_range: float) -> dict:
    base = scn.metrics_baseline
    if base not in images:
        raise ValidationError(f"baseline topology {base!r} is not available", "metrics.baseline")
    out = {}
    for name, per_scene in images.items():
        out[name] = {s: full_report(img, images[base][s], dynamic_range, scn.bins).as_dict()
                     for s, img in per_scene.items()}
    return out


def _all_images(scn, topos):
    return {name: {es.name: image_scene(scn, topo, es.scene) for es in scn.scenes}
            for name, topo in topos.items()}


def _psf_table(reports: dict) -> str:
    lines = ["topology,scene,peak_sidelobe_level_db,grating_lobe_level_db,"
             "mainlobe_width_x_m,mainlobe_width_z_m,peak_offset_m"]
    for name, per in reports.items():
        for scene, r in per.items():
            lines.append(",".join([name, scene] + [repr(float(r[k])) for k in (
                "peak_sidelobe_level_db", "grating_lobe_level_db", "mainlobe_width_x_m",
                "mainlobe_width_z_m", "peak_offset_m")]))
    return "\n".join(lines) + "\n"


def _elements(topos):
    return {name: {"n_tx": t.n_tx, "n_rx": t.n_rx, "total": t.n_elements}
            for name, t in topos.items()}


def run_scenario(scn: Scenario, command: str, out_dir=None, seed: Optional[int] = None,
                 dynamic_range: Optional[float] = None) -> dict:
    """Execute ``command`` for ``scn`` and return its summary.

    ``seed`` and ``dynamic_range`` override the scenario values.
    """
    if command not in COMMANDS:
        raise SynthError(f"unknown command {command!r}; expected one of {list(COMMANDS)}")
    out = Path(out_dir) if out_dir is not None else Path(scn.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = scn.seed if seed is None else seed
    dr = scn.dynamic_range if dynamic_range is None else dynamic_range
    if not dr > 0:
        raise ValidationError("dynamic range must be positive", "dynamic_range")

    if command == "synthesize":
        synthesized_topology(scn, out, force=True)
        return json.loads((out / SYNTH_REPORT).read_text("utf-8"))

    topos = topology_set(scn, out, seed, require_all=command == "compare")
    for name, topo in topos.items():
        if name != "synthesized":
            fio.write_topology(out / f"{name}_topology.csv", topo)

    if command == "psf":
        reports = psf_reports(scn, topos)
        write_json(out / "psf.json", reports)
        fio.atomic_write(out / "psf.csv", _psf_table(reports).encode("utf-8"))
        return reports

    images = _all_images(scn, topos)
    if command == "image":
        files = []
        for name, per in images.items():
            for scene, img in per.items():
                stem = out / "images" / f"{name}_{scene}"
                fio.write_image(stem.with_suffix(".nfim"), img)
                fio.write_magnitude_csv(stem.with_suffix(".csv"), img)
                files.append(stem.name)
        summary = {"images": sorted(files)}
        write_json(out / "images.json", summary)
        return summary

    if command == "metrics":
        reports = metric_reports(scn, images, dr)
        summary = {"baseline": scn.metrics_baseline, "dynamic_range_db": dr,
                   "reports": reports}
        write_json(out / "metrics.json", summary)
        return summary

    # compare
    summary = {
        "scenario": scn.name,
        "seed": seed,
        "elements": _elements(topos),
        "psf": psf_reports(scn, topos, images),
        "metrics": {"baseline": scn.metrics_baseline, "dynamic_range_db": dr,
                    "reports": metric_reports(scn, images, dr)},
    }
    write_json(out / "compare.json", summary)
    return summary
