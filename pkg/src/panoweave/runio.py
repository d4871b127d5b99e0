"""Self-describing run directories.

Every pipeline run can be persisted as a directory holding the resolved
configuration, the scene descriptions, per-view images (plus optional
super-resolved copies and pre-inpaint masks), the call trace, and the final
panorama. The directory is sufficient to run point-cloud export and video
rendering offline later.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from panoweave.fileio import load_mask_png, load_png, save_mask_png, save_png
from panoweave.geometry import intrinsics_from_fov, rotation_y
from panoweave.pipeline import PanoramaResult
from panoweave.warp import ViewRecord

CONFIG_NAME = "config.ini"
DESCRIPTIONS_NAME = "descriptions.json"
VIEWS_NAME = "views.json"
TRACE_NAME = "trace.jsonl"
PANORAMA_NAME = "panorama.png"
COVERAGE_NAME = "coverage.png"
INPUT_NAME = "input.png"


@dataclass
class RunData:
    views: list
    settings: dict
    descriptions: dict
    panorama: np.ndarray
    coverage: np.ndarray
    path: Path


def save_run(run_dir, result: PanoramaResult, settings_sections: dict,
             input_image=None, save_sr: bool = True) -> Path:
    """Write a run directory; ``settings_sections`` is {section: {key: value}}."""
    run_dir = Path(run_dir)
    (run_dir / "views").mkdir(parents=True, exist_ok=True)

    cp = configparser.ConfigParser()
    for section, values in settings_sections.items():
        cp[section] = {k: str(v) for k, v in values.items()}
    with open(run_dir / CONFIG_NAME, "w", encoding="utf-8") as fh:
        cp.write(fh)

    (run_dir / DESCRIPTIONS_NAME).write_text(
        json.dumps(result.descriptions.to_dict(), indent=2), encoding="utf-8"
    )
    result.trace.write(run_dir / TRACE_NAME)
    save_png(run_dir / PANORAMA_NAME, result.panorama)
    save_mask_png(run_dir / COVERAGE_NAME, result.coverage)
    if input_image is not None:
        save_png(run_dir / INPUT_NAME, input_image)

    views_meta = []
    for i, (view, mask) in enumerate(zip(result.views, result.warp_masks), start=1):
        name = f"view_{i:02d}.png"
        save_png(run_dir / "views" / name, view.image)
        mask_name = f"view_{i:02d}_mask.png"
        save_mask_png(run_dir / "views" / mask_name, mask)
        entry = {
            "file": name,
            "mask_file": mask_name,
            "angle_deg": view.rotation.angle_deg,
            "fov_deg": 2.0 * np.degrees(np.arctan((view.intrinsics.width / 2.0) / view.intrinsics.fx)),
            "size": view.intrinsics.width,
        }
        if save_sr and view.sr_image is not None:
            sr_name = f"view_{i:02d}_sr.png"
            save_png(run_dir / "views" / sr_name, view.sr_image)
            entry["sr_file"] = sr_name
        views_meta.append(entry)
    (run_dir / VIEWS_NAME).write_text(json.dumps({"views": views_meta}, indent=2), encoding="utf-8")
    return run_dir


def load_run(run_dir) -> RunData:
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise FileNotFoundError(f"run directory not found: {run_dir}")

    cp = configparser.ConfigParser()
    cp.read(run_dir / CONFIG_NAME)
    settings = {section: dict(cp[section]) for section in cp.sections()}

    descriptions = json.loads((run_dir / DESCRIPTIONS_NAME).read_text(encoding="utf-8"))
    meta = json.loads((run_dir / VIEWS_NAME).read_text(encoding="utf-8"))

    views = []
    for entry in meta["views"]:
        image = load_png(run_dir / "views" / entry["file"])
        sr = None
        if "sr_file" in entry:
            sr = load_png(run_dir / "views" / entry["sr_file"])
        K = intrinsics_from_fov(float(entry["fov_deg"]), int(entry["size"]), int(entry["size"]))
        views.append(
            ViewRecord(image=image, intrinsics=K, rotation=rotation_y(float(entry["angle_deg"])), sr_image=sr)
        )

    panorama = load_png(run_dir / PANORAMA_NAME)
    coverage = load_mask_png(run_dir / COVERAGE_NAME)
    return RunData(
        views=views,
        settings=settings,
        descriptions=descriptions,
        panorama=panorama,
        coverage=coverage,
        path=run_dir,
    )
