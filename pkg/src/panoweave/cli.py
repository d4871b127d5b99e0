"""Command-line interface.

Subcommands:
    pano        single image -> equirectangular panorama
    text2pano   text prompt (or bundled fixture) -> input image -> panorama
    pointcloud  prior run directory -> depth-fused binary PLY point cloud
    video       prior run directory + camera track -> numbered PNG frames

Configuration is an INI file ([pipeline] plus one section per backend
kind); any key can also come from the environment as PANOWEAVE_<KEY> or
PANOWEAVE_<KIND>_<KEY>. Precedence: CLI flag > environment > config file >
built-in default.

Exit codes: 0 success, 1 configuration error, 2 backend abort, 3 I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from panoweave.backends import BACKEND_KINDS, BackendDescriptor, BackendError, build_backends
from panoweave.pipeline import (
    PipelineConfig,
    PipelineError,
    ViewSchedule,
    run_pipeline,
    run_text_pipeline,
)

# Bundled scene prompts for text-to-panorama benchmarking (pass --fixture 1..20).
TEXT_PROMPT_FIXTURES = [
    "Autumn maple forest path.",
    "Tropical beach at sunset.",
    "Snowy mountain peak view.",
    "Tuscan vineyard in summer.",
    "Desert under starlit sky.",
    "Sakura blossom park, Kyoto.",
    "Rustic Provencal lavender fields.",
    "Underwater coral reef scene.",
    "Ancient Mayan jungle ruins.",
    "Manhattan skyline at night.",
    "Victorian-era library.",
    "Rustic Italian kitchen.",
    "Minimalist Scandinavian bedroom.",
    "Moorish-styled bathroom.",
    "Vintage record store interior.",
    "Luxurious Hollywood dressing room.",
    "Industrial loft-style office.",
    "Art Deco hotel lobby.",
    "Japanese Zen meditation room.",
    "Modern living room with a sofa and a TV.",
]


class ConfigError(ValueError):
    pass


PIPELINE_DEFAULTS = {
    "fov_deg": "100",
    "input_fov_deg": "60",
    "schedule": "0, 41, -41, 82, -82, 123, 200.5",
    "view_resolution": "512",
    "sr_resolution": "2048",
    "pano_width": "4096",
    "max_retries": "20",
    "layout_retries": "5",
    "seed": "0",
    "save_sr": "true",
    "run_dir": "",
    "video_depth": "sr",
}

BACKEND_DEFAULTS = {"mode": "mock", "endpoint": "", "timeout": "120"}
BACKEND_EXTRA_KEYS = {
    "depth": {"scene": "constant", "value": "2.0"},
    "chat": {"style": "simple"},
    "inpaint": {"noise_amplitude": "0.01"},
}


def _read_config_file(path):
    import configparser

    cp = configparser.ConfigParser()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            cp.read(p, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config file {p}: {exc}") from exc
    return cp


def resolve_settings(config_path=None, flag_overrides=None, environ=None) -> dict:
    """Merge defaults, config file, environment, and flags into one settings tree."""
    env = os.environ if environ is None else environ
    flags = flag_overrides or {}
    cp = _read_config_file(config_path)

    sections = {"pipeline": dict(PIPELINE_DEFAULTS)}
    for kind in BACKEND_KINDS:
        sections[kind] = dict(BACKEND_DEFAULTS)
        sections[kind].update(BACKEND_EXTRA_KEYS.get(kind, {}))

    for section in sections:
        if cp.has_section(section):
            for key, value in cp.items(section):
                sections[section][key] = value
    for section, values in sections.items():
        for key in values:
            env_key = (
                f"PANOWEAVE_{key.upper()}" if section == "pipeline" else f"PANOWEAVE_{section.upper()}_{key.upper()}"
            )
            if env_key in env:
                sections[section][key] = env[env_key]
    for key, value in flags.items():
        if value is not None:
            sections["pipeline"][key] = str(value)
    return sections


def _to_int(sections, key):
    raw = sections["pipeline"][key]
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"pipeline.{key} must be an integer, got {raw!r}") from exc


def _to_float_list(raw):
    try:
        return tuple(float(tok) for tok in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"cannot parse angle list {raw!r}") from exc


def build_pipeline_config(sections) -> PipelineConfig:
    p = sections["pipeline"]
    try:
        schedule = ViewSchedule(
            fov_deg=float(p["fov_deg"]),
            angles_deg=_to_float_list(p["schedule"]),
            input_fov_deg=float(p["input_fov_deg"]),
        )
        config = PipelineConfig(
            schedule=schedule,
            view_size=_to_int(sections, "view_resolution"),
            pano_width=_to_int(sections, "pano_width"),
            max_retries=_to_int(sections, "max_retries"),
            layout_retries=_to_int(sections, "layout_retries"),
            seed=_to_int(sections, "seed"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sr = _to_int(sections, "sr_resolution")
    if sr != 4 * config.view_size:
        raise ConfigError(
            f"sr_resolution must be 4x view_resolution ({4 * config.view_size}), got {sr}"
        )
    return config


def backend_descriptors(sections, seed: int) -> dict:
    descriptors = {}
    for kind in BACKEND_KINDS:
        s = sections[kind]
        mode = s.get("mode", "mock")
        options = {}
        if mode == "http":
            options["timeout"] = float(s.get("timeout", "120"))
            if kind == "chat" and s.get("style", "simple") != "simple":
                options["style"] = s["style"]
        else:
            if kind == "depth":
                options["scene"] = s.get("scene", "constant")
                options["value"] = float(s.get("value", "2.0"))
            if kind == "inpaint":
                options["noise_amplitude"] = float(s.get("noise_amplitude", "0.01"))
            if kind == "text2image":
                res = int(sections["pipeline"]["view_resolution"])
                options["width"] = res
                options["height"] = res
        try:
            descriptors[kind] = BackendDescriptor(
                kind=kind, mode=mode, endpoint=s.get("endpoint", ""), seed=seed, options=options
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return descriptors


def _bool(raw: str) -> bool:
    return str(raw).strip().lower() in ("1", "true", "yes", "on")


def _write_outputs(result, input_image, args, sections, out_path):
    from panoweave.fileio import save_png
    from panoweave.runio import save_run

    out_path = Path(out_path)
    if out_path.parent and not out_path.parent.exists():
        out_path.parent.mkdir(parents=True, exist_ok=True)
    save_png(out_path, result.panorama)

    run_dir = sections["pipeline"].get("run_dir") or f"{out_path}.run"
    save_run(
        run_dir,
        result,
        sections,
        input_image=input_image,
        save_sr=_bool(sections["pipeline"].get("save_sr", "true")),
    )
    if getattr(args, "trace", None):
        result.trace.write(args.trace)
    return result


def cmd_pano(args) -> int:
    from panoweave.fileio import load_png

    input_path = Path(args.input)
    if not input_path.is_file():
        raise FileNotFoundError(f"input image not found: {input_path}")
    sections = resolve_settings(args.config, {"seed": args.seed, "run_dir": args.run_dir})
    image = load_png(input_path)
    if image.shape[0] != image.shape[1]:
        raise ConfigError(f"input image must be square, got {image.shape[1]}x{image.shape[0]}")
    config = build_pipeline_config(sections)
    backends = build_backends(backend_descriptors(sections, config.seed))
    result = run_pipeline(image, config=config, backends=backends)
    _write_outputs(result, image, args, sections, args.out)
    return 0


def cmd_text2pano(args) -> int:
    if (args.prompt is None) == (args.fixture is None):
        raise ConfigError("provide exactly one of --prompt or --fixture")
    if args.fixture is not None:
        if not 1 <= args.fixture <= len(TEXT_PROMPT_FIXTURES):
            raise ConfigError(f"--fixture must be in 1..{len(TEXT_PROMPT_FIXTURES)}, got {args.fixture}")
        prompt = TEXT_PROMPT_FIXTURES[args.fixture - 1]
    else:
        prompt = args.prompt
    sections = resolve_settings(args.config, {"seed": args.seed, "run_dir": args.run_dir})
    config = build_pipeline_config(sections)
    backends = build_backends(backend_descriptors(sections, config.seed))
    result = run_text_pipeline(prompt, config=config, backends=backends)
    _write_outputs(result, result.input_image, args, sections, args.out)
    return 0


def _settings_from_snapshot(run_settings: dict) -> dict:
    """Rebuild a settings tree from a run directory's config snapshot."""
    sections = {"pipeline": dict(PIPELINE_DEFAULTS)}
    for kind in BACKEND_KINDS:
        sections[kind] = dict(BACKEND_DEFAULTS)
        sections[kind].update(BACKEND_EXTRA_KEYS.get(kind, {}))
    for section, values in run_settings.items():
        sections.setdefault(section, {}).update(values)
    return sections


def cmd_pointcloud(args) -> int:
    from panoweave.backends import build_backend
    from panoweave.depth3d import depth_to_pointcloud, estimate_aligned_depths, fuse_depth_panorama
    from panoweave.runio import load_run

    run = load_run(args.run)
    sections = _settings_from_snapshot(run.settings)
    seed = int(sections["pipeline"].get("seed", "0"))
    depth_backend = build_backend(backend_descriptors(sections, seed)["depth"])

    views, _ = estimate_aligned_depths(run.views, depth_backend)
    depth, covered = fuse_depth_panorama(views, pano_width=run.panorama.shape[1])
    cloud = depth_to_pointcloud(run.panorama, depth, stride=args.stride, covered=covered)
    out = Path(args.out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
    cloud.write(out)
    if args.depth_out:
        from panoweave.fileio import save_pfm

        save_pfm(args.depth_out, depth)
    return 0


def cmd_video(args) -> int:
    from panoweave.backends import build_backend
    from panoweave.depth3d import estimate_aligned_depths
    from panoweave.runio import load_run
    from panoweave.video import CameraTrack, render_track

    run = load_run(args.run)
    track_path = Path(args.track)
    if not track_path.is_file():
        raise FileNotFoundError(f"track file not found: {track_path}")
    try:
        track = CameraTrack.load(track_path)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid track file {track_path}: {exc}") from exc

    sections = _settings_from_snapshot(run.settings)
    seed = int(sections["pipeline"].get("seed", "0"))
    descriptors = backend_descriptors(sections, seed)

    views = run.views
    inpaint_backend = None
    if any(not pose.is_rotation_only for pose in track.poses):
        depth_backend = build_backend(descriptors["depth"])
        use_sr = sections["pipeline"].get("video_depth", "sr") == "sr"
        views, _ = estimate_aligned_depths(run.views, depth_backend, superres_depth=use_sr)
        inpaint_backend = build_backend(descriptors["inpaint"])
    scene_prompt = run.descriptions.get("scene", "")
    render_track(
        run.panorama,
        views,
        track,
        inpaint_backend,
        outdir=args.outdir,
        scene_prompt=scene_prompt,
        seed=seed,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="panoweave",
        description="Compose 360-degree panoramas from a single perspective image.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pano", help="input image -> equirectangular panorama")
    p.add_argument("--input", required=True, help="input PNG (square)")
    p.add_argument("--config", default=None, help="INI config file")
    p.add_argument("--out", required=True, help="output panorama PNG")
    p.add_argument("--trace", default=None, help="also write the call trace here (JSONL)")
    p.add_argument("--seed", type=int, default=None, help="override the random seed")
    p.add_argument("--run-dir", default=None, help="run directory (default: <out>.run)")

    t = sub.add_parser("text2pano", help="text prompt -> panorama")
    group = t.add_mutually_exclusive_group()
    group.add_argument("--prompt", default=None, help="scene text prompt")
    group.add_argument("--fixture", type=int, default=None,
                       help=f"bundled prompt index 1..{len(TEXT_PROMPT_FIXTURES)}")
    t.add_argument("--config", default=None)
    t.add_argument("--out", required=True)
    t.add_argument("--trace", default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--run-dir", default=None)

    c = sub.add_parser("pointcloud", help="run directory -> PLY point cloud")
    c.add_argument("--run", required=True, help="run directory from a pano run")
    c.add_argument("--out", required=True, help="output PLY path")
    c.add_argument("--stride", type=int, default=4, help="panorama pixel stride")
    c.add_argument("--depth-out", default=None, help="also write the fused panoramic depth (PFM)")

    v = sub.add_parser("video", help="run directory + camera track -> PNG frames")
    v.add_argument("--run", required=True)
    v.add_argument("--track", required=True, help="camera track JSON")
    v.add_argument("--outdir", required=True)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; map those onto the config-error code
        return 0 if exc.code == 0 else 1
    handlers = {
        "pano": cmd_pano,
        "text2pano": cmd_text2pano,
        "pointcloud": cmd_pointcloud,
        "video": cmd_video,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"panoweave: config error: {exc}", file=sys.stderr)
        return 1
    except (PipelineError, BackendError) as exc:
        print(f"panoweave: backend abort: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"panoweave: i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
