"""Command-line entry point.

Exit codes: 0 success, 2 bad configuration, 3 I/O failure, 4 data
invariant violation. Every command validates its configuration before
touching the file system and assembles all outputs in memory before
writing them, each through an atomic rename.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, HyperdermError, IoFailure, MissingInput

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DATA = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


# --- configuration -------------------------------------------------------------

# Defaults per command. Flags left unset fall back to a --config JSON file,
# then to these values. Keys outside the table are rejected.
DEFAULTS = {
    "simulate": {
        "scene": None, "seed": 0, "frames": 100, "noise": True,
        "sensor": {}, "illumination": {}, "png": False,
    },
    "calibrate": {"raw": None, "dark": None, "white": None, "epsilon": 1.0},
    "analyze": {
        "manifest": None, "key": "ClassLabel", "stat": "Median", "window": 3,
        "svg": None, "png": None,
    },
    "montage": {"cube": None, "wavelengths": None, "columns": None, "png": None},
    "synth": {
        "records": 160, "lesions": 91, "patients": 15, "rows": 24, "cols": 24,
        "frames": 100, "noise": True, "seed": 0, "panel": False,
    },
}
_REQUIRED = {"calibrate": ("raw", "dark", "white"), "analyze": ("manifest",), "montage": ("cube",)}


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, the optional --config file and explicit flags."""
    cfg = dict(DEFAULTS[command])
    path = getattr(args, "config", None)
    if path:
        try:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise MissingInput(f"config file not found: {path}") from exc
        except (OSError, UnicodeDecodeError) as exc:
            raise IoFailure(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config key(s) for {command}: {sorted(unknown)}")
        cfg.update(loaded)
    for key in cfg:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    missing = [k for k in _REQUIRED.get(command, ()) if cfg.get(k) in (None, "")]
    if missing:
        raise ConfigError(f"{command}: missing required setting(s) {missing}")
    return cfg


def _positive_int(name, v, minimum=1):
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {v!r}")
    return v


def _build_sensor(cfg: dict):
    from .cube import BandMap
    from .skinsim.instrument import SensorModel

    opts = dict(cfg.get("sensor") or {})
    allowed = {f.name for f in fields(SensorModel)} - {"band_map"} | {"fwhm_start", "fwhm_end"}
    unknown = set(opts) - allowed
    if unknown:
        raise ConfigError(f"unknown sensor key(s) {sorted(unknown)}")
    fw = {k: opts.pop(k) for k in ("fwhm_start", "fwhm_end") if k in opts}
    try:
        return SensorModel(band_map=BandMap.default(**fw), **opts)
    except (DataError, TypeError) as exc:
        raise ConfigError(f"sensor: {exc}") from exc


def _build_light(cfg: dict):
    from .skinsim.instrument import IlluminationModel, LedComponent

    opts = dict(cfg.get("illumination") or {})
    unknown = set(opts) - {"components", "scale"}
    if unknown:
        raise ConfigError(f"unknown illumination key(s) {sorted(unknown)}")
    try:
        if "components" in opts:
            opts["components"] = tuple(LedComponent(**c) for c in opts["components"])
        return IlluminationModel(**opts)
    except (DataError, TypeError) as exc:
        raise ConfigError(f"illumination: {exc}") from exc


class Outputs:
    """Collects output files and writes them only once everything succeeded."""

    def __init__(self):
        self.files: list[tuple[Path, bytes]] = []

    def add(self, path, payload: bytes):
        self.files.append((Path(path), payload))

    def add_json(self, path, obj):
        from .fileio import dumps_json

        self.add(path, dumps_json(obj).encode("utf-8"))

    def commit(self):
        from .fileio import atomic_write_bytes

        for path, payload in self.files:
            atomic_write_bytes(path, payload)
        return [str(p) for p, _ in self.files]


def _echo(command: str, cfg: dict) -> dict:
    return {"command": command, "version": __version__, "config": cfg}


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.name + suffix)


def _report(written):
    for p in written:
        print(p)


# --- commands ------------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .calib import average_frames
    from .cube import DEFAULT_RESOLUTION, Domain, HyperCube
    from .fileio import encode_pgm, read_json
    from .hsc import encode_cube
    from .skinsim.scene import PhantomScene, Renderer

    cfg = resolve_config("simulate", args)
    seed = _positive_int("seed", cfg["seed"], 0)
    frames = _positive_int("frames", cfg["frames"])
    sensor, light = _build_sensor(cfg), _build_light(cfg)
    if cfg["scene"]:
        scene = PhantomScene.from_dict(read_json(cfg["scene"]))
    else:
        scene = PhantomScene.single_lesion(*DEFAULT_RESOLUTION)
    out = Path(args.out)
    noise = bool(cfg["noise"])

    ren = Renderer(sensor, light)
    raw, truth = ren.render(scene, noise=noise, seed=seed)
    refs = {}
    for role in ("dark", "white"):
        refs[role] = average_frames(
            ren.reference_frames(role, scene.rows, scene.cols, frames, noise, seed, scene.meta)
        )
    files = Outputs()
    files.add(out / "raw.hsc", encode_cube(raw))
    files.add(out / "dark.hsc", encode_cube(refs["dark"]))
    files.add(out / "white.hsc", encode_cube(refs["white"]))
    files.add(out / "truth.hsc", encode_cube(HyperCube(Domain.REFLECTANCE, truth.reflectance,
                                                       sensor.band_map, raw.meta)))
    files.add(out / "mask.pgm", encode_pgm(np.where(truth.class_mask, 255, 0).astype(np.uint8)))
    files.add_json(out / "truth.json", {"scene": scene.to_dict(), **truth.summary()})
    files.add_json(out / "config.json", _echo("simulate", cfg))
    if cfg["png"]:
        from .cube import MONTAGE_PRESET_NM, band_montage
        from .plotting import montage_figure_bytes

        files.add(out / "raw_montage.png", montage_figure_bytes(band_montage(raw, MONTAGE_PRESET_NM)))
    _report(files.commit())
    return EXIT_OK


def cmd_calibrate(args) -> int:
    from .calib import ReferencePair, compute_reflectance
    from .hsc import encode_cube, load_cube

    cfg = resolve_config("calibrate", args)
    eps = cfg["epsilon"]
    if isinstance(eps, bool) or not isinstance(eps, (int, float)) or not eps > 0:
        raise ConfigError(f"epsilon must be a positive number, got {eps!r}")
    out = Path(args.out)
    raw = load_cube(cfg["raw"])
    refs = ReferencePair.from_cubes(load_cube(cfg["dark"]), load_cube(cfg["white"]))
    refl, diag = compute_reflectance(raw, refs, float(eps))
    files = Outputs()
    files.add(out, encode_cube(refl))
    files.add_json(_sidecar(out, ".diagnostics.json"), diag.to_dict())
    files.add_json(_sidecar(out, ".config.json"), _echo("calibrate", cfg))
    _report(files.commit())
    return EXIT_OK


def cmd_analyze(args) -> int:
    from .analysis import (
        Stat,
        StratifyKey,
        aggregate,
        class_contrast,
        csv_bytes,
        load_manifest,
        stratify,
    )
    from .svg import line_chart

    cfg = resolve_config("analyze", args)
    try:
        key = StratifyKey(cfg["key"])
        stat = Stat(cfg["stat"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    window = _positive_int("window", cfg["window"])
    out = Path(args.out)
    svg_path = Path(cfg["svg"]) if cfg["svg"] else out.with_suffix(".svg")

    manifest = load_manifest(cfg["manifest"])
    groups = stratify(manifest, key, window)
    results = [aggregate(s, stat, g) for g, s in groups.items()]
    files = Outputs()
    files.add(out, csv_bytes(results))
    series = {r.group: (r.wavelengths, r.values) for r in results}
    title = f"{stat.value} reflectance by {key.value}"
    files.add(svg_path, line_chart(series, title).encode("utf-8"))
    summary = {"groups": {r.group: r.n for r in results}, "total": sum(r.n for r in results)}
    by = {r.group: r for r in results}
    if key is StratifyKey.CLASS_LABEL and {"Skin", "Lesion"} <= set(by):
        c = class_contrast(by["Skin"], by["Lesion"])
        summary["convergence_ratio"] = c.ratio
    files.add_json(_sidecar(out, ".summary.json"), summary)
    files.add_json(_sidecar(out, ".config.json"), _echo("analyze", cfg))
    if cfg["png"]:
        from .plotting import spectra_figure_bytes

        spread = [aggregate(s, Stat.STD, g) for g, s in groups.items()] if stat is Stat.MEAN else None
        files.add(cfg["png"], spectra_figure_bytes(results, spread, title))
    _report(files.commit())
    return EXIT_OK


def _parse_wavelengths(value):
    if value is None:
        return None
    if isinstance(value, str):
        try:
            return [float(v) for v in value.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad wavelength list {value!r}") from exc
    if isinstance(value, list) and all(isinstance(v, (int, float)) for v in value):
        return [float(v) for v in value]
    raise ConfigError("wavelengths must be a comma-separated string or a list of numbers")


def cmd_montage(args) -> int:
    from .cube import MONTAGE_PRESET_NM, band_montage
    from .fileio import encode_pgm
    from .hsc import load_cube

    cfg = resolve_config("montage", args)
    wl = _parse_wavelengths(cfg["wavelengths"])
    wl = list(MONTAGE_PRESET_NM) if wl is None else wl
    cfg["wavelengths"] = wl
    if cfg["columns"] is not None:
        _positive_int("columns", cfg["columns"])
    out = Path(args.out)
    m = band_montage(load_cube(cfg["cube"]), wl, cfg["columns"])
    files = Outputs()
    files.add(out, encode_pgm(m.image))
    files.add_json(out.with_suffix(".labels.json"), m.labels_document())
    files.add_json(_sidecar(out, ".config.json"), _echo("montage", cfg))
    if cfg["png"]:
        from .plotting import montage_figure_bytes

        files.add(cfg["png"], montage_figure_bytes(m))
    _report(files.commit())
    return EXIT_OK


def cmd_dataset(args) -> int:
    return {"add": _dataset_add, "list": _dataset_list, "validate": _dataset_validate,
            "synth": _dataset_synth}[args.action](args)


def _dataset_add(args) -> int:
    from .analysis import AnnotatedRecord, PointAnnotation, append_record

    try:
        ann = PointAnnotation(args.x, args.y, args.class_label, args.pattern, args.histology)
        lesion = args.lesion_present if args.lesion_present is not None else ann.class_label.value == "Lesion"
        rec = AnnotatedRecord(args.record_id, args.cube, ann, args.patient, args.body_part, lesion)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    manifest = Path(args.manifest)
    if not args.no_check and not rec.resolve(manifest.parent).is_file():
        raise MissingInput(f"cube not found: {rec.cube_path}")
    append_record(manifest, rec)
    print(rec.record_id)
    return EXIT_OK


def _dataset_list(args) -> int:
    from .analysis import load_manifest

    m = load_manifest(args.manifest, check_files=False)
    for rec in m.records:
        if args.format == "json":
            print(json.dumps(rec.to_dict(), sort_keys=True))
        else:
            a = rec.annotation
            labels = ",".join(v.value for v in (a.pattern, a.histology) if v is not None) or "-"
            print(f"{rec.record_id}\t{rec.patient_id}\t{rec.body_part.value}\t{a.class_label.value}"
                  f"\t({a.x},{a.y})\t{labels}\t{rec.cube_path}")
    return EXIT_OK


def _dataset_validate(args) -> int:
    from .analysis import validate_manifest

    report = validate_manifest(args.manifest, check_cubes=not args.quick)
    print(json.dumps(report.to_dict(), sort_keys=True, indent=2))
    for issue in report.issues:
        print(f"{args.manifest}: {issue}", file=sys.stderr)
    if any(i.kind == "missing" for i in report.issues):
        return EXIT_IO
    return EXIT_DATA if report.issues else EXIT_OK


def _dataset_synth(args) -> int:
    import shutil
    import tempfile

    from .cohort import CohortConfig, build_cohort, nevus_panel_config

    cfg = resolve_config("synth", args)
    for k in ("records", "patients", "rows", "cols", "frames"):
        _positive_int(k, cfg[k])
    for k in ("lesions", "seed"):
        _positive_int(k, cfg[k], 0)
    keys = {"rows", "cols", "frames", "noise", "seed"}
    if cfg["panel"]:
        cc = nevus_panel_config(**{k: cfg[k] for k in keys})
    else:
        cc = CohortConfig(**{k: cfg[k] for k in keys | {"records", "lesions", "patients"}})
    cc.validate()
    out = Path(args.out)
    if out.exists() and any(out.iterdir()):
        raise ConfigError(f"output directory {out} is not empty")
    out.parent.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        manifest = build_cohort(stage, cc)
        from .fileio import write_json

        write_json(stage / "config.json", _echo("dataset synth", cfg))
        if out.exists():
            out.rmdir()
        stage.rename(out)
    except BaseException:
        shutil.rmtree(stage, ignore_errors=True)
        raise
    print(out / manifest.name)
    return EXIT_OK


# --- parser --------------------------------------------------------------------

def _bool_pair(p, name, help_on):
    g = p.add_mutually_exclusive_group()
    dest = name.replace("-", "_")
    g.add_argument(f"--{name}", dest=dest, action="store_const", const=True, default=None, help=help_on)
    g.add_argument(f"--no-{name}", dest=dest, action="store_const", const=False)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hyperderm", description="Snapshot hyperspectral skin imaging toolkit.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="render a phantom scene plus dark/white reference stacks")
    s.add_argument("--scene", help="scene JSON (default: one lesion on a 290x275 frame)")
    s.add_argument("--seed", type=int, help="RNG seed (default 0)")
    s.add_argument("--frames", type=int, help="reference frames averaged (default 100)")
    _bool_pair(s, "noise", "shot and read noise (default on)")
    s.add_argument("--png", action="store_const", const=True, help="also write a montage PNG")
    s.add_argument("--config", help="JSON file with settings, including 'sensor' and 'illumination'")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("calibrate", help="raw counts to reflectance, R = (X - D) / (W - D)")
    c.add_argument("--raw")
    c.add_argument("--dark")
    c.add_argument("--white")
    c.add_argument("--epsilon", type=float, help="minimum usable W - D in counts (default 1.0)")
    c.add_argument("--config")
    c.add_argument("--out", required=True, help="reflectance HSC path")
    c.set_defaults(func=cmd_calibrate)

    a = sub.add_parser("analyze", help="stratified spectral statistics to CSV and SVG")
    a.add_argument("--manifest")
    a.add_argument("--key", help="ClassLabel, BodyPart, PatientId, Pattern or Histology (default ClassLabel)")
    a.add_argument("--stat", help="Mean, Median or Std (default Median)")
    a.add_argument("--window", type=int, help="odd patch size (default 3)")
    a.add_argument("--svg", help="SVG path (default: CSV path with .svg)")
    a.add_argument("--png", help="optional matplotlib PNG path")
    a.add_argument("--config")
    a.add_argument("--out", required=True, help="CSV path")
    a.set_defaults(func=cmd_analyze)

    m = sub.add_parser("montage", help="per-band grayscale montage as PGM plus label JSON")
    m.add_argument("--cube")
    m.add_argument("--wavelengths", help="comma-separated nm (default 450,500,540,570,600,...,950)")
    m.add_argument("--columns", type=int)
    m.add_argument("--png", help="optional matplotlib PNG path")
    m.add_argument("--config")
    m.add_argument("--out", required=True, help="PGM path")
    m.set_defaults(func=cmd_montage)

    d = sub.add_parser("dataset", help="manifest bookkeeping")
    dsub = d.add_subparsers(dest="action", required=True, parser_class=_Parser)
    da = dsub.add_parser("add", help="append one annotated record")
    da.add_argument("--manifest", required=True)
    da.add_argument("--record-id", required=True)
    da.add_argument("--cube", required=True, help="cube path, relative to the manifest directory")
    da.add_argument("--patient", required=True)
    da.add_argument("--body-part", default="Other")
    da.add_argument("--class", dest="class_label", required=True, choices=["Skin", "Lesion"])
    da.add_argument("--x", type=int, required=True, help="annotation column")
    da.add_argument("--y", type=int, required=True, help="annotation row")
    da.add_argument("--pattern")
    da.add_argument("--histology")
    _bool_pair(da, "lesion-present", "image contains a lesion (default: class is Lesion)")
    da.add_argument("--no-check", action="store_true", help="skip the cube existence check")
    dl = dsub.add_parser("list", help="print the records")
    dl.add_argument("--manifest", required=True)
    dl.add_argument("--format", choices=["table", "json"], default="table")
    dv = dsub.add_parser("validate", help="check every record; nonzero exit on problems")
    dv.add_argument("--manifest", required=True)
    dv.add_argument("--quick", action="store_true", help="only check that cubes exist")
    ds = dsub.add_parser("synth", help="render a synthetic annotated cohort")
    ds.add_argument("--records", type=int)
    ds.add_argument("--lesions", type=int)
    ds.add_argument("--patients", type=int)
    ds.add_argument("--rows", type=int)
    ds.add_argument("--cols", type=int)
    ds.add_argument("--frames", type=int)
    ds.add_argument("--seed", type=int)
    _bool_pair(ds, "noise", "shot and read noise (default on)")
    ds.add_argument("--panel", action="store_const", const=True,
                    help="nine labelled lesions instead of the full cohort")
    ds.add_argument("--config")
    ds.add_argument("--out", required=True)
    d.set_defaults(func=cmd_dataset)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IoFailure, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (HyperdermError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
