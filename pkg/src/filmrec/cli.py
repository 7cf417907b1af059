"""Command-line front end: ``gen``, ``recover``, ``eval`` and ``losses``.

Exit codes: 0 on success, 1 when some samples failed, 2 on configuration
errors. The log level comes from the ``FILMREC_LOG`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import core, estimator, losses, maptrans, metrics, simulator

log = logging.getLogger("filmrec")

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
MAP_SOURCES = ("oracle", "estimated", "files")
GRIDS = {"4x4": (4, 4), "6x4": (6, 4)}


class ConfigError(ValueError):
    pass


class MissingMapError(FileNotFoundError):
    def __init__(self, name: str, where):
        super().__init__(f"missing map {name!r} in {where}")
        self.name = name


@dataclass
class RunConfig:
    command: str
    out: str | None = None
    data: str | None = None
    maps: str | None = None
    recovered: str | None = None
    pred: str | None = None
    n: int = 10
    seed: int = 0
    grid: str = "4x4"
    res: int = 256
    map_source: str = "oracle"
    alpha: float = 2.0
    beta: float = 2.0
    border: int = 0
    jobs: int = 1

    def validate(self) -> None:
        if self.command not in ("gen", "recover", "eval", "losses"):
            raise ConfigError(f"unknown command {self.command!r}")
        if self.grid not in GRIDS:
            raise ConfigError(f"grid must be one of {sorted(GRIDS)}, got {self.grid!r}")
        if self.map_source not in MAP_SOURCES:
            raise ConfigError(f"map-source must be one of {MAP_SOURCES}")
        if self.n < 0:
            raise ConfigError("--n must be non-negative")
        if self.res < 16:
            raise ConfigError("--res must be at least 16")
        if self.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("--alpha and --beta must be non-negative")
        if self.out is None:
            raise ConfigError("--out is required")
        need = {"recover": ["data"], "eval": ["data", "recovered"], "losses": ["data", "pred"]}
        for key in need.get(self.command, []):
            value = getattr(self, key)
            if value is None:
                raise ConfigError(f"--{key} is required for {self.command}")
            if not Path(value).is_dir():
                raise ConfigError(f"--{key} {value!r} is not a directory")
        if self.command == "recover" and self.map_source == "files":
            if self.maps is None or not Path(self.maps).is_dir():
                raise ConfigError("--map-source files needs an existing --maps directory")


def load_config_file(path) -> dict:
    """JSON run configuration; unknown keys are rejected."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    known = {f.name for f in fields(RunConfig)} - {"command"}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {', '.join(unknown)}")
    return data


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _read_manifest(data_dir) -> dict:
    p = Path(data_dir) / "manifest.json"
    if not p.is_file():
        raise ConfigError(f"no manifest.json in {data_dir}")
    return json.loads(p.read_text())


def _parallel_map(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# --- gen -----------------------------------------------------------------------

def _gen_one(job):
    out, seed, index, grid, res = job
    sid = f"{index:05d}"
    try:
        s = simulator.generate_sample(seed, index, grid=grid, res=res)
        s.meta["id"] = sid
        simulator.save_sample(s, Path(out) / sid)
        return {"id": sid, "index": index, "mesh_seed": s.meta["mesh_seed"],
                "texture_seed": s.meta["texture"]["seed"]}, None
    except Exception as exc:  # noqa: BLE001 - isolated per sample
        return {"id": sid, "index": index}, f"{type(exc).__name__}: {exc}"


def cmd_gen(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = GRIDS[cfg.grid]
    jobs = [(str(out), cfg.seed, i, grid, cfg.res) for i in range(cfg.n)]
    results = _parallel_map(_gen_one, jobs, cfg.jobs)
    failed = [(r["id"], err) for r, err in results if err]
    for sid, err in failed:
        log.error("sample %s failed: %s", sid, err)
    manifest = {
        "ids": [r["id"] for r, err in results if not err],
        "samples": [r for r, err in results if not err],
        "failed": [sid for sid, _ in failed],
        "config": {"seed": cfg.seed, "n": cfg.n, "grid": cfg.grid, "res": cfg.res},
    }
    _write_json(out / "manifest.json", manifest)
    log.info("wrote %d samples to %s", len(manifest["ids"]), out)
    return EXIT_FAILED if failed else EXIT_OK


# --- recover -------------------------------------------------------------------

def _read_map(d: Path, name: str) -> np.ndarray:
    p = d / f"{name}.fmap"
    if not p.is_file():
        raise MissingMapError(name, d)
    return core.fmap_read(p)


def recover_maps(source: str, sample_dir: Path, maps_dir: Path | None, res: int):
    """``(backward, albedo, image)`` for one sample under the chosen map source."""
    image = core.image_read_png(sample_dir / "image.png")
    if source == "estimated":
        r = estimator.estimate_pipeline(image, res=res)
        return r.backward, r.albedo, image
    d = sample_dir if source == "oracle" else maps_dir
    uv = _read_map(d, "uv")
    mask = _read_map(d, "bgmask")
    albedo = _read_map(d, "albedo")
    dfp = d / "df.fmap"
    df = core.fmap_read(dfp) if dfp.is_file() else maptrans.deformation_from_uv(uv, mask)
    b = maptrans.merge_and_convert(uv, df, mask, res, res)
    return b, albedo, image


def _recover_one(job):
    source, data, maps, out, sid, res = job
    try:
        maps_dir = None if maps is None else Path(maps) / sid
        if source == "files" and not maps_dir.is_dir():
            raise MissingMapError("uv", maps_dir)
        b, albedo, image = recover_maps(source, Path(data) / sid, maps_dir, res)
        d = Path(out) / sid
        d.mkdir(parents=True, exist_ok=True)
        core.fmap_write(b, d / "backward.fmap")
        core.image_write_png(np.clip(maptrans.apply_backward(b, image), 0, 1), d / "dewarped.png")
        core.image_write_png(np.clip(maptrans.apply_backward(b, albedo), 0, 1),
                             d / "dewarped_albedo.png")
        return sid, None
    except Exception as exc:  # noqa: BLE001 - isolated per sample
        return sid, f"{type(exc).__name__}: {exc}"


def _loose_images(data: Path) -> list[str]:
    return sorted(p.stem for p in data.glob("*.png"))


def cmd_recover(cfg: RunConfig) -> int:
    data, out = Path(cfg.data), Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if (data / "manifest.json").is_file():
        ids = _read_manifest(data)["ids"]
    else:
        # loose photos: <data>/<name>.png, estimated maps only
        if cfg.map_source != "estimated":
            raise ConfigError("loose images need --map-source estimated")
        ids = _loose_images(data)
        staging = out / "_inputs"
        for sid in ids:
            (staging / sid).mkdir(parents=True, exist_ok=True)
            img = core.image_read_png(data / f"{sid}.png")
            if img.shape[2] == 1:
                img = np.repeat(img, 3, axis=2)
            core.image_write_png(img, staging / sid / "image.png")
        data = staging
    jobs = [(cfg.map_source, str(data), cfg.maps, str(out), sid, cfg.res) for sid in ids]
    results = _parallel_map(_recover_one, jobs, cfg.jobs)
    failed = {sid: err for sid, err in results if err}
    for sid, err in failed.items():
        log.error("sample %s failed: %s", sid, err)
    _write_json(out / "manifest.json", {
        "ids": [sid for sid, err in results if not err],
        "failed": failed,
        "map_source": cfg.map_source,
        "res": cfg.res,
        "data": str(cfg.data),
    })
    return EXIT_FAILED if failed else EXIT_OK


# --- eval ----------------------------------------------------------------------

def cmd_eval(cfg: RunConfig) -> int:
    data, rec = Path(cfg.data), Path(cfg.recovered)
    ids = _read_manifest(data)["ids"]
    rec_manifest = _read_manifest(rec)
    unknown = sorted(set(rec_manifest["ids"]) - set(ids))
    if unknown:
        raise ConfigError(f"recovered ids not in dataset manifest: {', '.join(unknown[:5])}")
    source = rec_manifest.get("map_source", "unknown")
    reports, failed = [], {}
    for sid in rec_manifest["ids"]:
        try:
            sample = simulator.load_sample(data / sid)
            pred_b = core.fmap_read(rec / sid / "backward.fmap")
            reports.append(metrics.evaluate_sample(
                pred_b, sample, border=cfg.border,
                meta={"id": sid, "map_source": source, "scatter_cap": maptrans.SCATTER_CAP}))
        except Exception as exc:  # noqa: BLE001 - isolated per sample
            failed[sid] = f"{type(exc).__name__}: {exc}"
            log.error("sample %s failed: %s", sid, failed[sid])
    _write_json(cfg.out, {
        "samples": [r.to_dict() for r in reports],
        "aggregate": metrics.aggregate(reports),
        "failed": failed,
    })
    return EXIT_FAILED if failed else EXIT_OK


# --- losses --------------------------------------------------------------------

#: value range of each stored map; losses see every map scaled to [-1, 1]
MAP_RANGES = {"m3d": core.UNIT, "normal": core.SIGNED_UNIT, "depth": core.UNIT,
              "bgmask": core.UNIT, "uv": core.UNIT, "albedo": core.UNIT,
              "df": core.SIGNED_UNIT}


def _to_signed(name: str, r: np.ndarray) -> np.ndarray:
    return core.rescale_linear(r, MAP_RANGES[name], core.SIGNED_UNIT, strict=False)


def load_bundle(d: Path, gt: bool) -> dict:
    """Map bundle of a sample or prediction directory; ``df`` is derived from ``uv`` when absent."""
    bundle = {}
    for name in losses.BUNDLE_MAPS:
        if name == "df":
            continue
        bundle[name] = _read_map(d, name)
    dfp = d / "df.fmap"
    if not gt and dfp.is_file():
        bundle["df"] = core.fmap_read(dfp)
    else:
        bundle["df"] = maptrans.deformation_from_uv(bundle["uv"], bundle["bgmask"])
    return bundle


def cmd_losses(cfg: RunConfig) -> int:
    data, pred_dir = Path(cfg.data), Path(cfg.pred)
    ids = _read_manifest(data)["ids"]
    w = losses.LossWeights(cfg.alpha, cfg.beta)
    out, failed = [], {}
    for sid in ids:
        try:
            gt = load_bundle(data / sid, gt=True)
            pred = load_bundle(pred_dir / sid, gt=False)
            mask = gt["bgmask"]
            gt_s = {k: _to_signed(k, v) for k, v in gt.items()}
            pred_s = {k: _to_signed(k, v) for k, v in pred.items()}
            rep = losses.composite_losses(pred_s, gt_s, mask, w)
            out.append({"id": sid, **rep.to_dict()})
        except Exception as exc:  # noqa: BLE001 - isolated per sample
            failed[sid] = f"{type(exc).__name__}: {exc}"
            log.error("sample %s failed: %s", sid, failed[sid])
    _write_json(cfg.out, {"samples": out, "alpha": cfg.alpha, "beta": cfg.beta, "failed": failed})
    return EXIT_FAILED if failed else EXIT_OK


COMMANDS = {"gen": cmd_gen, "recover": cmd_recover, "eval": cmd_eval, "losses": cmd_losses}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="filmrec", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="JSON file with default flag values")
        sp.add_argument("--out", help="output directory (gen, recover) or report file")
        sp.add_argument("--jobs", type=int, help="worker processes (1 = reference serial run)")
        return sp

    g = common(sub.add_parser("gen", help="generate a synthetic dataset"))
    g.add_argument("--n", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--grid", choices=sorted(GRIDS))
    g.add_argument("--res", type=int)

    r = common(sub.add_parser("recover", help="dewarp samples"))
    r.add_argument("--data", help="dataset directory (with manifest.json) or folder of PNGs")
    r.add_argument("--map-source", dest="map_source", choices=MAP_SOURCES)
    r.add_argument("--maps", help="per-sample map folders for --map-source files")
    r.add_argument("--res", type=int)

    e = common(sub.add_parser("eval", help="score recovered backward maps"))
    e.add_argument("--data")
    e.add_argument("--recovered")
    e.add_argument("--border", type=int, help="pixels cropped from each side before scoring")

    lo = common(sub.add_parser("losses", help="loss report of predicted maps"))
    lo.add_argument("--data")
    lo.add_argument("--pred")
    lo.add_argument("--alpha", type=float)
    lo.add_argument("--beta", type=float)
    return p


def parse_config(argv=None) -> RunConfig:
    args = build_parser().parse_args(argv)
    values = {}
    if args.config is not None:
        values.update(load_config_file(args.config))
    for k, v in vars(args).items():
        if k in ("config", "command") or v is None:
            continue
        values[k] = v
    try:
        cfg = RunConfig(command=args.command, **values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("FILMREC_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(argv)
        return COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"filmrec: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
