"""Batch orchestration: pre-label, sample, predict, evaluate over a tile set.

Dataset convention: one image GeoTIFF per tile (`<tile_id>.tif`) in
image_dir, optional ground truth with the same name in gt_dir (values 0/1),
and a single land-cover mosaic covering every tile. Per-tile sampling seeds
derive from (run seed, tile_id), so results do not depend on worker count
or tile order; all artifact writers are deterministic, making reruns
byte-identical for the oracle backend.

The monolithic `run` and the four stage functions read and write the same
artifact files with the same helpers, so running stages separately
reproduces a run bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .backend import BackendInterface, OracleBackend, binarize, run_iterative
from .config import RunConfig
from .errors import ConfigError, CropPromptError
from .geotiff import read_raster, write_raster
from .metrics import MetricsReport, aggregate, compute_metrics, confusion
from .prelabel import (PreLabel, make_prelabel, prelabel_from_raster,
                       prelabel_to_raster)
from .raster import GeoRaster
from .sampler import (PromptPlan, SamplerConfig, flip_labels, jitter_points,
                      plan_from_geojson, plan_to_geojson, sample_prompts)

log = logging.getLogger(__name__)

MASK_DIR = "masks"
PRELABEL_DIR = "prelabels"
PROMPT_DIR = "prompts"
PRELABEL_STATS = "prelabel_stats.csv"
REPORT_CSV = "report.csv"
REPORT_JSON = "report.json"
NOISE_JSON = "noise_report.json"
NOISE_CSV = "noise_report.csv"

REPORT_COLUMNS = ("tile_id", "tp", "fp", "fn", "tn", "oa", "miou", "f1",
                  "status", "reason")


@dataclass
class TileRecord:
    tile_id: str
    status: str = "completed"  # completed | skipped | failed
    reason: str = ""
    coverage: Optional[float] = None
    p_crop: Optional[float] = None
    n_points: int = 0
    metrics: Optional[MetricsReport] = None


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary labeled parts (not Python hash())."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(str(part).encode())
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".10g")
    # reasons are free text from exception messages; keep rows parseable
    return str(value).replace(",", ";").replace("\n", " ")


def list_tiles(image_dir) -> list[tuple[str, Path]]:
    paths = sorted(Path(image_dir).glob("*.tif"))
    return [(p.stem, p) for p in paths]


def make_backend(config: RunConfig) -> Callable[[], BackendInterface]:
    """Factory returning per-worker backend instances."""
    if config.backend == "oracle":
        shared = OracleBackend()  # stateless, safe to share
        return lambda: shared
    from .vfm import VfmBackend, VfmBackendConfig
    vfm_config = VfmBackendConfig.from_json(config.vfm_config_path)
    local = threading.local()

    def factory() -> BackendInterface:
        if not hasattr(local, "backend"):
            local.backend = VfmBackend(vfm_config)
        return local.backend

    return factory


def vfm_threshold(config: RunConfig) -> float:
    if config.backend == "vfm":
        from .vfm import VfmBackendConfig
        return VfmBackendConfig.from_json(config.vfm_config_path).logit_threshold
    return 0.0


def _map_tiles(items, fn, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _evaluate_mask(mask: np.ndarray, gt_raster: GeoRaster, tile_id: str) -> MetricsReport:
    gt_band = gt_raster.band(0)
    ignore = None
    if gt_raster.nodata is not None:
        ignore = gt_band == gt_raster.nodata
    cm = confusion(mask, (gt_band == 1).astype(np.uint8), ignore=ignore)
    return compute_metrics(cm, tile_id=tile_id)


def _gt_path(config: RunConfig, tile_id: str) -> Optional[Path]:
    if config.gt_dir is None:
        return None
    path = Path(config.gt_dir) / f"{tile_id}.tif"
    return path if path.is_file() else None


def _tile_sampler_config(config: RunConfig, tile_id: str) -> SamplerConfig:
    from dataclasses import replace
    return replace(config.sampler, seed=derive_seed(config.seed, tile_id))


# ---------------------------------------------------------------- stages

def _write_prelabel_stats(output_dir: Path, rows: list[dict]) -> None:
    lines = ["tile_id,coverage,p_crop,p_noncrop,status,reason"]
    for row in sorted(rows, key=lambda r: r["tile_id"]):
        lines.append(",".join(_fmt(row[k]) for k in
                              ("tile_id", "coverage", "p_crop", "p_noncrop",
                               "status", "reason")))
    (output_dir / PRELABEL_STATS).write_text("\n".join(lines) + "\n")


def _read_prelabel_stats(output_dir: Path) -> dict[str, dict]:
    path = output_dir / PRELABEL_STATS
    if not path.is_file():
        return {}
    rows = {}
    lines = path.read_text().splitlines()
    for line in lines[1:]:
        parts = line.split(",")
        rows[parts[0]] = {"coverage": float(parts[1]) if parts[1] else None,
                          "status": parts[4], "reason": parts[5]}
    return rows


def stage_prelabel(config: RunConfig) -> list[TileRecord]:
    """Window the land-cover mosaic onto every tile and write debug masks."""
    config.validate_paths()
    out = Path(config.output_dir)
    (out / PRELABEL_DIR).mkdir(parents=True, exist_ok=True)
    glc = read_raster(config.glc_path)
    records, stats = [], []

    def one(item):
        tile_id, path = item
        record = TileRecord(tile_id=tile_id)
        try:
            image = read_raster(path)
            prelabel = make_prelabel(image, glc, config.class_map)
            write_raster(out / PRELABEL_DIR / f"{tile_id}.tif",
                         prelabel_to_raster(prelabel, image.grid))
            record.coverage = prelabel.coverage
            record.p_crop = prelabel.p_crop
            if prelabel.coverage == 0:
                record.status, record.reason = "skipped", "no_coverage"
            elif prelabel.coverage < config.coverage_threshold:
                record.status, record.reason = "skipped", "low_coverage"
            return record, prelabel
        except CropPromptError as e:
            record.status, record.reason = "failed", f"{type(e).__name__}: {e}"
            return record, None

    for record, prelabel in _map_tiles(list_tiles(config.image_dir), one,
                                       config.workers):
        records.append(record)
        p_noncrop = None if prelabel is None else prelabel.p_noncrop
        stats.append({"tile_id": record.tile_id, "coverage": record.coverage,
                      "p_crop": record.p_crop, "p_noncrop": p_noncrop,
                      "status": record.status, "reason": record.reason})
        if record.status == "skipped":
            log.warning("tile %s skipped: %s", record.tile_id, record.reason)
    _write_prelabel_stats(out, stats)
    return records


def stage_sample(config: RunConfig) -> list[TileRecord]:
    """Sample prompt plans from written pre-labels."""
    config.validate_paths()
    out = Path(config.output_dir)
    (out / PROMPT_DIR).mkdir(parents=True, exist_ok=True)
    records = []

    def one(item):
        tile_id, path = item
        record = TileRecord(tile_id=tile_id)
        prelabel_path = out / PRELABEL_DIR / f"{tile_id}.tif"
        if not prelabel_path.is_file():
            record.status, record.reason = "skipped", "missing_prelabel"
            return record
        try:
            image = read_raster(path)
            prelabel = prelabel_from_raster(read_raster(prelabel_path))
            record.coverage = prelabel.coverage
            if prelabel.coverage == 0:
                record.status, record.reason = "skipped", "no_coverage"
                return record
            if prelabel.coverage < config.coverage_threshold:
                record.status, record.reason = "skipped", "low_coverage"
                return record
            plan = sample_prompts(prelabel, _tile_sampler_config(config, tile_id))
            record.n_points = plan.n_points
            payload = json.dumps(plan_to_geojson(plan, image.grid),
                                 sort_keys=True, indent=1)
            (out / PROMPT_DIR / f"{tile_id}.geojson").write_text(payload + "\n")
        except CropPromptError as e:
            record.status, record.reason = "failed", f"{type(e).__name__}: {e}"
        return record

    return _map_tiles(list_tiles(config.image_dir), one, config.workers)


def stage_predict(config: RunConfig) -> list[TileRecord]:
    """Run the backend on every tile that has a prompt plan."""
    config.validate_paths()
    out = Path(config.output_dir)
    (out / MASK_DIR).mkdir(parents=True, exist_ok=True)
    backend_factory = make_backend(config)
    threshold = vfm_threshold(config)
    records = []

    def one(item):
        tile_id, path = item
        record = TileRecord(tile_id=tile_id)
        plan_path = out / PROMPT_DIR / f"{tile_id}.geojson"
        if not plan_path.is_file():
            record.status, record.reason = "skipped", "missing_plan"
            return record
        try:
            image = read_raster(path)
            plan = plan_from_geojson(json.loads(plan_path.read_text()), image.grid)
            record.n_points = plan.n_points
            logits = run_iterative(backend_factory(), image, plan)
            mask = binarize(logits, threshold)
            write_raster(out / MASK_DIR / f"{tile_id}.tif",
                         GeoRaster(mask[np.newaxis], image.geotransform, image.crs))
        except CropPromptError as e:
            record.status, record.reason = "failed", f"{type(e).__name__}: {e}"
        return record

    return _map_tiles(list_tiles(config.image_dir), one, config.workers)


def stage_evaluate(config: RunConfig) -> dict:
    """Score predicted masks against ground truth and write the reports."""
    config.validate_paths()
    out = Path(config.output_dir)
    stats = _read_prelabel_stats(out)
    records = []

    def one(item):
        tile_id, path = item
        record = TileRecord(tile_id=tile_id)
        mask_path = out / MASK_DIR / f"{tile_id}.tif"
        if not mask_path.is_file():
            prior = stats.get(tile_id)
            if prior and prior["status"] != "completed":
                record.status = prior["status"]
                record.reason = prior["reason"]
                record.coverage = prior["coverage"]
            else:
                record.status, record.reason = "skipped", "missing_mask"
            return record
        if stats.get(tile_id):
            record.coverage = stats[tile_id]["coverage"]
        gt_path = _gt_path(config, tile_id)
        if gt_path is None:
            return record
        try:
            mask = read_raster(mask_path).band(0)
            record.metrics = _evaluate_mask(mask, read_raster(gt_path), tile_id)
        except CropPromptError as e:
            record.status, record.reason = "failed", f"{type(e).__name__}: {e}"
        return record

    records = _map_tiles(list_tiles(config.image_dir), one, config.workers)
    return write_reports(out, records)


def write_reports(output_dir: Path, records: list[TileRecord]) -> dict:
    """Per-tile CSV plus aggregate JSON; deterministic content and order."""
    records = sorted(records, key=lambda r: r.tile_id)
    lines = [",".join(REPORT_COLUMNS)]
    for r in records:
        m = r.metrics
        row = [r.tile_id]
        if m is not None:
            row += [m.cm.tp, m.cm.fp, m.cm.fn, m.cm.tn, m.oa, m.miou, m.f1]
        else:
            row += [None] * 7
        row += [r.status, r.reason]
        lines.append(",".join(_fmt(v) for v in row))
    (output_dir / REPORT_CSV).write_text("\n".join(lines) + "\n")

    scored = [r.metrics for r in records if r.metrics is not None]
    summary = {
        "tiles": len(records),
        "completed": sum(1 for r in records if r.status == "completed"),
        "skipped": sum(1 for r in records if r.status == "skipped"),
        "failed": sum(1 for r in records if r.status == "failed"),
        "aggregate": aggregate(scored).as_dict() if scored else None,
    }
    (output_dir / REPORT_JSON).write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return summary


def run(config: RunConfig) -> dict:
    """Full workflow for every tile; per-tile failures never abort the run."""
    config.validate_paths()
    out = Path(config.output_dir)
    for sub in (PRELABEL_DIR, PROMPT_DIR, MASK_DIR):
        (out / sub).mkdir(parents=True, exist_ok=True)
    glc = read_raster(config.glc_path)
    backend_factory = make_backend(config)
    threshold = vfm_threshold(config)
    stats = []

    def one(item):
        tile_id, path = item
        record = TileRecord(tile_id=tile_id)
        prelabel = None
        try:
            image = read_raster(path)
            prelabel = make_prelabel(image, glc, config.class_map)
            record.coverage = prelabel.coverage
            record.p_crop = prelabel.p_crop
            write_raster(out / PRELABEL_DIR / f"{tile_id}.tif",
                         prelabel_to_raster(prelabel, image.grid))
            if prelabel.coverage == 0:
                record.status, record.reason = "skipped", "no_coverage"
                return record, prelabel
            if prelabel.coverage < config.coverage_threshold:
                record.status, record.reason = "skipped", "low_coverage"
                log.warning("tile %s skipped: coverage %.3f < %.3f", tile_id,
                            prelabel.coverage, config.coverage_threshold)
                return record, prelabel
            plan = sample_prompts(prelabel, _tile_sampler_config(config, tile_id))
            record.n_points = plan.n_points
            payload = json.dumps(plan_to_geojson(plan, image.grid),
                                 sort_keys=True, indent=1)
            (out / PROMPT_DIR / f"{tile_id}.geojson").write_text(payload + "\n")
            logits = run_iterative(backend_factory(), image, plan)
            mask = binarize(logits, threshold)
            write_raster(out / MASK_DIR / f"{tile_id}.tif",
                         GeoRaster(mask[np.newaxis], image.geotransform, image.crs))
            gt_path = _gt_path(config, tile_id)
            if gt_path is not None:
                record.metrics = _evaluate_mask(mask, read_raster(gt_path), tile_id)
        except CropPromptError as e:
            record.status, record.reason = "failed", f"{type(e).__name__}: {e}"
            log.warning("tile %s failed: %s", tile_id, record.reason)
        return record, prelabel

    results = _map_tiles(list_tiles(config.image_dir), one, config.workers)
    records = []
    for record, prelabel in results:
        records.append(record)
        stats.append({"tile_id": record.tile_id, "coverage": record.coverage,
                      "p_crop": record.p_crop,
                      "p_noncrop": None if prelabel is None else prelabel.p_noncrop,
                      "status": record.status, "reason": record.reason})
    _write_prelabel_stats(out, stats)
    return write_reports(out, records)


def ablate_noise(config: RunConfig) -> dict:
    """Sweep prompt corruption levels and report metric mean/std per level.

    Prompts are sampled once per tile (same seeds as `run`), then corrupted
    per (level, repetition) before prediction. Requires ground truth.
    """
    if config.noise is None:
        raise ConfigError("ablate_noise requires a [noise] config table")
    if config.gt_dir is None:
        raise ConfigError("ablate_noise requires gt_dir")
    config.validate_paths()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    glc = read_raster(config.glc_path)
    backend_factory = make_backend(config)
    threshold = vfm_threshold(config)
    noise = config.noise

    def prepare(item):
        tile_id, path = item
        image = read_raster(path)
        try:
            prelabel = make_prelabel(image, glc, config.class_map)
            if prelabel.coverage == 0 or prelabel.coverage < config.coverage_threshold:
                return None
            plan = sample_prompts(prelabel, _tile_sampler_config(config, tile_id))
        except CropPromptError:
            return None
        gt_path = _gt_path(config, tile_id)
        if gt_path is None:
            return None
        return tile_id, image, plan, read_raster(gt_path)

    prepared = [p for p in _map_tiles(list_tiles(config.image_dir), prepare,
                                      config.workers) if p is not None]
    if not prepared:
        raise ConfigError("no tiles with coverage and ground truth to ablate")

    levels = []
    for level_idx, flip_p in enumerate(noise.flip_p):
        per_rep = {"oa": [], "miou": [], "f1": []}
        for rep in range(noise.seeds):
            def one(tile):
                tile_id, image, plan, gt = tile
                noisy = flip_labels(plan, flip_p,
                                    derive_seed(config.seed, tile_id, "flip",
                                                level_idx, rep))
                if noise.jitter_radius > 0:
                    noisy = jitter_points(noisy, noise.jitter_radius,
                                          derive_seed(config.seed, tile_id,
                                                      "jitter", level_idx, rep))
                logits = run_iterative(backend_factory(), image, noisy)
                return _evaluate_mask(binarize(logits, threshold), gt, tile_id)

            reports = _map_tiles(prepared, one, config.workers)
            agg = aggregate(reports).micro
            for name in per_rep:
                value = getattr(agg, name)
                if value is not None:
                    per_rep[name].append(value)
        row = {"flip_p": flip_p, "n_seeds": noise.seeds,
               "jitter_radius": noise.jitter_radius}
        for name, values in per_rep.items():
            row[f"{name}_mean"] = float(np.mean(values)) if values else None
            row[f"{name}_std"] = float(np.std(values)) if values else None
        levels.append(row)

    report = {"levels": levels, "tiles": len(prepared), "seed": config.seed}
    (out / NOISE_JSON).write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    columns = ("flip_p", "jitter_radius", "n_seeds", "oa_mean", "oa_std",
               "miou_mean", "miou_std", "f1_mean", "f1_std")
    lines = [",".join(columns)]
    for row in levels:
        lines.append(",".join(_fmt(row[c]) for c in columns))
    (out / NOISE_CSV).write_text("\n".join(lines) + "\n")
    return report
