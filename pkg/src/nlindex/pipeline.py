"""End-to-end experiment: sample, embed, build the surface, index, persist."""
from __future__ import annotations

import logging
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .embedding import embed_designs
from .io import write_embedding, write_json, write_samples
from .landscape import LandscapeSurface, LowerHullEnvelope, build_surface, lower_convex_hull, nonlinearity_index
from .problems import Problem
from .render import Markers, write_contour_svg, write_surface_svg
from .sampler import SampleSet, run_sampling

logger = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """A stage failed; the report records which one."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def index_of(samples: SampleSet, method: str = "cosineMds", R: int = 20):
    """Embedding, surface, envelope and index for a sample set."""
    emb = embed_designs(samples.designs, method)
    surface = build_surface(emb.coords, samples.clipped)
    envelope = lower_convex_hull(surface, R)
    nonlinearity_index(surface, envelope)
    return emb, surface, envelope


def markers_for(samples: SampleSet, coords) -> Markers:
    best = samples.best_per_group()
    ref = samples.reference_index()
    starts = [i for i, s in enumerate(samples.samples) if s.is_start]
    bests = [i for g, i in sorted(best.items()) if i != ref]
    return Markers(coords[starts], coords[bests], None if ref is None else coords[ref])


def _surface_json(surface: LandscapeSurface) -> dict:
    return {
        "points": surface.points,
        "values": surface.values,
        "triangles": surface.triangles,
        "sample_to_point": surface.sample_to_point,
        "normalization": {"J_min": surface.j_min, "J_max": surface.j_max},
        "jitter": surface.jitter,
    }


def _hull_json(envelope: LowerHullEnvelope) -> dict:
    return {
        "faces": envelope.faces,
        "resolution": envelope.resolution,
        "points_per_face": envelope.points_per_face,
        "face_gap_mean": envelope.face_gap_means(),
        "planar_fallback": envelope.fallback,
    }


def _gap_stats(envelope):
    g = envelope.face_gap_means()
    return {"min": float(g.min()), "mean": float(g.mean()), "max": float(g.max()), "faces": int(g.size)}


def landscape_report(samples: SampleSet, method: str, R: int) -> tuple[dict, tuple]:
    emb, surface, envelope = index_of(samples, method, R)
    clip = samples.clip_bound
    report = {
        "I_NL": envelope.index,
        "face_gaps": _gap_stats(envelope),
        "samples": {
            "total": len(samples),
            "distinct_points": int(len(surface.points)),
            "groups": len(set(samples.group_ids.tolist())),
            "clipped": int(np.sum(samples.raw > clip)),
            "aborted_groups": list(samples.aborted_groups),
        },
        "normalization": {"J_min": surface.j_min, "J_max": surface.j_max, "clip_bound": clip},
        "embedding": {"method": emb.method, "eigenvalues": emb.eigenvalues, "stress_residual": emb.stress_residual},
        "jitter": surface.jitter,
    }
    ref = samples.reference_index()
    if ref is not None:
        s = samples.samples[ref]
        report["reference"] = {"group_id": s.group_id, "iteration": s.iteration, "J": s.raw_J}
        rest = samples.without_reference()
        if len(rest) >= 3:
            report["I_NL_without_reference"] = index_of(rest, method, R)[2].index
    return report, (emb, surface, envelope)


def write_landscape(out: Path, samples: SampleSet, emb, surface, envelope, bands: int) -> None:
    write_embedding(samples, emb.coords, surface.normalized, out / "embedding.csv")
    write_json(_surface_json(surface), out / "surface.json")
    write_json(_hull_json(envelope), out / "hull.json")
    markers = markers_for(samples, emb.coords)
    write_surface_svg(surface, envelope, out / "surface.svg", markers, bands)
    write_contour_svg(surface, out / "contour.svg", markers, bands)


def run_experiment(config: ExperimentConfig, out_dir=None) -> dict:
    """Run the whole pipeline and write every artifact to ``out_dir``.

    Wall-clock times go to ``timings.json`` so that ``report.json`` is
    byte-identical across repeated runs.
    """
    out = Path(out_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings: dict[str, float] = {}
    report = {"config": config.to_dict(), "config_hash": config.hash(), "version": __version__,
              "status": "running", "completed_stages": []}
    report["config"].pop("output_dir")
    report["config"]["sampling"].pop("workers")
    stage = "sampling"
    try:
        t = time.perf_counter()
        problem = Problem(config.problem)
        samples, groups = run_sampling(problem, config.sampling)
        write_samples(samples, out / "samples.csv")
        timings["sampling"] = time.perf_counter() - t
        report["completed_stages"].append(stage)
        if samples.aborted_groups:
            report["partial"] = True
            logger.warning("aborted groups: %s", samples.aborted_groups)

        stage = "landscape"
        t = time.perf_counter()
        body, (emb, surface, envelope) = landscape_report(samples, config.embedding, config.hull_resolution)
        report.update(body)
        timings["landscape"] = time.perf_counter() - t
        report["completed_stages"].append(stage)

        stage = "output"
        t = time.perf_counter()
        write_landscape(out, samples, emb, surface, envelope, config.bands)
        timings["output"] = time.perf_counter() - t
        report["completed_stages"].append(stage)
        report["status"] = "ok"
    except Exception as exc:
        report["status"] = "failed"
        report["failed_stage"] = stage
        report["error"] = f"{type(exc).__name__}: {exc}"
        report["partial"] = True
        write_json(report, out / "report.json")
        write_json(timings, out / "timings.json")
        raise PipelineError(stage, exc) from exc
    write_json(report, out / "report.json")
    write_json(timings, out / "timings.json")
    return report


def analyze_samples(samples: SampleSet, out_dir, method: str = "cosineMds", R: int = 20, bands: int = 10) -> dict:
    """Index-only pipeline on an existing sample set."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report, (emb, surface, envelope) = landscape_report(samples, method, R)
    report["status"] = "ok"
    write_landscape(out, samples, emb, surface, envelope, bands)
    write_json(report, out / "report.json")
    return report
