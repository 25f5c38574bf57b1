"""Attack execution with file artifacts.

This layer sits between the optimizer and the CLI/service front ends: it
builds oracles from declarative specs, runs attacks, and writes the artifact
set (CSV files, PNG renders, the raw perturbation array, and a JSON report)
into an output directory.  Front ends only shuttle bytes in and out.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import ImageTensor, Individual, effective_perturbation
from .imagefiles import parse_pgm, png_from_bytes, write_png
from .mask import AttentionMask, MaskShapeError, binarize_map, full_mask, scatter
from .optimize import OracleRunFailure, RunConfig, RunResult, run_attack
from .oracle import (
    Oracle,
    OracleError,
    RecordingOracle,
    ReplayOracle,
    SubprocessOracle,
    parse_toy_weights,
)
from .problem import AttackInstance, apply_perturbation

STATUS_SUCCESS = "success"
STATUS_NO_AE = "no_adversarial"
STATUS_ORACLE_FAILURE = "oracle_failure"

ALPHA_SWEEP = (0.2, 0.6, 1.0)


@dataclass
class OracleSpec:
    """Declarative oracle description; contents, not paths, so it can travel
    over the wire."""

    kind: str  # "toy" | "cmd" | "replay"
    weights_text: Optional[str] = None
    command: Optional[str] = None
    replay_text: Optional[str] = None
    class_count: Optional[int] = None

    def build(self, shape: tuple[int, int, int]) -> Oracle:
        if self.kind == "toy":
            if not self.weights_text:
                raise ValueError("toy oracle needs weight file contents")
            return parse_toy_weights(self.weights_text, shape)
        if self.kind == "cmd":
            if not self.command:
                raise ValueError("cmd oracle needs a command line")
            return SubprocessOracle(self.command, shape, class_count=self.class_count)
        if self.kind == "replay":
            if not self.replay_text:
                raise ValueError("replay oracle needs recorded contents")
            return ReplayOracle(self.replay_text, shape)
        raise ValueError(f"unknown oracle kind {self.kind!r}")


@dataclass
class AttackOutcome:
    status: str
    report: dict
    out_dir: Path

    @property
    def success(self) -> bool:
        return self.status == STATUS_SUCCESS


def resolve_mask(
    mask_pgm: Optional[bytes], image: ImageTensor, threshold: float
) -> tuple[AttentionMask, str]:
    if mask_pgm is None:
        return full_mask(*image.shape), "full"
    gray = parse_pgm(mask_pgm)
    h, w, c = image.shape
    if gray.shape != (h, w):
        raise MaskShapeError(
            f"mask is {gray.shape[1]}x{gray.shape[0]} but image is {w}x{h}"
        )
    cut = threshold * float(gray.max())
    replicated = np.repeat(gray.astype(np.float64)[:, :, None], c, axis=2)
    return binarize_map(replicated, cut), "file"


def run_attack_to_dir(
    image: ImageTensor,
    mask_pgm: Optional[bytes],
    label: int,
    oracle_spec: OracleSpec,
    config: RunConfig,
    out_dir: Path,
    threshold: float = 0.2,
    record_queries: bool = False,
) -> AttackOutcome:
    """Run one attack and write the artifact set into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mask, mask_source = resolve_mask(mask_pgm, image, threshold)

    oracle = oracle_spec.build(image.shape)
    if record_queries:
        oracle = RecordingOracle(oracle, out_dir / "queries.jsonl")

    started = time.perf_counter()
    status = STATUS_SUCCESS
    error = None
    result: Optional[RunResult] = None
    clean_probs: Optional[np.ndarray] = None
    try:
        instance = AttackInstance(image=image, mask=mask, true_label=label, oracle=oracle)
        try:
            # One benchmark query for the report, outside the run's accounting.
            clean_probs = oracle.classify(image)
            result = run_attack(instance, config)
            status = STATUS_SUCCESS if result.success else STATUS_NO_AE
        except OracleRunFailure as failure:
            result = failure.partial
            status = STATUS_ORACLE_FAILURE
            error = str(failure)
        except OracleError as exc:
            status = STATUS_ORACLE_FAILURE
            error = str(exc)
    finally:
        oracle.close()
    wall = time.perf_counter() - started

    report = _build_report(
        image, mask, mask_source, label, clean_probs, config, result, status, error, wall
    )
    _write_artifacts(out_dir, image, instance, result, report)
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return AttackOutcome(status=status, report=report, out_dir=out_dir)


def _individual_entry(ind: Individual) -> dict:
    m = ind.metrics
    return {
        "predicted_label": m.predicted_label,
        "predicted_confidence": float(ind.probs[m.predicted_label]),
        "true_label_confidence": ind.objectives.confidence,
        "l0": m.l0,
        "l1": m.l1,
        "l2": m.l2,
        "provenance": ind.provenance,
    }


def _build_report(
    image: ImageTensor,
    mask: AttentionMask,
    mask_source: str,
    label: int,
    clean_probs: Optional[np.ndarray],
    config: RunConfig,
    result: Optional[RunResult],
    status: str,
    error: Optional[str],
    wall: float,
) -> dict:
    clean = None
    if clean_probs is not None:
        clean_label = int(np.argmax(clean_probs))
        clean = {
            "label": clean_label,
            "confidence": float(clean_probs[clean_label]),
            "true_label_confidence": float(clean_probs[label]),
            "correct": clean_label == label,
        }
    report = {
        "image": {"height": image.height, "width": image.width, "channels": image.channels},
        "mask": {
            "d": mask.d,
            "source": mask_source,
            "coverage": mask.d / image.pixels.size,
        },
        "true_label": label,
        "clean": clean,
        "config": dataclasses.asdict(config),
        "status": status,
        "success": status == STATUS_SUCCESS,
        "error": error,
        "wall_time_s": wall,
    }
    if result is not None:
        report["queries"] = {
            "offspring": result.queries_offspring,
            "total": result.queries_total,
            "clean_check": 1,
            "first_success": result.first_success_query,
        }
        report["generations_completed"] = result.generations_completed
        report["final_ae"] = (
            _individual_entry(result.final_ae) if result.final_ae else None
        )
        report["front_size"] = len(result.front_indices)
    return report


def _write_artifacts(
    out_dir: Path,
    image: ImageTensor,
    instance: AttackInstance,
    result: Optional[RunResult],
    report: dict,
) -> None:
    if result is None:
        return
    _write_front_csv(out_dir / "pareto_front.csv", result)
    _write_history_csv(out_dir / "history.csv", result)
    rendered = _pick_rendered(result)
    if rendered is not None:
        adversarial = apply_perturbation(instance, rendered.solution)
        write_png(adversarial, out_dir / "adversarial.png")
        x_full = scatter(effective_perturbation(rendered.solution), instance.mask)
        np.save(out_dir / "perturbation.npy", x_full)
        write_png(render_perturbation(x_full), out_dir / "perturbation.png")
        report["rendered_individual"] = (
            "final_ae" if result.final_ae is not None else "best_confidence"
        )


def _pick_rendered(result: RunResult) -> Optional[Individual]:
    """The final AE when one exists, otherwise the closest-to-flipping front
    member (lowest true-class confidence) so the artifact set stays complete."""
    if result.final_ae is not None:
        return result.final_ae
    if not result.front_indices:
        return None
    return min(
        (result.population[i] for i in result.front_indices),
        key=lambda ind: ind.objectives.confidence,
    )


def _write_front_csv(path: Path, result: RunResult) -> None:
    lines = ["f1,f2,l0,l1,misclassified"]
    for ind in result.front:
        m = ind.metrics
        lines.append(
            f"{ind.objectives.confidence!r},{ind.objectives.distortion!r},"
            f"{m.l0},{m.l1!r},{int(m.misclassified)}"
        )
    path.write_text("\n".join(lines) + "\n")


def _write_history_csv(path: Path, result: RunResult) -> None:
    lines = ["generation,best_f1,best_f2_misclassified,queries_total"]
    for rec in result.history:
        miss = "" if rec.best_distortion_miss is None else repr(rec.best_distortion_miss)
        lines.append(f"{rec.generation},{rec.best_confidence!r},{miss},{rec.queries_total}")
    path.write_text("\n".join(lines) + "\n")


def render_perturbation(x_full: np.ndarray) -> ImageTensor:
    """Gray-background rendering: 128 is 'untouched', brighter means positive
    change, darker negative, autoscaled to the largest magnitude."""
    peak = float(np.abs(x_full).max())
    if peak == 0.0:
        return ImageTensor(np.full(x_full.shape, 128, dtype=np.uint8))
    scale = 127.0 / peak
    coded = 128 + np.clip(np.rint(x_full * scale), -127, 127)
    return ImageTensor(coded.astype(np.uint8))


# --- ablation sweeps ---------------------------------------------------------


def run_ablation(
    image: ImageTensor,
    mask_pgm: Optional[bytes],
    label: int,
    oracle_spec: OracleSpec,
    config: RunConfig,
    sweep: str,
    seeds: list[int],
    out_dir: Path,
    threshold: float = 0.2,
) -> dict:
    """Run the requested sweep matrix with common seeds and emit a combined
    summary CSV plus per-cell artifact directories."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = _sweep_cells(sweep, mask_pgm, config)

    rows = []
    front_rows = []
    for cell_name, cell_mask, cell_config in cells:
        for seed in seeds:
            cfg = dataclasses.replace(cell_config, seed=seed)
            cell_dir = out_dir / cell_name / f"seed_{seed}"
            outcome = run_attack_to_dir(
                image, cell_mask, label, oracle_spec, cfg, cell_dir, threshold
            )
            rows.append(_sweep_row(sweep, cell_name, seed, outcome))
            front_rows.extend(_front_rows(cell_name, seed, cell_dir))
    _write_sweep_csv(out_dir / "sweep.csv", rows)
    _write_combined_fronts(out_dir / "fronts.csv", front_rows)
    summary = {"sweep": sweep, "cells": [c[0] for c in cells], "seeds": seeds, "rows": rows}
    (out_dir / "ablation.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def _sweep_cells(sweep, mask_pgm, config):
    if sweep == "attention":
        if mask_pgm is None:
            raise ValueError("attention sweep needs a mask file to compare against")
        return [("masked", mask_pgm, config), ("unmasked", None, config)]
    if sweep == "alpha":
        return [
            (f"alpha_{a}", mask_pgm, dataclasses.replace(config, alpha=a))
            for a in ALPHA_SWEEP
        ]
    if sweep == "optimizer":
        return [
            (name, mask_pgm, dataclasses.replace(config, optimizer=name))
            for name in ("nsga2", "psl")
        ]
    raise ValueError(f"unknown sweep {sweep!r}")


def _sweep_row(sweep, cell, seed, outcome: AttackOutcome) -> dict:
    report = outcome.report
    ae = report.get("final_ae") or {}
    queries = report.get("queries") or {}
    return {
        "sweep": sweep,
        "cell": cell,
        "seed": seed,
        "status": outcome.status,
        "success": int(outcome.success),
        "d": report["mask"]["d"],
        "l0": ae.get("l0"),
        "l1": ae.get("l1"),
        "l2": ae.get("l2"),
        "queries_offspring": queries.get("offspring"),
        "queries_total": queries.get("total"),
        "first_success_query": queries.get("first_success"),
    }


_SWEEP_COLUMNS = [
    "sweep", "cell", "seed", "status", "success", "d",
    "l0", "l1", "l2", "queries_offspring", "queries_total", "first_success_query",
]


def _write_sweep_csv(path: Path, rows: list[dict]) -> None:
    lines = [",".join(_SWEEP_COLUMNS)]
    for row in rows:
        lines.append(
            ",".join("" if row[c] is None else str(row[c]) for c in _SWEEP_COLUMNS)
        )
    path.write_text("\n".join(lines) + "\n")


def _front_rows(cell, seed, cell_dir: Path) -> list[str]:
    front = (cell_dir / "pareto_front.csv").read_text().splitlines()[1:]
    return [f"{cell},{seed},{line}" for line in front]


def _write_combined_fronts(path: Path, rows: list[str]) -> None:
    path.write_text("\n".join(["cell,seed,f1,f2,l0,l1,misclassified"] + rows) + "\n")


# --- batch -------------------------------------------------------------------


@dataclass
class BatchRow:
    name: str
    image_png: bytes
    mask_pgm: Optional[bytes]
    label: int


def run_batch(
    rows: list[BatchRow],
    oracle_spec: OracleSpec,
    config: RunConfig,
    out_dir: Path,
    threshold: float = 0.2,
) -> dict:
    """Attack every manifest row; per-row failures are recorded and the batch
    continues."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    row_reports = []
    for i, row in enumerate(rows):
        row_dir = out_dir / f"row_{i:03d}_{row.name}"
        entry = {"row": i, "name": row.name, "label": row.label}
        try:
            image = png_from_bytes(row.image_png)
            outcome = run_attack_to_dir(
                image, row.mask_pgm, row.label, oracle_spec, config, row_dir, threshold
            )
            entry["status"] = outcome.status
            entry["report"] = outcome.report
        except Exception as exc:  # noqa: BLE001 — per-row isolation is the contract
            entry["status"] = "error"
            entry["error"] = str(exc)
        row_reports.append(entry)

    aggregate = _aggregate(row_reports)
    report = {"rows": row_reports, "aggregate": aggregate}
    (out_dir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_batch_csv(out_dir / "report.csv", row_reports)
    return report


def _aggregate(row_reports: list[dict]) -> dict:
    n = len(row_reports)
    attacked = [r for r in row_reports if r["status"] in (STATUS_SUCCESS, STATUS_NO_AE)]
    failures = n - len(attacked)
    still_correct = 0
    l2_values = []
    query_totals = []
    query_offspring = []
    for r in attacked:
        rep = r["report"]
        if r["status"] == STATUS_SUCCESS:
            l2_values.append(rep["final_ae"]["l2"])
        else:
            # no AE: the image the victim sees is the clean one
            if rep["clean"]["correct"]:
                still_correct += 1
        queries = rep.get("queries") or {}
        if queries:
            query_totals.append(queries["total"])
            query_offspring.append(queries["offspring"])
    return {
        "images": n,
        "attacked": len(attacked),
        "failures": failures,
        "post_attack_accuracy": (still_correct / len(attacked)) if attacked else 0.0,
        "mean_l2_success": (sum(l2_values) / len(l2_values)) if l2_values else None,
        "mean_queries_total": (sum(query_totals) / len(query_totals)) if query_totals else None,
        "mean_queries_offspring": (
            sum(query_offspring) / len(query_offspring) if query_offspring else None
        ),
        "successes": len(l2_values),
    }


_BATCH_COLUMNS = [
    "row", "name", "label", "status", "success",
    "clean_label", "clean_confidence", "adv_label", "adv_confidence",
    "l0", "l1", "l2", "queries_offspring", "queries_total", "wall_time_s",
]


def _write_batch_csv(path: Path, row_reports: list[dict]) -> None:
    lines = [",".join(_BATCH_COLUMNS)]
    for r in row_reports:
        rep = r.get("report") or {}
        ae = rep.get("final_ae") or {}
        clean = rep.get("clean") or {}
        queries = rep.get("queries") or {}
        values = {
            "row": r["row"],
            "name": r["name"],
            "label": r["label"],
            "status": r["status"],
            "success": int(r["status"] == STATUS_SUCCESS),
            "clean_label": clean.get("label"),
            "clean_confidence": clean.get("confidence"),
            "adv_label": ae.get("predicted_label"),
            "adv_confidence": ae.get("predicted_confidence"),
            "l0": ae.get("l0"),
            "l1": ae.get("l1"),
            "l2": ae.get("l2"),
            "queries_offspring": queries.get("offspring"),
            "queries_total": queries.get("total"),
            "wall_time_s": rep.get("wall_time_s"),
        }
        lines.append(
            ",".join("" if values[c] is None else str(values[c]) for c in _BATCH_COLUMNS)
        )
    path.write_text("\n".join(lines) + "\n")
