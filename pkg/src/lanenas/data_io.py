"""On-disk formats and wire schemas.

Everything is JSON or JSON-lines with an explicit "version" field; CSV
appears only in the final front export. Coordinates are floating-point
pixels in image space.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass

from .arch_space import (
    ArchEncoding,
    FusionLayer,
    FusionSpec,
    parse_backbone,
    serialize_backbone,
)
from .errors import FormatError, SchemaError, VersionError
from .lane_model import AnchorLayout, GridCell, HeadGrid, LaneProposalSet
from .point_blend import BlendParams, BlendParamSet

FORMAT_VERSION = 1


@dataclass(frozen=True)
class SceneRecord:
    image_id: str
    image_size: tuple[int, int]
    gt_lanes: tuple  # tuple of polylines, each a tuple of (x, y)


# ---------------------------------------------------------------------------
# CULane-style lane annotation files: one lane per line, alternating x y

def read_culane_lines(path):
    """Parse one .lines.txt file into a list of polylines.

    Points with negative x (the dataset's missing-point convention) are
    dropped; each lane's points are sorted by y.
    """
    lanes = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            toks = line.split()
            if not toks:
                continue
            if len(toks) % 2 != 0:
                raise FormatError(line_no, toks[-1], "odd token count")
            pts = []
            for k in range(0, len(toks), 2):
                try:
                    x, y = float(toks[k]), float(toks[k + 1])
                except ValueError as exc:
                    bad = toks[k] if _not_float(toks[k]) else toks[k + 1]
                    raise FormatError(line_no, bad, "not a number") from exc
                if x < 0:
                    continue
                pts.append((x, y))
            pts.sort(key=lambda p: p[1])
            lanes.append(tuple(pts))
    return lanes


def _not_float(tok):
    try:
        float(tok)
        return False
    except ValueError:
        return True


def write_culane_lines(path, lanes):
    with open(path, "w") as fh:
        for lane in lanes:
            fh.write(" ".join(f"{x:.4f} {y:.4f}" for x, y in lane) + "\n")


# ---------------------------------------------------------------------------
# fusion / blend / arch JSON

def fusion_to_json(spec: FusionSpec) -> dict:
    return {
        "layers": [
            {"input_a": l.input_a, "input_b": l.input_b, "output_level": l.output_level}
            for l in spec.layers
        ],
        "channels": spec.channels,
        "heads_at": sorted(spec.heads_at),
    }


def fusion_from_json(doc: dict) -> FusionSpec:
    try:
        layers = tuple(
            FusionLayer(l["input_a"], l["input_b"], l["output_level"])
            for l in doc["layers"]
        )
        return FusionSpec(
            layers=layers,
            channels=doc.get("channels", 128),
            heads_at=frozenset(doc["heads_at"]),
        )
    except KeyError as exc:
        raise SchemaError(f"fusion.{exc.args[0]}", "missing field") from exc


def blend_to_json(params: BlendParamSet) -> dict:
    return {
        "per_level": {
            str(lvl): {
                "alpha1": p.alpha1,
                "beta1": p.beta1,
                "alpha2": p.alpha2,
                "center": list(p.center),
            }
            for lvl, p in sorted(params.per_level.items())
        },
        "score_threshold": params.score_threshold,
        "group_distance": params.group_distance,
        "locality_sigma": "inf" if math.isinf(params.locality_sigma) else params.locality_sigma,
    }


def blend_from_json(doc: dict) -> BlendParamSet:
    try:
        per_level = {
            int(lvl): BlendParams(
                alpha1=p["alpha1"],
                beta1=p["beta1"],
                alpha2=p["alpha2"],
                center=tuple(p["center"]),
            )
            for lvl, p in doc["per_level"].items()
        }
        sigma = doc["locality_sigma"]
        return BlendParamSet(
            per_level=per_level,
            score_threshold=doc["score_threshold"],
            group_distance=doc["group_distance"],
            locality_sigma=math.inf if sigma == "inf" else float(sigma),
        )
    except KeyError as exc:
        raise SchemaError(f"blend.{exc.args[0]}", "missing field") from exc


def arch_to_json(arch: ArchEncoding) -> dict:
    doc = {
        "version": FORMAT_VERSION,
        "backbone": serialize_backbone(arch.backbone),
        "fusion": fusion_to_json(arch.fusion),
    }
    if arch.blend is not None:
        doc["blend"] = blend_to_json(arch.blend)
    return doc


def arch_from_json(doc: dict) -> ArchEncoding:
    try:
        backbone = parse_backbone(doc["backbone"])
        fusion = fusion_from_json(doc["fusion"])
    except KeyError as exc:
        raise SchemaError(exc.args[0], "missing field") from exc
    blend = blend_from_json(doc["blend"]) if "blend" in doc else None
    return ArchEncoding(backbone=backbone, fusion=fusion, blend=blend)


# ---------------------------------------------------------------------------
# proposal dumps: JSON-lines, one scene per line

def _cell_to_json(c: GridCell) -> dict:
    return {
        "cx": c.center[0],
        "cy": c.center[1],
        "score": c.score,
        "offsets": [o for o in c.offsets],
        "end_y": c.end_y,
    }


def _cell_from_json(doc, path):
    for key in ("cx", "cy", "score", "offsets", "end_y"):
        if key not in doc:
            raise SchemaError(f"{path}.{key}", "missing field")
    return GridCell(
        center=(doc["cx"], doc["cy"]),
        score=doc["score"],
        offsets=tuple(doc["offsets"]),
        end_y=doc["end_y"],
    )


def proposals_to_json(image_id, proposals: LaneProposalSet) -> dict:
    return {
        "version": FORMAT_VERSION,
        "image_id": image_id,
        "layout": {
            "image_size": list(proposals.layout.image_size),
            "rows": list(proposals.layout.rows),
        },
        "heads": [
            {
                "level": h.level,
                "grid_w": h.grid_w,
                "grid_h": h.grid_h,
                "cells": [_cell_to_json(c) for c in h.cells],
            }
            for h in proposals.heads
        ],
    }


def proposals_from_json(doc: dict):
    if doc.get("version", FORMAT_VERSION) != FORMAT_VERSION:
        raise VersionError(f"unsupported proposals version {doc.get('version')}")
    try:
        layout = AnchorLayout(
            image_size=tuple(doc["layout"]["image_size"]),
            rows=tuple(doc["layout"]["rows"]),
        )
    except KeyError as exc:
        raise SchemaError(f"layout.{exc.args[0]}", "missing field") from exc
    heads = []
    for hi, h in enumerate(doc.get("heads", [])):
        for key in ("level", "grid_w", "grid_h", "cells"):
            if key not in h:
                raise SchemaError(f"heads[{hi}].{key}", "missing field")
        cells = tuple(
            _cell_from_json(c, f"heads[{hi}].cells[{ci}]")
            for ci, c in enumerate(h["cells"])
        )
        heads.append(
            HeadGrid(level=h["level"], grid_w=h["grid_w"], grid_h=h["grid_h"], cells=cells)
        )
    return doc.get("image_id", ""), LaneProposalSet(layout=layout, heads=tuple(heads))


def write_proposals(path, scenes):
    """scenes: iterable of (image_id, LaneProposalSet)."""
    with open(path, "w") as fh:
        for image_id, proposals in scenes:
            fh.write(json.dumps(proposals_to_json(image_id, proposals)) + "\n")


def read_proposals(path):
    """Stream (image_id, LaneProposalSet) pairs without loading the file."""
    with open(path) as fh:
        for line in fh:
            if line.strip():
                yield proposals_from_json(json.loads(line))


# ---------------------------------------------------------------------------
# evaluator wire protocol: newline-delimited JSON over child stdio

def eval_request_to_json(eval_id, arch: ArchEncoding, resolution) -> dict:
    return {
        "version": FORMAT_VERSION,
        "eval_id": eval_id,
        "arch": arch_to_json(arch),
        "resolution": list(resolution),
    }


def eval_response_from_json(doc: dict, expect_eval_id=None):
    """Validated (eval_id, score, diagnostics)."""
    if "eval_id" not in doc or "score" not in doc:
        missing = "eval_id" if "eval_id" not in doc else "score"
        raise SchemaError(missing, "missing field")
    score = doc["score"]
    if not isinstance(score, (int, float)) or not 0.0 <= score <= 1.0:
        raise SchemaError("score", f"{score!r} not a number in [0, 1]")
    if expect_eval_id is not None and doc["eval_id"] != expect_eval_id:
        raise SchemaError("eval_id", f"expected {expect_eval_id}, got {doc['eval_id']}")
    return doc["eval_id"], float(score), doc.get("diagnostics")


# ---------------------------------------------------------------------------
# archive snapshots

def _atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".snapshot-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def candidate_to_json(cand) -> dict:
    return {
        "eval_id": cand.eval_id,
        "arch": arch_to_json(cand.arch),
        "flops": cand.flops,
        "score": cand.score,
        "parent": cand.parent,
        "birth_step": cand.birth_step,
    }


def candidate_from_json(doc: dict):
    from .search_engine import Candidate

    for key in ("eval_id", "arch", "flops", "score"):
        if key not in doc:
            eid = doc.get("eval_id", "<unknown>")
            raise SchemaError(f"candidate[{eid}].{key}", "missing field")
    return Candidate(
        arch=arch_from_json(doc["arch"]),
        flops=doc["flops"],
        score=doc["score"],
        eval_id=doc["eval_id"],
        parent=doc.get("parent"),
        birth_step=doc.get("birth_step", 0),
    )


def snapshot_archive(archive, path):
    doc = {
        "version": FORMAT_VERSION,
        "members": [candidate_to_json(c) for c in archive.members],
        "history": [candidate_to_json(c) for c in archive.history],
    }
    _atomic_write(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_archive(path):
    from .search_engine import ParetoArchive

    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("version") != FORMAT_VERSION:
        raise VersionError(f"unsupported archive version {doc.get('version')}")
    archive = ParetoArchive()
    for entry in doc.get("history", []):
        cand = candidate_from_json(entry)
        archive.record(cand)
        if cand.score is not None:
            archive.insert(cand, record=False)
    return archive


def export_front_csv(archive, path):
    """Final front export: eval_id, encoding, flops, score."""
    rows = sorted(archive.members, key=lambda c: c.flops)
    with open(path, "w") as fh:
        fh.write("eval_id,encoding,flops,score\n")
        for c in rows:
            fh.write(
                f"{c.eval_id},{serialize_backbone(c.arch.backbone)},{c.flops},{c.score}\n"
            )
