"""Synthetic scene generator.

Builds (proposals, ground truth) pairs with the exact failure mode the
point blender targets: the high-confidence cell near the bottom of each
lane predicts accurate nearby offsets but corrupted remote ones, while
low-confidence cells centered along the upper lane carry accurate local
offsets. With remote-noise sigma 0 the proposals are exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data_io import SceneRecord
from .lane_model import AnchorLayout, GridCell, HeadGrid, LaneProposalSet


@dataclass(frozen=True)
class SynthSceneConfig:
    num_scenes: int = 50
    curvature_range: tuple[float, float] = (1e-4, 4e-4)  # 1/px
    remote_noise_sigma: float = 20.0                     # px
    lanes_per_scene: int = 2
    seed: int = 0
    image_size: tuple[int, int] = (512, 288)
    anchor_rows: int = 72
    high_score: float = 0.9
    low_score: float = 0.5
    low_cells_per_lane: int = 2

    def __post_init__(self):
        if self.num_scenes <= 0 or self.lanes_per_scene <= 0:
            raise ValueError("num_scenes and lanes_per_scene must be positive")
        if self.remote_noise_sigma < 0:
            raise ValueError("remote_noise_sigma must be non-negative")


def _lane_curve(rng, cfg, slot):
    w, h = cfg.image_size
    x0 = w * (slot + 1) / (cfg.lanes_per_scene + 1) + rng.uniform(-15, 15)
    slope = rng.uniform(-0.25, 0.25)
    lo, hi = cfg.curvature_range
    curv = rng.uniform(lo, hi) * (1 if rng.random() < 0.5 else -1)
    y_bottom = h - 1

    def x_at(y):
        dy = y_bottom - y
        return x0 + slope * dy + curv * dy * dy

    return x_at


def _corruption(rng, cfg):
    """Remote offset error: zero below mid-height, ramping linearly to a
    scene-scaled amplitude at the top."""
    _, h = cfg.image_size
    sigma = cfg.remote_noise_sigma
    amp = sigma * (5.0 + abs(rng.normal())) * (1 if rng.random() < 0.5 else -1)
    y_cut = h * 0.5

    def err_at(y):
        if sigma == 0.0 or y >= y_cut:
            return 0.0
        return amp * (y_cut - y) / y_cut

    return err_at


def generate_scene(rng, cfg: SynthSceneConfig, scene_idx: int):
    """One (LaneProposalSet, SceneRecord) pair."""
    w, h = cfg.image_size
    layout = AnchorLayout.uniform(cfg.image_size, cfg.anchor_rows)
    gt_lanes = []
    high_cells = []
    low_cells = []
    for slot in range(cfg.lanes_per_scene):
        x_at = _lane_curve(rng, cfg, slot)
        err_at = _corruption(rng, cfg)
        gt_lanes.append(tuple((x_at(y), y) for y in layout.rows))

        # bottom anchor cell: accurate locally, corrupted at remote rows
        cy = h * 0.8
        cx = x_at(cy)
        high_cells.append(
            GridCell(
                center=(cx, cy),
                score=cfg.high_score,
                offsets=tuple(x_at(y) + err_at(y) - cx for y in layout.rows),
                end_y=0.0,
            )
        )

        # upper-lane cells: lower confidence, accurate everywhere local
        for k in range(cfg.low_cells_per_lane):
            lcy = h * (0.12 + 0.22 * k)
            lcx = x_at(lcy)
            low_cells.append(
                GridCell(
                    center=(lcx, lcy),
                    score=cfg.low_score + 0.05 * rng.random(),
                    offsets=tuple(x_at(y) - lcx for y in layout.rows),
                    end_y=0.0,
                )
            )

    heads = (
        HeadGrid(level=1, grid_w=len(low_cells), grid_h=1, cells=tuple(low_cells)),
        HeadGrid(level=2, grid_w=len(high_cells), grid_h=1, cells=tuple(high_cells)),
    )
    proposals = LaneProposalSet(layout=layout, heads=heads)
    record = SceneRecord(
        image_id=f"synth_{scene_idx:05d}",
        image_size=cfg.image_size,
        gt_lanes=tuple(gt_lanes),
    )
    return proposals, record


def generate_synthetic_scenes(cfg: SynthSceneConfig):
    """Deterministic corpus: the seed fixes every scene exactly."""
    rng = np.random.default_rng(cfg.seed)
    return [generate_scene(rng, cfg, i) for i in range(cfg.num_scenes)]
