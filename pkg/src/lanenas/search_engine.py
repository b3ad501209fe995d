"""Multi-objective evolutionary search over (FLOPS, score).

A Pareto archive of mutually non-dominated candidates is grown by
mutating uniformly-selected front members; evaluation is delegated to a
pluggable evaluator (builtin synthetic, proposal replay, or an external
process speaking newline-delimited JSON).
"""

from __future__ import annotations

import json
import math
import shlex
import subprocess
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, replace

import numpy as np

from . import data_io, point_blend
from .arch_space import (
    ArchEncoding,
    SpaceConfig,
    mutate_backbone,
    mutate_fusion,
    random_backbone,
    random_fusion,
)
from .cost_model import DEFAULT_RESOLUTION, candidate_cost
from .errors import (
    DuplicateError,
    EmptyArchiveError,
    EmptyDatasetError,
    EvaluatorError,
    ProtocolError,
    SpawnError,
)
from .metrics import match_and_score
from .point_blend import BlendParamSet, BlendParamSpace, postprocess


@dataclass(frozen=True)
class Candidate:
    arch: ArchEncoding
    flops: int
    score: float | None
    eval_id: str
    parent: str | None = None
    birth_step: int = 0


def dominates(a: Candidate, b: Candidate) -> bool:
    """a is no worse on both objectives and strictly better on one."""
    return (
        a.flops <= b.flops
        and a.score >= b.score
        and (a.flops < b.flops or a.score > b.score)
    )


class ParetoArchive:
    """Non-dominated (FLOPS, score) set plus an append-only history."""

    def __init__(self):
        self.members: list[Candidate] = []
        self.history: list[Candidate] = []
        self._ids: set[str] = set()

    def record(self, cand: Candidate):
        if cand.eval_id in self._ids:
            raise DuplicateError(cand.eval_id)
        self._ids.add(cand.eval_id)
        self.history.append(cand)

    def insert(self, cand: Candidate, record=True):
        """Add an evaluated candidate; failed evaluations (score None)
        are logged in history only."""
        if record:
            self.record(cand)
        if cand.score is None:
            return
        if any(dominates(m, cand) for m in self.members):
            return
        self.members = [m for m in self.members if not dominates(cand, m)]
        self.members.append(cand)

    def select_parent(self, rng) -> Candidate:
        """Uniform draw over current front members."""
        if not self.members:
            raise EmptyArchiveError("archive has no evaluated members")
        return self.members[int(rng.integers(len(self.members)))]

    def hypervolume(self, ref_flops, ref_score=0.0):
        """2-D hypervolume against a (flops upper, score lower) reference."""
        pts = sorted((m.flops, m.score) for m in self.members)
        hv, prev_score = 0.0, ref_score
        for f, s in pts:
            if f >= ref_flops or s <= prev_score:
                continue
            hv += (ref_flops - f) * (s - prev_score)
            prev_score = s
        return hv


# ---------------------------------------------------------------------------
# evaluators

class SyntheticEvaluator:
    """Deterministic closed-form stand-in for a trained-model evaluation.

    The score rewards depth, accumulated downsampling (receptive field),
    an early head placement (spatial resolution) and log parameter count,
    each normalized to [0, 1]. Adding a block always strictly increases
    the score while strictly increasing cost, so the space has a genuine
    accuracy/FLOPS trade-off with an enumerable true front.
    """

    is_deterministic = True
    cost_class = "Cheap"

    def __init__(self, resolution=DEFAULT_RESOLUTION):
        self.resolution = resolution

    def evaluate(self, arch: ArchEncoding) -> float:
        bb = arch.backbone
        depth = (bb.num_blocks - 10) / 35.0
        rf = sum(
            sum(1 for d in bb.downsample_at if d <= b)
            for b in range(1, bb.num_blocks + 1)
        ) / (3.0 * 45.0)
        min_head = min(arch.fusion.heads_at)
        res = (4 - min_head) / 3.0
        params = candidate_cost(arch, self.resolution).total_params
        cap = (math.log10(params) - 5.0) / 3.5
        score = (
            0.35 * depth
            + 0.25 * min(max(rf, 0.0), 1.0)
            + 0.15 * min(max(res, 0.0), 1.0)
            + 0.25 * min(max(cap, 0.0), 1.0)
        )
        return min(max(score, 0.0), 1.0)


class ExternalEvaluator:
    """Runs a child process per evaluation: request JSON on stdin, one
    response JSON line on stdout."""

    is_deterministic = False
    cost_class = "Expensive"

    def __init__(self, command, timeout=3600.0, resolution=DEFAULT_RESOLUTION):
        self.argv = shlex.split(command)
        self.timeout = timeout
        self.resolution = resolution
        self._counter = 0

    def evaluate(self, arch: ArchEncoding, eval_id=None) -> float:
        if eval_id is None:
            self._counter += 1
            eval_id = f"x{self._counter}"
        request = data_io.eval_request_to_json(eval_id, arch, self.resolution)
        try:
            proc = subprocess.run(
                self.argv,
                input=json.dumps(request) + "\n",
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise TimeoutError(f"evaluator exceeded {self.timeout}s") from exc
        except OSError as exc:
            raise SpawnError(f"cannot launch {self.argv[0]!r}: {exc}") from exc
        if proc.returncode != 0:
            raise ProtocolError(
                f"evaluator exited {proc.returncode}: {proc.stderr.strip()[:200]}"
            )
        line = proc.stdout.strip().splitlines()
        if not line:
            raise ProtocolError("evaluator produced no output")
        try:
            doc = json.loads(line[-1])
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"bad JSON from evaluator: {exc}") from exc
        _, score, _ = data_io.eval_response_from_json(doc, expect_eval_id=eval_id)
        return score


# ---------------------------------------------------------------------------
# outer search

@dataclass(frozen=True)
class SearchConfig:
    budget: int = 200                 # mutation evaluations after the initial population
    init_population: int = 16
    workers: int = 1
    seed: int = 0
    space: SpaceConfig = SpaceConfig()
    resolution: tuple[int, int] = DEFAULT_RESOLUTION
    # mutation-kind weights; blend applies only when genomes carry params
    p_backbone: float = 0.4
    p_fusion: float = 0.3
    p_blend: float = 0.3
    blend_space: BlendParamSpace = BlendParamSpace()
    with_blend: bool = False
    default_blend_levels: tuple[int, ...] = (1, 2)
    # pin the fusion genome (and skip fusion mutation); used when the
    # search is restricted to an enumerable backbone-only space
    fixed_fusion: object = None
    # retry mutation this many times before accepting an already-seen
    # genome (deterministic evaluators make re-evaluation a waste)
    dedup_retries: int = 16


def _random_arch(rng, cfg: SearchConfig) -> ArchEncoding:
    bb = random_backbone(rng, cfg.space)
    fusion = cfg.fixed_fusion or random_fusion(rng, bb.num_stages, cfg.space)
    blend = (
        BlendParamSet.identity(cfg.default_blend_levels)
        if cfg.with_blend
        else None
    )
    return ArchEncoding(backbone=bb, fusion=fusion, blend=blend)


def mutate_arch(arch: ArchEncoding, rng, cfg: SearchConfig) -> ArchEncoding:
    weights = [cfg.p_backbone]
    kinds = ["backbone"]
    if cfg.fixed_fusion is None:
        weights.append(cfg.p_fusion)
        kinds.append("fusion")
    if arch.blend is not None:
        weights.append(cfg.p_blend)
        kinds.append("blend")
    probs = np.array(weights) / sum(weights)
    kind = kinds[int(rng.choice(len(kinds), p=probs))]
    if kind == "backbone":
        return replace(arch, backbone=mutate_backbone(arch.backbone, rng, cfg.space))
    if kind == "fusion":
        return replace(
            arch, fusion=mutate_fusion(arch.fusion, arch.backbone.num_stages, rng)
        )
    return replace(arch, blend=point_blend.perturb(arch.blend, cfg.blend_space, rng))


def _evaluate(evaluator, arch, eval_id, flops, parent, step):
    try:
        score = evaluator.evaluate(arch)
        return Candidate(arch, flops, score, eval_id, parent, step)
    except Exception as exc:
        err = EvaluatorError(eval_id, exc)
        return Candidate(arch, flops, None, eval_id, parent, step), err


def run_search(config: SearchConfig, evaluator, on_eval=None) -> ParetoArchive:
    """Run the outer search to budget exhaustion.

    With one worker and a fixed seed the history is bit-identical across
    runs; with several workers the evaluated set may differ but every
    archive invariant holds. Failed evaluations are logged (score None)
    and skipped.
    """
    rng = np.random.default_rng(config.seed)
    archive = ParetoArchive()
    counter = 0
    seen = set()

    def genome_key(arch):
        return json.dumps(data_io.arch_to_json(arch), sort_keys=True)

    def next_child(step):
        """Mutate a front member, retrying a few times to avoid genomes
        that were already evaluated."""
        if not archive.members:
            return _random_arch(rng, config), None
        for _ in range(max(config.dedup_retries, 1)):
            parent = archive.select_parent(rng)
            child = mutate_arch(parent.arch, rng, config)
            if genome_key(child) not in seen:
                break
        return child, parent.eval_id

    def make_job(arch, parent, step):
        nonlocal counter
        eval_id = f"e{counter:06d}"
        counter += 1
        seen.add(genome_key(arch))
        flops = candidate_cost(arch, config.resolution).total_flops
        return arch, eval_id, flops, parent, step

    def finish(result):
        if isinstance(result, tuple) and isinstance(result[-1], EvaluatorError):
            cand = result[0]
        else:
            cand = result
        archive.insert(cand)
        if on_eval is not None:
            on_eval(cand, archive)
        return cand

    init = [make_job(_random_arch(rng, config), None, 0) for _ in range(config.init_population)]

    if config.workers <= 1:
        for arch, eval_id, flops, parent, step in init:
            finish(_evaluate(evaluator, arch, eval_id, flops, parent, step))
        for step in range(1, config.budget + 1):
            child, parent_id = next_child(step)
            finish(_evaluate(evaluator, *make_job(child, parent_id, step)))
        return archive

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        remaining = config.budget
        pending = {
            pool.submit(_evaluate, evaluator, *job) for job in init
        }
        while pending:
            done, pending = wait(pending, return_when=FIRST_COMPLETED)
            for fut in done:
                finish(fut.result())
                if remaining > 0:
                    remaining -= 1
                    child, parent_id = next_child(len(archive.history))
                    job = make_job(child, parent_id, len(archive.history))
                    pending.add(pool.submit(_evaluate, evaluator, *job))
    return archive


# ---------------------------------------------------------------------------
# cheap inner loop over post-processing parameters

@dataclass(frozen=True)
class InnerSearchConfig:
    budget: int = 200
    seed: int = 0
    lane_width: int = 30


def evaluate_blend_params(scenes, params: BlendParamSet, lane_width=30) -> float:
    """Aggregate F1 of postprocess(params) over frozen proposal dumps."""
    preds, gts = [], []
    for proposals, gt_lanes in scenes:
        preds.append(postprocess(proposals, params))
        gts.append(gt_lanes)
    canvas = scenes[0][0].layout.image_size
    return match_and_score(preds, gts, width=lane_width, canvas=canvas).f1


def run_blend_inner_search(
    scenes,
    space: BlendParamSpace,
    config: InnerSearchConfig,
    init_params: BlendParamSet,
) -> BlendParamSet:
    """Hill-climb with Gaussian perturbations; never returns anything
    scoring below the initial (default) parameters."""
    if not scenes:
        raise EmptyDatasetError("no proposal scenes supplied")
    rng = np.random.default_rng(config.seed)
    best = init_params
    best_score = evaluate_blend_params(scenes, best, config.lane_width)
    for _ in range(config.budget):
        cand = point_blend.perturb(best, space, rng)
        score = evaluate_blend_params(scenes, cand, config.lane_width)
        if score > best_score:
            best, best_score = cand, score
    return best
