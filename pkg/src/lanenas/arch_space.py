"""Candidate genome definition: backbone encoding grammar, fusion spec,
mutation operators and search-space cardinality.

A backbone is written as ``<KIND>_<BASE>_<N>_[d1,d2(,d3)]_[c1,c2(,c3)]``,
e.g. ``BB_64_13_[5,9]_[7,12]``: bottleneck blocks, base channel size 64,
13 blocks total, downsampling at blocks 5 and 9, channel doubling at
blocks 7 and 12.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from enum import Enum

from .errors import ConstraintError, EncodingSyntaxError, ExhaustedError

ALLOWED_BASE_CHANNELS = (48, 64, 80, 96, 128)
NUM_BLOCKS_MIN = 10
NUM_BLOCKS_MAX = 45
ALLOWED_STAGE_LIST_LENS = (2, 3)  # 3 or 4 stages

# Fixed stem: two 3x3 stride-2 convs before block 1.
STEM_FACTOR = 4

KIND_CODES = {"RB": "basic", "BB": "bottleneck"}
CODE_FOR_KIND = {v: k for k, v in KIND_CODES.items()}


class BlockKind(str, Enum):
    BASIC = "basic"
    BOTTLENECK = "bottleneck"


@dataclass(frozen=True)
class BackboneSpec:
    block_kind: BlockKind
    base_channels: int
    num_blocks: int
    downsample_at: tuple[int, ...]
    double_channels_at: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "downsample_at", tuple(self.downsample_at))
        object.__setattr__(self, "double_channels_at", tuple(self.double_channels_at))
        validate_backbone(self)

    @property
    def num_stages(self):
        return len(self.downsample_at) + 1


def validate_backbone(spec: BackboneSpec):
    if spec.base_channels not in ALLOWED_BASE_CHANNELS:
        raise ConstraintError(
            "base_channels",
            f"{spec.base_channels} not in {ALLOWED_BASE_CHANNELS}",
        )
    if not NUM_BLOCKS_MIN <= spec.num_blocks <= NUM_BLOCKS_MAX:
        raise ConstraintError(
            "num_blocks",
            f"{spec.num_blocks} outside [{NUM_BLOCKS_MIN}, {NUM_BLOCKS_MAX}]",
        )
    if len(spec.downsample_at) not in ALLOWED_STAGE_LIST_LENS:
        raise ConstraintError(
            "downsample_at", f"length {len(spec.downsample_at)} not in {{2, 3}}"
        )
    if len(spec.double_channels_at) != len(spec.downsample_at):
        raise ConstraintError(
            "double_channels_at",
            "length must equal len(downsample_at)",
        )
    for name, idxs in (
        ("downsample_at", spec.downsample_at),
        ("double_channels_at", spec.double_channels_at),
    ):
        if any(i2 <= i1 for i1, i2 in zip(idxs, idxs[1:])):
            raise ConstraintError(name, f"{list(idxs)} not strictly increasing")
        for i in idxs:
            if not 2 <= i <= spec.num_blocks:
                raise ConstraintError(
                    name, f"index {i} outside [2, {spec.num_blocks}]"
                )


@dataclass(frozen=True)
class FusionLayer:
    input_a: int
    input_b: int
    output_level: int


@dataclass(frozen=True)
class FusionSpec:
    layers: tuple[FusionLayer, ...]
    channels: int = 128
    heads_at: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "heads_at", frozenset(self.heads_at))
        if not self.heads_at:
            raise ConstraintError("heads_at", "at least one prediction head required")
        if self.channels <= 0:
            raise ConstraintError("channels", "must be positive")

    def validate_against(self, t: int):
        """Check all level indices fit the backbone's stage count t."""
        for i, layer in enumerate(self.layers):
            for fld in ("input_a", "input_b", "output_level"):
                v = getattr(layer, fld)
                if not 1 <= v <= t:
                    raise ConstraintError(
                        f"layers[{i}].{fld}", f"level {v} outside [1, {t}]"
                    )
        for lvl in self.heads_at:
            if not 1 <= lvl <= t:
                raise ConstraintError("heads_at", f"level {lvl} outside [1, {t}]")


@dataclass(frozen=True)
class ArchEncoding:
    """Complete candidate genome."""

    backbone: BackboneSpec
    fusion: FusionSpec
    blend: "object" = None  # BlendParamSet; optional for cost-only candidates

    def __post_init__(self):
        self.fusion.validate_against(self.backbone.num_stages)


_BACKBONE_RE = re.compile(
    r"^\s*([A-Z]{2})_(\d+)_(\d+)_\[([^\]]*)\]_\[([^\]]*)\]\s*$"
)


def _parse_index_list(text, name):
    items = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            raise EncodingSyntaxError(f"empty entry in {name} list")
        if not tok.lstrip("-").isdigit():
            raise EncodingSyntaxError(f"non-integer {tok!r} in {name} list")
        items.append(int(tok))
    return tuple(items)


def parse_backbone(encoding: str) -> BackboneSpec:
    """Parse a backbone encoding string into a validated BackboneSpec.

    Raises EncodingSyntaxError on malformed strings and ConstraintError
    when the syntax is fine but an invariant is violated.
    """
    m = _BACKBONE_RE.match(encoding)
    if m is None:
        raise EncodingSyntaxError(f"malformed backbone encoding: {encoding!r}")
    kind_code, base, n, down, dbl = m.groups()
    if kind_code not in KIND_CODES:
        raise EncodingSyntaxError(f"unknown block kind code {kind_code!r}")
    return BackboneSpec(
        block_kind=BlockKind(KIND_CODES[kind_code]),
        base_channels=int(base),
        num_blocks=int(n),
        downsample_at=_parse_index_list(down, "downsample"),
        double_channels_at=_parse_index_list(dbl, "double-channels"),
    )


def serialize_backbone(spec: BackboneSpec) -> str:
    """Canonical string form: no spaces inside brackets."""
    down = ",".join(str(i) for i in spec.downsample_at)
    dbl = ",".join(str(i) for i in spec.double_channels_at)
    return f"{CODE_FOR_KIND[spec.block_kind.value]}_{spec.base_channels}_{spec.num_blocks}_[{down}]_[{dbl}]"


@dataclass(frozen=True)
class StageInfo:
    """Per-block resolution/channel summary."""

    block_index: int
    downsample_factor: int
    channels: int
    is_downsample: bool
    doubles_channels: bool


def stage_layout(spec: BackboneSpec) -> list[StageInfo]:
    """Per-block downsample factor and channel count.

    Block b sits at factor STEM_FACTOR * 2^(downsamples at or before b)
    and carries base_channels * 2^(doublings at or before b) channels.
    """
    out = []
    for b in range(1, spec.num_blocks + 1):
        n_down = sum(1 for d in spec.downsample_at if d <= b)
        n_dbl = sum(1 for c in spec.double_channels_at if c <= b)
        out.append(
            StageInfo(
                block_index=b,
                downsample_factor=STEM_FACTOR * 2**n_down,
                channels=spec.base_channels * 2**n_dbl,
                is_downsample=b in spec.downsample_at,
                doubles_channels=b in spec.double_channels_at,
            )
        )
    return out


@dataclass(frozen=True)
class SpaceConfig:
    """Pins the boundaries of the searchable backbone/fusion space.

    The full paper-declared space is the default; tests shrink it to
    make exhaustive enumeration feasible.
    """

    block_kinds: tuple[BlockKind, ...] = (BlockKind.BASIC, BlockKind.BOTTLENECK)
    base_channels: tuple[int, ...] = ALLOWED_BASE_CHANNELS
    num_blocks_range: tuple[int, int] = (NUM_BLOCKS_MIN, NUM_BLOCKS_MAX)
    stage_list_lens: tuple[int, ...] = ALLOWED_STAGE_LIST_LENS
    fusion_layers: int = 2
    fusion_t: int = 4


def _index_lists(n, length):
    """All strictly increasing tuples of the given length within [2, n]."""
    import itertools

    return list(itertools.combinations(range(2, n + 1), length))


def enumerate_backbones(cfg: SpaceConfig):
    """Yield every valid BackboneSpec in the configured space."""
    lo, hi = cfg.num_blocks_range
    for kind in cfg.block_kinds:
        for base in cfg.base_channels:
            for n in range(lo, hi + 1):
                for s in cfg.stage_list_lens:
                    idx_lists = _index_lists(n, s)
                    for down in idx_lists:
                        for dbl in idx_lists:
                            yield BackboneSpec(kind, base, n, down, dbl)


@dataclass(frozen=True)
class CardinalityReport:
    backbone_count: int
    fusion_count: int
    assumptions: tuple[str, ...]


def space_cardinality(cfg: SpaceConfig = SpaceConfig()) -> CardinalityReport:
    """Exact count of valid backbone and fusion genomes under cfg.

    Counting assumptions are returned alongside the numbers because the
    intended basis of the published order-of-magnitude figures is not
    fully pinned down.
    """
    lo, hi = cfg.num_blocks_range
    backbone = 0
    for n in range(lo, hi + 1):
        per_n = 0
        for s in cfg.stage_list_lens:
            per_n += math.comb(n - 1, s) ** 2
        backbone += per_n
    backbone *= len(cfg.block_kinds) * len(cfg.base_channels)

    t, m = cfg.fusion_t, cfg.fusion_layers
    fusion = (t**3) ** m * (2**t - 1)

    assumptions = (
        f"block kinds counted: {len(cfg.block_kinds)}",
        f"base channel choices counted: {len(cfg.base_channels)}",
        f"num_blocks range: [{lo}, {hi}]",
        "downsample and double-channel index lists counted independently "
        "(strictly increasing, indices in [2, num_blocks])",
        f"fusion: {m} layers, each (input_a, input_b, output_level) in "
        f"[1, {t}]^3; input_a == input_b allowed",
        f"head placement counted as non-empty subsets of {t} levels",
        "fusion channel count fixed (not a searched dimension)",
        "blend parameters are continuous and excluded from both counts",
    )
    return CardinalityReport(backbone, fusion, assumptions)


def _list_move_candidates(spec: BackboneSpec):
    """All (field, position, delta) neighbor moves that keep the spec valid."""
    moves = []
    for fld in ("downsample_at", "double_channels_at"):
        idxs = getattr(spec, fld)
        for pos in range(len(idxs)):
            for delta in (-1, 1):
                new = list(idxs)
                new[pos] += delta
                if new[pos] < 2 or new[pos] > spec.num_blocks:
                    continue
                if any(b <= a for a, b in zip(new, new[1:])):
                    continue
                moves.append((fld, pos, delta))
    return moves


def neighbor_specs(spec: BackboneSpec) -> list[BackboneSpec]:
    """Specs reachable by one index neighbor move (same blocks/stages/kind)."""
    out = []
    for fld, pos, delta in _list_move_candidates(spec):
        idxs = list(getattr(spec, fld))
        idxs[pos] += delta
        out.append(replace(spec, **{fld: tuple(idxs)}))
    return out


def _extended_move_candidates(spec: BackboneSpec, cfg: SpaceConfig):
    moves = []
    lo, hi = cfg.num_blocks_range
    max_idx = max(spec.downsample_at + spec.double_channels_at)
    if spec.num_blocks + 1 <= hi:
        moves.append(("num_blocks", spec.num_blocks + 1))
    if spec.num_blocks - 1 >= lo and spec.num_blocks - 1 >= max_idx:
        moves.append(("num_blocks", spec.num_blocks - 1))
    bases = sorted(cfg.base_channels)
    i = bases.index(spec.base_channels)
    if i > 0:
        moves.append(("base_channels", bases[i - 1]))
    if i < len(bases) - 1:
        moves.append(("base_channels", bases[i + 1]))
    for kind in cfg.block_kinds:
        if kind != spec.block_kind:
            moves.append(("block_kind", kind))
    return moves


def mutate_backbone(
    spec: BackboneSpec,
    rng,
    cfg: SpaceConfig = SpaceConfig(),
    p_extended: float = 0.2,
) -> BackboneSpec:
    """One mutation step.

    The primary move shifts one downsample or double-channel index to a
    neighboring block position. With probability p_extended a structural
    move is taken instead (num_blocks +-1, adjacent base channel size, or
    block kind flip) so the search can traverse those dimensions too.
    """
    index_moves = _list_move_candidates(spec)
    extended_moves = _extended_move_candidates(spec, cfg)
    use_extended = extended_moves and (
        not index_moves or rng.random() < p_extended
    )
    if use_extended:
        fld, value = extended_moves[rng.integers(len(extended_moves))]
        return replace(spec, **{fld: value})
    if not index_moves:
        raise ExhaustedError(f"no valid mutation for {serialize_backbone(spec)}")
    fld, pos, delta = index_moves[rng.integers(len(index_moves))]
    idxs = list(getattr(spec, fld))
    idxs[pos] += delta
    return replace(spec, **{fld: tuple(idxs)})


def mutate_fusion(spec: FusionSpec, t: int, rng) -> FusionSpec:
    """Resample one level field of one fusion layer, or toggle one head."""
    n_fields = len(spec.layers) * 3
    choice = rng.integers(n_fields + 1)
    if choice < n_fields:
        li, fi = divmod(int(choice), 3)
        fld = ("input_a", "input_b", "output_level")[fi]
        layers = list(spec.layers)
        layers[li] = replace(layers[li], **{fld: int(rng.integers(1, t + 1))})
        return replace(spec, layers=tuple(layers))
    lvl = int(rng.integers(1, t + 1))
    heads = set(spec.heads_at)
    if lvl in heads:
        if len(heads) > 1:
            heads.discard(lvl)
        # sole head: toggling off would empty the set; move it instead
        elif t > 1:
            heads = {1 + (lvl % t)}
    else:
        heads.add(lvl)
    return replace(spec, heads_at=frozenset(heads))


def random_backbone(rng, cfg: SpaceConfig = SpaceConfig()) -> BackboneSpec:
    kind = cfg.block_kinds[rng.integers(len(cfg.block_kinds))]
    base = int(cfg.base_channels[rng.integers(len(cfg.base_channels))])
    lo, hi = cfg.num_blocks_range
    n = int(rng.integers(lo, hi + 1))
    s = int(cfg.stage_list_lens[rng.integers(len(cfg.stage_list_lens))])
    down = tuple(sorted(rng.choice(range(2, n + 1), size=s, replace=False).tolist()))
    dbl = tuple(sorted(rng.choice(range(2, n + 1), size=s, replace=False).tolist()))
    return BackboneSpec(kind, base, n, down, dbl)


def random_fusion(rng, t: int, cfg: SpaceConfig = SpaceConfig()) -> FusionSpec:
    layers = tuple(
        FusionLayer(
            int(rng.integers(1, t + 1)),
            int(rng.integers(1, t + 1)),
            int(rng.integers(1, t + 1)),
        )
        for _ in range(cfg.fusion_layers)
    )
    n_heads = int(rng.integers(1, t + 1))
    heads = frozenset(
        int(v) for v in rng.choice(range(1, t + 1), size=n_heads, replace=False)
    )
    return FusionSpec(layers=layers, heads_at=heads)
