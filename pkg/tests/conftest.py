import numpy as np
import pytest

from lanenas.arch_space import (
    ArchEncoding,
    FusionLayer,
    FusionSpec,
    parse_backbone,
)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_arch(encoding="BB_64_13_[5,9]_[7,12]", heads=(1, 2)):
    backbone = parse_backbone(encoding)
    t = backbone.num_stages
    fusion = FusionSpec(
        layers=(FusionLayer(1, t, 1), FusionLayer(2, t, 2)),
        heads_at=frozenset(heads),
    )
    return ArchEncoding(backbone=backbone, fusion=fusion)


@pytest.fixture
def arch():
    return make_arch()
