"""Shared fixtures: the suite builds everything else from tests/synth.py."""

import numpy as np
import pytest

from synth import self_scene


@pytest.fixture
def scene_and_layers():
    rng = np.random.default_rng(20240817)
    return self_scene(rng, 16, 16)
