import numpy as np
import pytest

from dcflex import DataCenterConfig, WorkloadSpec
from dcflex.workload import GpuInverseWeighted, UtilNormal


@pytest.fixture
def cfg():
    return DataCenterConfig()


def tiny_spec(**overrides):
    """Small workload spec for fast scenario-level tests."""
    base = dict(
        num_jobs=12,
        arrival_span=24,
        duration_mean=5.0,
        duration_sd=3.0,
        duration_max=12,
        util_mode=UtilNormal(0.6, 0.3),
        gpu_mode=GpuInverseWeighted((9, 17, 33)),
        seed=7,
    )
    base.update(overrides)
    return WorkloadSpec(**base)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
