import numpy as np
import pytest

from survanchor.data import SurvivalDataset, SurvivalRecord
from survanchor.model import ComponentDecl, GroupDecl, JointModelSpec, free_components


def make_dataset(times, events, time_unit="months", group=""):
    return SurvivalDataset(
        tuple(
            SurvivalRecord(time=float(t), event=int(e), group=group)
            for t, e in zip(times, events)
        ),
        time_unit=time_unit,
    )


def random_dataset(rng, n, scale=5.0, censor_frac=0.3, time_unit="months"):
    times = rng.exponential(scale, n) + 1e-3
    events = (rng.uniform(size=n) > censor_frac).astype(int)
    return make_dataset(times, events, time_unit=time_unit)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def biweibull_joint_spec():
    """The worked sharing structure: Bi-Weibull population; disease component 1
    proportional, component 2 shared."""
    return JointModelSpec(
        population=GroupDecl.simple(*free_components("weibull", "weibull")),
        disease=GroupDecl.simple(
            ComponentDecl(role="proportional", of=0),
            ComponentDecl(role="shared", of=1),
        ),
    )


@pytest.fixture
def cause_specific_spec():
    return JointModelSpec(
        population=GroupDecl.simple(*free_components("weibull", "weibull")),
        cause_specific=True,
    )
