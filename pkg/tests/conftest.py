import math

import numpy as np
import pytest

from branchsim import BranchLink, ForceProfile, SimParams, TreeModel, TreeSpec, generate_tree


@pytest.fixture(scope="session")
def single_link_model():
    # one near-horizontal branch, light enough for moderate gains
    return TreeModel(
        links=(BranchLink(length=1.0, radius=0.02, density=800.0, fork_angle=0.3),),
        chain_to_grasp=(0,),
    )


@pytest.fixture(scope="session")
def two_link_model():
    links = (
        BranchLink(length=0.8, radius=0.025, density=800.0, fork_angle=0.2),
        BranchLink(length=0.6, radius=0.02, density=800.0, fork_angle=0.25, parent_index=0),
    )
    return TreeModel(links=links, chain_to_grasp=(0, 1))


@pytest.fixture(scope="session")
def binary_tree_spec():
    return TreeSpec(
        trunk_length=1.0,
        trunk_radius=0.05,
        levels=2,
        children_per_level=2,
        fork_angles=(0.3, 0.5),
        density=800.0,
    )


@pytest.fixture
def ramp_profile():
    forces = np.concatenate(
        [np.linspace(0.0, 4.0, 25), np.full(50, 4.0), np.zeros(50)]
    )
    return ForceProfile(forces=forces, dt_obs=0.02, grasp_fraction=1.0)
