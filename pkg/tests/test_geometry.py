import math
from types import SimpleNamespace

import numpy as np
import pytest

from branchsim import (
    BranchLink,
    DegenerateGeometryError,
    TreeModel,
    TreeSpec,
    export_urdf,
    generate_tree,
    joint_inertia,
    link_mass,
)
from branchsim.dynamics import chain_joint_positions
from branchsim.geometry import parse_urdf_planar, tree_mass


def test_single_level_tree_is_one_link():
    spec = TreeSpec(1.0, 0.05, levels=1, children_per_level=2,
                    fork_angles=(0.1,), density=700.0)
    model = generate_tree(spec)
    assert len(model.links) == 1
    assert model.chain_to_grasp == (0,)


def test_binary_fork_child_radius(binary_tree_spec):
    model = generate_tree(binary_tree_spec)
    assert len(model.links) == 3
    for child in (1, 2):
        assert model.links[child].radius == pytest.approx(0.05 / math.sqrt(2), abs=1e-6)
        assert model.links[child].length == pytest.approx(1.0 * binary_tree_spec.length_decay)


def test_single_child_keeps_parent_radius():
    spec = TreeSpec(1.0, 0.05, levels=2, children_per_level=1,
                    fork_angles=(0.0, 0.2), density=700.0)
    model = generate_tree(spec)
    assert model.links[1].radius == model.links[0].radius


def test_area_preservation_residual():
    spec = TreeSpec(1.2, 0.06, levels=4, children_per_level=3,
                    fork_angles=(0.1, 0.4, 0.3, 0.2), density=650.0)
    model = generate_tree(spec)
    for i in range(len(model.links)):
        children = model.children(i)
        if children:
            parent_area = model.links[i].radius ** 2
            child_area = sum(model.links[c].radius ** 2 for c in children)
            assert abs(child_area - parent_area) < 1e-12


def test_topological_order_and_chain_path():
    spec = TreeSpec(1.0, 0.05, levels=3, children_per_level=2,
                    fork_angles=(0.0, 0.4, 0.3), density=700.0)
    model = generate_tree(spec)
    for i, link in enumerate(model.links):
        if link.parent_index is not None:
            assert link.parent_index < i
    chain = model.chain_to_grasp
    assert chain[0] == 0
    for a, b in zip(chain, chain[1:]):
        assert model.links[b].parent_index == a
    assert not model.children(chain[-1])


def test_radius_underflow_rejected():
    spec = TreeSpec(1.0, 1.2e-4, levels=2, children_per_level=2,
                    fork_angles=(0.0, 0.3), density=700.0)
    with pytest.raises(DegenerateGeometryError):
        generate_tree(spec)


def test_link_mass_formula():
    link = BranchLink(length=1.0, radius=0.05, density=1000.0, fork_angle=0.0)
    assert link_mass(link) == pytest.approx(7.85398, abs=1e-5)
    doubled = BranchLink(length=1.0, radius=0.10, density=1000.0, fork_angle=0.0)
    assert link_mass(doubled) == pytest.approx(4 * link_mass(link))
    # the formula itself degrades gracefully for a zero-radius cylinder even
    # though BranchLink construction rejects it upstream
    assert link_mass(SimpleNamespace(density=1000.0, radius=0.0, length=1.0)) == 0.0


def test_joint_inertia_thin_rod():
    # density chosen so the mass is exactly 3 kg at r=0.1, L=1
    link = BranchLink(length=1.0, radius=0.1, density=3.0 / (math.pi * 0.01),
                      fork_angle=0.0)
    assert link_mass(link) == pytest.approx(3.0)
    assert joint_inertia(link) == pytest.approx(1.0)
    heavy = BranchLink(length=1.0, radius=0.05, density=1000.0, fork_angle=0.0)
    assert joint_inertia(heavy) == pytest.approx(2.61799, abs=1e-5)
    # J ~ L^3 at fixed radius/density: a short link's inertia vanishes
    short = BranchLink(length=1e-3, radius=0.05, density=1000.0, fork_angle=0.0)
    assert joint_inertia(short) < 1e-8


def test_tree_mass_additivity(binary_tree_spec):
    model = generate_tree(binary_tree_spec)
    expected = sum(link_mass(l) for l in model.links)
    assert tree_mass(model) == pytest.approx(expected)


def test_spec_validation_errors():
    with pytest.raises(ValueError):
        TreeSpec(1.0, 0.05, levels=0, children_per_level=2, fork_angles=(),
                 density=700.0)
    with pytest.raises(ValueError):
        TreeSpec(1.0, 0.05, levels=2, children_per_level=2, fork_angles=(0.1,),
                 density=700.0)
    with pytest.raises(ValueError):
        TreeSpec(1.0, 0.05, levels=1, children_per_level=1, fork_angles=(0.1,),
                 density=700.0, length_decay=0.0)
    with pytest.raises(ValueError):
        BranchLink(length=1.0, radius=0.02, density=700.0, fork_angle=math.pi / 2)


def test_model_validation_errors():
    good = BranchLink(1.0, 0.05, 700.0, 0.0)
    child = BranchLink(0.8, 0.04, 700.0, 0.2, parent_index=0)
    with pytest.raises(ValueError):
        TreeModel(links=(good, child), chain_to_grasp=(1,))
    with pytest.raises(ValueError):
        TreeModel(links=(good, child), chain_to_grasp=(0,))  # stops before leaf


def test_urdf_single_link_structure(single_link_model):
    doc = parse_urdf_planar(export_urdf(single_link_model))
    assert doc["links"] == ["world", "link_0"]
    assert len(doc["joints"]) == 1
    assert doc["joints"][0]["type"] == "fixed"


def test_urdf_binary_tree_structure(binary_tree_spec):
    model = generate_tree(binary_tree_spec)
    doc = parse_urdf_planar(export_urdf(model))
    assert len([l for l in doc["links"] if l != "world"]) == 3
    revolute = [j for j in doc["joints"] if j["type"] == "revolute"]
    assert len(revolute) == 2


def test_urdf_joint_origins_match_forward_kinematics():
    spec = TreeSpec(1.0, 0.05, levels=3, children_per_level=1,
                    fork_angles=(0.15, 0.3, -0.2), density=700.0)
    model = generate_tree(spec)
    doc = parse_urdf_planar(export_urdf(model))
    rest = chain_joint_positions(model)
    for k, link_idx in enumerate(model.chain_to_grasp):
        x, z, _ = doc["frames"][f"link_{link_idx}"]
        assert (x, z) == pytest.approx(tuple(rest[k]), abs=1e-12)
