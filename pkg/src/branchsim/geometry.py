"""Coarse fractal tree models built from cylindrical links and planar revolute joints.

A tree is an ordered list of links; every non-root link hangs off an earlier
link (topological order), forking at the parent's distal end in the vertical
plane.  Child radii at a fork obey cross-sectional area preservation
(sum of child radius^2 equals the parent radius^2), child lengths shrink by a
fixed decay ratio per generation.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Optional, Sequence
from xml.dom import minidom

import numpy as np

MIN_RADIUS = 1e-4  # meters; forks that shrink below this are rejected


class DegenerateGeometryError(ValueError):
    """Raised when a tree spec produces sub-millimeter branch radii."""


@dataclass(frozen=True)
class BranchLink:
    """One cylindrical branch segment.

    ``fork_angle`` is measured from the parent link's axis, counterclockwise
    positive in the vertical plane; for the root it is the inclination from
    horizontal.
    """

    length: float
    radius: float
    density: float
    fork_angle: float
    parent_index: Optional[int] = None

    def __post_init__(self) -> None:
        if not (self.length > 0 and self.radius > 0 and self.density > 0):
            raise ValueError("link length, radius and density must be positive")
        if not -math.pi / 2 < self.fork_angle < math.pi / 2:
            raise ValueError("fork_angle must lie in (-pi/2, pi/2)")


@dataclass(frozen=True)
class TreeModel:
    """Immutable tree of links plus the root-to-leaf chain that gets probed."""

    links: tuple[BranchLink, ...]
    chain_to_grasp: tuple[int, ...]

    def __post_init__(self) -> None:
        for i, link in enumerate(self.links):
            p = link.parent_index
            if i == 0:
                if p is not None:
                    raise ValueError("first link must be the root")
            elif p is None or not 0 <= p < i:
                raise ValueError(f"link {i} must reference an earlier parent")
        chain = self.chain_to_grasp
        if not chain or chain[0] != 0:
            raise ValueError("chain_to_grasp must start at the root")
        for a, b in zip(chain, chain[1:]):
            if self.links[b].parent_index != a:
                raise ValueError("chain_to_grasp must follow parent-child edges")
        if self.children(chain[-1]):
            raise ValueError("chain_to_grasp must end at a leaf")

    def children(self, index: int) -> list[int]:
        return [i for i, l in enumerate(self.links) if l.parent_index == index]

    @property
    def n_chain_joints(self) -> int:
        """Number of actuated joints along the probed chain (R)."""
        return len(self.chain_to_grasp)


@dataclass(frozen=True)
class TreeSpec:
    """Parameters for fractal tree generation.

    ``fork_angles`` holds one angle per level: the root's inclination from
    horizontal first, then the fan half-angle of each later generation
    relative to its parent's axis.
    """

    trunk_length: float
    trunk_radius: float
    levels: int
    children_per_level: int
    fork_angles: tuple[float, ...]
    density: float
    length_decay: float = 0.75

    def __post_init__(self) -> None:
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.children_per_level < 1:
            raise ValueError("children_per_level must be >= 1")
        if not 0 < self.length_decay <= 1:
            raise ValueError("length_decay must lie in (0, 1]")
        if not (self.trunk_length > 0 and self.trunk_radius > 0 and self.density > 0):
            raise ValueError("trunk dimensions and density must be positive")
        if len(self.fork_angles) != self.levels:
            raise ValueError("fork_angles must provide one angle per level")


def _fan_angles(half_angle: float, count: int) -> list[float]:
    # children spread evenly from +half_angle down to -half_angle; a single
    # child continues at +half_angle so the grasp chain keeps bending upward
    if count == 1:
        return [half_angle]
    return list(np.linspace(half_angle, -half_angle, count))


def generate_tree(spec: TreeSpec) -> TreeModel:
    """Grow a fractal tree from a spec.

    Every fork preserves cross-sectional area exactly (child radius =
    parent radius / sqrt(children)); child length = parent length *
    length_decay.  The grasp chain follows the first child at each level.

    Raises:
        DegenerateGeometryError: if any derived radius falls below MIN_RADIUS.
    """
    links = [
        BranchLink(
            length=spec.trunk_length,
            radius=spec.trunk_radius,
            density=spec.density,
            fork_angle=spec.fork_angles[0],
        )
    ]
    chain = [0]
    frontier = [0]
    for level in range(1, spec.levels):
        half_angle = spec.fork_angles[level]
        angles = _fan_angles(half_angle, spec.children_per_level)
        next_frontier = []
        for parent in frontier:
            parent_link = links[parent]
            child_radius = parent_link.radius / math.sqrt(spec.children_per_level)
            if child_radius < MIN_RADIUS:
                raise DegenerateGeometryError(
                    f"child radius {child_radius:.2e} m at level {level} is below "
                    f"the {MIN_RADIUS:.0e} m minimum"
                )
            child_length = parent_link.length * spec.length_decay
            for a in angles:
                links.append(
                    BranchLink(
                        length=child_length,
                        radius=child_radius,
                        density=spec.density,
                        fork_angle=a,
                        parent_index=parent,
                    )
                )
            first_child = len(links) - spec.children_per_level
            if parent == chain[-1]:
                chain.append(first_child)
            next_frontier.extend(range(first_child, len(links)))
        frontier = next_frontier
    return TreeModel(links=tuple(links), chain_to_grasp=tuple(chain))


def link_mass(link: BranchLink) -> float:
    """Mass of a solid cylinder: density * pi * radius^2 * length."""
    return link.density * math.pi * link.radius**2 * link.length


def joint_inertia(link: BranchLink) -> float:
    """Moment of inertia about the link's proximal joint axis.

    Thin-rod approximation m*L^2/3; the radius-dependent term is negligible
    for branch-like aspect ratios.
    """
    return link_mass(link) * link.length**2 / 3.0


def tree_mass(model: TreeModel) -> float:
    return sum(link_mass(l) for l in model.links)


# --- URDF export -------------------------------------------------------------
#
# Mapping of the vertical plane onto URDF axes: plane x -> URDF x, plane
# vertical -> URDF z, joints rotate about URDF y.  Each link frame has +x
# along the cylinder axis, origin at its proximal joint.


def _cylinder_inertia(mass: float, radius: float, length: float) -> tuple[float, float]:
    # (axial, transverse) moments about the center of mass, axis = local x
    axial = 0.5 * mass * radius**2
    transverse = mass * (3 * radius**2 + length**2) / 12.0
    return axial, transverse


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def export_urdf(model: TreeModel, name: str = "branch_tree") -> str:
    """Serialize a TreeModel as URDF XML.

    One cylinder link per BranchLink; a revolute joint (axis perpendicular to
    the vertical plane) per parent-child pair, placed at the parent's distal
    end; the root is fixed to a massless ``world`` link.
    """
    robot = ET.Element("robot", name=name)
    ET.SubElement(robot, "link", name="world")

    for i, link in enumerate(model.links):
        mass = link_mass(link)
        axial, transverse = _cylinder_inertia(mass, link.radius, link.length)
        el = ET.SubElement(robot, "link", name=f"link_{i}")
        inertial = ET.SubElement(el, "inertial")
        ET.SubElement(
            inertial, "origin", xyz=f"{_fmt(link.length / 2)} 0 0", rpy="0 0 0"
        )
        ET.SubElement(inertial, "mass", value=_fmt(mass))
        ET.SubElement(
            inertial,
            "inertia",
            ixx=_fmt(axial),
            iyy=_fmt(transverse),
            izz=_fmt(transverse),
            ixy="0",
            ixz="0",
            iyz="0",
        )
        for tag in ("visual", "collision"):
            section = ET.SubElement(el, tag)
            # URDF cylinders extend along local z; pitch by pi/2 to lay the
            # geometry along the link's +x axis
            ET.SubElement(
                section,
                "origin",
                xyz=f"{_fmt(link.length / 2)} 0 0",
                rpy=f"0 {_fmt(math.pi / 2)} 0",
            )
            geom = ET.SubElement(section, "geometry")
            ET.SubElement(
                geom, "cylinder", radius=_fmt(link.radius), length=_fmt(link.length)
            )

    root_joint = ET.SubElement(robot, "joint", name="world_to_link_0", type="fixed")
    ET.SubElement(root_joint, "parent", link="world")
    ET.SubElement(root_joint, "child", link="link_0")
    ET.SubElement(
        root_joint,
        "origin",
        xyz="0 0 0",
        rpy=f"0 {_fmt(-model.links[0].fork_angle)} 0",
    )

    for i, link in enumerate(model.links):
        if link.parent_index is None:
            continue
        parent = model.links[link.parent_index]
        joint = ET.SubElement(
            robot, "joint", name=f"joint_{link.parent_index}_{i}", type="revolute"
        )
        ET.SubElement(joint, "parent", link=f"link_{link.parent_index}")
        ET.SubElement(joint, "child", link=f"link_{i}")
        # a positive fork angle tips the child counterclockwise in the x-z
        # plane, which is a negative pitch about +y
        ET.SubElement(
            joint,
            "origin",
            xyz=f"{_fmt(parent.length)} 0 0",
            rpy=f"0 {_fmt(-link.fork_angle)} 0",
        )
        ET.SubElement(joint, "axis", xyz="0 1 0")
        ET.SubElement(
            joint,
            "limit",
            lower=_fmt(-math.pi / 2),
            upper=_fmt(math.pi / 2),
            effort="1000",
            velocity="100",
        )

    raw = ET.tostring(robot, encoding="unicode")
    return minidom.parseString(raw).toprettyxml(indent="  ")


def parse_urdf_planar(urdf_text: str) -> dict:
    """Re-read an exported URDF into planar quantities (used for round-trip checks).

    Returns a dict with link names, joint records (parent, child, planar
    origin offset, pitch) and the world-frame rest position of every joint,
    obtained by composing the planar transforms.
    """
    robot = ET.fromstring(urdf_text)
    links = [el.get("name") for el in robot.findall("link")]
    joints = []
    for el in robot.findall("joint"):
        origin = el.find("origin")
        xyz = [float(v) for v in origin.get("xyz").split()]
        rpy = [float(v) for v in origin.get("rpy").split()]
        joints.append(
            {
                "name": el.get("name"),
                "type": el.get("type"),
                "parent": el.find("parent").get("link"),
                "child": el.find("child").get("link"),
                "offset": (xyz[0], xyz[2]),
                "pitch": rpy[1],
            }
        )
    # forward kinematics over the joint tree: frame = (x, z, planar angle)
    frames = {"world": (0.0, 0.0, 0.0)}
    pending = list(joints)
    while pending:
        progressed = False
        for j in list(pending):
            if j["parent"] in frames:
                x, z, ang = frames[j["parent"]]
                ox, oz = j["offset"]
                gx = x + ox * math.cos(ang) - oz * math.sin(ang)
                gz = z + ox * math.sin(ang) + oz * math.cos(ang)
                frames[j["child"]] = (gx, gz, ang - j["pitch"])
                j["world_xy"] = (gx, gz)
                pending.remove(j)
                progressed = True
        if not progressed:
            raise ValueError("URDF joint graph is not a tree rooted at 'world'")
    return {"links": links, "joints": joints, "frames": frames}
