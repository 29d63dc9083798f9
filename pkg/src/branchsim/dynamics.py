"""Planar forward dynamics of the probed branch chain.

Each joint along the grasp chain is a torsional spring-damper: the restoring
torque Kp*psi + Kd*psi_dot opposes the joint displacement psi, while gravity
and an applied vertical tip force drive it.  The distal structure hanging off
each joint is lumped into a composite rigid body, re-evaluated at the current
configuration; full coupled mass-matrix dynamics are deliberately not modeled
(whatever that approximation misses is absorbed by the inferred gains).

Conventions: the plane is (x, z) with gravity pulling -z; positive psi and
positive torque point in the sag direction (a positive, i.e. downward, tip
force on a horizontal branch produces positive torque); world angle of chain
link k is sum(fork_angles[:k+1]) - sum(psi[:k+1]).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .geometry import TreeModel, link_mass

GRAVITY = 9.81
PSI_LIMIT = math.pi / 2
DEFAULT_DT = 1e-3


class SimulationDiverged(RuntimeError):
    """A joint left the stable range (|psi| > limit) or went non-finite."""


@dataclass
class JointState:
    """Joint displacements from rest (psi) and their rates, one per chain joint."""

    psi: np.ndarray
    psi_dot: np.ndarray

    def __post_init__(self) -> None:
        self.psi = np.asarray(self.psi, dtype=float)
        self.psi_dot = np.asarray(self.psi_dot, dtype=float)
        if self.psi.shape != self.psi_dot.shape or self.psi.ndim != 1:
            raise ValueError("psi and psi_dot must be 1-d arrays of equal length")
        if not (np.isfinite(self.psi).all() and np.isfinite(self.psi_dot).all()):
            raise ValueError("joint state must be finite")

    @classmethod
    def rest(cls, n_joints: int) -> "JointState":
        return cls(np.zeros(n_joints), np.zeros(n_joints))


@dataclass(frozen=True)
class SimParams:
    """Per-joint stiffness and damping gains; the inference target.

    The flat parameter vector interleaves the pairs:
    theta = [kp_0, kd_0, kp_1, kd_1, ...], so N = 2 * R.
    """

    kp: tuple[float, ...]
    kd: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "kp", tuple(float(v) for v in self.kp))
        object.__setattr__(self, "kd", tuple(float(v) for v in self.kd))
        if len(self.kp) != len(self.kd):
            raise ValueError("kp and kd must have one entry per chain joint")
        if any(v <= 0 for v in self.kp) or any(v <= 0 for v in self.kd):
            raise ValueError("gains must be positive")

    @property
    def n_joints(self) -> int:
        return len(self.kp)

    @property
    def theta(self) -> np.ndarray:
        out = np.empty(2 * len(self.kp))
        out[0::2] = self.kp
        out[1::2] = self.kd
        return out

    @classmethod
    def from_theta(cls, theta: Sequence[float]) -> "SimParams":
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or theta.size % 2:
            raise ValueError("theta must be a flat [kp, kd, kp, kd, ...] vector")
        return cls(kp=tuple(theta[0::2]), kd=tuple(theta[1::2]))


@dataclass(frozen=True)
class ForceProfile:
    """Signed vertical forces (positive = downward) applied at the grasp point.

    ``grasp_fraction`` locates the grasp point along the probed branch as a
    fraction of its length from the proximal joint.
    """

    forces: np.ndarray
    dt_obs: float
    grasp_fraction: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "forces", np.asarray(self.forces, dtype=float))
        if self.forces.ndim != 1 or self.forces.size < 2:
            raise ValueError("a force profile needs at least two samples")
        if not np.isfinite(self.forces).all():
            raise ValueError("forces must be finite")
        if self.dt_obs <= 0:
            raise ValueError("dt_obs must be positive")
        if not 0 < self.grasp_fraction <= 1:
            raise ValueError("grasp_fraction must lie in (0, 1]")

    @property
    def n_samples(self) -> int:
        return self.forces.size

    @property
    def times(self) -> np.ndarray:
        """Observation times; sample i is recorded at (i+1)*dt_obs."""
        return (np.arange(self.forces.size) + 1) * self.dt_obs


@dataclass(frozen=True)
class Trajectory:
    """Grasp-point deviation from its rest position, and its velocity."""

    pos: np.ndarray  # (g, 2): columns (x, z), meters
    vel: np.ndarray  # (g, 2): m/s
    dt_obs: float
    diverged: bool = False

    def __post_init__(self) -> None:
        if self.pos.shape != self.vel.shape or self.pos.ndim != 2 or self.pos.shape[1] != 2:
            raise ValueError("pos and vel must both have shape (g, 2)")

    @property
    def n_samples(self) -> int:
        return self.pos.shape[0]

    @property
    def deflection(self) -> np.ndarray:
        """Signed vertical deviation (negative = sagging below rest)."""
        return self.pos[:, 1]


# --- chain geometry precomputation -------------------------------------------


@dataclass(frozen=True)
class ChainGeometry:
    """Flattened per-joint arrays for the rollout kernel.

    For each chain joint k the links rigidly attached between it and the next
    chain joint (the chain link itself plus any off-chain subtrees) are lumped
    into one rigid group with mass, center of mass in the link frame, and
    moment of inertia about that group's own center of mass.
    """

    lengths: np.ndarray       # (R,) chain link lengths
    fork_angles: np.ndarray   # (R,) per-joint rest angles
    group_mass: np.ndarray    # (R,)
    group_com: np.ndarray     # (R, 2) in the link frame (origin at joint k)
    group_icom: np.ndarray    # (R,) inertia about the group center of mass

    @property
    def n_joints(self) -> int:
        return self.lengths.size


def _subtree(model: TreeModel, root: int) -> set[int]:
    out = {root}
    stack = [root]
    while stack:
        node = stack.pop()
        for c in model.children(node):
            out.add(c)
            stack.append(c)
    return out


@lru_cache(maxsize=64)
def chain_geometry(model: TreeModel) -> ChainGeometry:
    chain = model.chain_to_grasp
    r = len(chain)
    lengths = np.array([model.links[i].length for i in chain])
    fork_angles = np.array([model.links[i].fork_angle for i in chain])
    group_mass = np.zeros(r)
    group_com = np.zeros((r, 2))
    group_icom = np.zeros(r)
    for k, root in enumerate(chain):
        members = _subtree(model, root)
        if k + 1 < r:
            members -= _subtree(model, chain[k + 1])
        # pose of each member in the chain-link frame: origin at joint k,
        # +x along the chain link axis
        pose = {root: (0.0, 0.0, 0.0)}  # (x, z, angle)
        order = [root]
        while order:
            node = order.pop()
            nx, nz, nang = pose[node]
            ln = model.links[node]
            for c in model.children(node):
                if c not in members:
                    continue
                cang = nang + model.links[c].fork_angle
                pose[c] = (
                    nx + ln.length * math.cos(nang),
                    nz + ln.length * math.sin(nang),
                    cang,
                )
                order.append(c)
        masses, coms, icoms = [], [], []
        for m_id in members:
            ln = model.links[m_id]
            x, z, ang = pose[m_id]
            m = link_mass(ln)
            com = np.array(
                [x + 0.5 * ln.length * math.cos(ang), z + 0.5 * ln.length * math.sin(ang)]
            )
            masses.append(m)
            coms.append(com)
            icoms.append(m * ln.length**2 / 12.0)
        masses = np.array(masses)
        coms = np.array(coms)
        total = masses.sum()
        center = (masses[:, None] * coms).sum(axis=0) / total
        group_mass[k] = total
        group_com[k] = center
        group_icom[k] = sum(
            ic + m * float(((c - center) ** 2).sum())
            for ic, m, c in zip(icoms, masses, coms)
        )
    return ChainGeometry(lengths, fork_angles, group_mass, group_com, group_icom)


def rest_pose(
    model: TreeModel, grasp_fraction: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """World rest angles of the chain joints and the rest grasp point C0.

    The world angle of joint k is the prefix sum of fork angles along the
    chain; C0 sits ``grasp_fraction`` of the way along the last link.
    """
    geom = chain_geometry(model)
    angles = np.cumsum(geom.fork_angles)
    reach = geom.lengths.copy()
    reach[-1] *= grasp_fraction
    c0 = np.array(
        [(reach * np.cos(angles)).sum(), (reach * np.sin(angles)).sum()]
    )
    return angles, c0


def chain_joint_positions(model: TreeModel, psi: Optional[np.ndarray] = None) -> np.ndarray:
    """World positions of the chain joints (R, 2) at displacement psi (rest if None)."""
    geom = chain_geometry(model)
    r = geom.n_joints
    if psi is None:
        psi = np.zeros(r)
    pts = np.zeros((r, 2))
    x = z = a = 0.0
    for k in range(r):
        pts[k] = (x, z)
        a += geom.fork_angles[k] - psi[k]
        x += geom.lengths[k] * math.cos(a)
        z += geom.lengths[k] * math.sin(a)
    return pts


# --- torques and single-step integration (reference implementation) ----------


def _chain_state_arrays(geom: ChainGeometry, psi: np.ndarray):
    """World angles, joint positions and group COM positions at psi."""
    r = geom.n_joints
    alpha = np.empty(r)
    joints = np.empty((r, 2))
    coms = np.empty((r, 2))
    a = 0.0
    jx = jz = 0.0
    for k in range(r):
        a = a + geom.fork_angles[k] - psi[k]
        alpha[k] = a
        joints[k, 0] = jx
        joints[k, 1] = jz
        ca = math.cos(a)
        sa = math.sin(a)
        coms[k, 0] = jx + geom.group_com[k, 0] * ca - geom.group_com[k, 1] * sa
        coms[k, 1] = jz + geom.group_com[k, 0] * sa + geom.group_com[k, 1] * ca
        jx = jx + geom.lengths[k] * ca
        jz = jz + geom.lengths[k] * sa
    return alpha, joints, coms


def joint_torques(
    model: TreeModel,
    state: JointState,
    tip_force: float,
    grasp_fraction: float = 1.0,
    gravity: float = GRAVITY,
) -> np.ndarray:
    """External torque at each chain joint (tip force plus distal gravity).

    Positive torque acts in the sag direction; both contributions use the
    horizontal lever arm from the joint to the point of application at the
    current (not rest) configuration.
    """
    geom = chain_geometry(model)
    r = geom.n_joints
    alpha, joints, coms = _chain_state_arrays(geom, state.psi)
    grasp_off = grasp_fraction * geom.lengths[r - 1]
    gx = joints[r - 1, 0] + grasp_off * math.cos(alpha[r - 1])
    torques = np.empty(r)
    for k in range(r):
        t = tip_force * (gx - joints[k, 0])
        for j in range(k, r):
            t += gravity * geom.group_mass[j] * (coms[j, 0] - joints[k, 0])
        torques[k] = t
    return torques


def composite_inertia(model: TreeModel, psi: Optional[np.ndarray] = None) -> np.ndarray:
    """Moment of inertia seen by each chain joint, distal structure lumped rigid."""
    geom = chain_geometry(model)
    r = geom.n_joints
    if psi is None:
        psi = np.zeros(r)
    alpha, joints, coms = _chain_state_arrays(geom, psi)
    out = np.empty(r)
    for k in range(r):
        j_sum = 0.0
        for j in range(k, r):
            dx = coms[j, 0] - joints[k, 0]
            dz = coms[j, 1] - joints[k, 1]
            j_sum += geom.group_icom[j] + geom.group_mass[j] * (dx * dx + dz * dz)
        out[k] = j_sum
    return out


def step(
    model: TreeModel,
    params: SimParams,
    state: JointState,
    tip_force: float,
    dt: float,
    grasp_fraction: float = 1.0,
    gravity: float = GRAVITY,
    psi_limit: float = PSI_LIMIT,
) -> JointState:
    """One semi-implicit Euler step of the chain under a constant tip force.

    Raises:
        SimulationDiverged: if any updated |psi| exceeds psi_limit or any
            value is non-finite (callers treat this as infinite loss).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    geom = chain_geometry(model)
    r = geom.n_joints
    if state.psi.size != r:
        raise ValueError("state size does not match the grasp chain")
    kp = np.asarray(params.kp)
    kd = np.asarray(params.kd)
    torques = joint_torques(model, state, tip_force, grasp_fraction, gravity)
    inertia = composite_inertia(model, state.psi)
    psi = state.psi.copy()
    psi_dot = state.psi_dot.copy()
    for k in range(r):
        psi_dot[k] = psi_dot[k] + dt * (torques[k] - kp[k] * psi[k] - kd[k] * psi_dot[k]) / inertia[k]
        psi[k] = psi[k] + dt * psi_dot[k]
    if not (np.isfinite(psi).all() and np.isfinite(psi_dot).all()) or (
        np.abs(psi) > psi_limit
    ).any():
        raise SimulationDiverged(
            f"joint displacement left the stable range at psi={psi}"
        )
    return JointState(psi, psi_dot)


# --- batched rollout kernel ---------------------------------------------------


@njit(cache=True)
def _rollout_kernel(
    kp, kd, psi0, psid0, forces, substeps, dt, dt_obs,
    lengths, fork_angles, group_mass, group_com, group_icom,
    grasp_off, gravity, psi_limit, pos, vel, div_at,
):
    n_batch, r = kp.shape
    g = forces.shape[0]
    # rest grasp point
    a = 0.0
    rest_x = 0.0
    rest_z = 0.0
    for k in range(r):
        a += fork_angles[k]
        reach = lengths[k] if k < r - 1 else grasp_off
        rest_x += reach * np.cos(a)
        rest_z += reach * np.sin(a)
    psi = np.empty(r)
    psid = np.empty(r)
    alpha = np.empty(r)
    px = np.empty(r)
    pz = np.empty(r)
    cx = np.empty(r)
    cz = np.empty(r)
    for b in range(n_batch):
        for k in range(r):
            psi[k] = psi0[k]
            psid[k] = psid0[k]
        div_at[b] = -1
        for i in range(g):
            f = forces[i]
            for _ in range(substeps):
                a = 0.0
                jx = 0.0
                jz = 0.0
                for k in range(r):
                    a = a + fork_angles[k] - psi[k]
                    alpha[k] = a
                    px[k] = jx
                    pz[k] = jz
                    ca = np.cos(a)
                    sa = np.sin(a)
                    cx[k] = jx + group_com[k, 0] * ca - group_com[k, 1] * sa
                    cz[k] = jz + group_com[k, 0] * sa + group_com[k, 1] * ca
                    jx = jx + lengths[k] * ca
                    jz = jz + lengths[k] * sa
                gx = px[r - 1] + grasp_off * np.cos(alpha[r - 1])
                bad = False
                for k in range(r):
                    t = f * (gx - px[k])
                    j_sum = 0.0
                    for j in range(k, r):
                        t += gravity * group_mass[j] * (cx[j] - px[k])
                        dx = cx[j] - px[k]
                        dz = cz[j] - pz[k]
                        j_sum += group_icom[j] + group_mass[j] * (dx * dx + dz * dz)
                    psid[k] = psid[k] + dt * (t - kp[b, k] * psi[k] - kd[b, k] * psid[k]) / j_sum
                    psi[k] = psi[k] + dt * psid[k]
                for k in range(r):
                    if not np.isfinite(psi[k]) or np.abs(psi[k]) > psi_limit:
                        bad = True
                if bad:
                    div_at[b] = i
                    break
            if div_at[b] >= 0:
                for k in range(i, g):
                    pos[b, k, 0] = np.nan
                    pos[b, k, 1] = np.nan
                    vel[b, k, 0] = np.nan
                    vel[b, k, 1] = np.nan
                break
            # record the grasp-point deviation; the velocity trajectory is the
            # discrete time derivative of the recorded positions (deviation is
            # zero at t=0, before the first sample)
            a = 0.0
            gx = 0.0
            gz = 0.0
            for k in range(r):
                a = a + fork_angles[k] - psi[k]
                reach = lengths[k] if k < r - 1 else grasp_off
                gx += reach * np.cos(a)
                gz += reach * np.sin(a)
            pos[b, i, 0] = gx - rest_x
            pos[b, i, 1] = gz - rest_z
            if i == 0:
                vel[b, i, 0] = pos[b, i, 0] / dt_obs
                vel[b, i, 1] = pos[b, i, 1] / dt_obs
            else:
                vel[b, i, 0] = (pos[b, i, 0] - pos[b, i - 1, 0]) / dt_obs
                vel[b, i, 1] = (pos[b, i, 1] - pos[b, i - 1, 1]) / dt_obs


def _substep_count(dt_obs: float, dt: float) -> int:
    substeps = round(dt_obs / dt)
    if substeps < 1 or abs(dt_obs - substeps * dt) > 1e-9 * dt_obs:
        raise ValueError(
            f"dt_obs={dt_obs} must be a positive integer multiple of dt={dt}"
        )
    return substeps


def rollout_arrays(
    model: TreeModel,
    kp: np.ndarray,
    kd: np.ndarray,
    profile: ForceProfile,
    dt: float = DEFAULT_DT,
    gravity: float = GRAVITY,
    psi_limit: float = PSI_LIMIT,
    initial_state: Optional[JointState] = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched rollout over rows of (kp, kd); the fast path behind the API.

    Returns (pos, vel, diverged) with shapes (B, g, 2), (B, g, 2), (B,).
    """
    geom = chain_geometry(model)
    kp = np.ascontiguousarray(np.atleast_2d(np.asarray(kp, dtype=float)))
    kd = np.ascontiguousarray(np.atleast_2d(np.asarray(kd, dtype=float)))
    if kp.shape != kd.shape or kp.shape[1] != geom.n_joints:
        raise ValueError("kp/kd must have shape (batch, n_chain_joints)")
    substeps = _substep_count(profile.dt_obs, dt)
    n_batch = kp.shape[0]
    g = profile.n_samples
    if initial_state is None:
        psi0 = np.zeros(geom.n_joints)
        psid0 = np.zeros(geom.n_joints)
    else:
        psi0 = initial_state.psi
        psid0 = initial_state.psi_dot
    pos = np.empty((n_batch, g, 2))
    vel = np.empty((n_batch, g, 2))
    div_at = np.empty(n_batch, dtype=np.int64)
    grasp_off = profile.grasp_fraction * geom.lengths[-1]
    _rollout_kernel(
        kp, kd, psi0, psid0, profile.forces, substeps, dt, profile.dt_obs,
        geom.lengths, geom.fork_angles, geom.group_mass, geom.group_com,
        geom.group_icom, grasp_off, gravity, psi_limit, pos, vel, div_at,
    )
    return pos, vel, div_at >= 0


def rollout(
    model: TreeModel,
    params: SimParams,
    profile: ForceProfile,
    dt: float = DEFAULT_DT,
    gravity: float = GRAVITY,
    psi_limit: float = PSI_LIMIT,
    initial_state: Optional[JointState] = None,
) -> Trajectory:
    """Integrate the chain from rest under a force profile (zero-order hold).

    Each observation sample holds its force constant over dt_obs/dt substeps;
    the grasp-point deviation and velocity are recorded at the end of every
    observation interval.  Deterministic: identical inputs give bit-identical
    outputs.  Divergence is reported through ``Trajectory.diverged``.
    """
    pos, vel, diverged = rollout_arrays(
        model,
        np.asarray(params.kp)[None, :],
        np.asarray(params.kd)[None, :],
        profile,
        dt=dt,
        gravity=gravity,
        psi_limit=psi_limit,
        initial_state=initial_state,
    )
    return Trajectory(pos[0], vel[0], profile.dt_obs, diverged=bool(diverged[0]))


def batch_rollout(
    model: TreeModel,
    particle_params: Sequence[SimParams],
    profile: ForceProfile,
    dt: float = DEFAULT_DT,
    gravity: float = GRAVITY,
    psi_limit: float = PSI_LIMIT,
) -> list[Trajectory]:
    """Roll out one trajectory per parameter set, results in input order.

    The whole batch is evaluated in a single compiled kernel call; per-element
    failures are reported through the ``diverged`` flags, never as exceptions.
    """
    if len(particle_params) == 0:
        raise ValueError("particle_params must be non-empty")
    kp = np.array([p.kp for p in particle_params])
    kd = np.array([p.kd for p in particle_params])
    pos, vel, diverged = rollout_arrays(
        model, kp, kd, profile, dt=dt, gravity=gravity, psi_limit=psi_limit
    )
    return [
        Trajectory(pos[b], vel[b], profile.dt_obs, diverged=bool(diverged[b]))
        for b in range(kp.shape[0])
    ]
