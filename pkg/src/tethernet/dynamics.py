"""Lumped-parameter dynamics of the tether-net capture scene.

Point masses (net knots, corner masses, tether beads) coupled by tension-only
spring-damper links, a rigid box target with penalty contact, a drawstring
closing mechanism with permanent pair locks, and a semi-implicit Euler
integrator. The frame is chaser-centred and inertial; no gravity, no orbital
mechanics (captures last well under two minutes, over which both are
second-order).
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, SimulationBlowupError, TopologyError
from .sampling import DoESample

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# quaternion / Euler helpers (w, x, y, z convention; Euler intrinsic Z-Y-X)

def quat_normalize(q: np.ndarray) -> np.ndarray:
    return q / np.linalg.norm(q)

def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])

def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])

def quat_from_euler_zyx(euler) -> np.ndarray:
    """Quaternion for intrinsic Z-Y-X rotations (yaw, pitch, roll)."""
    a, b, c = euler
    qz = np.array([math.cos(a / 2), 0.0, 0.0, math.sin(a / 2)])
    qy = np.array([math.cos(b / 2), 0.0, math.sin(b / 2), 0.0])
    qx = np.array([math.cos(c / 2), math.sin(c / 2), 0.0, 0.0])
    return quat_multiply(quat_multiply(qz, qy), qx)

def euler_zyx_from_quat(q: np.ndarray) -> np.ndarray:
    """Intrinsic Z-Y-X Euler angles, each wrapped into [0, 2*pi)."""
    r = quat_to_matrix(q)
    pitch = math.asin(max(-1.0, min(1.0, -r[2, 0])))
    if abs(r[2, 0]) < 1.0 - 1e-12:
        yaw = math.atan2(r[1, 0], r[0, 0])
        roll = math.atan2(r[2, 1], r[2, 2])
    else:
        yaw = math.atan2(-r[0, 1], r[1, 1])  # gimbal lock: fold roll into yaw
        roll = 0.0
    return np.array([yaw % TWO_PI, pitch % TWO_PI, roll % TWO_PI])

def integrate_quat(q: np.ndarray, omega_world: np.ndarray, dt: float) -> np.ndarray:
    dq = quat_multiply(np.array([0.0, *omega_world]), q)
    return quat_normalize(q + 0.5 * dt * dq)


def _cross3(a, b):
    return np.array([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def _cross_rows(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    out[:, 0] = a[:, 1] * b[:, 2] - a[:, 2] * b[:, 1]
    out[:, 1] = a[:, 2] * b[:, 0] - a[:, 0] * b[:, 2]
    out[:, 2] = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    return out


def _row_norms(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.einsum("ij,ij->i", a, a))


# ---------------------------------------------------------------------------
# scene bodies

@dataclass
class NetTopology:
    """Square net as a grid of knot nodes joined by tension-only threads."""

    nodes_per_side: int
    node_mass: float
    link_pairs: np.ndarray      # (L, 2) node index pairs
    link_rest: np.ndarray       # (L,) rest lengths, m
    corner_indices: np.ndarray  # 4 grid-corner node ids, quadrant order --, +-, ++, -+
    drawstring_sequence: tuple  # 12 ('corner', k) / ('node', id) entries, cyclic
    thread_radius: float
    axial_stiffness: float      # N per unit strain
    axial_damping: float        # N*s/m
    mesh_length: float

    @property
    def n_nodes(self) -> int:
        return self.nodes_per_side ** 2

    def validate(self) -> None:
        n = self.n_nodes
        if self.link_pairs.min() < 0 or self.link_pairs.max() >= n:
            raise TopologyError("link references a nonexistent node")
        if len(self.link_pairs) != len(self.link_rest):
            raise TopologyError("link/rest length mismatch")
        if np.any(self.link_rest <= 0):
            raise TopologyError("non-positive rest length")
        if len(self.corner_indices) != 4 or np.any(self.corner_indices >= n):
            raise TopologyError("corner indices invalid")
        if len(self.drawstring_sequence) != 12:
            raise TopologyError("drawstring must thread exactly 12 entities")
        for kind, idx in self.drawstring_sequence:
            if kind == "node" and not 0 <= idx < n:
                raise TopologyError("drawstring references a nonexistent node")
            if kind == "corner" and not 0 <= idx < 4:
                raise TopologyError("drawstring references a nonexistent corner")


def grid_positions(nodes_per_side: int, mesh_length: float) -> np.ndarray:
    """Flat full-scale grid in the x-y plane, centred on the origin."""
    n = nodes_per_side
    half = (n - 1) / 2.0
    pts = np.zeros((n * n, 3))
    for ix in range(n):
        for iy in range(n):
            pts[ix * n + iy] = ((ix - half) * mesh_length, (iy - half) * mesh_length, 0.0)
    return pts


def square_net(
    nodes_per_side: int = 17,
    side_length: float = 22.0,
    net_mass: float = 100.0,
    thread_radius: float = 0.006,
    axial_stiffness: float = 5000.0,
    damping_ratio: float = 0.1,
) -> NetTopology:
    """Build the square-grid topology; rest lengths equal the flat-grid spacing."""
    n = nodes_per_side
    if n < 3:
        raise TopologyError("need at least a 3x3 net")
    mesh = side_length / (n - 1)
    node_mass = net_mass / (n * n)

    def nid(ix, iy):
        return ix * n + iy

    pairs = []
    for ix in range(n):
        for iy in range(n):
            if ix + 1 < n:
                pairs.append((nid(ix, iy), nid(ix + 1, iy)))
            if iy + 1 < n:
                pairs.append((nid(ix, iy), nid(ix, iy + 1)))
    link_pairs = np.array(pairs, dtype=np.int64)
    link_rest = np.full(len(pairs), mesh)

    corner_indices = np.array(
        [nid(0, 0), nid(n - 1, 0), nid(n - 1, n - 1), nid(0, n - 1)], dtype=np.int64
    )

    # Drawstring walks the perimeter: each corner mass, then the two
    # intermediate perimeter nodes at roughly 1/3 and 2/3 along the side.
    t1 = round((n - 1) / 3)
    t2 = round(2 * (n - 1) / 3)
    seq = (
        ("corner", 0), ("node", nid(t1, 0)), ("node", nid(t2, 0)),
        ("corner", 1), ("node", nid(n - 1, t1)), ("node", nid(n - 1, t2)),
        ("corner", 2), ("node", nid(t2, n - 1)), ("node", nid(t1, n - 1)),
        ("corner", 3), ("node", nid(0, t2)), ("node", nid(0, t1)),
    )

    # Damping default: a fraction of critical for one mesh link between two nodes.
    k_lin = axial_stiffness / mesh
    damping = damping_ratio * 2.0 * math.sqrt(k_lin * node_mass / 2.0)

    return NetTopology(
        nodes_per_side=n,
        node_mass=node_mass,
        link_pairs=link_pairs,
        link_rest=link_rest,
        corner_indices=corner_indices,
        drawstring_sequence=seq,
        thread_radius=thread_radius,
        axial_stiffness=axial_stiffness,
        axial_damping=damping,
        mesh_length=mesh,
    )


@dataclass
class TargetSpec:
    """Rigid box target with uniform-density inertia."""

    half_extents: tuple[float, float, float] = (2.25, 1.25, 1.25)
    mass: float = 2000.0
    inertia_diag: tuple[float, float, float] | None = None
    reference_com_distance: float | None = None  # q_t, fixed when the world is built

    @property
    def volume(self) -> float:
        hx, hy, hz = self.half_extents
        return 8.0 * hx * hy * hz

    @property
    def surface_area(self) -> float:
        hx, hy, hz = self.half_extents
        return 8.0 * (hx * hy + hy * hz + hz * hx)

    def inertia(self) -> np.ndarray:
        if self.inertia_diag is not None:
            return np.asarray(self.inertia_diag, dtype=float)
        hx, hy, hz = self.half_extents
        m = self.mass
        return np.array([
            m / 3.0 * (hy * hy + hz * hz),
            m / 3.0 * (hx * hx + hz * hz),
            m / 3.0 * (hx * hx + hy * hy),
        ])

    def validate(self) -> None:
        if self.volume <= 0 or self.surface_area <= 0:
            raise ConfigurationError("target volume/area must be positive")
        if self.mass <= 0:
            raise ConfigurationError("target mass must be positive")


@dataclass
class WorldParams:
    """Scene-level physical constants and integrator settings."""

    corner_mass: float = 10.0
    corner_radius: float = 0.10
    node_radius: float = 0.025
    corner_cord_fraction: float = 0.25   # cord rest length / mesh length
    tether_beads: int = 10
    tether_length: float = 60.0
    tether_mass: float = 5.0
    stowed_fraction: float = 0.10
    stowed_offset: float = 1.0
    closing_force: float = 40.0          # N per drawstring pair
    lock_tolerance: float = 0.01         # m beyond touching radii
    contact_stiffness: float = 1.0e4     # N/m
    contact_damping: float = 50.0        # N*s/m on penetration rate
    contact_tangential: float = 20.0     # N*s/m viscous tangential
    max_dt: float = 0.002                # integrator stability bound, s
    max_speed: float = 1.0e6             # divergence detector, m/s


class WorldState:
    """Full mutable state of one capture scene.

    Point-mass layout: net nodes first, then the 4 corner masses, then the
    tether beads. Only net nodes and corner masses collide with the target.
    """

    def __init__(self, topology: NetTopology, target_spec: TargetSpec,
                 params: WorldParams, doe: DoESample):
        self.topology = topology
        self.params = params
        self.doe = doe

        n_net = topology.n_nodes
        n_teth = params.tether_beads
        self.n_net = n_net
        self.n_corner = 4
        self.n_tether = n_teth
        self.n_contact = n_net + 4
        n_total = n_net + 4 + n_teth

        full = grid_positions(topology.nodes_per_side, topology.mesh_length)
        stowed = full * params.stowed_fraction
        stowed[:, 2] = params.stowed_offset

        pos = np.zeros((n_total, 3))
        pos[:n_net] = stowed
        pos[n_net:n_net + 4] = stowed[topology.corner_indices]
        for k in range(n_teth):
            pos[n_net + 4 + k] = (0.0, 0.0, 0.02 * (k + 1))

        mass = np.empty(n_total)
        mass[:n_net] = topology.node_mass
        mass[n_net:n_net + 4] = params.corner_mass
        mass[n_net + 4:] = params.tether_mass / max(n_teth, 1)

        radius = np.empty(n_total)
        radius[:n_net] = params.node_radius
        radius[n_net:n_net + 4] = params.corner_radius
        radius[n_net + 4:] = params.node_radius

        self.pos = pos
        self.vel = np.zeros_like(pos)
        self.mass = mass
        self.inv_mass = 1.0 / mass
        self.radius = radius

        # --- links: net threads, corner cords, tether chain ----------------
        li = [topology.link_pairs[:, 0]]
        lj = [topology.link_pairs[:, 1]]
        rest = [topology.link_rest]
        k_lin = [topology.axial_stiffness / topology.link_rest]
        damp = [np.full(len(topology.link_rest), topology.axial_damping)]

        cord_rest = params.corner_cord_fraction * topology.mesh_length
        ci = topology.corner_indices
        li.append(ci)
        lj.append(np.arange(n_net, n_net + 4, dtype=np.int64))
        rest.append(np.full(4, cord_rest))
        k_lin.append(np.full(4, topology.axial_stiffness / cord_rest))
        damp.append(np.full(4, topology.axial_damping))

        # tether: anchor - bead0 - ... - bead(n-1) - net centre node
        seg_rest = params.tether_length / (n_teth + 1)
        seg_k = topology.axial_stiffness / seg_rest
        mid = topology.nodes_per_side // 2
        centre = mid * topology.nodes_per_side + mid
        ti = [n_net + 4 + k for k in range(n_teth - 1)] + [n_net + 4 + n_teth - 1]
        tj = [n_net + 4 + k + 1 for k in range(n_teth - 1)] + [centre]
        li.append(np.array(ti, dtype=np.int64))
        lj.append(np.array(tj, dtype=np.int64))
        rest.append(np.full(n_teth, seg_rest))
        k_lin.append(np.full(n_teth, seg_k))
        damp.append(np.full(n_teth, topology.axial_damping))

        self.link_i = np.concatenate(li)
        self.link_j = np.concatenate(lj)
        self.link_rest = np.concatenate(rest)
        self.link_k = np.concatenate(k_lin)
        self.link_c = np.concatenate(damp)
        self._scatter_idx = np.concatenate([self.link_i, self.link_j])

        # chaser anchor: a pinned virtual particle at the origin
        self.anchor_enabled = True
        self.anchor_index = n_net + 4     # first tether bead
        self.anchor_point = np.zeros(3)
        self.anchor_rest = seg_rest
        self.anchor_k = seg_k
        self.anchor_c = topology.axial_damping

        # drawstring pairs as global particle indices, cyclic
        def gid(entry):
            kind, idx = entry
            return n_net + idx if kind == "corner" else idx

        seq = [gid(e) for e in topology.drawstring_sequence]
        self.draw_pairs = np.array(
            [(seq[k], seq[(k + 1) % 12]) for k in range(12)], dtype=np.int64
        )
        self.locked = np.zeros(12, dtype=bool)
        self._lock_components: list[np.ndarray] = []
        self.closing_active = False
        self.closing_time: float | None = None

        # --- target rigid body ---------------------------------------------
        self.target_spec = replace(target_spec, reference_com_distance=doe.distance)
        self.target_pos = np.array([0.0, 0.0, doe.distance])
        self.target_quat = quat_from_euler_zyx(doe.orientation)
        self.target_vel = np.zeros(3)
        self.target_omega = np.array(doe.angular_velocity, dtype=float)
        self._inertia_body = self.target_spec.inertia()
        self._half_extents = np.asarray(self.target_spec.half_extents, dtype=float)

        self.time = 0.0
        self.substeps = 0

    # --- scene events -------------------------------------------------------

    def launch(self, v_eb) -> None:
        """Eject the corner masses with quadrant-signed copies of v_eb."""
        if self.time != 0.0:
            raise ConfigurationError("launch is only valid at t = 0")
        v = np.asarray(v_eb, dtype=float)
        signs = ((-1, -1), (1, -1), (1, 1), (-1, 1))  # matches corner order
        for k, (sx, sy) in enumerate(signs):
            self.vel[self.n_net + k] = (sx * v[0], sy * v[1], v[2])

    def activate_closing(self) -> None:
        """Start the drawstring; idempotent."""
        if self.closing_active:
            return
        self.closing_active = True
        self.closing_time = self.time

    def release_anchor(self) -> None:
        """Detach the main tether from the chaser (isolates the system)."""
        self.anchor_enabled = False

    @property
    def locked_pairs(self) -> set:
        return set(np.flatnonzero(self.locked).tolist())

    @property
    def n_locked(self) -> int:
        return int(self.locked.sum())

    def _rebuild_lock_components(self) -> None:
        """Connected components of the locked-pair graph (welded clusters)."""
        parent: dict[int, int] = {}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for k in np.flatnonzero(self.locked):
            a, b = (int(v) for v in self.draw_pairs[k])
            parent.setdefault(a, a)
            parent.setdefault(b, b)
            parent[find(a)] = find(b)
        groups: dict[int, list[int]] = {}
        for x in parent:
            groups.setdefault(find(x), []).append(x)
        comps = [np.array(sorted(g), dtype=np.int64)
                 for g in groups.values() if len(g) > 1]
        self._lock_components = sorted(comps, key=lambda c: int(c[0]))

    # --- forces ---------------------------------------------------------------

    def _link_forces(self, pos: np.ndarray, vel: np.ndarray) -> np.ndarray:
        """Tension-only spring-damper forces from all links (plus the anchor)."""
        f = np.zeros_like(pos)
        d = pos[self.link_j] - pos[self.link_i]
        dist = _row_norms(d)
        safe = np.maximum(dist, 1e-12)
        u = d / safe[:, None]
        stretch = dist - self.link_rest
        taut = stretch > 0.0
        rate = np.einsum("ij,ij->i", vel[self.link_j] - vel[self.link_i], u)
        fmag = np.where(taut, self.link_k * stretch + self.link_c * rate, 0.0)
        np.maximum(fmag, 0.0, out=fmag)  # threads never push
        fv = fmag[:, None] * u
        w = np.concatenate([fv, -fv])
        for c in range(3):
            f[:, c] += np.bincount(self._scatter_idx, weights=w[:, c], minlength=len(pos))
        if self.anchor_enabled:
            a = self.anchor_index
            d0 = self.anchor_point - pos[a]
            dist0 = np.linalg.norm(d0)
            if dist0 > self.anchor_rest:
                u0 = d0 / dist0
                rate0 = float(-vel[a] @ u0)
                fm = max(0.0, self.anchor_k * (dist0 - self.anchor_rest) + self.anchor_c * rate0)
                f[a] += fm * u0
        return f

    def elastic_forces(self) -> np.ndarray:
        """Spring-only link forces at the current positions (no damping)."""
        f = np.zeros_like(self.pos)
        d = self.pos[self.link_j] - self.pos[self.link_i]
        dist = np.linalg.norm(d, axis=1)
        safe = np.maximum(dist, 1e-12)
        u = d / safe[:, None]
        stretch = np.maximum(dist - self.link_rest, 0.0)
        fv = (self.link_k * stretch)[:, None] * u
        w = np.concatenate([fv, -fv])
        for c in range(3):
            f[:, c] += np.bincount(self._scatter_idx, weights=w[:, c], minlength=len(self.pos))
        if self.anchor_enabled:
            a = self.anchor_index
            d0 = self.anchor_point - self.pos[a]
            dist0 = np.linalg.norm(d0)
            if dist0 > self.anchor_rest:
                f[a] += self.anchor_k * (dist0 - self.anchor_rest) * d0 / dist0
        return f

    def elastic_potential(self) -> float:
        """Stored tension energy of all links (and the anchor link)."""
        d = self.pos[self.link_j] - self.pos[self.link_i]
        stretch = np.maximum(np.linalg.norm(d, axis=1) - self.link_rest, 0.0)
        e = 0.5 * float(np.sum(self.link_k * stretch * stretch))
        if self.anchor_enabled:
            s = max(0.0, float(np.linalg.norm(self.anchor_point - self.pos[self.anchor_index])) - self.anchor_rest)
            e += 0.5 * self.anchor_k * s * s
        return e

    def _contact_forces(self, f: np.ndarray, rot: np.ndarray):
        """Sphere-vs-box penalty contact; returns (force, torque) on the target."""
        p = self.params
        nc = self.n_contact
        rel = (self.pos[:nc] - self.target_pos) @ rot  # body coordinates
        h = self._half_extents
        clamped = np.clip(rel, -h, h)
        diff = rel - clamped
        dist_out = _row_norms(diff)
        outside = dist_out > 0.0

        # penetration of the sphere surface into the box
        depth = np.where(outside, self.radius[:nc] - dist_out, 0.0)
        # centre-inside case: depth = radius + distance to nearest face
        inside = ~outside
        if inside.any():
            gap = h - np.abs(rel[inside])          # (m, 3) >= 0
            axis = np.argmin(gap, axis=1)
            rows = np.arange(len(gap))
            depth_in = self.radius[inside.nonzero()[0]] + gap[rows, axis]
            depth[inside] = depth_in

        active = depth > 0.0
        if not active.any():
            return np.zeros(3), np.zeros(3)

        idx = np.flatnonzero(active)
        n_body = np.zeros((len(idx), 3))
        out_idx = outside[idx]
        n_body[out_idx] = diff[idx[out_idx]] / dist_out[idx[out_idx], None]
        in_rows = np.flatnonzero(~out_idx)
        for r in in_rows:
            gi = idx[r]
            gap = h - np.abs(rel[gi])
            ax = int(np.argmin(gap))
            n_body[r, ax] = 1.0 if rel[gi, ax] >= 0 else -1.0
        n_world = n_body @ rot.T

        x = self.pos[idx]
        arm = x - self.target_pos
        v_surface = self.target_vel + _cross_rows(
            np.broadcast_to(self.target_omega, arm.shape), arm)
        v_rel = self.vel[idx] - v_surface
        v_n = np.einsum("ij,ij->i", v_rel, n_world)
        fn = np.maximum(0.0, p.contact_stiffness * depth[idx] - p.contact_damping * v_n)
        v_tan = v_rel - v_n[:, None] * n_world
        force = fn[:, None] * n_world - p.contact_tangential * v_tan

        f[idx] += force
        target_force = -force.sum(axis=0)
        target_torque = _cross_rows(arm, -force).sum(axis=0)
        return target_force, target_torque

    # --- integration ----------------------------------------------------------

    def step(self, dt: float) -> None:
        """Advance one semi-implicit Euler substep."""
        p = self.params
        if dt <= 0.0:
            raise ConfigurationError("dt must be positive")
        if dt > p.max_dt * (1.0 + 1e-12):
            raise ConfigurationError(
                f"dt {dt} s exceeds the stability bound {p.max_dt} s"
            )

        f = self._link_forces(self.pos, self.vel)

        if self.closing_active:
            open_pairs = self.draw_pairs[~self.locked]
            if len(open_pairs):
                a, b = open_pairs[:, 0], open_pairs[:, 1]
                d = self.pos[b] - self.pos[a]
                dist = np.maximum(_row_norms(d), 1e-12)
                pull = (p.closing_force / dist)[:, None] * d
                np.add.at(f, a, pull)
                np.add.at(f, b, -pull)

        rot = quat_to_matrix(self.target_quat)
        tf, tq = self._contact_forces(f, rot)

        self.vel += f * self.inv_mass[:, None] * dt
        self.pos += self.vel * dt

        spec = self.target_spec
        self.target_vel = self.target_vel + tf / spec.mass * dt
        self.target_pos = self.target_pos + self.target_vel * dt
        # Euler equations with the body-frame principal inertia
        omega_body = rot.T @ self.target_omega
        ang_mom = rot @ (self._inertia_body * omega_body)
        torque_net = tq - _cross3(self.target_omega, ang_mom)
        domega = rot @ ((rot.T @ torque_net) / self._inertia_body)
        self.target_omega = self.target_omega + domega * dt
        self.target_quat = integrate_quat(self.target_quat, self.target_omega, dt)

        if self.closing_active and not self.locked.all():
            # continuous min-distance over the substep so fast pairs can't
            # tunnel past the lock window
            open_idx = np.flatnonzero(~self.locked)
            a = self.draw_pairs[open_idx, 0]
            b = self.draw_pairs[open_idx, 1]
            rel_v = (self.vel[b] - self.vel[a]) * dt
            d1 = self.pos[b] - self.pos[a]
            d0 = d1 - rel_v  # position difference at the start of the substep
            rr = np.einsum("ij,ij->i", rel_v, rel_v)
            t_star = np.where(rr > 0, -np.einsum("ij,ij->i", d0, rel_v) / np.maximum(rr, 1e-300), 0.0)
            t_star = np.clip(t_star, 0.0, 1.0)
            dmin = _row_norms(d0 + t_star[:, None] * rel_v)
            lock_dist = self.radius[a] + self.radius[b] + p.lock_tolerance
            newly = dmin < lock_dist
            if newly.any():
                self.locked[open_idx[newly]] = True
                self._rebuild_lock_components()

        # rigid distance-0 weld: every locked cluster collapses onto its
        # mass-weighted centroid (momentum conserving, exact)
        for comp in self._lock_components:
            m = self.mass[comp]
            w_sum = m.sum()
            self.pos[comp] = (m[:, None] * self.pos[comp]).sum(axis=0) / w_sum
            self.vel[comp] = (m[:, None] * self.vel[comp]).sum(axis=0) / w_sum

        self.time += dt
        self.substeps += 1
        if not (np.isfinite(self.pos).all() and np.isfinite(self.vel).all()
                and np.isfinite(self.target_pos).all() and np.isfinite(self.target_vel).all()
                and np.isfinite(self.target_omega).all()):
            raise SimulationBlowupError("simulation diverged (non-finite state)",
                                        self.substeps)
        if np.abs(self.vel).max() > p.max_speed:
            raise SimulationBlowupError("simulation diverged (runaway speed)",
                                        self.substeps)

    def advance(self, duration: float, dt: float) -> None:
        """Step repeatedly for `duration` seconds (duration must divide by dt)."""
        n = int(round(duration / dt))
        for _ in range(n):
            self.step(dt)

    # --- diagnostics ------------------------------------------------------------

    def linear_momentum(self) -> np.ndarray:
        """Total momentum of particles plus the target."""
        mom = (self.mass[:, None] * self.vel).sum(axis=0)
        return mom + self.target_spec.mass * self.target_vel

    def mechanical_energy(self) -> float:
        """Kinetic plus stored link tension energy."""
        ke = 0.5 * float(np.sum(self.mass * np.einsum("ij,ij->i", self.vel, self.vel)))
        ke += 0.5 * self.target_spec.mass * float(self.target_vel @ self.target_vel)
        rot = quat_to_matrix(self.target_quat)
        i_world = rot @ np.diag(self._inertia_body) @ rot.T
        ke += 0.5 * float(self.target_omega @ i_world @ self.target_omega)
        return ke + self.elastic_potential()

    @property
    def net_positions(self) -> np.ndarray:
        return self.pos[:self.n_net]

    @property
    def corner_positions(self) -> np.ndarray:
        return self.pos[self.n_net:self.n_net + 4]

    @property
    def tether_positions(self) -> np.ndarray:
        return self.pos[self.n_net + 4:]

    def target_euler(self) -> np.ndarray:
        return euler_zyx_from_quat(self.target_quat)

    def to_record(self) -> dict:
        """JSON-serialisable snapshot of the full scene for trajectory export."""
        return {
            "time": self.time,
            "net_positions": self.net_positions.tolist(),
            "corner_positions": self.corner_positions.tolist(),
            "tether_positions": self.tether_positions.tolist(),
            "target_position": self.target_pos.tolist(),
            "target_quaternion": self.target_quat.tolist(),
            "target_euler": self.target_euler().tolist(),
            "target_velocity": self.target_vel.tolist(),
            "target_angular_velocity": self.target_omega.tolist(),
            "closing_active": self.closing_active,
            "n_locked": self.n_locked,
        }


def build_world(topology: NetTopology, target_spec: TargetSpec, doe: DoESample,
                params: WorldParams | None = None) -> WorldState:
    """Assemble a stowed scene: flat shrunken net at the chaser, target down +z."""
    params = params or WorldParams()
    topology.validate()
    target_spec.validate()
    doe.validate()
    return WorldState(topology, target_spec, params, doe)


def contact_force(position, velocity, radius, target_pos, target_quat, target_spec,
                  params: WorldParams | None = None,
                  target_vel=(0.0, 0.0, 0.0), target_omega=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Penalty contact force on one sphere against the oriented box target.

    Zero outside contact; inside, a normal spring-damper on penetration plus a
    viscous tangential term. The equal-and-opposite wrench on the target is
    applied by the integrator, not here.
    """
    params = params or WorldParams()
    position = np.asarray(position, dtype=float)
    velocity = np.asarray(velocity, dtype=float)
    target_pos = np.asarray(target_pos, dtype=float)
    rot = quat_to_matrix(np.asarray(target_quat, dtype=float))
    h = np.asarray(target_spec.half_extents)

    rel = rot.T @ (position - target_pos)
    clamped = np.clip(rel, -h, h)
    diff = rel - clamped
    dist = float(np.linalg.norm(diff))
    if dist > 0.0:
        depth = radius - dist
        if depth <= 0.0:
            return np.zeros(3)
        n_body = diff / dist
    else:
        gap = h - np.abs(rel)
        ax = int(np.argmin(gap))
        depth = radius + float(gap[ax])
        n_body = np.zeros(3)
        n_body[ax] = 1.0 if rel[ax] >= 0 else -1.0
    n_world = rot @ n_body

    v_surface = np.asarray(target_vel, float) + np.cross(np.asarray(target_omega, float),
                                                         position - target_pos)
    v_rel = velocity - v_surface
    v_n = float(v_rel @ n_world)
    fn = max(0.0, params.contact_stiffness * depth - params.contact_damping * v_n)
    v_tan = v_rel - v_n * n_world
    return fn * n_world - params.contact_tangential * v_tan
