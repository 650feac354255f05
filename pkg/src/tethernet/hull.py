"""Convex hull measures (enclosed volume, surface area) for 3-D point clouds.

Incremental construction, points inserted in lexicographic order (which also
serves as the deterministic tie-break). Degenerate clouds are handled without
raising: a coplanar set reports zero volume and twice its planar hull area
(both sides of the sheet); collinear or coincident sets report zero for both.
"""

import numpy as np

# Coplanarity / visibility tolerance on point-plane distance, metres.
PLANE_TOL = 1e-9


def _monotone_chain(uv: np.ndarray) -> np.ndarray:
    """2-D convex hull (CCW vertex list) of points already sorted lexicographically."""
    pts = [tuple(p) for p in uv]
    dedup = []
    for p in pts:
        if not dedup or p != dedup[-1]:
            dedup.append(p)
    if len(dedup) <= 2:
        return np.asarray(dedup, dtype=float)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in dedup:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(dedup):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.asarray(lower[:-1] + upper[:-1], dtype=float)


def _planar_area(points: np.ndarray) -> float:
    """Area of the 2-D hull of a (near-)coplanar 3-D point set."""
    center = points.mean(axis=0)
    centered = points - center
    # Plane basis from the two dominant principal directions.
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    if len(svals) < 2 or svals[1] <= PLANE_TOL:
        return 0.0  # collinear or coincident
    uv = centered @ vt[:2].T
    order = np.lexsort((uv[:, 1], uv[:, 0]))
    hull2d = _monotone_chain(uv[order])
    if len(hull2d) < 3:
        return 0.0
    x, y = hull2d[:, 0], hull2d[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _initial_simplex(pts: np.ndarray):
    """Indices of a non-degenerate tetrahedron, or None if the set has rank < 3."""
    d0 = np.linalg.norm(pts - pts[0], axis=1)
    i1 = int(np.argmax(d0))
    if d0[i1] <= PLANE_TOL:
        return None
    u = (pts[i1] - pts[0]) / d0[i1]
    rel = pts - pts[0]
    perp = rel - np.outer(rel @ u, u)
    dline = np.linalg.norm(perp, axis=1)
    i2 = int(np.argmax(dline))
    if dline[i2] <= PLANE_TOL:
        return None
    normal = np.cross(pts[i1] - pts[0], pts[i2] - pts[0])
    normal /= np.linalg.norm(normal)
    dplane = np.abs(rel @ normal)
    i3 = int(np.argmax(dplane))
    if dplane[i3] <= PLANE_TOL:
        return None
    return 0, i1, i2, i3


def _drop_octahedron_interior(pts: np.ndarray) -> np.ndarray:
    """Discard points strictly inside the octahedron of the 6 axis extremes.

    Those points cannot be hull vertices, and a crumpled net cloud is mostly
    interior, so this cuts the incremental insertion count substantially.
    """
    if len(pts) < 20:
        return pts
    extremes = np.unique(
        np.concatenate([np.argmin(pts, axis=0), np.argmax(pts, axis=0)])
    )
    vs = pts[extremes]
    if len(vs) < 4:
        return pts
    simplex = _initial_simplex(vs)
    if simplex is None:
        return pts
    keep = np.zeros(len(pts), dtype=bool)
    keep[extremes] = True
    inside = np.ones(len(pts), dtype=bool)
    # The tetrahedron of the rank-revealing simplex is a cheap conservative
    # interior region; anything strictly inside it can never be a hull vertex.
    tet = vs[list(simplex)]
    tc = tet.mean(axis=0)
    for tri in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
        a, b, c = tet[tri[0]], tet[tri[1]], tet[tri[2]]
        n = np.cross(b - a, c - a)
        nn = np.linalg.norm(n)
        if nn == 0.0:
            return pts
        n = n / nn
        if n @ (tc - a) > 0:
            n = -n
        inside &= (pts - a) @ n < -PLANE_TOL
    return pts[keep | ~inside]


def hull_measures(points) -> tuple[float, float]:
    """Return (volume, surface_area) of the convex hull of a 3-D point set.

    A degenerate (rank < 3) set yields volume 0; a planar set yields surface
    area equal to twice its planar hull area.
    """
    pts = np.array(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("expected an (n, 3) point array")
    if not np.all(np.isfinite(pts)):
        raise ValueError("non-finite coordinates in point set")
    if len(pts) < 3:
        return 0.0, 0.0

    pts = _drop_octahedron_interior(pts)

    # Deterministic processing order: lexicographic by (x, y, z).
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))
    pts = pts[order]

    simplex = _initial_simplex(pts)
    if simplex is None:
        return 0.0, 2.0 * _planar_area(pts)

    interior = pts[list(simplex)].mean(axis=0)

    # Face storage: parallel arrays with amortised growth.
    cap = 64
    tris = np.zeros((cap, 3), dtype=np.int64)
    normals = np.zeros((cap, 3))
    offsets = np.zeros(cap)
    nf = 0

    def push_faces(new_tris: np.ndarray):
        """Append faces, oriented outward w.r.t. the interior point."""
        nonlocal nf, cap, tris, normals, offsets
        a = pts[new_tris[:, 0]]
        b = pts[new_tris[:, 1]]
        c = pts[new_tris[:, 2]]
        n = np.cross(b - a, c - b)
        nn = np.linalg.norm(n, axis=1)
        ok = nn > 0.0
        new_tris, a, n, nn = new_tris[ok], a[ok], n[ok], nn[ok]
        n = n / nn[:, None]
        off = np.einsum("ij,ij->i", n, a)
        flip = n @ interior > off
        if flip.any():
            new_tris[flip] = new_tris[flip][:, [0, 2, 1]]
            n[flip] = -n[flip]
            off[flip] = -off[flip]
        m = len(new_tris)
        while nf + m > cap:
            cap *= 2
            tris = np.resize(tris, (cap, 3))
            normals = np.resize(normals, (cap, 3))
            offsets = np.resize(offsets, cap)
        tris[nf:nf + m] = new_tris
        normals[nf:nf + m] = n
        offsets[nf:nf + m] = off
        nf += m

    i0, i1, i2, i3 = simplex
    push_faces(np.array(
        [(i0, i1, i2), (i0, i1, i3), (i0, i2, i3), (i1, i2, i3)], dtype=np.int64
    ))

    in_simplex = set(simplex)
    for p_idx in range(len(pts)):
        if p_idx in in_simplex:
            continue
        p = pts[p_idx]
        dists = normals[:nf] @ p - offsets[:nf]
        visible = dists > PLANE_TOL
        if not visible.any():
            continue
        # Horizon: directed edges of visible faces whose reverse isn't visible.
        vis_t = tris[:nf][visible]
        edges = np.concatenate([vis_t[:, [0, 1]], vis_t[:, [1, 2]], vis_t[:, [2, 0]]])
        edge_set = {(int(u), int(v)) for u, v in edges}
        horizon = sorted((u, v) for (u, v) in edge_set if (v, u) not in edge_set)
        keep = ~visible
        nk = int(keep.sum())
        tris[:nk] = tris[:nf][keep]
        normals[:nk] = normals[:nf][keep]
        offsets[:nk] = offsets[:nf][keep]
        nf = nk
        if horizon:
            ht = np.array([(u, v, p_idx) for (u, v) in horizon], dtype=np.int64)
            push_faces(ht)

    t = tris[:nf]
    pa, pb, pc = pts[t[:, 0]], pts[t[:, 1]], pts[t[:, 2]]
    volume = abs(float(np.sum(np.einsum("ij,ij->i", pa, np.cross(pb, pc)))) / 6.0)
    area = 0.5 * float(np.sum(np.linalg.norm(np.cross(pb - pa, pc - pa), axis=1)))
    return volume, area
