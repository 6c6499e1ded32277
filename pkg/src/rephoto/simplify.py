"""Mesh decimation by half-edge collapse ordered by quadric error.

Collapses move one endpoint onto the other (keeping that endpoint's position
and attributes, so vertex colors never need resampling). Collapses that would
flip an incident face normal, or whose mesh neighborhood is too tangled, are
skipped rather than forced.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

from rephoto.geometry import TriMesh, compute_vertex_normals
from rephoto.scene import ValidationError


def _face_quadric(p0, p1, p2):
    """Area-weighted plane quadric of one triangle (4x4)."""
    n = np.cross(p1 - p0, p2 - p0)
    area2 = np.linalg.norm(n)
    if area2 < 1e-30:
        return np.zeros((4, 4))
    n_unit = n / area2
    d = -np.dot(n_unit, p0)
    plane = np.append(n_unit, d)
    return 0.5 * area2 * np.outer(plane, plane)


def _collapse_cost(quadrics, u, v, pos_v):
    q = quadrics[u] + quadrics[v]
    w = np.append(pos_v, 1.0)
    return float(w @ q @ w)


def simplify(mesh: TriMesh, n_simp: float, seed: int = 0) -> TriMesh:
    """Remove floor(n_simp * |V|) vertices by cheapest-first half-edge collapse."""
    if not 0.0 <= n_simp < 1.0:
        raise ValidationError("n_simp must be in [0, 1)")
    nv = mesh.num_vertices
    target = math.floor(n_simp * nv)
    if target == 0 or mesh.num_faces == 0:
        return mesh

    pos = mesh.vertices.copy()
    faces = [tuple(int(i) for i in f) for f in mesh.faces]
    face_alive = [True] * len(faces)
    vert_alive = [True] * nv
    vfaces: list[set[int]] = [set() for _ in range(nv)]
    for fi, f in enumerate(faces):
        for vi in f:
            vfaces[vi].add(fi)

    quadrics = np.zeros((nv, 4, 4))
    for f in faces:
        q = _face_quadric(pos[f[0]], pos[f[1]], pos[f[2]])
        for vi in f:
            quadrics[vi] += q

    rng = np.random.default_rng(seed)

    def neighbors(u):
        out = set()
        for fi in vfaces[u]:
            out.update(faces[fi])
        out.discard(u)
        return out

    version = [0] * nv
    heap: list[tuple[float, float, int, int, int, int]] = []

    def push_edges_of(u):
        for v in neighbors(u):
            cost = _collapse_cost(quadrics, u, v, pos[v])
            heapq.heappush(heap, (cost, float(rng.random()), u, v,
                                  version[u], version[v]))

    for u in range(nv):
        for v in neighbors(u):
            cost = _collapse_cost(quadrics, u, v, pos[v])
            heapq.heappush(heap, (cost, float(rng.random()), u, v,
                                  version[u], version[v]))

    def link_ok(u, v):
        """Manifold link condition + keep every touched vertex on >= 1 face."""
        shared = [fi for fi in vfaces[u] if v in faces[fi]]
        opposite = set()
        for fi in shared:
            for i in faces[fi]:
                if i != u and i != v:
                    opposite.add(i)
        if (neighbors(u) & neighbors(v)) != opposite:
            return False
        if len(vfaces[v]) + len(vfaces[u]) - 2 * len(shared) < 1:
            return False
        for w in opposite:
            lost = sum(1 for fi in shared if w in faces[fi])
            if len(vfaces[w]) - lost < 1:
                return False
        return True

    def flips_normal(u, v):
        """Would moving u onto v flip or degenerate a surviving face at u?"""
        for fi in vfaces[u]:
            f = faces[fi]
            if v in f:
                continue  # face vanishes in the collapse
            old = [pos[i] for i in f]
            new = [pos[v] if i == u else pos[i] for i in f]
            n_old = np.cross(old[1] - old[0], old[2] - old[0])
            n_new = np.cross(new[1] - new[0], new[2] - new[0])
            if np.dot(n_old, n_new) <= 1e-18:
                return True
        return False

    performed = 0
    while heap and performed < target:
        cost, _, u, v, vu, vv = heapq.heappop(heap)
        if not (vert_alive[u] and vert_alive[v]):
            continue
        if version[u] != vu or version[v] != vv:
            continue
        if v not in neighbors(u):
            continue
        if not link_ok(u, v) or flips_normal(u, v):
            continue
        # collapse u -> v
        dead_faces = [fi for fi in vfaces[u] if v in faces[fi]]
        for fi in dead_faces:
            face_alive[fi] = False
            for vi in faces[fi]:
                vfaces[vi].discard(fi)
        for fi in list(vfaces[u]):
            f = faces[fi]
            faces[fi] = tuple(v if i == u else i for i in f)
            vfaces[v].add(fi)
        vfaces[u].clear()
        vert_alive[u] = False
        quadrics[v] += quadrics[u]
        version[v] += 1
        performed += 1
        push_edges_of(v)

    keep = np.array(vert_alive)
    remap = np.full(nv, -1, dtype=np.int64)
    remap[keep] = np.arange(int(keep.sum()))
    new_faces = np.array([faces[fi] for fi in range(len(faces)) if face_alive[fi]],
                         dtype=np.int64).reshape(-1, 3)
    new_faces = remap[new_faces]

    out = TriMesh(
        vertices=pos[keep],
        faces=new_faces,
        colors=mesh.colors[keep] if mesh.colors is not None else None,
        uvs=mesh.uvs[keep] if mesh.uvs is not None else None,
        texture=mesh.texture,
    )
    if mesh.normals is not None and out.num_faces:
        out = compute_vertex_normals(out)
    return out
