"""Procedural scene shared by the test suite: colored sphere over a ground
quad, viewed by a ring of cameras."""

from __future__ import annotations

import numpy as np

from rephoto.geometry import TriMesh, compute_vertex_normals
from rephoto.scene import PinholeCamera


def look_at(center, target, up=(0.0, 1.0, 0.0)) -> tuple[np.ndarray, np.ndarray]:
    """World-to-camera rotation/translation for a camera at `center` looking at `target`."""
    center = np.asarray(center, dtype=np.float64)
    f = np.asarray(target, dtype=np.float64) - center
    f = f / np.linalg.norm(f)
    r = np.cross(f, np.asarray(up, dtype=np.float64))
    r = r / np.linalg.norm(r)
    d = np.cross(f, r)
    R = np.stack([r, d, f])
    return R, -R @ center


def _pattern_colors(pts: np.ndarray) -> np.ndarray:
    """Smooth but structured color field; gives patch metrics texture to latch on."""
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    r = 0.5 + 0.45 * np.sin(9.0 * x + 3.0 * y)
    g = 0.5 + 0.45 * np.sin(7.0 * y - 4.0 * z + 1.0)
    b = 0.5 + 0.45 * np.sin(8.0 * z + 5.0 * x + 2.0)
    return np.clip(np.stack([r, g, b], axis=1), 0.0, 1.0)


def make_sphere_quad_mesh(rings: int = 52, segments: int = 64,
                          ground_div: int = 40) -> TriMesh:
    """Unit sphere above a ground quad, vertex-colored, ~10k faces."""
    verts = []
    faces = []
    for i in range(rings + 1):
        theta = np.pi * i / rings
        for j in range(segments + 1):
            phi = 2.0 * np.pi * j / segments
            verts.append((np.sin(theta) * np.cos(phi),
                          np.cos(theta),
                          np.sin(theta) * np.sin(phi)))
    cols = segments + 1
    for i in range(rings):
        for j in range(segments):
            a = i * cols + j
            b = a + 1
            c = a + cols
            d = c + 1
            if i > 0:
                faces.append((a, c, b))
            if i < rings - 1:
                faces.append((b, c, d))
    base = len(verts)
    half = 2.2
    for i in range(ground_div + 1):
        for j in range(ground_div + 1):
            verts.append((-half + 2 * half * i / ground_div,
                          -1.0,
                          -half + 2 * half * j / ground_div))
    gcols = ground_div + 1
    for i in range(ground_div):
        for j in range(ground_div):
            a = base + i * gcols + j
            b = a + 1
            c = a + gcols
            d = c + 1
            faces.append((a, b, c))
            faces.append((b, d, c))
    verts = np.asarray(verts, dtype=np.float64)
    mesh = TriMesh(vertices=verts,
                   faces=np.asarray(faces, dtype=np.int64),
                   colors=_pattern_colors(verts))
    return compute_vertex_normals(mesh)


def make_ring_cameras(n: int = 12, width: int = 320, height: int = 240,
                      radius: float = 3.2, y: float = 1.0) -> list[PinholeCamera]:
    cams = []
    f = 0.9 * width
    for k in range(n):
        ang = 2.0 * np.pi * k / n
        center = (radius * np.cos(ang), y, radius * np.sin(ang))
        R, t = look_at(center, (0.0, -0.2, 0.0))
        cams.append(PinholeCamera(fx=f, fy=f, cx=(width - 1) / 2.0,
                                  cy=(height - 1) / 2.0, width=width,
                                  height=height, rotation=R, translation=t))
    return cams
