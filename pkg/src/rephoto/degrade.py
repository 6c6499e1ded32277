"""Synthetic model degradation: texture noise, geometry noise, simplification.

All three operators are deterministic functions of (mesh, params) and change
exactly one aspect of the model: colors, positions (plus recomputed normals),
or connectivity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from rephoto.geometry import TriMesh, compute_vertex_normals, scene_extent
from rephoto.noise import noise3
from rephoto.scene import ValidationError
from rephoto.simplify import simplify

__all__ = ["DegradationParams", "texture_noise", "geometry_noise", "simplify"]

# fixed lattice offsets that decorrelate the per-channel color noise
_CHANNEL_OFFSETS = (
    np.array([0.0, 0.0, 0.0]),
    np.array([17.17, 0.0, 0.0]),
    np.array([0.0, 17.17, 0.0]),
)


@dataclass(frozen=True)
class DegradationParams:
    """Degradation strengths; frequency is in noise cycles per bbox diagonal."""

    n_tex: float = 0.0    # max per-channel color offset
    n_geom: float = 0.0   # max displacement, fraction of scene extent
    n_simp: float = 0.0   # fraction of vertices to eliminate
    seed: int = 0
    frequency: float = 8.0

    def __post_init__(self):
        if self.n_tex < 0 or self.n_geom < 0:
            raise ValidationError("noise strengths must be >= 0")
        if not 0.0 <= self.n_simp < 1.0:
            raise ValidationError("n_simp must be in [0, 1)")
        if self.frequency <= 0:
            raise ValidationError("frequency must be > 0")


def _noise_coords(mesh: TriMesh, frequency: float) -> np.ndarray:
    diag = scene_extent(mesh)
    if diag == 0.0:
        raise ValidationError("degenerate mesh with zero extent")
    return mesh.vertices * (frequency / diag)


def texture_noise(mesh: TriMesh, params: DegradationParams) -> TriMesh:
    """Perturb vertex colors with bounded, channel-decorrelated gradient noise."""
    if mesh.colors is None:
        raise ValidationError("texture noise requires vertex colors")
    if params.n_tex == 0.0:
        return mesh
    coords = _noise_coords(mesh, params.frequency)
    colors = mesh.colors.copy()
    for c, offset in enumerate(_CHANNEL_OFFSETS):
        colors[:, c] += params.n_tex * noise3(params.seed, coords + offset)
    return replace(mesh, colors=np.clip(colors, 0.0, 1.0))


def geometry_noise(mesh: TriMesh, params: DegradationParams) -> TriMesh:
    """Displace vertices along their normals by bounded gradient noise."""
    if mesh.num_faces == 0 and mesh.normals is None:
        raise ValidationError("geometry noise needs normals or faces to compute them")
    if params.n_geom == 0.0:
        return mesh
    src = mesh if mesh.normals is not None else compute_vertex_normals(mesh)
    coords = _noise_coords(mesh, params.frequency)
    amp = params.n_geom * scene_extent(mesh)
    displaced = mesh.vertices + amp * noise3(params.seed, coords)[:, None] * src.normals
    out = replace(mesh, vertices=displaced, normals=None)
    if out.num_faces:
        out = compute_vertex_normals(out)
    return out
