"""Project per-pixel error images onto model vertices for error localization.

Each defined error pixel is splatted to the three corners of the face it was
rendered from, weighted by its barycentric coordinates; per-vertex means are
percentile-normalized and jet-colored for export. Point clouds use the same
machinery with the whole weight going to the splat's point.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from rephoto.geometry import PointCloud, TriMesh, save_ply
from rephoto.metrics import ErrorImage
from rephoto.rasterizer import RenderOutput
from rephoto.scene import ValidationError

UNCOVERED_GRAY = (0.5, 0.5, 0.5)


@dataclass
class VertexErrorField:
    """Accumulated error sum and weight per vertex; mean where weight > 0."""

    sums: np.ndarray
    weights: np.ndarray

    @classmethod
    def zeros(cls, n_vertices: int) -> "VertexErrorField":
        # extended-precision accumulators: a constant error image then yields
        # per-vertex means that round back to that exact constant
        return cls(sums=np.zeros(n_vertices, dtype=np.longdouble),
                   weights=np.zeros(n_vertices, dtype=np.longdouble))

    @property
    def covered(self) -> np.ndarray:
        return self.weights > 0.0

    @property
    def means(self) -> np.ndarray:
        """Per-vertex mean error; NaN where the vertex was never observed."""
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = self.sums / self.weights
            return np.where(self.covered, ratio, np.nan).astype(np.float64)


def accumulate(field: VertexErrorField, geometry, render_output: RenderOutput,
               error_image: ErrorImage) -> VertexErrorField:
    """Splat one view's error image into the field (in place; also returned)."""
    if error_image.value.shape != render_output.mask.shape:
        raise ValidationError("error image dimensions differ from render output")
    is_mesh = isinstance(geometry, TriMesh)
    n = geometry.num_vertices if is_mesh else len(geometry.points)
    if len(field.sums) != n:
        raise ValidationError("field size does not match geometry")
    use = error_image.defined & render_output.mask
    if not use.any():
        return field
    err = error_image.value[use].astype(np.longdouble)
    fid = render_output.faceid[use]
    if is_mesh:
        if fid.max() >= geometry.num_faces:
            raise ValidationError("face index exceeds mesh face count")
        bary = render_output.bary[use].astype(np.longdouble)
        corners = geometry.faces[fid]
        for k in range(3):
            np.add.at(field.sums, corners[:, k], err * bary[:, k])
            np.add.at(field.weights, corners[:, k], bary[:, k])
    else:
        if fid.max() >= n:
            raise ValidationError("splat index exceeds point count")
        np.add.at(field.sums, fid, err)
        np.add.at(field.weights, fid, 1.0)
    return field


def normalize_percentile(means: np.ndarray, lo: float = 2.5, hi: float = 97.5) -> np.ndarray:
    """Map errors to [0, 1] between the lo/hi percentiles, clamping outside.

    If the two percentiles coincide every value maps to 0.
    """
    means = np.asarray(means, dtype=np.float64)
    if means.size == 0:
        raise ValidationError("no defined vertex means to normalize")
    p_lo, p_hi = np.percentile(means, [lo, hi], method="linear")
    if p_lo == p_hi:
        return np.zeros_like(means)
    return np.clip((means - p_lo) / (p_hi - p_lo), 0.0, 1.0)


def jet(t) -> np.ndarray:
    """Piecewise-linear jet colormap on [0, 1]: dark blue -> dark red."""
    t = np.asarray(t, dtype=np.float64)
    r = np.clip(1.5 - np.abs(4.0 * t - 3.0), 0.0, 1.0)
    g = np.clip(1.5 - np.abs(4.0 * t - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - np.abs(4.0 * t - 1.0), 0.0, 1.0)
    return np.stack([r, g, b], axis=-1)


def error_colors(field: VertexErrorField) -> np.ndarray:
    """Jet-colored normalized means; uncovered vertices are mid-gray."""
    covered = field.covered
    if not covered.any():
        raise ValidationError("error field has no covered vertices")
    colors = np.tile(np.asarray(UNCOVERED_GRAY), (len(field.sums), 1))
    means = field.means
    t = normalize_percentile(means[covered])
    colors[covered] = jet(t)
    return colors


def export_error_mesh(geometry, field: VertexErrorField, path) -> None:
    """Write the model with error-coded vertex colors as a PLY file."""
    colors = error_colors(field)
    if isinstance(geometry, TriMesh):
        save_ply(replace(geometry, colors=colors, uvs=None, texture=None), path)
    else:
        save_ply(PointCloud(points=geometry.points, colors=colors,
                            normals=geometry.normals), path)
