"""Deterministic z-buffered software renderer for meshes and splatted clouds.

Fill convention: a pixel is covered iff its center lies inside the projected
triangle, with ties on edges resolved by the top-left rule. The z-buffer
keeps the nearest fragment; exact depth ties go to the lower face index, so
results are independent of traversal order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from rephoto.geometry import PointCloud, TriMesh, scene_extent
from rephoto.scene import PinholeCamera, ValidationError

FACEID_NONE = -1


@dataclass(frozen=True)
class RenderOptions:
    """Rendering knobs; shading is always unlit albedo."""

    texture_filter: str = "bilinear"   # "nearest" | "bilinear"
    backface_culling: bool = False

    def __post_init__(self):
        if self.texture_filter not in ("nearest", "bilinear"):
            raise ValidationError(f"unknown texture filter {self.texture_filter!r}")


@dataclass(frozen=True)
class RenderOutput:
    """Buffers from one rephoto render.

    color: (H, W, 3) in [0, 1]; mask: (H, W) bool; depth: (H, W) camera-space
    z (+inf where invalid); faceid: (H, W) face/splat index (-1 invalid);
    bary: (H, W, 3) perspective-correct barycentrics of the original face.
    """

    color: np.ndarray
    mask: np.ndarray
    depth: np.ndarray
    faceid: np.ndarray
    bary: np.ndarray


def _clip_polygon_near(cam_pts, barys, zs, near):
    """Sutherland-Hodgman clip of one triangle against z = near.

    cam_pts: (3, 3) camera-space vertices; barys: (3, 3) barycentric rows.
    Returns lists of clipped (cam_pt, bary) in winding order (0, 3, or 4 long).
    """
    out = []
    n = 3
    for i in range(n):
        a, b = i, (i + 1) % n
        a_in = zs[a] > near
        b_in = zs[b] > near
        if a_in:
            out.append((cam_pts[a], barys[a]))
        if a_in != b_in:
            t = (near - zs[a]) / (zs[b] - zs[a])
            p = cam_pts[a] + t * (cam_pts[b] - cam_pts[a])
            w = barys[a] + t * (barys[b] - barys[a])
            out.append((p, w))
    return out


def render_mesh(mesh: TriMesh, camera: PinholeCamera,
                opts: RenderOptions | None = None) -> RenderOutput:
    """Render a mesh with perspective-correct vertex-color or UV interpolation."""
    opts = opts or RenderOptions()
    textured = mesh.uvs is not None and mesh.texture is not None
    if not textured and mesh.colors is None:
        raise ValidationError("mesh has neither vertex colors nor uvs+texture")

    W, H = camera.width, camera.height
    zbuf = np.full((H, W), np.inf)
    fidbuf = np.full((H, W), FACEID_NONE, dtype=np.int64)
    barybuf = np.zeros((H, W, 3))

    if mesh.num_faces and mesh.num_vertices:
        near = 1e-6 * scene_extent(mesh)
        xc = camera.camera_space(mesh.vertices)
        eye3 = np.eye(3)
        fx, fy, cx, cy = camera.fx, camera.fy, camera.cx, camera.cy
        faces = mesh.faces
        zs_all = xc[:, 2]
        for fi in range(len(faces)):
            tri = faces[fi]
            tz = zs_all[tri]
            if tz[0] <= near and tz[1] <= near and tz[2] <= near:
                continue
            if tz[0] > near and tz[1] > near and tz[2] > near:
                corners = [(xc[tri[k]], eye3[k]) for k in range(3)]
            else:
                corners = _clip_polygon_near(xc[tri], eye3, tz, near)
                if len(corners) < 3:
                    continue
            # fan-triangulate the clipped polygon (3 or 4 corners)
            for k in range(1, len(corners) - 1):
                sub = (corners[0], corners[k], corners[k + 1])
                _raster_triangle(sub, fi, fx, fy, cx, cy, W, H,
                                 opts.backface_culling, zbuf, fidbuf, barybuf)

    mask = fidbuf != FACEID_NONE
    color = _shade_mesh(mesh, textured, opts, mask, fidbuf, barybuf)
    barybuf[~mask] = 0.0
    return RenderOutput(color=color, mask=mask, depth=zbuf,
                        faceid=fidbuf, bary=barybuf)


def _raster_triangle(sub, fi, fx, fy, cx, cy, W, H, backface_culling,
                     zbuf, fidbuf, barybuf):
    (p0, b0), (p1, b1), (p2, b2) = sub
    z0, z1, z2 = p0[2], p1[2], p2[2]
    x0 = fx * p0[0] / z0 + cx
    y0 = fy * p0[1] / z0 + cy
    x1 = fx * p1[0] / z1 + cx
    y1 = fy * p1[1] / z1 + cy
    x2 = fx * p2[0] / z2 + cx
    y2 = fy * p2[1] / z2 + cy

    area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    # screen-space area > 0 means the face points away from the camera
    # under the y-down convention
    if area == 0.0 or (backface_culling and area > 0.0):
        return
    if area < 0.0:
        # normalize winding for the fill rule; keep attribute pairing
        x1, y1, z1, b1, x2, y2, z2, b2 = x2, y2, z2, b2, x1, y1, z1, b1
        area = -area

    minx = max(0, math.ceil(min(x0, x1, x2)))
    maxx = min(W - 1, math.floor(max(x0, x1, x2)))
    miny = max(0, math.ceil(min(y0, y1, y2)))
    maxy = min(H - 1, math.floor(max(y0, y1, y2)))
    if minx > maxx or miny > maxy:
        return

    px = np.arange(minx, maxx + 1, dtype=np.float64)[None, :]
    py = np.arange(miny, maxy + 1, dtype=np.float64)[:, None]
    # edge functions; w0 pairs with vertex 0 (edge v1->v2), etc.
    w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
    w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
    w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)

    def top_left(ax, ay, bx, by):
        dy = by - ay
        return dy < 0.0 or (dy == 0.0 and bx - ax > 0.0)

    cov = (((w0 > 0) | ((w0 == 0) & top_left(x1, y1, x2, y2)))
           & ((w1 > 0) | ((w1 == 0) & top_left(x2, y2, x0, y0)))
           & ((w2 > 0) | ((w2 == 0) & top_left(x0, y0, x1, y1))))
    if not cov.any():
        return

    l0 = w0 / area
    l1 = w1 / area
    l2 = w2 / area
    inv_z = l0 / z0 + l1 / z1 + l2 / z2
    with np.errstate(divide="ignore", invalid="ignore"):
        z = 1.0 / inv_z

    zsl = zbuf[miny:maxy + 1, minx:maxx + 1]
    fsl = fidbuf[miny:maxy + 1, minx:maxx + 1]
    upd = cov & ((z < zsl) | ((z == zsl) & (fi < fsl)))
    if not upd.any():
        return
    # perspective-correct barycentrics w.r.t. the original (unclipped) face
    bary = (l0[..., None] * (b0 / z0) + l1[..., None] * (b1 / z1)
            + l2[..., None] * (b2 / z2)) * z[..., None]
    zsl[upd] = z[upd]
    fsl[upd] = fi
    barybuf[miny:maxy + 1, minx:maxx + 1][upd] = bary[upd]


def _shade_mesh(mesh, textured, opts, mask, fidbuf, barybuf):
    color = np.zeros(mask.shape + (3,))
    if not mask.any():
        return color
    fid = fidbuf[mask]
    bary = barybuf[mask]
    corners = mesh.faces[fid]  # (N, 3)
    if textured:
        uv = np.einsum("nk,nkc->nc", bary, mesh.uvs[corners])
        color[mask] = sample_texture(mesh.texture, uv, opts.texture_filter)
    else:
        color[mask] = np.einsum("nk,nkc->nc", bary, mesh.colors[corners])
    np.clip(color, 0.0, 1.0, out=color)
    return color


def sample_texture(texture: np.ndarray, uv: np.ndarray, filter: str = "bilinear"):
    """Sample an (H, W, 3) texture at (N, 2) uv coordinates, clamp-to-edge.

    uv (0, 0) maps to the bottom-left of the image, (1, 1) to the top-right;
    texel centers sit at (i + 0.5) / size.
    """
    th, tw = texture.shape[:2]
    x = uv[:, 0] * tw - 0.5
    y = (1.0 - uv[:, 1]) * th - 0.5
    if filter == "nearest":
        xi = np.clip(np.round(x), 0, tw - 1).astype(np.int64)
        yi = np.clip(np.round(y), 0, th - 1).astype(np.int64)
        return texture[yi, xi]
    x0 = np.floor(x)
    y0 = np.floor(y)
    fx = x - x0
    fy = y - y0
    x0 = np.clip(x0, 0, tw - 1).astype(np.int64)
    y0 = np.clip(y0, 0, th - 1).astype(np.int64)
    x1 = np.clip(x0 + 1, 0, tw - 1)
    y1 = np.clip(y0 + 1, 0, th - 1)
    c00 = texture[y0, x0]
    c01 = texture[y0, x1]
    c10 = texture[y1, x0]
    c11 = texture[y1, x1]
    top = c00 * (1 - fx)[:, None] + c01 * fx[:, None]
    bot = c10 * (1 - fx)[:, None] + c11 * fx[:, None]
    return top * (1 - fy)[:, None] + bot * fy[:, None]


def estimate_splat_radii(cloud: PointCloud, k: int = 6, scale: float = 1.0) -> PointCloud:
    """Set each splat radius to scale times the mean distance to its k nearest neighbors."""
    n = len(cloud.points)
    if n < k + 1:
        raise ValidationError(f"need at least {k + 1} points for k={k} neighbor radii")
    tree = cKDTree(cloud.points)
    dists, _ = tree.query(cloud.points, k=k + 1)
    radii = scale * dists[:, 1:].mean(axis=1)
    if np.any(radii <= 0):
        raise ValidationError("duplicate points produce zero splat radii")
    return PointCloud(points=cloud.points, colors=cloud.colors,
                      normals=cloud.normals, radii=radii)


def render_pointcloud(cloud: PointCloud, camera: PinholeCamera,
                      k: int = 6, scale: float = 1.0) -> RenderOutput:
    """Render a point cloud as camera-facing disks with constant color per splat.

    Radii are estimated from local density when absent. The projected radius
    of splat i is fx * r_i / z_i pixels; a pixel belongs to a splat when its
    center lies within that radius of the projected point.
    """
    if len(cloud.points) == 0:
        raise ValidationError("cannot render an empty point cloud")
    if cloud.colors is None:
        raise ValidationError("point cloud has no colors")
    if cloud.radii is None:
        cloud = estimate_splat_radii(cloud, k=k, scale=scale)

    W, H = camera.width, camera.height
    zbuf = np.full((H, W), np.inf)
    fidbuf = np.full((H, W), FACEID_NONE, dtype=np.int64)

    uv, z, behind = camera.project(cloud.points)
    rpix = camera.fx * cloud.radii / np.where(z > 0, z, 1.0)
    for i in range(len(cloud.points)):
        if behind[i]:
            continue
        u, v = uv[i]
        r = rpix[i]
        minx = max(0, math.ceil(u - r))
        maxx = min(W - 1, math.floor(u + r))
        miny = max(0, math.ceil(v - r))
        maxy = min(H - 1, math.floor(v + r))
        if minx > maxx or miny > maxy:
            continue
        px = np.arange(minx, maxx + 1, dtype=np.float64)[None, :]
        py = np.arange(miny, maxy + 1, dtype=np.float64)[:, None]
        cov = (px - u) ** 2 + (py - v) ** 2 <= r * r
        if not cov.any():
            continue
        zsl = zbuf[miny:maxy + 1, minx:maxx + 1]
        fsl = fidbuf[miny:maxy + 1, minx:maxx + 1]
        upd = cov & ((z[i] < zsl) | ((z[i] == zsl) & (i < fsl)))
        zsl[upd] = z[i]
        fsl[upd] = i

    mask = fidbuf != FACEID_NONE
    color = np.zeros((H, W, 3))
    color[mask] = np.clip(cloud.colors[fidbuf[mask]], 0.0, 1.0)
    bary = np.zeros((H, W, 3))
    bary[mask] = (1.0, 0.0, 0.0)
    return RenderOutput(color=color, mask=mask, depth=zbuf,
                        faceid=fidbuf, bary=bary)


def render(geometry, camera: PinholeCamera, opts: RenderOptions | None = None,
           k: int = 6, scale: float = 1.0) -> RenderOutput:
    """Dispatch to the mesh or point-cloud renderer."""
    if isinstance(geometry, TriMesh):
        return render_mesh(geometry, camera, opts)
    return render_pointcloud(geometry, camera, k=k, scale=scale)
