"""Rephoto-based evaluation of 3D reconstructions.

Renders a reconstruction (mesh or splatted point cloud) from held-out
camera poses, scores the renderings against the real photos with masked
image-difference metrics, and projects the per-pixel errors back onto the
model for localization.
"""

from rephoto.scene import PinholeCamera, View, ViewManifest, load_manifest
from rephoto.geometry import TriMesh, PointCloud, Aabb, load_ply, save_ply, load_obj
from rephoto.rasterizer import RenderOptions, RenderOutput, render_mesh, render_pointcloud

__all__ = [
    "PinholeCamera",
    "View",
    "ViewManifest",
    "load_manifest",
    "TriMesh",
    "PointCloud",
    "Aabb",
    "load_ply",
    "save_ply",
    "load_obj",
    "RenderOptions",
    "RenderOutput",
    "render_mesh",
    "render_pointcloud",
]
