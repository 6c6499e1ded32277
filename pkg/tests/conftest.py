from types import SimpleNamespace

import pytest

from rephoto.geometry import load_ply, save_ply
from rephoto.rasterizer import render_mesh
from rephoto.scene import View, ViewManifest, quantize8, save_image, save_manifest

from sceneutil import make_ring_cameras, make_sphere_quad_mesh


@pytest.fixture(scope="session")
def scene_mesh():
    return make_sphere_quad_mesh()


@pytest.fixture(scope="session")
def ring_cameras():
    return make_ring_cameras()


@pytest.fixture(scope="session")
def dataset(tmp_path_factory, scene_mesh, ring_cameras):
    """On-disk dataset: model.ply plus photos rendered from the reloaded model.

    Rendering from the PLY round trip (float32 positions, uchar colors) makes
    the photos bit-reproducible by anyone who loads model.ply and re-renders.
    """
    root = tmp_path_factory.mktemp("dataset")
    model_path = root / "model.ply"
    save_ply(scene_mesh, model_path)
    model = load_ply(model_path)
    views = []
    for k, cam in enumerate(ring_cameras):
        out = render_mesh(model, cam)
        photo_path = root / f"view{k:02d}.png"
        save_image(quantize8(out.color), photo_path)
        views.append(View(id=f"view{k:02d}", photo_path=photo_path, camera=cam))
    manifest = ViewManifest(views=tuple(views))
    manifest_path = root / "manifest.json"
    save_manifest(manifest, manifest_path)
    return SimpleNamespace(root=root, model_path=model_path, model=model,
                           manifest=manifest, manifest_path=manifest_path)
