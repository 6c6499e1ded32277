import numpy as np
import pytest

from rephoto.errorproj import (
    UNCOVERED_GRAY,
    VertexErrorField,
    accumulate,
    error_colors,
    export_error_mesh,
    jet,
    normalize_percentile,
)
from rephoto.geometry import PointCloud, TriMesh, load_ply
from rephoto.metrics import ErrorImage
from rephoto.rasterizer import RenderOutput, render_mesh
from rephoto.scene import PinholeCamera, ValidationError


def camera(width=64, height=48, f=60.0):
    return PinholeCamera(fx=f, fy=f, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
                         width=width, height=height,
                         rotation=np.eye(3), translation=np.zeros(3))


def visible_triangle():
    verts = np.array([[-1.0, -1.0, 3.0], [1.0, -1.0, 3.0], [0.0, 1.0, 3.0]])
    return TriMesh(vertices=verts, faces=np.array([[0, 1, 2]]),
                   colors=np.tile([0.5, 0.5, 0.5], (3, 1)))


def fake_output(h, w, pixels):
    """RenderOutput with specific (y, x) -> (faceid, bary) assignments."""
    mask = np.zeros((h, w), dtype=bool)
    faceid = np.full((h, w), -1, dtype=np.int64)
    bary = np.zeros((h, w, 3))
    depth = np.full((h, w), np.inf)
    for (y, x), (fid, b) in pixels.items():
        mask[y, x] = True
        faceid[y, x] = fid
        bary[y, x] = b
        depth[y, x] = 1.0
    return RenderOutput(color=np.zeros((h, w, 3)), mask=mask, depth=depth,
                        faceid=faceid, bary=bary)


class TestAccumulate:
    def test_uniform_error_gives_exact_means(self):
        mesh = visible_triangle()
        out = render_mesh(mesh, camera())
        assert out.mask.any()
        err = ErrorImage(value=np.full(out.mask.shape, 0.3), defined=out.mask.copy())
        field = accumulate(VertexErrorField.zeros(3), mesh, out, err)
        assert field.covered.all()
        assert np.all(field.means == 0.3)

    def test_single_pixel_barycentric_split(self):
        mesh = visible_triangle()
        out = fake_output(4, 4, {(1, 2): (0, (0.5, 0.25, 0.25))})
        err = ErrorImage(value=np.full((4, 4), 1.0), defined=out.mask.copy())
        field = accumulate(VertexErrorField.zeros(3), mesh, out, err)
        assert np.allclose(field.sums, [0.5, 0.25, 0.25])
        assert np.allclose(field.weights, [0.5, 0.25, 0.25])
        assert np.allclose(field.means, 1.0)

    def test_accumulation_is_additive(self):
        mesh = visible_triangle()
        out = render_mesh(mesh, camera())
        rng = np.random.default_rng(0)
        e1 = ErrorImage(value=rng.uniform(size=out.mask.shape), defined=out.mask.copy())
        e2 = ErrorImage(value=rng.uniform(size=out.mask.shape), defined=out.mask.copy())
        ab = accumulate(accumulate(VertexErrorField.zeros(3), mesh, out, e1),
                        mesh, out, e2)
        ba = accumulate(accumulate(VertexErrorField.zeros(3), mesh, out, e2),
                        mesh, out, e1)
        assert np.allclose(ab.sums, ba.sums, atol=1e-12)
        assert np.allclose(ab.weights, ba.weights, atol=1e-12)

    def test_undefined_pixels_ignored(self):
        mesh = visible_triangle()
        out = render_mesh(mesh, camera())
        err = ErrorImage(value=np.full(out.mask.shape, 5.0),
                         defined=np.zeros(out.mask.shape, dtype=bool))
        field = accumulate(VertexErrorField.zeros(3), mesh, out, err)
        assert not field.covered.any()
        assert np.isnan(field.means).all()

    def test_pointcloud_full_weight(self):
        cloud = PointCloud(points=np.zeros((2, 3)) + [[0, 0, 1], [1, 0, 1]],
                           colors=np.zeros((2, 3)))
        out = fake_output(4, 4, {(0, 0): (1, (1, 0, 0)), (2, 2): (1, (1, 0, 0))})
        err = ErrorImage(value=np.full((4, 4), 0.25), defined=out.mask.copy())
        field = accumulate(VertexErrorField.zeros(2), cloud, out, err)
        assert field.weights.tolist() == [0.0, 2.0]
        assert field.sums.tolist() == [0.0, 0.5]

    def test_shape_and_size_checks(self):
        mesh = visible_triangle()
        out = render_mesh(mesh, camera())
        err = ErrorImage(value=np.zeros((2, 2)), defined=np.zeros((2, 2), dtype=bool))
        with pytest.raises(ValidationError):
            accumulate(VertexErrorField.zeros(3), mesh, out, err)
        good = ErrorImage(value=np.zeros(out.mask.shape), defined=out.mask.copy())
        with pytest.raises(ValidationError):
            accumulate(VertexErrorField.zeros(7), mesh, out, good)


class TestNormalization:
    def test_degenerate_maps_to_zero(self):
        assert np.all(normalize_percentile(np.full(10, 0.4)) == 0.0)

    def test_matches_quantile_oracle(self):
        vals = np.arange(1.0, 1001.0)
        normed = normalize_percentile(vals)
        lo, hi = np.quantile(vals, [0.025, 0.975], method="linear")
        expected = np.clip((vals - lo) / (hi - lo), 0.0, 1.0)
        assert np.allclose(normed, expected, atol=1e-12)
        assert normed[0] == 0.0 and normed[-1] == 1.0
        mid = (500.0 - lo) / (hi - lo)
        assert abs(normed[499] - mid) < 1e-12

    def test_clamps_outliers(self):
        vals = np.concatenate([np.full(98, 0.5), [100.0, -100.0]])
        normed = normalize_percentile(vals)
        assert normed.min() >= 0.0 and normed.max() <= 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValidationError):
            normalize_percentile(np.array([]))


class TestJet:
    def test_endpoints(self):
        assert np.allclose(jet(0.0), [0.0, 0.0, 0.5])
        assert np.allclose(jet(1.0), [0.5, 0.0, 0.0])

    def test_midpoint(self):
        # r = clip(1.5-|2-3|) = 0.5, g = clip(1.5-|2-2|) -> 1, b = clip(1.5-|2-1|) = 0.5
        assert np.allclose(jet(0.5), [0.5, 1.0, 0.5])

    def test_in_gamut(self):
        colors = jet(np.linspace(0, 1, 101))
        assert colors.min() >= 0.0 and colors.max() <= 1.0


class TestExport:
    def _field_on(self, mesh, scale=1.0, seed=3):
        out = render_mesh(mesh, camera())
        rng = np.random.default_rng(seed)
        err = ErrorImage(value=scale * rng.uniform(size=out.mask.shape),
                         defined=out.mask.copy())
        return accumulate(VertexErrorField.zeros(mesh.num_vertices), mesh, out, err)

    def test_uncovered_vertices_are_gray(self):
        # second triangle sits behind the camera and is never rendered
        verts = np.vstack([visible_triangle().vertices,
                           visible_triangle().vertices - [0, 0, 10]])
        mesh = TriMesh(vertices=verts, faces=np.array([[0, 1, 2], [3, 4, 5]]),
                       colors=np.tile([0.5, 0.5, 0.5], (6, 1)))
        field = self._field_on(mesh)
        assert field.covered.tolist() == [True] * 3 + [False] * 3
        colors = error_colors(field)
        assert np.allclose(colors[3:], UNCOVERED_GRAY)

    def test_error_scale_equivariance(self, tmp_path):
        mesh = visible_triangle()
        a = tmp_path / "a.ply"
        b = tmp_path / "b.ply"
        export_error_mesh(mesh, self._field_on(mesh, scale=1.0), a)
        export_error_mesh(mesh, self._field_on(mesh, scale=10.0), b)
        assert a.read_bytes() == b.read_bytes()

    def test_export_roundtrip(self, tmp_path):
        mesh = visible_triangle()
        field = self._field_on(mesh)
        path = tmp_path / "err.ply"
        export_error_mesh(mesh, field, path)
        back = load_ply(path)
        assert isinstance(back, TriMesh)
        assert back.num_vertices == 3
        assert np.array_equal(back.faces, mesh.faces)
        expected = np.round(np.clip(error_colors(field), 0, 1) * 255) / 255.0
        assert np.max(np.abs(back.colors - expected)) < 1e-12

    def test_pointcloud_export(self, tmp_path):
        cloud = PointCloud(points=np.array([[0.0, 0, 1], [1.0, 0, 1]]),
                           colors=np.zeros((2, 3)))
        field = VertexErrorField.zeros(2)
        out = fake_output(4, 4, {(0, 0): (0, (1, 0, 0)), (1, 1): (1, (1, 0, 0))})
        err = ErrorImage(value=np.array([[0.1] * 4] * 4), defined=out.mask.copy())
        accumulate(field, cloud, out, err)
        path = tmp_path / "cloud.ply"
        export_error_mesh(cloud, field, path)
        back = load_ply(path)
        assert isinstance(back, PointCloud)
        assert back.colors is not None

    def test_no_coverage_rejected(self):
        with pytest.raises(ValidationError):
            error_colors(VertexErrorField.zeros(3))
