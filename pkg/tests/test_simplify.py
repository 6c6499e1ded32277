import numpy as np
import pytest

from rephoto.geometry import TriMesh
from rephoto.scene import ValidationError
from rephoto.simplify import simplify


def icosahedron():
    phi = (1 + np.sqrt(5)) / 2
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    rng = np.random.default_rng(0)
    return TriMesh(vertices=verts, faces=faces, colors=rng.uniform(size=(12, 3)))


def subdivided_octahedron(levels=2):
    verts = [np.array(v, dtype=np.float64) for v in
             [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]]
    faces = [(0, 2, 4), (2, 1, 4), (1, 3, 4), (3, 0, 4),
             (2, 0, 5), (1, 2, 5), (3, 1, 5), (0, 3, 5)]
    for _ in range(levels):
        midpoint = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoint:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.asarray(verts)
    rng = np.random.default_rng(1)
    return TriMesh(vertices=v, faces=np.asarray(faces),
                   colors=rng.uniform(size=(len(v), 3)))


def edge_set(faces):
    edges = set()
    for a, b, c in faces:
        edges |= {(min(a, b), max(a, b)), (min(b, c), max(b, c)),
                  (min(c, a), max(c, a))}
    return edges


class TestSimplify:
    def test_zero_fraction_is_identity(self):
        mesh = icosahedron()
        assert simplify(mesh, 0.0) is mesh

    def test_icosahedron_half(self):
        out = simplify(icosahedron(), 0.5, seed=0)
        assert out.num_vertices == 6  # 12 - floor(0.5 * 12)
        assert out.num_faces == 8     # each collapse removes two faces

    def test_exact_vertex_count_on_closed_manifold(self):
        mesh = subdivided_octahedron()
        target = int(np.floor(0.4 * mesh.num_vertices))
        out = simplify(mesh, 0.4, seed=3)
        assert out.num_vertices == mesh.num_vertices - target
        assert out.num_faces == mesh.num_faces - 2 * target

    def test_structural_postconditions(self):
        mesh = subdivided_octahedron()
        out = simplify(mesh, 0.6, seed=1)
        # no degenerate faces, all indices used
        assert all(len(set(f)) == 3 for f in out.faces.tolist())
        assert set(out.faces.ravel().tolist()) == set(range(out.num_vertices))
        # surviving vertices keep their original positions and colors
        orig = {tuple(np.round(v, 12)): tuple(np.round(c, 12))
                for v, c in zip(mesh.vertices, mesh.colors)}
        for v, c in zip(out.vertices, out.colors):
            assert orig[tuple(np.round(v, 12))] == tuple(np.round(c, 12))

    def test_deterministic(self):
        mesh = subdivided_octahedron()
        a = simplify(mesh, 0.5, seed=7)
        b = simplify(mesh, 0.5, seed=7)
        assert np.array_equal(a.vertices, b.vertices)
        assert np.array_equal(a.faces, b.faces)

    def test_preserves_rough_shape(self):
        mesh = subdivided_octahedron(levels=3)
        out = simplify(mesh, 0.7, seed=0)
        # simplified unit sphere stays near the unit sphere
        radii = np.linalg.norm(out.vertices, axis=1)
        assert radii.min() > 0.8 and radii.max() < 1.2
        assert len(edge_set(out.faces.tolist())) * 2 == out.num_faces * 3

    def test_normals_recomputed_when_present(self):
        from rephoto.geometry import compute_vertex_normals
        mesh = compute_vertex_normals(subdivided_octahedron())
        out = simplify(mesh, 0.3, seed=0)
        assert out.normals is not None
        assert out.normals.shape == (out.num_vertices, 3)
        assert np.allclose(np.linalg.norm(out.normals, axis=1), 1.0, atol=1e-9)

    def test_invalid_fraction(self):
        mesh = icosahedron()
        with pytest.raises(ValidationError):
            simplify(mesh, 1.0)
        with pytest.raises(ValidationError):
            simplify(mesh, -0.1)
