"""Mesh and point-cloud containers with PLY/OBJ IO, normals, bounding boxes."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from rephoto.scene import ValidationError, load_image


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box; extent is the diagonal length."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        mn = np.asarray(self.min, dtype=np.float64).reshape(3)
        mx = np.asarray(self.max, dtype=np.float64).reshape(3)
        if np.any(mn > mx):
            raise ValidationError("Aabb min exceeds max")
        object.__setattr__(self, "min", mn)
        object.__setattr__(self, "max", mx)

    @property
    def extent(self) -> float:
        return float(np.linalg.norm(self.max - self.min))


def _as_f64(a, name, cols):
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != cols:
        raise ValidationError(f"{name} must have shape (N, {cols})")
    return arr


@dataclass(frozen=True)
class TriMesh:
    """Triangle mesh with optional per-vertex colors, normals, or UVs+texture.

    Colors and UVs may both be stored; rendering picks one source.
    UVs and texture must be present together.
    """

    vertices: np.ndarray               # (V, 3)
    faces: np.ndarray                  # (F, 3) int
    colors: np.ndarray | None = None   # (V, 3) in [0, 1]
    normals: np.ndarray | None = None  # (V, 3) unit
    uvs: np.ndarray | None = None      # (V, 2) in [0, 1]^2
    texture: np.ndarray | None = None  # (H, W, 3) in [0, 1]

    def __post_init__(self):
        v = _as_f64(self.vertices, "vertices", 3)
        f = np.asarray(self.faces, dtype=np.int64)
        if f.size == 0:
            f = f.reshape(0, 3)
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValidationError("faces must have shape (F, 3)")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValidationError("face index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        for name, cols in (("colors", 3), ("normals", 3), ("uvs", 2)):
            attr = getattr(self, name)
            if attr is not None:
                arr = _as_f64(attr, name, cols)
                if len(arr) != len(v):
                    raise ValidationError(f"{name} length must equal vertex count")
                object.__setattr__(self, name, arr)
        if (self.uvs is None) != (self.texture is None):
            raise ValidationError("uvs and texture must be present together")

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    @property
    def num_faces(self) -> int:
        return len(self.faces)


@dataclass(frozen=True)
class PointCloud:
    """Oriented colored point set; radii are per-point splat radii (world units)."""

    points: np.ndarray                 # (N, 3)
    colors: np.ndarray | None = None   # (N, 3) in [0, 1]
    normals: np.ndarray | None = None  # (N, 3)
    radii: np.ndarray | None = None    # (N,) > 0

    def __post_init__(self):
        p = _as_f64(self.points, "points", 3)
        object.__setattr__(self, "points", p)
        for name in ("colors", "normals"):
            attr = getattr(self, name)
            if attr is not None:
                arr = _as_f64(attr, name, 3)
                if len(arr) != len(p):
                    raise ValidationError(f"{name} length must equal point count")
                object.__setattr__(self, name, arr)
        if self.radii is not None:
            r = np.asarray(self.radii, dtype=np.float64).reshape(-1)
            if len(r) != len(p):
                raise ValidationError("radii length must equal point count")
            if np.any(r <= 0):
                raise ValidationError("splat radii must be strictly positive")
            object.__setattr__(self, "radii", r)


def bounding_box(geometry) -> Aabb:
    """Tight componentwise bounding box of a mesh or point cloud."""
    pts = geometry.vertices if isinstance(geometry, TriMesh) else geometry.points
    if len(pts) == 0:
        raise ValidationError("cannot bound empty geometry")
    return Aabb(min=pts.min(axis=0), max=pts.max(axis=0))


def scene_extent(geometry) -> float:
    """Bounding-box diagonal length; the scale reference for noise and clipping."""
    return bounding_box(geometry).extent


def vertex_normals(vertices: np.ndarray, faces: np.ndarray):
    """Area-weighted per-vertex normals.

    Returns (normals, degenerate): vertices whose accumulated normal has
    (near-)zero length get (0, 0, 1) and are flagged in `degenerate`.
    """
    v = np.asarray(vertices, dtype=np.float64)
    f = np.asarray(faces, dtype=np.int64)
    acc = np.zeros_like(v)
    if len(f):
        e1 = v[f[:, 1]] - v[f[:, 0]]
        e2 = v[f[:, 2]] - v[f[:, 0]]
        fn = np.cross(e1, e2)  # length = 2 * face area
        for k in range(3):
            np.add.at(acc, f[:, k], fn)
    norms = np.linalg.norm(acc, axis=1)
    degenerate = norms < 1e-20
    out = np.empty_like(acc)
    out[degenerate] = (0.0, 0.0, 1.0)
    out[~degenerate] = acc[~degenerate] / norms[~degenerate, None]
    return out, degenerate


def compute_vertex_normals(mesh: TriMesh) -> TriMesh:
    """Return the mesh with freshly computed area-weighted vertex normals."""
    if mesh.num_faces < 1:
        raise ValidationError("normals require at least one face")
    normals, _ = vertex_normals(mesh.vertices, mesh.faces)
    return replace(mesh, normals=normals)


# ---------------------------------------------------------------------------
# PLY

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


def _parse_ply_header(f):
    if f.readline().strip() != b"ply":
        raise ValidationError("not a PLY file")
    fmt = None
    elements = []  # (name, count, [(prop_name, dtype) or ('list', count_t, item_t, name)])
    while True:
        line = f.readline()
        if not line:
            raise ValidationError("PLY header missing end_header")
        tokens = line.decode("ascii", "replace").split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            fmt = tokens[1]
        elif tokens[0] == "element":
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise ValidationError("PLY property before any element")
            props = elements[-1][2]
            if tokens[1] == "list":
                props.append(("list", tokens[2], tokens[3], tokens[4]))
            else:
                props.append((tokens[2], tokens[1]))
        elif tokens[0] == "end_header":
            break
    if fmt not in ("ascii", "binary_little_endian"):
        raise ValidationError(f"unsupported PLY format {fmt!r}")
    return fmt, elements


def _ply_vertex_arrays(names, columns):
    """Assemble vertex attributes from parsed per-property columns."""
    def col(n):
        return columns[names.index(n)]

    for req in ("x", "y", "z"):
        if req not in names:
            raise ValidationError("PLY vertex element lacks x/y/z")
    pts = np.stack([col("x"), col("y"), col("z")], axis=1).astype(np.float64)
    colors = None
    if all(n in names for n in ("red", "green", "blue")):
        colors = np.stack([col("red"), col("green"), col("blue")], axis=1)
        colors = colors.astype(np.float64) / 255.0
    normals = None
    if all(n in names for n in ("nx", "ny", "nz")):
        normals = np.stack([col("nx"), col("ny"), col("nz")], axis=1).astype(np.float64)
    return pts, colors, normals


def load_ply(path):
    """Load a PLY file; returns a TriMesh, or a PointCloud if it has no faces."""
    path = Path(path)
    with open(path, "rb") as f:
        fmt, elements = _parse_ply_header(f)
        data = {}
        props_by_name = {}
        reader = _read_ply_ascii_element if fmt == "ascii" else _read_ply_binary_element
        for name, count, props in elements:
            props_by_name[name] = props
            data[name] = reader(f, count, props)
    if "vertex" not in data:
        raise ValidationError(f"{path}: PLY has no vertex element")
    vnames = [p[0] for p in props_by_name["vertex"]]
    pts, colors, normals = _ply_vertex_arrays(vnames, data["vertex"])
    faces = None
    if "face" in data and data["face"]:
        faces = data["face"][0]
    if faces is None or len(faces) == 0:
        return PointCloud(points=pts, colors=colors, normals=normals)
    faces = np.asarray(faces, dtype=np.int64)
    if faces.size and (faces.min() < 0 or faces.max() >= len(pts)):
        raise ValidationError(f"{path}: face index out of range")
    return TriMesh(vertices=pts, faces=faces, colors=colors, normals=normals)


def _read_ply_ascii_element(f, count, props):
    is_list = any(p[0] == "list" for p in props)
    if is_list:
        if len(props) != 1:
            raise ValidationError("mixed list/scalar PLY elements are unsupported")
        faces = []
        for _ in range(count):
            tok = f.readline().split()
            n = int(tok[0])
            idx = [int(x) for x in tok[1:1 + n]]
            for k in range(1, n - 1):  # fan-triangulate polygons
                faces.append((idx[0], idx[k], idx[k + 1]))
        return [np.asarray(faces, dtype=np.int64).reshape(-1, 3)]
    rows = np.empty((count, len(props)), dtype=np.float64)
    for i in range(count):
        tok = f.readline().split()
        if len(tok) < len(props):
            raise ValidationError("truncated PLY ascii element")
        rows[i] = [float(x) for x in tok[:len(props)]]
    return [rows[:, j] for j in range(len(props))]


def _read_ply_binary_element(f, count, props):
    is_list = any(p[0] == "list" for p in props)
    if not is_list:
        try:
            dt = np.dtype([(f"c{j}", "<" + _PLY_TYPES[t]) for j, (_, t) in enumerate(props)])
        except KeyError as e:
            raise ValidationError(f"unsupported PLY property type {e}") from e
        buf = f.read(dt.itemsize * count)
        if len(buf) != dt.itemsize * count:
            raise ValidationError("truncated PLY binary element")
        rec = np.frombuffer(buf, dtype=dt)
        return [rec[f"c{j}"].astype(np.float64) for j in range(len(props))]
    if len(props) != 1:
        raise ValidationError("mixed list/scalar PLY elements are unsupported")
    _, count_t, item_t, _ = props[0]
    cdt = np.dtype("<" + _PLY_TYPES[count_t])
    idt = np.dtype("<" + _PLY_TYPES[item_t])
    # fast path: all faces are triangles with fixed-size records
    rec_size = cdt.itemsize + 3 * idt.itemsize
    pos = f.tell()
    buf = f.read(rec_size * count)
    if len(buf) == rec_size * count:
        rec = np.frombuffer(buf, dtype=np.dtype([("n", cdt), ("idx", idt, (3,))]))
        if count == 0 or np.all(rec["n"] == 3):
            return [rec["idx"].astype(np.int64)]
    # general path: variable-length polygons, fan-triangulated
    f.seek(pos)
    faces = []
    for _ in range(count):
        n = int(np.frombuffer(f.read(cdt.itemsize), dtype=cdt)[0])
        idx = np.frombuffer(f.read(n * idt.itemsize), dtype=idt).astype(np.int64)
        for k in range(1, n - 1):
            faces.append((idx[0], idx[k], idx[k + 1]))
    return [np.asarray(faces, dtype=np.int64).reshape(-1, 3)]


def save_ply(geometry, path, binary: bool = True) -> None:
    """Write a TriMesh or PointCloud as PLY (binary little-endian by default).

    Positions/normals are stored as float32, colors as uchar.
    """
    is_mesh = isinstance(geometry, TriMesh)
    pts = geometry.vertices if is_mesh else geometry.points
    colors = geometry.colors
    normals = geometry.normals
    nv = len(pts)
    header = ["ply",
              "format binary_little_endian 1.0" if binary else "format ascii 1.0",
              f"element vertex {nv}",
              "property float x", "property float y", "property float z"]
    if normals is not None:
        header += ["property float nx", "property float ny", "property float nz"]
    if colors is not None:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    if is_mesh:
        header += [f"element face {geometry.num_faces}",
                   "property list uchar int vertex_indices"]
    header.append("end_header")

    cols8 = None
    if colors is not None:
        cols8 = np.round(np.clip(colors, 0, 1) * 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            fields = [("xyz", "<f4", (3,))]
            if normals is not None:
                fields.append(("n", "<f4", (3,)))
            if colors is not None:
                fields.append(("rgb", "u1", (3,)))
            rec = np.empty(nv, dtype=np.dtype(fields))
            rec["xyz"] = pts.astype(np.float32)
            if normals is not None:
                rec["n"] = normals.astype(np.float32)
            if colors is not None:
                rec["rgb"] = cols8
            f.write(rec.tobytes())
            if is_mesh:
                frec = np.empty(geometry.num_faces, dtype=np.dtype([("n", "u1"), ("idx", "<i4", (3,))]))
                frec["n"] = 3
                frec["idx"] = geometry.faces.astype(np.int32)
                f.write(frec.tobytes())
        else:
            for i in range(nv):
                parts = [repr(float(np.float32(x))) for x in pts[i]]
                if normals is not None:
                    parts += [repr(float(np.float32(x))) for x in normals[i]]
                if colors is not None:
                    parts += [str(int(x)) for x in cols8[i]]
                f.write((" ".join(parts) + "\n").encode("ascii"))
            if is_mesh:
                for face in geometry.faces:
                    f.write(f"3 {face[0]} {face[1]} {face[2]}\n".encode("ascii"))


# ---------------------------------------------------------------------------
# OBJ (+MTL with a single diffuse texture map)

def _parse_mtl(path: Path) -> Path | None:
    texture = None
    for line in path.read_text().splitlines():
        tok = line.split()
        if len(tok) >= 2 and tok[0] == "map_Kd":
            texture = path.parent / tok[-1]
    return texture


def load_obj(path) -> TriMesh:
    """Load an OBJ mesh, splitting vertices on UV seams and fan-triangulating.

    A texture is attached when an MTL with map_Kd is referenced; otherwise
    the mesh has neither uvs nor texture (rendering it will then require
    vertex colors, which OBJ does not carry here).
    """
    path = Path(path)
    positions: list[list[float]] = []
    texcoords: list[list[float]] = []
    face_tokens: list[list[str]] = []
    mtl_texture: Path | None = None
    for line in path.read_text().splitlines():
        tok = line.split()
        if not tok or tok[0].startswith("#"):
            continue
        if tok[0] == "v":
            positions.append([float(x) for x in tok[1:4]])
        elif tok[0] == "vt":
            texcoords.append([float(tok[1]), float(tok[2])])
        elif tok[0] == "f":
            face_tokens.append(tok[1:])
        elif tok[0] == "mtllib":
            mtl = path.parent / tok[1]
            if mtl.exists():
                mtl_texture = _parse_mtl(mtl)

    texture = None
    if mtl_texture is not None:
        if not mtl_texture.exists():
            raise ValidationError(f"texture file not found: {mtl_texture}")
        texture = load_image(mtl_texture)
    use_uv = texture is not None and texcoords

    pair_index: dict[tuple[int, int], int] = {}
    out_pos: list[list[float]] = []
    out_uv: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []

    def corner(token: str) -> int:
        parts = token.split("/")
        vi = int(parts[0])
        vi = vi - 1 if vi > 0 else len(positions) + vi
        if vi < 0 or vi >= len(positions):
            raise ValidationError(f"face references undefined vertex {token!r}")
        ti = -1
        if use_uv and len(parts) > 1 and parts[1]:
            ti = int(parts[1])
            ti = ti - 1 if ti > 0 else len(texcoords) + ti
            if ti < 0 or ti >= len(texcoords):
                raise ValidationError(f"face references undefined texcoord {token!r}")
        key = (vi, ti)
        if key not in pair_index:
            pair_index[key] = len(out_pos)
            out_pos.append(positions[vi])
            out_uv.append(texcoords[ti] if ti >= 0 else [0.0, 0.0])
        return pair_index[key]

    for tok in face_tokens:
        idx = [corner(t) for t in tok]
        for k in range(1, len(idx) - 1):
            faces.append((idx[0], idx[k], idx[k + 1]))

    verts = np.asarray(out_pos, dtype=np.float64).reshape(-1, 3)
    return TriMesh(
        vertices=verts,
        faces=np.asarray(faces, dtype=np.int64).reshape(-1, 3),
        uvs=np.asarray(out_uv, dtype=np.float64).reshape(-1, 2) if use_uv else None,
        texture=texture if use_uv else None,
    )
