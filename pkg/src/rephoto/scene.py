"""Pinhole cameras, view manifests, and image buffer IO.

Conventions used throughout the package:
  - world-to-camera: x_c = R @ x_w + t, camera looks down +z
  - image origin top-left, pixel centers at integer coordinates
  - RGB images are float64 arrays of shape (H, W, 3) with channels in [0, 1]
  - masks are bool arrays of shape (H, W), True = rendered/valid
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image


class ValidationError(ValueError):
    """An input violates a documented invariant (bad manifest, bad mask, ...)."""


_ORTHO_TOL = 1e-6


@dataclass(frozen=True)
class PinholeCamera:
    """Calibrated pinhole camera (no distortion)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    rotation: np.ndarray      # (3, 3) world-to-camera, row-major
    translation: np.ndarray   # (3,)

    def __post_init__(self):
        R = np.array(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.array(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        if not (self.fx > 0 and self.fy > 0):
            raise ValidationError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValidationError("image dimensions must be >= 1")
        if np.max(np.abs(R @ R.T - np.eye(3))) > _ORTHO_TOL:
            raise ValidationError("rotation matrix is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > _ORTHO_TOL:
            raise ValidationError("rotation must have determinant +1 (no reflections)")
        R.setflags(write=False)
        t.setflags(write=False)

    def camera_space(self, points: np.ndarray) -> np.ndarray:
        """Transform (N, 3) world points into camera space."""
        p = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return p @ self.rotation.T + self.translation

    def project(self, points: np.ndarray):
        """Project world points to the image plane.

        Returns (uv, z, behind): uv is (N, 2) pixel coordinates, z is (N,)
        camera-space depth, behind is (N,) bool flagging z <= 0 (uv values
        are meaningless there; no error is raised).
        """
        xc = self.camera_space(points)
        z = xc[:, 2]
        behind = z <= 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            u = self.fx * xc[:, 0] / z + self.cx
            v = self.fy * xc[:, 1] / z + self.cy
        return np.stack([u, v], axis=-1), z, behind

    def unproject(self, u, v, z) -> np.ndarray:
        """Invert the pinhole mapping: pixel (u, v) at depth z -> world point."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        z = np.asarray(z, dtype=np.float64)
        xc = np.stack([(u - self.cx) * z / self.fx,
                       (v - self.cy) * z / self.fy,
                       z], axis=-1)
        return (np.atleast_2d(xc) - self.translation) @ self.rotation


@dataclass(frozen=True)
class View:
    """One calibrated photo: id, path of the real image, and its camera."""

    id: str
    photo_path: Path
    camera: PinholeCamera


@dataclass(frozen=True)
class ViewManifest:
    """Ordered collection of views with pairwise-distinct ids."""

    views: tuple[View, ...]

    def __post_init__(self):
        if not self.views:
            raise ValidationError("manifest contains no views")
        ids = [v.id for v in self.views]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ValidationError(f"duplicate view ids: {dup}")

    def __len__(self):
        return len(self.views)

    def __iter__(self):
        return iter(self.views)

    @property
    def ids(self) -> list[str]:
        return [v.id for v in self.views]

    def get(self, view_id: str) -> View:
        for v in self.views:
            if v.id == view_id:
                return v
        raise KeyError(view_id)


def load_manifest(path) -> ViewManifest:
    """Load a JSON view manifest; photo paths are resolved relative to it."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ValidationError(f"malformed manifest {path}: {e}") from e
    if not isinstance(data, dict) or "views" not in data:
        raise ValidationError(f"manifest {path} lacks a 'views' list")
    views = []
    for entry in data["views"]:
        try:
            cam = entry["camera"]
            camera = PinholeCamera(
                fx=float(cam["fx"]), fy=float(cam["fy"]),
                cx=float(cam["cx"]), cy=float(cam["cy"]),
                width=int(cam["width"]), height=int(cam["height"]),
                rotation=np.array(cam["R"], dtype=np.float64).reshape(3, 3),
                translation=np.array(cam["t"], dtype=np.float64),
            )
            views.append(View(id=str(entry["id"]),
                              photo_path=path.parent / entry["image"],
                              camera=camera))
        except (KeyError, TypeError) as e:
            raise ValidationError(f"malformed view entry in {path}: {e}") from e
    return ViewManifest(views=tuple(views))


def save_manifest(manifest: ViewManifest, path) -> None:
    """Write a manifest back to JSON (photo paths relative to the file)."""
    path = Path(path)
    entries = []
    for v in manifest:
        c = v.camera
        try:
            image = str(v.photo_path.relative_to(path.parent))
        except ValueError:
            image = str(v.photo_path)
        entries.append({
            "id": v.id,
            "image": image,
            "camera": {
                "width": c.width, "height": c.height,
                "fx": c.fx, "fy": c.fy, "cx": c.cx, "cy": c.cy,
                "R": [float(x) for x in c.rotation.ravel()],
                "t": [float(x) for x in c.translation],
            },
        })
    path.write_text(json.dumps({"views": entries}, indent=2))


# ---------------------------------------------------------------------------
# image buffers

def load_image(path) -> np.ndarray:
    """Load an 8-bit PNG (RGB or gray) as a (H, W, 3) float64 array in [0, 1]."""
    with Image.open(path) as im:
        if im.mode == "L":
            im = im.convert("RGB")
        elif im.mode in ("RGBA", "P", "LA"):
            im = im.convert("RGB")
        elif im.mode != "RGB":
            raise ValidationError(f"unsupported image mode {im.mode!r} in {path}")
        arr = np.asarray(im, dtype=np.float64)
    return arr / 255.0


def save_image(image: np.ndarray, path) -> None:
    """Save a (H, W, 3) float image in [0, 1] as an 8-bit RGB PNG."""
    data = np.round(np.clip(image, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(data, mode="RGB").save(path)


def load_mask(path) -> np.ndarray:
    """Load an 8-bit gray PNG mask; only values 0 and 255 are allowed."""
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        arr = np.asarray(im)
    bad = (arr != 0) & (arr != 255)
    if bad.any():
        raise ValidationError(f"mask {path} contains values other than 0/255")
    return arr == 255


def save_mask(mask: np.ndarray, path) -> None:
    data = np.where(mask, 255, 0).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)


def quantize8(image: np.ndarray) -> np.ndarray:
    """Snap a float image to the 8-bit grid, matching a PNG round trip."""
    return np.round(np.clip(image, 0.0, 1.0) * 255.0) / 255.0


# ---------------------------------------------------------------------------
# PFM (grayscale float maps, used for error images)

def write_pfm(path, values: np.ndarray) -> None:
    """Write a single-channel float map as little-endian 'Pf' PFM (scale -1.0).

    Rows are stored bottom-to-top per the format convention.
    """
    values = np.asarray(values, dtype=np.float32)
    if values.ndim != 2:
        raise ValidationError("PFM writer expects a 2D array")
    h, w = values.shape
    with open(path, "wb") as f:
        f.write(f"Pf\n{w} {h}\n-1.0\n".encode("ascii"))
        f.write(values[::-1].tobytes())


def read_pfm(path) -> np.ndarray:
    """Read a grayscale PFM written by write_pfm (or any 'Pf' file)."""
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header != b"Pf":
            raise ValidationError(f"{path}: not a grayscale PFM file")
        dims = f.readline().decode("ascii")
        m = re.match(r"^\s*(\d+)\s+(\d+)\s*$", dims)
        if not m:
            raise ValidationError(f"{path}: malformed PFM dimensions line")
        w, h = int(m.group(1)), int(m.group(2))
        scale = float(f.readline().decode("ascii").strip())
        data = np.frombuffer(f.read(w * h * 4),
                             dtype="<f4" if scale < 0 else ">f4")
    if data.size != w * h:
        raise ValidationError(f"{path}: truncated PFM payload")
    return data.reshape(h, w)[::-1].astype(np.float64)
