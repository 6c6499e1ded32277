"""Independent brute-force oracles used to validate the fast implementations.

Everything here is deliberately naive: per-pixel window gathers, O(n^2)
neighbor search, per-pixel ray casting. None of it shares code with the
package internals.
"""

from __future__ import annotations

import numpy as np

FLAT_STD = 1e-6
C1 = 0.01 ** 2
C2 = 0.03 ** 2


def luma(img):
    return 0.299 * img[..., 0] + 0.587 * img[..., 1] + 0.114 * img[..., 2]


def naive_patch_errors(photo, rephoto, mask, patch, min_valid_fraction):
    """Per-pixel ncc/zssd/dssim/census via explicit per-patch window gathering.

    Returns dict of (value, defined) pairs keyed by metric id.
    """
    ya = luma(photo)
    yb = luma(rephoto)
    h, w = mask.shape
    r = patch // 2
    out = {m: (np.zeros((h, w)), np.zeros((h, w), dtype=bool))
           for m in ("ncc", "zssd", "dssim", "census")}
    need = min_valid_fraction * patch * patch
    for cy in range(h):
        ys = slice(max(0, cy - r), min(h, cy + r + 1))
        for cx in range(w):
            if not mask[cy, cx]:
                continue
            xs = slice(max(0, cx - r), min(w, cx + r + 1))
            sub = mask[ys, xs]
            n = int(sub.sum())
            if n < need:
                continue
            a = ya[ys, xs][sub]
            b = yb[ys, xs][sub]
            ma, mb = a.mean(), b.mean()
            va = ((a - ma) ** 2).mean()
            vb = ((b - mb) ** 2).mean()
            cov = ((a - ma) * (b - mb)).mean()
            sa, sb = np.sqrt(va), np.sqrt(vb)

            if sa < FLAT_STD and sb < FLAT_STD:
                ncc_val = 0.0
            elif sa < FLAT_STD or sb < FLAT_STD:
                ncc_val = 1.0
            else:
                ncc_val = min(max(1.0 - cov / (sa * sb), 0.0), 2.0)
            out["ncc"][0][cy, cx] = ncc_val
            out["ncc"][1][cy, cx] = True

            out["zssd"][0][cy, cx] = (((a - ma) - (b - mb)) ** 2).mean()
            out["zssd"][1][cy, cx] = True

            ssim = (((2 * ma * mb + C1) * (2 * cov + C2))
                    / ((ma * ma + mb * mb + C1) * (va + vb + C2)))
            out["dssim"][0][cy, cx] = min(max((1.0 - ssim) / 2.0, 0.0), 1.0)
            out["dssim"][1][cy, cx] = True

            neigh = sub.copy()
            neigh[cy - ys.start, cx - xs.start] = False  # center excluded
            av = ya[ys, xs][neigh]
            bv = yb[ys, xs][neigh]
            cnt = len(av)
            ham = int(((av < ya[cy, cx]) != (bv < yb[cy, cx])).sum())
            out["census"][0][cy, cx] = ham / cnt if cnt else 0.0
            out["census"][1][cy, cx] = True
    return out


def brute_force_knn_radii(points, k, scale=1.0):
    """O(n^2) mean distance to the k nearest neighbors."""
    pts = np.asarray(points, dtype=np.float64)
    n = len(pts)
    radii = np.empty(n)
    for i in range(n):
        d = np.sqrt(((pts - pts[i]) ** 2).sum(axis=1))
        d[i] = np.inf
        radii[i] = scale * np.sort(d)[:k].mean()
    return radii


def point_in_triangle_topleft(px, py, tri):
    """Inside test with the top-left fill rule, written from first principles."""
    (x0, y0), (x1, y1), (x2, y2) = tri
    area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
    if area == 0:
        return False
    if area < 0:
        x1, y1, x2, y2 = x2, y2, x1, y1

    def edge(ax, ay, bx, by):
        w = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
        if w > 0:
            return True
        if w < 0:
            return False
        dy = by - ay
        dx = bx - ax
        return dy < 0 or (dy == 0 and dx > 0)

    return (edge(x0, y0, x1, y1) and edge(x1, y1, x2, y2)
            and edge(x2, y2, x0, y0))


def ray_triangle_depth(camera, px, py, tri_world):
    """Camera-space depth where the pixel ray hits the triangle, or None."""
    R, t = camera.rotation, camera.translation
    v0, v1, v2 = [R @ np.asarray(v, dtype=np.float64) + t for v in tri_world]
    d = np.array([(px - camera.cx) / camera.fx,
                  (py - camera.cy) / camera.fy,
                  1.0])
    e1 = v1 - v0
    e2 = v2 - v0
    pvec = np.cross(d, e2)
    det = e1 @ pvec
    if abs(det) < 1e-14:
        return None
    inv = 1.0 / det
    tvec = -v0
    u = (tvec @ pvec) * inv
    if u < -1e-9 or u > 1 + 1e-9:
        return None
    qvec = np.cross(tvec, e1)
    v = (d @ qvec) * inv
    if v < -1e-9 or u + v > 1 + 1e-9:
        return None
    depth = (e2 @ qvec) * inv
    return depth if depth > 0 else None
