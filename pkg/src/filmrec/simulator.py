"""Analytic generator of warped grid-film photos with ground-truth maps.

The film is a regular control mesh in camera space, displaced by a handful of
random low-frequency cosine modes, tilted rigidly and viewed by a pinhole
camera looking down +z. Screen coordinates are continuous with pixel edges on
integers, so pixel ``(x, y)`` has its center at ``(x + 0.5, y + 0.5)``.

Texture coordinates ``(u, v)`` run left to right and top to bottom. Each mesh
quad is split along its ``(i, j)-(i+1, j+1)`` diagonal, in texture space and in
screen space alike, so the rendered UV map and the texture-space backward map
are exact piecewise-affine inverses of one another.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import core
from .maptrans import bilinear_sample

MAX_ATTEMPTS = 100


class ConfigError(ValueError):
    pass


class RejectionExhaustedError(RuntimeError):
    pass


class FoldError(ValueError):
    pass


@dataclass(frozen=True)
class TextureConfig:
    grid_cols: int = 4
    grid_rows: int = 4
    cell_px: int = 64
    border_px: int = 8
    seed: int = 0

    def validate(self) -> None:
        if self.grid_cols < 1 or self.grid_rows < 1:
            raise ConfigError("grid must have at least one cell per axis")
        if self.cell_px < 16:
            raise ConfigError(f"cell_px must be >= 16, got {self.cell_px}")
        if self.border_px < 0:
            raise ConfigError("border_px must be non-negative")

    @property
    def width(self) -> int:
        return self.grid_cols * self.cell_px + 2 * self.border_px

    @property
    def height(self) -> int:
        return self.grid_rows * self.cell_px + 2 * self.border_px


@dataclass(frozen=True)
class SceneConfig:
    out_w: int = 256
    out_h: int = 256
    camera_f: float = 307.2
    tilt_deg_max: float = 15.0
    light_dir: tuple[float, float, float] = (0.0, 0.0, -1.0)
    ambient: float = 0.6
    diffuse: float = 0.4
    tint: tuple[float, float, float] = (1.0, 1.0, 1.0)
    background_seed: int = 0
    deform_modes: int = 3
    deform_amp: float = 0.08
    #: fraction of the frame spanned by the flat, untilted film along its tighter axis
    coverage: float = 0.75
    #: random in-frame placement offset, as a fraction of the frame size
    shift_max: float = 0.04
    mesh_nx: int = 25
    mesh_ny: int = 25

    def validate(self) -> None:
        if self.out_w < 1 or self.out_h < 1:
            raise ConfigError("output size must be positive")
        if self.camera_f <= 0:
            raise ConfigError("camera_f must be positive")
        if not (0 <= self.ambient <= 1 and 0 <= self.diffuse <= 1):
            raise ConfigError("ambient and diffuse must lie in [0, 1]")
        if self.ambient + self.diffuse > 1.5:
            raise ConfigError("ambient + diffuse must not exceed 1.5")
        if not 0 <= self.deform_amp <= 0.15:
            raise ConfigError(f"deform_amp must lie in [0, 0.15], got {self.deform_amp}")
        if self.deform_modes < 0:
            raise ConfigError("deform_modes must be non-negative")
        if not 0 < self.coverage <= 1:
            raise ConfigError("coverage must lie in (0, 1]")
        if self.mesh_nx < 2 or self.mesh_ny < 2:
            raise ConfigError("mesh needs at least 2x2 control vertices")
        n = np.linalg.norm(self.light_dir)
        if not np.isfinite(n) or abs(n - 1.0) > 1e-6:
            raise ConfigError("light_dir must be a unit vector")

    def rest_distance(self, aspect: float) -> float:
        scale = self.coverage * min(self.out_w, self.out_h / aspect)
        return self.camera_f / scale


@dataclass
class ControlMesh:
    """Regular grid of camera-space control vertices.

    ``vertices`` has shape ``(ny, nx, 3)`` and ``uvs`` shape ``(ny, nx, 2)``;
    the vertex at row ``j`` and column ``i`` has texture coordinate
    ``(i / (nx - 1), j / (ny - 1))``.
    """

    nx: int
    ny: int
    vertices: np.ndarray
    uvs: np.ndarray = field(default=None)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64).reshape(self.ny, self.nx, 3)
        if self.uvs is None:
            self.uvs = lattice_uvs(self.nx, self.ny)


@dataclass
class Sample:
    image: np.ndarray
    m3d: np.ndarray
    normal: np.ndarray
    depth: np.ndarray
    uv: np.ndarray
    albedo: np.ndarray
    bgmask: np.ndarray
    backward_gt: np.ndarray
    meta: dict = field(default_factory=dict)

    MAPS = ("m3d", "normal", "depth", "uv", "albedo", "bgmask")


def lattice_uvs(nx: int, ny: int) -> np.ndarray:
    v, u = np.mgrid[0:ny, 0:nx]
    return np.stack([u / (nx - 1), v / (ny - 1)], axis=-1).astype(np.float64)


def mesh_triangles(nx: int, ny: int) -> np.ndarray:
    """``(T, 3)`` flat vertex indices; quad ``(i, j)`` yields ``(00, 10, 11)`` and ``(00, 11, 01)``."""
    j, i = np.mgrid[0:ny - 1, 0:nx - 1]
    v00 = (j * nx + i).ravel()
    v10 = v00 + 1
    v01 = v00 + nx
    v11 = v01 + 1
    a = np.stack([v00, v10, v11], axis=1)
    b = np.stack([v00, v11, v01], axis=1)
    return np.stack([a, b], axis=1).reshape(-1, 3)


# --- texture -------------------------------------------------------------------

def _ellipse(h: int, w: int, cx, cy, ax, ay, theta) -> np.ndarray:
    y, x = np.mgrid[0:h, 0:w] + 0.5
    c, s = np.cos(theta), np.sin(theta)
    dx, dy = x - cx, y - cy
    xr = (c * dx + s * dy) / ax
    yr = (-s * dx + c * dy) / ay
    return xr * xr + yr * yr <= 1.0


def _phantom(rng: np.random.Generator, n: int) -> np.ndarray:
    """Head-slice-like phantom: bright skull ring, mid-gray brain, a few inner blobs."""
    cell = np.full((n, n), 0.06)
    cx = n / 2 + rng.uniform(-0.05, 0.05) * n
    cy = n / 2 + rng.uniform(-0.05, 0.05) * n
    ax = rng.uniform(0.30, 0.40) * n
    ay = rng.uniform(0.36, 0.44) * n
    th = rng.uniform(-0.3, 0.3)
    ring = rng.uniform(0.06, 0.10)
    cell[_ellipse(n, n, cx, cy, ax, ay, th)] = rng.uniform(0.85, 0.98)
    cell[_ellipse(n, n, cx, cy, ax * (1 - ring), ay * (1 - ring), th)] = rng.uniform(0.38, 0.5)
    for _ in range(int(rng.integers(2, 6))):
        r = rng.uniform(0.0, 0.55)
        phi = rng.uniform(0, 2 * np.pi)
        ex = cx + r * ax * np.cos(phi)
        ey = cy + r * ay * np.sin(phi)
        sa = rng.uniform(0.05, 0.18) * n
        sb = rng.uniform(0.05, 0.18) * n
        cell[_ellipse(n, n, ex, ey, sa, sb, rng.uniform(0, np.pi))] = rng.uniform(0.15, 0.75)
    return ndimage.gaussian_filter(cell, 0.7)


def gen_texture(cfg: TextureConfig) -> np.ndarray:
    """1-channel film texture: white frame, light separator lines, one phantom per cell."""
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    tex = np.ones((cfg.height, cfg.width))
    b, n = cfg.border_px, cfg.cell_px
    for r in range(cfg.grid_rows):
        for c in range(cfg.grid_cols):
            y0, x0 = b + r * n, b + c * n
            cell = _phantom(rng, n)
            cell[[0, -1], :] = 0.75
            cell[:, [0, -1]] = 0.75
            tex[y0:y0 + n, x0:x0 + n] = cell
    return tex[:, :, None].astype(np.float32)


# --- mesh ----------------------------------------------------------------------

def _rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    axis = axis / np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * k @ k


def flat_mesh(scene: SceneConfig, aspect: float = 1.0, offset_px=(0.0, 0.0),
              distance: float | None = None) -> ControlMesh:
    """Fronto-parallel film at ``distance``, centered and shifted by ``offset_px`` on screen."""
    nx, ny = scene.mesh_nx, scene.mesh_ny
    uv = lattice_uvs(nx, ny)
    z0 = scene.rest_distance(aspect) if distance is None else distance
    v = np.empty((ny, nx, 3))
    v[..., 0] = uv[..., 0] - 0.5 + offset_px[0] * z0 / scene.camera_f
    v[..., 1] = (uv[..., 1] - 0.5) * aspect + offset_px[1] * z0 / scene.camera_f
    v[..., 2] = z0
    return ControlMesh(nx, ny, v, uv)


def project(vertices: np.ndarray, scene: SceneConfig) -> np.ndarray:
    """Continuous screen coordinates (pixel edges on integers) of camera-space points."""
    v = np.asarray(vertices, dtype=np.float64)
    z = v[..., 2]
    sx = scene.camera_f * v[..., 0] / z + scene.out_w / 2
    sy = scene.camera_f * v[..., 1] / z + scene.out_h / 2
    return np.stack([sx, sy], axis=-1)


def signed_areas(points2d: np.ndarray, tris: np.ndarray) -> np.ndarray:
    p = points2d.reshape(-1, 2)
    a, b, c = p[tris[:, 0]], p[tris[:, 1]], p[tris[:, 2]]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def has_fold(mesh: ControlMesh, scene: SceneConfig) -> bool:
    if np.any(mesh.vertices[..., 2] <= 0):
        return True
    area = signed_areas(project(mesh.vertices, scene), mesh_triangles(mesh.nx, mesh.ny))
    return not (np.all(area > 0) or np.all(area < 0))


def _in_frame(mesh: ControlMesh, scene: SceneConfig, margin: float = 1.0) -> bool:
    s = project(mesh.vertices, scene)
    return bool(np.all(s[..., 0] >= margin) and np.all(s[..., 0] <= scene.out_w - margin)
                and np.all(s[..., 1] >= margin) and np.all(s[..., 1] <= scene.out_h - margin))


def _cosine_field(rng, u, v, modes: int, amp: float, fmax: float = 1.5):
    out = np.zeros_like(u)
    for _ in range(modes):
        fx, fy = rng.uniform(-fmax, fmax, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        a = amp * rng.uniform(0.4, 1.0) / modes
        out += a * np.cos(2 * np.pi * (fx * u + fy * v) + phase)
    return out


def gen_mesh(scene: SceneConfig, seed: int, aspect: float = 1.0) -> ControlMesh:
    """Random smooth deformation of the flat film that passes the no-fold check.

    The z displacement sums ``deform_modes`` cosine modes whose amplitudes stay
    below ``deform_amp``; in-plane jitter stays below ``deform_amp / 2``. The
    deformed film is tilted rigidly by at most ``tilt_deg_max`` about a random
    in-plane axis and must project inside the frame.
    """
    scene.validate()
    rng = np.random.default_rng(seed)
    nx, ny = scene.mesh_nx, scene.mesh_ny
    uv = lattice_uvs(nx, ny)
    u, v = uv[..., 0], uv[..., 1]
    z0 = scene.rest_distance(aspect)
    for _ in range(MAX_ATTEMPTS):
        amp = scene.deform_amp
        dz = _cosine_field(rng, u, v, scene.deform_modes, amp)
        dx = _cosine_field(rng, u, v, 1, amp / 2, fmax=1.0)
        dy = _cosine_field(rng, u, v, 1, amp / 2, fmax=1.0)
        local = np.stack([u - 0.5 + dx, (v - 0.5) * aspect + dy, dz], axis=-1)
        axis_angle = rng.uniform(0, 2 * np.pi)
        tilt = np.radians(rng.uniform(-1, 1) * scene.tilt_deg_max)
        rot = _rotation(np.array([np.cos(axis_angle), np.sin(axis_angle), 0.0]), tilt)
        off = rng.uniform(-1, 1, size=2) * scene.shift_max * np.array([scene.out_w, scene.out_h])
        centre = np.array([off[0] * z0 / scene.camera_f, off[1] * z0 / scene.camera_f, z0])
        mesh = ControlMesh(nx, ny, local @ rot.T + centre, uv)
        if not has_fold(mesh, scene) and _in_frame(mesh, scene):
            return mesh
    raise RejectionExhaustedError(
        f"no fold-free in-frame mesh after {MAX_ATTEMPTS} attempts; "
        f"deform_amp={scene.deform_amp}, tilt_deg_max={scene.tilt_deg_max}")


# --- rasterization -------------------------------------------------------------

def rasterize(screen: np.ndarray, cam_z: np.ndarray, tris: np.ndarray, w: int, h: int):
    """Point-sample triangles at pixel centers.

    Returns ``(tri_id, bary)`` where ``tri_id`` is ``(h, w)`` with -1 on
    uncovered pixels and ``bary`` is ``(h, w, 3)``. Overlaps resolve to the
    nearest camera-space depth, ties to the lower triangle index.
    """
    p = screen.reshape(-1, 2)
    z = cam_z.ravel()
    tri_id = np.full((h, w), -1, dtype=np.int64)
    bary = np.zeros((h, w, 3))
    zbuf = np.full((h, w), np.inf)
    eps = 1e-9
    for t, (ia, ib, ic) in enumerate(tris):
        a, b, c = p[ia], p[ib], p[ic]
        det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if det == 0:
            continue
        lo = np.minimum(np.minimum(a, b), c)
        hi = np.maximum(np.maximum(a, b), c)
        x0 = max(int(np.ceil(lo[0] - 0.5)), 0)
        x1 = min(int(np.floor(hi[0] - 0.5)), w - 1)
        y0 = max(int(np.ceil(lo[1] - 0.5)), 0)
        y1 = min(int(np.floor(hi[1] - 0.5)), h - 1)
        if x1 < x0 or y1 < y0:
            continue
        ys, xs = np.mgrid[y0:y1 + 1, x0:x1 + 1]
        px = xs + 0.5
        py = ys + 0.5
        l1 = ((px - a[0]) * (c[1] - a[1]) - (py - a[1]) * (c[0] - a[0])) / det
        l2 = ((b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0])) / det
        l0 = 1.0 - l1 - l2
        inside = (l0 >= -eps) & (l1 >= -eps) & (l2 >= -eps)
        if not inside.any():
            continue
        zz = l0 * z[ia] + l1 * z[ib] + l2 * z[ic]
        sub_z = zbuf[y0:y1 + 1, x0:x1 + 1]
        win = inside & (zz < sub_z)
        if not win.any():
            continue
        sub_z[win] = zz[win]
        tri_id[y0:y1 + 1, x0:x1 + 1][win] = t
        bsub = bary[y0:y1 + 1, x0:x1 + 1]
        bsub[win] = np.stack([l0[win], l1[win], l2[win]], axis=-1)
    return tri_id, bary


def _interp(attr: np.ndarray, tris: np.ndarray, tri_id: np.ndarray, bary: np.ndarray,
            mask: np.ndarray) -> np.ndarray:
    a = attr.reshape(-1, attr.shape[-1])
    out = np.zeros(tri_id.shape + (a.shape[1],))
    verts = tris[tri_id[mask]]
    out[mask] = np.einsum("nk,nkc->nc", bary[mask], a[verts])
    return out


def vertex_normals(mesh: ControlMesh) -> np.ndarray:
    """Area-weighted vertex normals facing the camera (negative z), shape ``(ny, nx, 3)``."""
    v = mesh.vertices.reshape(-1, 3)
    tris = mesh_triangles(mesh.nx, mesh.ny)
    a, b, c = v[tris[:, 0]], v[tris[:, 1]], v[tris[:, 2]]
    face = -np.cross(b - a, c - a)
    acc = np.zeros_like(v)
    for k in range(3):
        np.add.at(acc, tris[:, k], face)
    acc /= np.linalg.norm(acc, axis=1, keepdims=True)
    return acc.reshape(mesh.ny, mesh.nx, 3)


def gen_background(scene: SceneConfig) -> np.ndarray:
    """Dim, smooth, slightly colored clutter; every sample stays within [0.02, 0.18]."""
    rng = np.random.default_rng(scene.background_seed)
    h, w = scene.out_h, scene.out_w
    sigma = max(h, w) / 16
    noise = ndimage.gaussian_filter(rng.random((h, w, 3)), sigma=(sigma, sigma, 0))
    noise = (noise - noise.min()) / max(noise.max() - noise.min(), 1e-12)
    gy, gx = np.mgrid[0:h, 0:w] / max(h, w)
    g = rng.uniform(-1, 1, size=2)
    grad = 0.5 + 0.5 * np.tanh(g[0] * (gx - 0.5) + g[1] * (gy - 0.5))
    base = 0.6 * noise + 0.4 * grad[:, :, None] * rng.uniform(0.7, 1.0, size=3)
    return (0.02 + 0.16 * np.clip(base, 0, 1)).astype(np.float32)


def _bbox_normalize(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    ext = hi - lo
    safe = np.where(ext > 1e-12, ext, 1.0)
    out = (x - lo) / safe
    return np.where(ext > 1e-12, out, 0.5)


def render_sample(tex, mesh: ControlMesh, scene: SceneConfig) -> Sample:
    scene.validate()
    tex = core.as_raster(tex, 1)
    w, h = scene.out_w, scene.out_h
    tris = mesh_triangles(mesh.nx, mesh.ny)
    screen = project(mesh.vertices, scene)
    tri_id, bary = rasterize(screen, mesh.vertices[..., 2], tris, w, h)
    m = tri_id >= 0

    uv = _interp(mesh.uvs, tris, tri_id, bary, m)
    pos = _interp(mesh.vertices, tris, tri_id, bary, m)
    nrm = _interp(vertex_normals(mesh), tris, tri_id, bary, m)
    nlen = np.linalg.norm(nrm, axis=-1, keepdims=True)
    nrm = np.divide(nrm, nlen, out=np.zeros_like(nrm), where=nlen > 0)

    verts = mesh.vertices.reshape(-1, 3)
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    m3d = np.where(m[..., None], _bbox_normalize(pos, lo, hi), 0.0)
    zmax = float(hi[2])
    depth = np.where(m, pos[..., 2] / zmax, 0.0)[..., None]

    th, tw = tex.shape[:2]
    albedo = np.zeros((h, w, 1))
    albedo[m] = bilinear_sample(tex, uv[m, 0] * tw - 0.5, uv[m, 1] * th - 0.5)

    light = np.asarray(scene.light_dir, dtype=np.float64)
    shade = np.clip(scene.ambient + scene.diffuse * np.maximum(0.0, nrm @ light), 0.0, 1.0)
    film = np.asarray(scene.tint, dtype=np.float64) * (albedo * shade[..., None])
    image = np.where(m[..., None], film, gen_background(scene))

    meta = {
        "scene": scene_to_dict(scene),
        "m3d_bbox": [lo.tolist(), hi.tolist()],
        "depth_zmax": zmax,
        "mesh": {"nx": mesh.nx, "ny": mesh.ny, "vertices": mesh.vertices.reshape(-1, 3).tolist(),
                 "screen": screen.reshape(-1, 2).tolist()},
        "texture_size": [tw, th],
    }
    f32 = np.float32
    return Sample(
        image=image.astype(f32), m3d=m3d.astype(f32), normal=nrm.astype(f32),
        depth=depth.astype(f32), uv=uv.astype(f32), albedo=albedo.astype(f32),
        bgmask=m[..., None].astype(f32), backward_gt=gt_backward(mesh, scene, w, h),
        meta=meta)


def gt_backward(mesh: ControlMesh, scene: SceneConfig, tex_w: int, tex_h: int) -> np.ndarray:
    """Backward map on a ``tex_w x tex_h`` texture grid: normalized screen coordinate per texel."""
    if has_fold(mesh, scene):
        raise FoldError("mesh folds in screen space")
    nx, ny = mesh.nx, mesh.ny
    screen = project(mesh.vertices, scene) / (scene.out_w, scene.out_h)
    coords = core.normalized_coords(tex_w, tex_h)
    gu = coords[..., 0] * (nx - 1)
    gv = coords[..., 1] * (ny - 1)
    i = np.clip(np.floor(gu).astype(np.int64), 0, nx - 2)
    j = np.clip(np.floor(gv).astype(np.int64), 0, ny - 2)
    a = (gu - i)[..., None]
    b = (gv - j)[..., None]
    p00 = screen[j, i]
    p10 = screen[j, i + 1]
    p01 = screen[j + 1, i]
    p11 = screen[j + 1, i + 1]
    upper = a >= b
    tri_a = (1 - a) * p00 + (a - b) * p10 + b * p11
    tri_b = (1 - b) * p00 + a * p11 + (b - a) * p01
    return np.where(upper, tri_a, tri_b).astype(np.float32)


# --- dataset-level helpers -----------------------------------------------------

def scene_to_dict(scene: SceneConfig) -> dict:
    d = asdict(scene)
    d["light_dir"] = list(scene.light_dir)
    d["tint"] = list(scene.tint)
    return d


def random_scene(rng: np.random.Generator, res: int = 256, **overrides) -> SceneConfig:
    """Per-sample lighting and camera variation; one in five samples is backlight-only."""
    if rng.random() < 0.2:
        ambient, diffuse = 1.0, 0.0
    else:
        ambient = rng.uniform(0.5, 0.75)
        diffuse = rng.uniform(0.25, 0.5)
    theta = rng.uniform(0, np.radians(50))
    phi = rng.uniform(0, 2 * np.pi)
    light = (np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), -np.cos(theta))
    params = dict(
        out_w=res, out_h=res, camera_f=1.2 * res,
        light_dir=tuple(float(x) for x in light),
        ambient=float(ambient), diffuse=float(diffuse),
        tint=tuple(float(x) for x in rng.uniform(0.85, 1.0, size=3)),
        background_seed=int(rng.integers(2**63)),
    )
    params.update(overrides)
    return SceneConfig(**params)


def generate_sample(seed: int, index: int, grid: tuple[int, int] = (4, 4), res: int = 256,
                    cell_px: int = 64, border_px: int = 8, **scene_overrides) -> Sample:
    """Sample ``index`` of the corpus seeded by ``seed``; independent of any other index."""
    ss = np.random.SeedSequence([int(seed), int(index)])
    tex_seed, mesh_seed, scene_seed = (int(x) for x in ss.generate_state(3, dtype=np.uint64))
    tcfg = TextureConfig(grid[0], grid[1], cell_px, border_px, tex_seed)
    tex = gen_texture(tcfg)
    scene = random_scene(np.random.default_rng(scene_seed), res, **scene_overrides)
    aspect = tcfg.height / tcfg.width
    mesh = gen_mesh(scene, mesh_seed, aspect)
    s = render_sample(tex, mesh, scene)
    s.meta.update({"seed": int(seed), "index": int(index), "mesh_seed": mesh_seed,
                   "texture": asdict(tcfg)})
    return s


def save_sample(s: Sample, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    core.image_write_png(s.image, d / "image.png")
    for name in Sample.MAPS:
        core.fmap_write(getattr(s, name), d / f"{name}.fmap")
    core.fmap_write(s.backward_gt, d / "backward.fmap")
    (d / "meta.json").write_text(json.dumps(s.meta, indent=1, sort_keys=True))


def load_sample(directory) -> Sample:
    d = Path(directory)
    maps = {}
    for name in Sample.MAPS:
        p = d / f"{name}.fmap"
        if not p.is_file():
            raise FileNotFoundError(f"missing map {name!r} in {d}")
        maps[name] = core.fmap_read(p)
    meta_path = d / "meta.json"
    meta = json.loads(meta_path.read_text()) if meta_path.is_file() else {}
    return Sample(image=core.image_read_png(d / "image.png"),
                  backward_gt=core.fmap_read(d / "backward.fmap"), meta=meta, **maps)
