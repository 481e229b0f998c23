"""File formats: COLMAP text models, PLY, PPM/PNG images, flat configs."""

from __future__ import annotations

import dataclasses
import math
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .gaussian_math import quat_to_rotation
from .model import NUM_SH_COEFFS, Camera, GaussianModel, PointCloud, TrainConfig


class FormatError(ValueError):
    """Malformed input file; the message names the file and line when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


# ---------------------------------------------------------------------------
# COLMAP text model


@dataclass
class SceneBundle:
    """Registered views and sparse points of a COLMAP reconstruction.

    ``cameras[i]`` is the full pinhole camera of image ``i`` (intrinsics of its
    COLMAP camera plus the image pose); ``images[i]`` is ``(colmap camera id,
    image file name)``.
    """

    cameras: list = field(default_factory=list)
    images: list = field(default_factory=list)
    sparse_cloud: PointCloud | None = None
    root: Path | None = None

    def image_path(self, i, image_dir="images"):
        return Path(self.root or ".") / image_dir / self.images[i][1]


def _data_lines(path):
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if line.startswith("#"):
                continue
            yield lineno, line


def _floats(tokens, path, lineno):
    try:
        return [float(t) for t in tokens]
    except ValueError as exc:
        raise FormatError(f"malformed number ({exc})", path, lineno) from None


def _read_colmap_cameras(path):
    intrinsics = {}
    for lineno, line in _data_lines(path):
        if not line:
            continue
        tok = line.split()
        if len(tok) < 4:
            raise FormatError("malformed camera line", path, lineno)
        cam_id, model = tok[0], tok[1]
        width, height = int(tok[2]), int(tok[3])
        params = _floats(tok[4:], path, lineno)
        if model == "PINHOLE":
            if len(params) != 4:
                raise FormatError(f"PINHOLE expects 4 parameters, got {len(params)}", path, lineno)
            fx, fy, cx, cy = params
        elif model == "SIMPLE_PINHOLE":
            if len(params) != 3:
                raise FormatError(f"SIMPLE_PINHOLE expects 3 parameters, got {len(params)}", path, lineno)
            fx, cx, cy = params
            fy = fx
        else:
            raise FormatError(f"unsupported camera model {model!r}", path, lineno)
        intrinsics[int(cam_id)] = (width, height, fx, fy, cx, cy)
    return intrinsics


def _read_colmap_images(path, intrinsics):
    entries = []
    expect_points = False
    for lineno, line in _data_lines(path):
        if expect_points:
            expect_points = False
            continue
        if not line:
            continue
        tok = line.split()
        if len(tok) < 10:
            raise FormatError("malformed image line (expected 10 fields)", path, lineno)
        vals = _floats(tok[1:8], path, lineno)
        image_id, cam_id, name = int(tok[0]), int(tok[8]), " ".join(tok[9:])
        if cam_id not in intrinsics:
            raise FormatError(f"image references unknown camera {cam_id}", path, lineno)
        q = np.array(vals[:4])
        if not np.linalg.norm(q) > 0:
            raise FormatError("zero quaternion", path, lineno)
        w, h, fx, fy, cx, cy = intrinsics[cam_id]
        cam = Camera(w, h, fx, fy, cx, cy, quat_to_rotation(q), np.array(vals[4:7]), image_id=name)
        entries.append((image_id, cam_id, name, cam))
        expect_points = True
    entries.sort(key=lambda e: e[0])
    return entries


def _read_colmap_points(path):
    ids, xyz, rgb = [], [], []
    for lineno, line in _data_lines(path):
        if not line:
            continue
        tok = line.split()
        if len(tok) < 8 or (len(tok) - 8) % 2:
            raise FormatError("malformed point line", path, lineno)
        vals = _floats(tok[1:8], path, lineno)
        if not all(0 <= v <= 255 for v in vals[3:6]):
            raise FormatError("point color outside 0..255", path, lineno)
        ids.append(int(tok[0]))
        xyz.append(vals[:3])
        rgb.append(vals[3:6])
    order = np.argsort(ids, kind="stable")
    xyz = np.asarray(xyz, dtype=np.float64).reshape(-1, 3)[order]
    rgb = np.asarray(rgb, dtype=np.float64).reshape(-1, 3)[order] / 255.0
    return PointCloud(xyz, rgb)


def find_sparse_dir(scene_dir):
    scene_dir = Path(scene_dir)
    for cand in (scene_dir / "sparse" / "0", scene_dir / "sparse", scene_dir):
        if (cand / "cameras.txt").exists():
            return cand
    raise FileNotFoundError(f"no COLMAP text model (cameras.txt) under {scene_dir}")


def load_colmap_sparse(directory):
    """Read ``cameras.txt``, ``images.txt`` and ``points3D.txt`` from ``directory``."""
    directory = Path(directory)
    for name in ("cameras.txt", "images.txt", "points3D.txt"):
        if not (directory / name).exists():
            raise FileNotFoundError(f"missing COLMAP file {directory / name}")
    intrinsics = _read_colmap_cameras(directory / "cameras.txt")
    entries = _read_colmap_images(directory / "images.txt", intrinsics)
    cloud = _read_colmap_points(directory / "points3D.txt")
    root = directory
    if directory.name == "0" and directory.parent.name == "sparse":
        root = directory.parent.parent
    elif directory.name == "sparse":
        root = directory.parent
    return SceneBundle(
        cameras=[e[3] for e in entries],
        images=[(e[1], e[2]) for e in entries],
        sparse_cloud=cloud,
        root=root,
    )


def rotation_to_quat(R):
    """Unit quaternion ``(w, x, y, z)`` with ``w >= 0`` for a rotation matrix."""
    R = np.asarray(R, dtype=np.float64)
    K = np.array([
        [R[0, 0] - R[1, 1] - R[2, 2], R[1, 0] + R[0, 1], R[2, 0] + R[0, 2], R[2, 1] - R[1, 2]],
        [R[1, 0] + R[0, 1], R[1, 1] - R[0, 0] - R[2, 2], R[2, 1] + R[1, 2], R[0, 2] - R[2, 0]],
        [R[2, 0] + R[0, 2], R[2, 1] + R[1, 2], R[2, 2] - R[0, 0] - R[1, 1], R[1, 0] - R[0, 1]],
        [R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1], R[0, 0] + R[1, 1] + R[2, 2]],
    ]) / 3.0
    _, vecs = np.linalg.eigh(K)
    x, y, z, w = vecs[:, -1]
    q = np.array([w, x, y, z])
    return q if w >= 0 else -q


def write_colmap_sparse(directory, cameras, cloud, image_names=None):
    """Write a PINHOLE text model: one COLMAP camera per view."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = image_names or [c.image_id or f"{i:05d}.ppm" for i, c in enumerate(cameras)]
    with open(directory / "cameras.txt", "w") as fh:
        fh.write("# CAMERA_ID, MODEL, WIDTH, HEIGHT, PARAMS[]\n")
        for i, c in enumerate(cameras, start=1):
            params = " ".join(repr(float(v)) for v in (c.fx, c.fy, c.cx, c.cy))
            fh.write(f"{i} PINHOLE {c.width} {c.height} {params}\n")
    with open(directory / "images.txt", "w") as fh:
        fh.write("# IMAGE_ID, QW, QX, QY, QZ, TX, TY, TZ, CAMERA_ID, NAME\n# POINTS2D[] as (X, Y, POINT3D_ID)\n")
        for i, (c, name) in enumerate(zip(cameras, names), start=1):
            q = rotation_to_quat(c.rotation)
            vals = " ".join(repr(float(v)) for v in (*q, *c.translation))
            fh.write(f"{i} {vals} {i} {name}\n\n")
    with open(directory / "points3D.txt", "w") as fh:
        fh.write("# POINT3D_ID, X, Y, Z, R, G, B, ERROR, TRACK[]\n")
        colors = cloud.colors if cloud.colors is not None else np.full((len(cloud), 3), 0.5)
        rgb = np.clip(np.round(colors * 255), 0, 255).astype(int)
        for i, (p, c) in enumerate(zip(cloud.positions, rgb), start=1):
            xyz = " ".join(repr(float(v)) for v in p)
            fh.write(f"{i} {xyz} {c[0]} {c[1]} {c[2]} 0\n")


# ---------------------------------------------------------------------------
# PLY

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _parse_ply(data, source="<ply>"):
    """Return ``(elements, comments)`` where elements maps name -> structured array."""
    if not data.startswith(b"ply\n"):
        raise FormatError("not a PLY file (bad magic)", source, 1)
    end = data.find(b"end_header\n")
    if end < 0:
        raise FormatError("PLY header has no end_header", source)
    header = data[:end].decode("ascii", errors="replace").split("\n")
    body = data[end + len(b"end_header\n"):]
    fmt = None
    elements = []
    comments = []
    for lineno, line in enumerate(header, start=1):
        tok = line.split()
        if not tok or tok[0] in ("ply", "obj_info"):
            continue
        if tok[0] == "comment":
            comments.append(line[len("comment"):].strip())
        elif tok[0] == "format":
            if len(tok) != 3 or tok[1] not in ("binary_little_endian", "ascii"):
                raise FormatError(f"unsupported PLY format {' '.join(tok[1:])!r}", source, lineno)
            fmt = tok[1]
        elif tok[0] == "element":
            if len(tok) != 3 or not tok[2].isdigit():
                raise FormatError("malformed element line", source, lineno)
            elements.append((tok[1], int(tok[2]), []))
        elif tok[0] == "property":
            if not elements:
                raise FormatError("property before any element", source, lineno)
            if len(tok) != 3 or tok[1] not in _PLY_TYPES:
                raise FormatError(f"unsupported property {' '.join(tok[1:])!r}", source, lineno)
            elements[-1][2].append((tok[2], "<" + _PLY_TYPES[tok[1]]))
        else:
            raise FormatError(f"unexpected header keyword {tok[0]!r}", source, lineno)
    if fmt is None:
        raise FormatError("PLY header lacks a format line", source)

    out = {}
    if fmt == "binary_little_endian":
        offset = 0
        for name, count, props in elements:
            dtype = np.dtype(props)
            need = count * dtype.itemsize
            if len(body) - offset < need:
                raise FormatError(
                    f"truncated payload: element {name!r} needs {need} bytes, {len(body) - offset} available",
                    source,
                )
            out[name] = np.frombuffer(body, dtype=dtype, count=count, offset=offset).copy()
            offset += need
        if offset != len(body):
            raise FormatError(f"{len(body) - offset} bytes of trailing data after payload", source)
    else:
        lines = body.decode("ascii").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        pos = 0
        for name, count, props in elements:
            dtype = np.dtype(props)
            arr = np.empty(count, dtype=dtype)
            for i in range(count):
                if pos >= len(lines):
                    raise FormatError(f"truncated payload in element {name!r}", source)
                vals = lines[pos].split()
                if len(vals) != len(props):
                    raise FormatError(f"expected {len(props)} values", source, len(header) + 1 + pos + 1)
                arr[i] = tuple(float(v) for v in vals)
                pos += 1
            out[name] = arr
        if pos != len(lines):
            raise FormatError("trailing data after payload", source, len(header) + 1 + pos + 1)
    return out, comments


def _write_ply(columns, comments=()):
    """Binary little-endian PLY with one ``vertex`` element.

    ``columns`` is a list of ``(name, array, ply_type)``.
    """
    n = len(columns[0][1]) if columns else 0
    lines = ["ply", "format binary_little_endian 1.0"]
    lines += [f"comment {c}" for c in comments]
    lines.append(f"element vertex {n}")
    dtype = []
    for name, _, ptype in columns:
        lines.append(f"property {ptype} {name}")
        dtype.append((name, "<" + _PLY_TYPES[ptype]))
    lines.append("end_header")
    rec = np.empty(n, dtype=dtype)
    for name, arr, _ in columns:
        rec[name] = arr
    return ("\n".join(lines) + "\n").encode("ascii") + rec.tobytes()


def gaussian_ply_properties():
    names = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    names += [f"f_rest_{i}" for i in range(45)]
    names += ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
    return names


def save_gaussians_ply(model, precision="double"):
    """Serialize to the common splatting checkpoint layout (62 properties per vertex).

    ``precision="double"`` round-trips float64 models bit-exactly;
    ``"float"`` writes the float32 files most viewers expect.
    """
    if precision not in ("double", "float"):
        raise ValueError("precision must be 'double' or 'float'")
    n = len(model)
    # f_rest is channel-major: all 15 higher-order coefficients of red, then green, then blue
    rest = np.transpose(model.sh_coeffs[:, 1:, :], (0, 2, 1)).reshape(n, 45)
    values = [model.means[:, i] for i in range(3)] + [np.zeros(n)] * 3
    values += [model.sh_coeffs[:, 0, c] for c in range(3)]
    values += [rest[:, i] for i in range(45)]
    values += [model.opacity_logits] + [model.log_scales[:, i] for i in range(3)]
    values += [model.rotations[:, i] for i in range(4)]
    cols = [(name, v, precision) for name, v in zip(gaussian_ply_properties(), values)]
    return _write_ply(cols, comments=[f"sh_degree_active {model.sh_degree_active}"])


def load_gaussians_ply(data, source="<ply>"):
    elements, comments = _parse_ply(bytes(data), source)
    if "vertex" not in elements:
        raise FormatError("PLY has no vertex element", source)
    v = elements["vertex"]
    names = v.dtype.names
    missing = [p for p in gaussian_ply_properties() if p not in names and not p.startswith(("f_rest_", "n"))]
    if missing:
        raise FormatError(f"missing Gaussian properties: {', '.join(missing)}", source)
    n = len(v)

    def col(name):
        return v[name].astype(np.float64)

    rest_names = sorted((p for p in names if p.startswith("f_rest_")), key=lambda p: int(p.split("_")[-1]))
    if len(rest_names) % 3 or len(rest_names) > 45:
        raise FormatError(f"unexpected number of f_rest properties ({len(rest_names)})", source)
    per_channel = len(rest_names) // 3
    sh = np.zeros((n, NUM_SH_COEFFS, 3))
    sh[:, 0] = np.stack([col(f"f_dc_{c}") for c in range(3)], axis=1)
    if per_channel:
        rest = np.stack([col(p) for p in rest_names], axis=1).reshape(n, 3, per_channel)
        sh[:, 1:1 + per_channel] = np.transpose(rest, (0, 2, 1))
    degree = int(round(math.sqrt(per_channel + 1))) - 1
    for c in comments:
        m = re.fullmatch(r"sh_degree_active (\d)", c)
        if m:
            degree = int(m.group(1))
    return GaussianModel(
        means=np.stack([col(a) for a in "xyz"], axis=1),
        log_scales=np.stack([col(f"scale_{i}") for i in range(3)], axis=1),
        rotations=np.stack([col(f"rot_{i}") for i in range(4)], axis=1),
        opacity_logits=col("opacity"),
        sh_coeffs=sh,
        sh_degree_active=degree,
    )


def write_gaussians(path, model, precision="double"):
    Path(path).write_bytes(save_gaussians_ply(model, precision))


def read_gaussians(path):
    return load_gaussians_ply(Path(path).read_bytes(), source=str(path))


def save_point_cloud_ply(pc):
    cols = [(a, pc.positions[:, i], "double") for i, a in enumerate("xyz")]
    if pc.normals is not None:
        cols += [(a, pc.normals[:, i], "double") for i, a in enumerate(("nx", "ny", "nz"))]
    if pc.colors is not None:
        rgb = np.clip(np.round(pc.colors * 255), 0, 255).astype(np.uint8)
        cols += [(a, rgb[:, i], "uchar") for i, a in enumerate(("red", "green", "blue"))]
    return _write_ply(cols)


def load_point_cloud_ply(data, source="<ply>"):
    elements, _ = _parse_ply(bytes(data), source)
    if "vertex" not in elements:
        raise FormatError("PLY has no vertex element", source)
    v = elements["vertex"]
    names = v.dtype.names
    if not all(a in names for a in "xyz"):
        raise FormatError("vertex element lacks x/y/z", source)
    pos = np.stack([v[a].astype(np.float64) for a in "xyz"], axis=1)
    normals = colors = None
    if all(a in names for a in ("nx", "ny", "nz")):
        normals = np.stack([v[a].astype(np.float64) for a in ("nx", "ny", "nz")], axis=1)
        norms = np.linalg.norm(normals, axis=1)
        if not np.all(np.abs(norms - 1) <= 1e-6):
            normals = None  # zero-filled or unnormalized normals are treated as absent
    if all(a in names for a in ("red", "green", "blue")):
        scale = 255.0 if v["red"].dtype.kind in "ui" else 1.0
        colors = np.stack([v[a].astype(np.float64) / scale for a in ("red", "green", "blue")], axis=1)
    return PointCloud(pos, colors, normals)


def write_point_cloud(path, pc):
    Path(path).write_bytes(save_point_cloud_ply(pc))


def read_point_cloud(path):
    return load_point_cloud_ply(Path(path).read_bytes(), source=str(path))


# ---------------------------------------------------------------------------
# images


def encode_ppm(image):
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    h, w, _ = img.shape
    data = np.clip(np.round(img * 255), 0, 255).astype(np.uint8)
    return f"P6\n{w} {h}\n255\n".encode("ascii") + data.tobytes()


def decode_ppm(data, source="<ppm>"):
    data = bytes(data)
    if data[:2] in (b"P1", b"P2", b"P3", b"P4", b"P5"):
        raise FormatError("unsupported PPM variant " + data[:2].decode(), source, 1)
    if data[:2] != b"P6":
        raise FormatError("not a PPM file (bad magic)", source, 1)
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise FormatError("malformed PPM header", source, data[:pos].count(b"\n") + 1)
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise FormatError("malformed PPM header", source, data[:pos].count(b"\n") + 1)
    pos += 1
    w, h, maxval = fields
    if maxval != 255:
        raise FormatError(f"unsupported PPM maxval {maxval} (only 255)", source)
    need = w * h * 3
    payload = data[pos:]
    if len(payload) != need:
        raise FormatError(f"payload is {len(payload)} bytes, expected {need}", source)
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w, 3).astype(np.float64) / 255.0


def read_image(path):
    """Load a PPM (P6) or, through Pillow, a PNG as an ``(H, W, 3)`` array in [0, 1]."""
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        return decode_ppm(path.read_bytes(), source=str(path))
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def write_image(path, image):
    path = Path(path)
    if path.suffix.lower() in (".ppm", ".pnm"):
        path.write_bytes(encode_ppm(image))
        return
    from PIL import Image

    data = np.clip(np.round(np.asarray(image) * 255), 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path)


def downsample_image(image, factor):
    """Box-filter an image by an integer factor, dropping any remainder rows/columns."""
    if factor == 1:
        return image
    h, w = image.shape[0] // factor, image.shape[1] // factor
    return image[: h * factor, : w * factor].reshape(h, factor, w, factor, -1).mean(axis=(1, 3))


# ---------------------------------------------------------------------------
# key = value files


def parse_key_values(text, source="<text>"):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError("expected 'key = value'", source, lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise FormatError("expected 'key = value'", source, lineno)
        if key in out:
            raise FormatError(f"duplicate key {key!r}", source, lineno)
        out[key] = (value, lineno)
    return out


def config_from_text(text, source="<config>"):
    """Build a :class:`TrainConfig` from flat ``key = value`` text."""
    fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    kwargs = {}
    for key, (value, lineno) in parse_key_values(text, source).items():
        if key not in fields:
            raise FormatError(f"unknown config key {key!r}", source, lineno)
        default = getattr(TrainConfig(), key)
        try:
            if isinstance(default, tuple):
                kwargs[key] = tuple(float(v) for v in value.split(","))
            elif isinstance(default, bool):
                kwargs[key] = value.lower() in ("1", "true", "yes")
            elif isinstance(default, int):
                kwargs[key] = int(value)
            else:
                kwargs[key] = float(value)
        except ValueError:
            raise FormatError(f"bad value {value!r} for {key}", source, lineno) from None
    try:
        return TrainConfig(**kwargs)
    except ValueError as exc:
        raise FormatError(str(exc), source) from None


def load_config(path):
    return config_from_text(Path(path).read_text(), source=str(path))


def config_to_text(cfg):
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(repr(float(x)) for x in v)
        lines.append(f"{f.name} = {float(v)!r}" if isinstance(v, float) else f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def format_number(x):
    """Machine-readable number; infinities use ``1e999`` so ``float()`` reads them back."""
    x = float(x)
    if math.isinf(x):
        return "1e999" if x > 0 else "-1e999"
    return repr(x)


def format_metrics(values):
    return "".join(f"{k}={format_number(v)}\n" for k, v in values.items())


def _numbers(text, source, keys):
    kv = parse_key_values(text, source)
    missing = [k for k in keys if k not in kv]
    if missing:
        raise FormatError(f"missing keys: {', '.join(missing)}", source)
    extra = [k for k in kv if k not in keys]
    if extra:
        raise FormatError(f"unknown key {extra[0]!r}", source, kv[extra[0]][1])
    try:
        return {k: float(kv[k][0]) for k in keys}
    except ValueError as exc:
        raise FormatError(str(exc), source) from None


_TRANSFORM_KEYS = [f"r{i}{j}" for i in range(3) for j in range(3)] + ["t0", "t1", "t2"]
_POSE_KEYS = ["width", "height", "fx", "fy", "cx", "cy", "qw", "qx", "qy", "qz", "tx", "ty", "tz"]


def write_transform(path, transform):
    vals = dict(zip(_TRANSFORM_KEYS, [*transform.rotation.ravel(), *transform.translation]))
    Path(path).write_text(format_metrics(vals))


def read_transform(path):
    from .geometry import RigidTransform

    v = _numbers(Path(path).read_text(), str(path), _TRANSFORM_KEYS)
    R = np.array([v[k] for k in _TRANSFORM_KEYS[:9]]).reshape(3, 3)
    return RigidTransform(R, [v["t0"], v["t1"], v["t2"]])


def write_pose(path, cam):
    q = rotation_to_quat(cam.rotation)
    vals = [cam.width, cam.height, cam.fx, cam.fy, cam.cx, cam.cy, *q, *cam.translation]
    Path(path).write_text(format_metrics(dict(zip(_POSE_KEYS, vals))))


def read_pose(path):
    v = _numbers(Path(path).read_text(), str(path), _POSE_KEYS)
    q = np.array([v["qw"], v["qx"], v["qy"], v["qz"]])
    return Camera(int(v["width"]), int(v["height"]), v["fx"], v["fy"], v["cx"], v["cy"],
                  quat_to_rotation(q), [v["tx"], v["ty"], v["tz"]], image_id=os.path.basename(str(path)))
