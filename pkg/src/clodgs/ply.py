"""Binary little-endian PLY round-trip for Gaussian scenes.

Layout follows the common splat interchange format (positions, zeroed
normals, DC + rest spherical-harmonic coefficients channel-major, opacity
logit, log scales, quaternion) extended with one trailing float property
``sigma_d`` holding the distance-decay parameter. Scenes written here load
in standard splat viewers, which ignore the extra property; standard files
without ``sigma_d`` load here with the documented default.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .model import DEFAULT_SIGMA_D, SH_DIMS, GaussianScene, SceneError

_PLY_FLOAT_NAMES = {"float", "float32"}
_PLY_DOUBLE_NAMES = {"double", "float64"}


class PlyError(ValueError):
    """Malformed PLY header or payload."""


def _property_names(sh_dim: int) -> list[str]:
    names = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    names += [f"f_rest_{i}" for i in range(3 * (sh_dim - 1))]
    names += ["opacity", "scale_0", "scale_1", "scale_2"]
    names += [f"rot_{i}" for i in range(4)]
    names += ["sigma_d"]
    return names


def record_size(sh_degree: int, with_sigma_d: bool = True) -> int:
    """On-disk bytes per primitive (all properties are float32)."""
    base = len(_property_names(SH_DIMS[sh_degree])) - 1
    return 4 * (base + (1 if with_sigma_d else 0))


def save_ply(scene: GaussianScene, path: str | Path) -> None:
    """Write a scene; raises SceneError for an empty scene, OSError on I/O."""
    if len(scene) < 1:
        raise SceneError("cannot serialize a scene with no primitives")
    n = len(scene)
    b = scene.sh_dim
    names = _property_names(b)
    data = np.zeros(n, dtype=[(name, "<f4") for name in names])
    data["x"] = scene.positions[:, 0]
    data["y"] = scene.positions[:, 1]
    data["z"] = scene.positions[:, 2]
    sh = scene.sh_coeffs
    for c in range(3):
        data[f"f_dc_{c}"] = sh[:, c, 0]
    rest = sh[:, :, 1:].reshape(n, 3 * (b - 1))
    for i in range(3 * (b - 1)):
        data[f"f_rest_{i}"] = rest[:, i]
    data["opacity"] = scene.opacity_logits
    for i in range(3):
        data[f"scale_{i}"] = scene.log_scales[:, i]
    for i in range(4):
        data[f"rot_{i}"] = scene.rotations[:, i]
    data["sigma_d"] = scene.sigma_d

    header_lines = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header_lines += [f"property float {name}" for name in names]
    header_lines += ["end_header"]
    header = ("\n".join(header_lines) + "\n").encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(data.tobytes())


def _parse_header(fh) -> tuple[int, list[tuple[str, str]], int]:
    """Returns (vertex count, [(name, dtype char)], payload offset)."""
    magic = fh.readline()
    if magic.strip() != b"ply":
        raise PlyError("not a PLY file (missing 'ply' magic)")
    fmt = None
    count = None
    props: list[tuple[str, str]] = []
    in_vertex = False
    while True:
        raw = fh.readline()
        if not raw:
            raise PlyError("unexpected end of header")
        line = raw.decode("ascii", errors="replace").strip()
        if not line or line.startswith("comment") or line.startswith("obj_info"):
            continue
        if line == "end_header":
            break
        fields = line.split()
        if fields[0] == "format":
            fmt = fields[1]
        elif fields[0] == "element":
            in_vertex = fields[1] == "vertex"
            if in_vertex:
                try:
                    count = int(fields[2])
                except (IndexError, ValueError) as exc:
                    raise PlyError(f"bad element line: {line!r}") from exc
        elif fields[0] == "property" and in_vertex:
            if len(fields) != 3:
                raise PlyError(f"unsupported property line: {line!r}")
            ptype, name = fields[1], fields[2]
            if ptype in _PLY_FLOAT_NAMES:
                props.append((name, "<f4"))
            elif ptype in _PLY_DOUBLE_NAMES:
                props.append((name, "<f8"))
            else:
                raise PlyError(f"unsupported property type {ptype!r} for {name!r}")
    if fmt != "binary_little_endian":
        raise PlyError(f"unsupported PLY format {fmt!r} (need binary_little_endian)")
    if count is None:
        raise PlyError("header has no 'element vertex'")
    if not props:
        raise PlyError("vertex element declares no properties")
    return count, props, fh.tell()


def load_ply(
    path: str | Path,
    background: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> GaussianScene:
    """Load a scene, filling sigma_d with the default when absent.

    Raises PlyError naming the offending property/row for malformed input.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        count, props, offset = _parse_header(fh)
        payload = fh.read()
    dtype = np.dtype(props)
    expected = count * dtype.itemsize
    if len(payload) < expected:
        raise PlyError(
            f"element count mismatch: header claims {count} vertices "
            f"({expected} bytes) but payload holds {len(payload)}"
        )
    data = np.frombuffer(payload[:expected], dtype=dtype)
    have = {name for name, _ in props}

    required = ["x", "y", "z", "opacity", "scale_0", "scale_1", "scale_2",
                "rot_0", "rot_1", "rot_2", "rot_3", "f_dc_0", "f_dc_1", "f_dc_2"]
    for name in required:
        if name not in have:
            raise PlyError(f"missing required property {name!r}")

    n_rest = sum(1 for name in have if name.startswith("f_rest_"))
    if n_rest % 3 != 0:
        raise PlyError(f"f_rest_* property count {n_rest} is not a multiple of 3")
    b = 1 + n_rest // 3
    degree = {v: k for k, v in SH_DIMS.items()}.get(b)
    if degree is None:
        raise PlyError(f"f_rest_* count {n_rest} implies unsupported SH basis size {b}")

    def col(name: str) -> np.ndarray:
        arr = np.ascontiguousarray(data[name], dtype=np.float32)
        finite = np.isfinite(arr)
        if not finite.all():
            row = int(np.nonzero(~finite)[0][0])
            raise PlyError(f"non-finite value in property {name!r} at row {row}")
        return arr

    positions = np.stack([col("x"), col("y"), col("z")], axis=1)
    log_scales = np.stack([col(f"scale_{i}") for i in range(3)], axis=1)
    rotations = np.stack([col(f"rot_{i}") for i in range(4)], axis=1)
    # Normalize only quaternions that are measurably off unit length, so a
    # save/load cycle of an already-normalized scene is bit-exact.
    norms = np.linalg.norm(rotations.astype(np.float64), axis=1)
    if (norms == 0.0).any():
        row = int(np.nonzero(norms == 0.0)[0][0])
        raise PlyError(f"zero-norm quaternion in property 'rot_*' at row {row}")
    off = np.abs(norms - 1.0) > 1e-6
    if off.any():
        rotations = rotations.copy()
        rotations[off] = (
            rotations[off].astype(np.float64) / norms[off, None]
        ).astype(np.float32)

    sh = np.zeros((count, 3, b), dtype=np.float32)
    for c in range(3):
        sh[:, c, 0] = col(f"f_dc_{c}")
    if b > 1:
        # channel-major on disk: all rest coefficients of R, then G, then B
        rest = np.stack([col(f"f_rest_{i}") for i in range(3 * (b - 1))], axis=1)
        sh[:, :, 1:] = rest.reshape(count, 3, b - 1)

    if "sigma_d" in have:
        sigma_d = col("sigma_d")
    else:
        sigma_d = np.full(count, DEFAULT_SIGMA_D, dtype=np.float32)

    return GaussianScene(
        positions=positions,
        log_scales=log_scales,
        rotations=rotations,
        opacity_logits=col("opacity"),
        sh_coeffs=sh,
        sigma_d=sigma_d,
        sh_degree=degree,
        background=background,
    )


def inspect_ply(path: str | Path) -> dict:
    """Header-level summary plus sigma_d stats, for the `info` command."""
    path = Path(path)
    with open(path, "rb") as fh:
        count, props, _ = _parse_header(fh)
    size = path.stat().st_size
    info = {
        "path": str(path),
        "vertices": count,
        "properties": [name for name, _ in props],
        "bytes_per_vertex": int(np.dtype(props).itemsize),
        "file_bytes": size,
        "file_mb": size / (1024 * 1024),
        "has_sigma_d": any(name == "sigma_d" for name, _ in props),
    }
    try:
        scene = load_ply(path)
    except (PlyError, SceneError) as exc:
        info["error"] = str(exc)
        return info
    lo, hi = scene.bounds()
    info.update(
        sh_degree=scene.sh_degree,
        bounds_min=[float(v) for v in lo],
        bounds_max=[float(v) for v in hi],
        opacity_mean=float(scene.opacities.mean()),
        sigma_d_min=float(scene.sigma_d.min()),
        sigma_d_mean=float(scene.sigma_d.mean()),
        sigma_d_max=float(scene.sigma_d.max()),
    )
    return info
