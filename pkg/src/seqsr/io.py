"""File formats: PGM/PPM frames, PFM float images, Middlebury .flo motion,
JSON configuration, TSV tables and the run manifest."""

from __future__ import annotations

import json
import os
import re
import subprocess
import tempfile
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .core import ConfigError, SolverConfig

__all__ = [
    "FormatError",
    "read_pnm",
    "write_pnm",
    "read_pfm",
    "write_pfm",
    "read_flo",
    "write_flo",
    "read_frames",
    "load_config",
    "write_tsv",
    "read_tsv",
    "atomic_write_bytes",
    "atomic_write_text",
    "write_manifest",
    "git_describe",
]

FLO_MAGIC = 202021.25


class FormatError(ValueError):
    """A file does not follow the expected binary layout."""


_PNM_HEADER = re.compile(rb"\A(P[56])\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s+(?:#[^\n]*\n\s*)*(\d+)\s")


def read_pnm(path) -> np.ndarray:
    """Binary PGM (P5) or PPM (P6), 8- or 16-bit.  PPM returns (3, H, W)."""
    data = Path(path).read_bytes()
    m = _PNM_HEADER.match(data)
    if not m:
        raise FormatError(f"{path}: not a binary PGM/PPM file")
    kind, w, h, maxval = m.group(1), int(m.group(2)), int(m.group(3)), int(m.group(4))
    if not 0 < maxval < 65536:
        raise FormatError(f"{path}: invalid maxval {maxval}")
    channels = 3 if kind == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = w * h * channels
    if len(data) - m.end() < count * dtype.itemsize:
        raise FormatError(f"{path}: truncated pixel data")
    raw = np.frombuffer(data, dtype=dtype, count=count, offset=m.end())
    img = raw.reshape(h, w, channels).astype(np.float64)
    return img[..., 0] if channels == 1 else np.moveaxis(img, -1, 0)


def write_pnm(path, image, maxval: int = 255) -> None:
    """Write (H, W) as PGM or (3, H, W) as PPM; values are rounded and clipped to [0, maxval]."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 3:
        if img.shape[0] != 3:
            raise ValueError("color frames must have shape (3, H, W)")
        kind, body = b"P6", np.moveaxis(img, 0, -1)
    elif img.ndim == 2:
        kind, body = b"P5", img
    else:
        raise ValueError("frames must be (H, W) or (3, H, W)")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    q = np.clip(np.rint(body), 0, maxval).astype(dtype)
    h, w = img.shape[-2:]
    header = kind + b"\n%d %d\n%d\n" % (w, h, maxval)
    atomic_write_bytes(path, header + q.tobytes())


def write_pfm(path, image) -> None:
    """Single-channel portable float map (little-endian, bottom row first)."""
    img = np.asarray(image, dtype="<f4")
    if img.ndim != 2:
        raise ValueError("PFM writer expects a single (H, W) frame")
    h, w = img.shape
    atomic_write_bytes(path, b"Pf\n%d %d\n-1.0\n" % (w, h) + img[::-1].tobytes())


def read_pfm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    m = re.match(rb"\APf\s+(\d+)\s+(\d+)\s+(-?[\d.]+)\s", data)
    if not m:
        raise FormatError(f"{path}: not a grayscale PFM file")
    w, h, scale = int(m.group(1)), int(m.group(2)), float(m.group(3))
    dtype = "<f4" if scale < 0 else ">f4"
    if len(data) - m.end() < 4 * w * h:
        raise FormatError(f"{path}: truncated pixel data")
    img = np.frombuffer(data, dtype=dtype, count=w * h, offset=m.end()).reshape(h, w)
    return img[::-1].astype(np.float64)


def read_flo(path) -> np.ndarray:
    """Middlebury flow file as a (2, H, W) float64 array (u horizontal, v vertical)."""
    with open(path, "rb") as f:
        magic = np.fromfile(f, "<f4", count=1)
        if magic.size != 1 or magic[0] != np.float32(FLO_MAGIC):
            raise FormatError(f"{path}: bad .flo magic number")
        dims = np.fromfile(f, "<i4", count=2)
        if dims.size != 2 or dims.min() <= 0:
            raise FormatError(f"{path}: bad .flo dimensions")
        w, h = int(dims[0]), int(dims[1])
        flow = np.fromfile(f, "<f4", count=2 * w * h)
    if flow.size != 2 * w * h:
        raise FormatError(f"{path}: truncated .flo payload")
    return np.moveaxis(flow.reshape(h, w, 2), -1, 0).astype(np.float64)


def write_flo(path, flow) -> None:
    flow = np.asarray(flow)
    if flow.ndim != 3 or flow.shape[0] != 2:
        raise ValueError("flow must have shape (2, H, W)")
    h, w = flow.shape[1:]
    payload = (np.array([FLO_MAGIC], "<f4").tobytes() + np.array([w, h], "<i4").tobytes()
               + np.ascontiguousarray(np.moveaxis(flow, 0, -1), dtype="<f4").tobytes())
    atomic_write_bytes(path, payload)


def read_frames(paths: Iterable) -> np.ndarray:
    frames = [read_pnm(p) for p in paths]
    if not frames:
        raise ValueError("no input frames")
    shapes = {f.shape for f in frames}
    if len(shapes) != 1:
        raise ValueError(f"frames have inconsistent shapes {sorted(shapes)}")
    return np.stack(frames)


def load_config(path=None, overrides: Mapping[str, Any] | None = None) -> SolverConfig:
    """Flat JSON object of SolverConfig fields; unknown keys are rejected."""
    cfg = SolverConfig()
    if path is not None:
        try:
            values = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(values, dict):
            raise ConfigError(f"{path}: configuration must be a JSON object")
        cfg = SolverConfig.from_dict(values, cfg)
    if overrides:
        cfg = SolverConfig.from_dict(dict(overrides), cfg)
    return cfg


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_tsv(path, rows: list, columns: list | None = None) -> None:
    rows = list(rows)
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    lines = ["\t".join(columns)]
    lines += ["\t".join(_fmt(r[c]) for c in columns) for r in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_tsv(path) -> list:
    lines = Path(path).read_text().splitlines()
    if not lines:
        return []
    header = lines[0].split("\t")
    return [dict(zip(header, line.split("\t"))) for line in lines[1:] if line]


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def git_describe() -> str:
    try:
        out = subprocess.run(["git", "describe", "--always", "--dirty", "--tags"], capture_output=True,
                             text=True, cwd=Path(__file__).resolve().parent, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def write_manifest(path, manifest: Mapping[str, Any]) -> None:
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
