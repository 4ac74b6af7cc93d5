"""
Binary checkpoints (``*.cpks``).

Layout, little-endian:

    header   <4sIIIIddd   magic b"CPKS", version, nx, ny, nz, t, A, a
    n        <c16         nx * nz * ny values, (k1-index, k3-index, y) row-major
    omega2   <c16         same
    delta_u2 <c16         same
    mean_u1  <f8          ny values
    mean_u3  <f8          ny values
"""
from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

from ..channel.grid import Grid, SpecField
from ..channel.models import Params, State
from ..logging_config import get_logger

logger = get_logger("cpks.harness")

MAGIC = b"CPKS"
VERSION = 1
HEADER = struct.Struct("<4sIIIIddd")


class CheckpointError(ValueError):
    """Unreadable, corrupt or incompatible checkpoint."""


def _payload_size(nx: int, ny: int, nz: int) -> int:
    return 3 * nx * nz * ny * 16 + 2 * ny * 8


def save_checkpoint(state: State, path: str | Path, params: Params | None = None) -> Path:
    path = Path(path)
    nx, nz, ny = state.n.data.shape
    A = params.A if params is not None else float("nan")
    a = params.a if params is not None else float("nan")
    chunks = [HEADER.pack(MAGIC, VERSION, nx, ny, nz, float(state.t), A, a)]
    for f in (state.n, state.omega2, state.delta_u2):
        chunks.append(np.ascontiguousarray(f.data, dtype="<c16").tobytes())
    for profile in (state.mean_u1, state.mean_u3):
        chunks.append(np.ascontiguousarray(profile, dtype="<f8").tobytes())
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        with open(tmp, "wb") as f:
            f.write(b"".join(chunks))
        os.replace(tmp, path)
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc
    logger.info_with("checkpoint written", path=str(path), t=state.t)
    return path


def read_header(path: str | Path) -> tuple[int, int, int, int, float, float, float]:
    """(version, nx, ny, nz, t, A, a) without loading the arrays."""
    path = Path(path)
    try:
        with open(path, "rb") as f:
            raw = f.read(HEADER.size)
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, nx, ny, nz, t, A, a = HEADER.unpack(raw)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}, expected {VERSION}")
    return version, nx, ny, nz, t, A, a


def load_checkpoint(path: str | Path, grid: Grid | None = None) -> State:
    path = Path(path)
    _, nx, ny, nz, t, _, _ = read_header(path)
    if grid is not None and (grid.nx, grid.ny, grid.nz) != (nx, ny, nz):
        raise CheckpointError(
            f"{path}: checkpoint grid {nx}x{ny}x{nz} does not match "
            f"{grid.nx}x{grid.ny}x{grid.nz}; resampling is not supported"
        )
    raw = path.read_bytes()[HEADER.size:]
    expected = _payload_size(nx, ny, nz)
    if len(raw) != expected:
        raise CheckpointError(f"{path}: payload has {len(raw)} bytes, expected {expected}")

    count = nx * nz * ny
    offset = 0
    fields = []
    for _ in range(3):
        arr = np.frombuffer(raw, dtype="<c16", count=count, offset=offset)
        fields.append(SpecField(arr.reshape(nx, nz, ny)))
        offset += count * 16
    profiles = []
    for _ in range(2):
        profiles.append(np.frombuffer(raw, dtype="<f8", count=ny, offset=offset).copy())
        offset += ny * 8
    return State(
        t=t,
        n=fields[0],
        omega2=fields[1],
        delta_u2=fields[2],
        mean_u1=profiles[0],
        mean_u3=profiles[1],
    )
