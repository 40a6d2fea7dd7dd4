"""
Checkpoint service: little-endian binary snapshot of a model and its optimizer.

Layout:
    b"BSRN"                         magic
    u32 version
    u32 c, u32 s, u32 R, u32 r
    u32 n_scales, u32 scale * n_scales
    u32 n_tensors
    n_tensors x (u32 name_len, utf-8 name, u32 rank, u32 dim * rank, f32 payload)
    u64 global step

Model tensors use their parameter names; Adam moments are stored as
"opt/m/<name>" and "opt/v/<name>".
"""
import os
import struct
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional

import numpy as np
from tenacity import retry, retry_if_exception_type, stop_after_attempt, wait_exponential

from ..models.configs import ModelConfig
from ..models.params import ModelParams, tensor_shapes
from ..models.state import AdamState
from ..utils.errors import CheckpointError, ConfigError, ShapeError
from ..utils.logging_utils import setup_logger

# Set up logger for this module
logger = setup_logger("CheckpointService")

MAGIC = b"BSRN"
FORMAT_VERSION = 1
OPT_PREFIX = "opt/"


@dataclass
class Checkpoint:
    config: ModelConfig
    params: ModelParams
    opt_state: AdamState
    step: int


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    config = ckpt.config
    chunks = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    chunks.append(struct.pack("<4I", config.c, config.s, config.R, config.r))
    chunks.append(struct.pack(f"<I{len(config.scales)}I", len(config.scales), *config.scales))

    tensors = OrderedDict(ckpt.params.items())
    for name in ckpt.params:
        if name in ckpt.opt_state.m:
            tensors[f"{OPT_PREFIX}m/{name}"] = ckpt.opt_state.m[name]
            tensors[f"{OPT_PREFIX}v/{name}"] = ckpt.opt_state.v[name]

    chunks.append(struct.pack("<I", len(tensors)))
    for name, tensor in tensors.items():
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack(f"<I{tensor.ndim}I", tensor.ndim, *tensor.shape))
        chunks.append(np.ascontiguousarray(tensor, dtype="<f4").tobytes())
    chunks.append(struct.pack("<Q", ckpt.step))
    return b"".join(chunks)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.data):
            raise CheckpointError(f"Truncated checkpoint at byte {self.pos} (need {size} more bytes)")
        chunk = self.data[self.pos:self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def decode_checkpoint(data: bytes, expected_config: Optional[ModelConfig] = None) -> Checkpoint:
    """Parse and validate everything before any parameter object is built."""
    reader = _Reader(data)
    if reader.take(4) != MAGIC:
        raise CheckpointError("Not a BSRN checkpoint (bad magic)")
    (version,) = reader.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {version}")
    c, s, R, r = reader.unpack("<4I")
    (n_scales,) = reader.unpack("<I")
    scales = reader.unpack(f"<{n_scales}I")
    try:
        config = ModelConfig(c=c, s=s, R=R, r=r, scales=tuple(scales))
    except ConfigError as e:
        raise CheckpointError(f"Checkpoint holds an invalid config: {e}") from e
    if expected_config is not None and expected_config != config:
        raise CheckpointError(f"Checkpoint config {config} does not match expected {expected_config}")

    (n_tensors,) = reader.unpack("<I")
    raw: Dict[str, np.ndarray] = OrderedDict()
    for _ in range(n_tensors):
        (name_len,) = reader.unpack("<I")
        raw_name = reader.take(name_len)
        try:
            name = raw_name.decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointError(f"Tensor name {raw_name!r} is not valid UTF-8") from e
        (rank,) = reader.unpack("<I")
        dims = reader.unpack(f"<{rank}I")
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        payload = reader.take(4 * count)
        raw[name] = np.frombuffer(payload, dtype="<f4").reshape(dims).astype(np.float32)
    (step,) = reader.unpack("<Q")
    if reader.pos != len(data):
        raise CheckpointError(f"{len(data) - reader.pos} trailing bytes after checkpoint")

    expected = tensor_shapes(config)
    model_tensors = {n: t for n, t in raw.items() if not n.startswith(OPT_PREFIX)}
    for name, shape in expected.items():
        if name not in model_tensors:
            raise CheckpointError(f"Checkpoint is missing tensor {name}")
        if tuple(model_tensors[name].shape) != shape:
            raise CheckpointError(f"{name} has shape {model_tensors[name].shape}, config requires {shape}")
    unknown = [n for n in model_tensors if n not in expected]
    if unknown:
        raise CheckpointError(f"Checkpoint has unexpected tensors {unknown}")

    opt_state = AdamState(step=int(step))
    for name, tensor in raw.items():
        if not name.startswith(OPT_PREFIX):
            continue
        kind, _, param_name = name[len(OPT_PREFIX):].partition("/")
        if kind not in ("m", "v") or param_name not in expected or tensor.shape != expected[param_name]:
            raise CheckpointError(f"Malformed optimizer tensor {name}")
        getattr(opt_state, kind)[param_name] = tensor
    if set(opt_state.m) != set(opt_state.v):
        raise CheckpointError("Optimizer moments m and v cover different tensors")

    try:
        params = ModelParams(config, model_tensors)
    except ShapeError as e:
        raise CheckpointError(str(e)) from e
    return Checkpoint(config=config, params=params, opt_state=opt_state, step=int(step))


class CheckpointService:
    """Reads and writes checkpoint files."""

    @retry(
        stop=stop_after_attempt(3),
        wait=wait_exponential(multiplier=0.5, min=0.5, max=4),
        retry=retry_if_exception_type(OSError),
        reraise=True,
        before_sleep=lambda retry_state: logger.warning(
            f"Retrying checkpoint write (attempt {retry_state.attempt_number}) after {retry_state.idle_for}s"
        ),
    )
    def save(self, ckpt: Checkpoint, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_bytes(encode_checkpoint(ckpt))
        os.replace(tmp, path)
        logger.info(f"Wrote checkpoint {path} at step {ckpt.step}")
        return path

    def load(self, path, expected_config: Optional[ModelConfig] = None) -> Checkpoint:
        path = Path(path)
        try:
            data = path.read_bytes()
        except OSError as e:
            raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
        ckpt = decode_checkpoint(data, expected_config)
        logger.info(f"Loaded checkpoint {path} (step {ckpt.step}, config {ckpt.config})")
        return ckpt
