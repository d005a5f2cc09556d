"""Versioned binary checkpoints with bit-exact float64 round trips.

Layout (all integers little-endian)::

    magic   b"MGANCKPT"
    u32     format version
    u64     header length, then a UTF-8 JSON header
    u32     array count, then per array:
              u32 name length, name (UTF-8), u32 ndim, u64 * ndim shape,
              float64 * prod(shape) row-major values
    32 B    SHA-256 of everything above

The header carries the hyperparameters, vocabulary (and its hash), category
set, network descriptions and optimizer step counts.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..config import Hyperparams
from ..corpus import Vocab
from ..model import Network
from ..numerics import Rng
from .optim import Adam

MAGIC = b"MGANCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    hp: Hyperparams
    vocab: Vocab
    categories: list[str]
    networks: dict[str, Network]
    optimizer_states: dict[str, tuple[int, dict[str, np.ndarray]]] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def restore_optimizer(self, role: str, opt: Adam) -> None:
        t, arrays = self.optimizer_states[role]
        opt.load_state(t, arrays)


def _write_array(buf: io.BytesIO, name: str, arr: np.ndarray) -> None:
    raw = name.encode("utf-8")
    buf.write(struct.pack("<I", len(raw)))
    buf.write(raw)
    buf.write(struct.pack("<I", arr.ndim))
    buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    buf.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def save_checkpoint(
    path,
    networks: dict[str, Network],
    vocab: Vocab,
    categories,
    hp: Hyperparams,
    optimizers: dict[str, Adam] | None = None,
    extra: dict | None = None,
) -> None:
    """Write atomically (temp file + rename)."""
    optimizers = optimizers or {}
    header = {
        "hyperparams": hp.to_dict(),
        "vocab_hash": vocab.hash(),
        "vocab": vocab.itos,
        "categories": list(categories),
        "networks": {
            role: {"kind": net.kind, "n_categories": net.n_categories, "literal_eq9": net.literal_eq9}
            for role, net in networks.items()
        },
        "optimizers": {role: opt.t for role, opt in optimizers.items()},
        "extra": extra or {},
    }
    arrays: list[tuple[str, np.ndarray]] = []
    for role, net in networks.items():
        arrays += [(f"{role}/{k}", p.data) for k, p in net.params.items()]
    for role, opt in optimizers.items():
        arrays += [(f"opt.{role}/{k}", a) for k, a in opt.state_arrays().items()]

    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", FORMAT_VERSION))
    hdr = json.dumps(header).encode("utf-8")
    buf.write(struct.pack("<Q", len(hdr)))
    buf.write(hdr)
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays:
        _write_array(buf, name, arr)
    body = buf.getvalue()
    blob = body + hashlib.sha256(body).digest()

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("checkpoint is truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path, expected_vocab_hash: str | None = None) -> Checkpoint:
    """Parse and verify the whole file before building any object."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 4 + 32 or data[:len(MAGIC)] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic or too short)")
    body, digest = data[:-32], data[-32:]
    r = _Reader(body)
    r.take(len(MAGIC))
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointError(f"{path}: checksum mismatch (truncated or corrupt)")
    (hlen,) = r.unpack("<Q")
    try:
        header = json.loads(r.take(hlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CheckpointError(f"{path}: corrupt header") from None
    if expected_vocab_hash is not None and header["vocab_hash"] != expected_vocab_hash:
        raise CheckpointError(
            f"{path}: vocabulary hash {header['vocab_hash'][:12]} does not match "
            f"expected {expected_vocab_hash[:12]}"
        )
    arrays: dict[str, np.ndarray] = {}
    (count,) = r.unpack("<I")
    for _ in range(count):
        (nlen,) = r.unpack("<I")
        name = r.take(nlen).decode("utf-8")
        (ndim,) = r.unpack("<I")
        shape = r.unpack(f"<{ndim}Q") if ndim else ()
        size = int(np.prod(shape)) if ndim else 1
        arrays[name] = np.frombuffer(r.take(8 * size), dtype="<f8").astype(np.float64).reshape(shape)

    vocab = Vocab(header["vocab"][2:])
    if vocab.hash() != header["vocab_hash"]:
        raise CheckpointError(f"{path}: stored vocabulary does not match its hash")
    hp = Hyperparams.from_dict(header["hyperparams"])
    networks = {}
    for role, desc in header["networks"].items():
        net = Network(desc["kind"], len(vocab), hp, Rng(0), desc["n_categories"],
                      literal_eq9=desc["literal_eq9"])
        prefix = f"{role}/"
        try:
            net.params.load_arrays({k[len(prefix):]: a for k, a in arrays.items() if k.startswith(prefix)})
        except KeyError as e:
            raise CheckpointError(f"{path}: missing array {role}/{e.args[0]}") from None
        networks[role] = net
    opt_states = {}
    for role, t in header["optimizers"].items():
        prefix = f"opt.{role}/"
        opt_states[role] = (t, {k[len(prefix):]: a for k, a in arrays.items() if k.startswith(prefix)})
    return Checkpoint(hp, vocab, header["categories"], networks, opt_states, header.get("extra", {}))
