"""Named-tensor weight container: binary format, hashing, seeded init.

File layout (little-endian throughout):

    magic  4 bytes  b"ACNW"
    u32    version  (1)
    u32    tensor count
    then per tensor:
      u16   name length, followed by that many UTF-8 bytes
      u8    rank
      u32   dim, rank times
      f32   data, row-major, prod(dims) values

The format is deliberately trivial to parse from any language.  A store's
manifest hash is the SHA-256 of exactly these bytes, so it is stable across
platforms.
"""

import hashlib
import struct
from typing import Dict, Iterator, Tuple

import numpy as np

from .config import ModelConfig, tensor_manifest
from .errors import FormatError

MAGIC = b"ACNW"
VERSION = 1


class WeightStore:
    """Ordered, immutable name -> float32 array mapping."""

    def __init__(self, tensors):
        self._tensors: Dict[str, np.ndarray] = {}
        items = tensors.items() if hasattr(tensors, "items") else tensors
        for name, arr in items:
            if name in self._tensors:
                raise FormatError(f"duplicate tensor name {name!r}")
            arr = np.asarray(arr, dtype=np.float32)
            if arr.ndim < 1:
                raise FormatError(f"tensor {name!r} must have rank >= 1")
            arr = np.ascontiguousarray(arr)
            arr.flags.writeable = False
            self._tensors[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self) -> Iterator[Tuple[str, np.ndarray]]:
        return iter(self._tensors.items())

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(self._tensors)

    def n_values(self) -> int:
        """Total number of stored reals."""
        return sum(int(a.size) for a in self._tensors.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightStore):
            return NotImplemented
        if self.names != other.names:
            return False
        return all(
            a.shape == other[n].shape and a.tobytes() == other[n].tobytes()
            for n, a in self.items()
        )

    def serialize(self) -> bytes:
        chunks = [struct.pack("<4sII", MAGIC, VERSION, len(self._tensors))]
        for name, arr in self.items():
            encoded = name.encode("utf-8")
            if len(encoded) > 0xFFFF:
                raise FormatError(f"tensor name too long: {name[:40]!r}...")
            if arr.ndim > 0xFF:
                raise FormatError(f"tensor {name!r} rank {arr.ndim} exceeds 255")
            chunks.append(struct.pack("<H", len(encoded)))
            chunks.append(encoded)
            chunks.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
            chunks.append(arr.astype("<f4", copy=False).tobytes(order="C"))
        return b"".join(chunks)

    def manifest_hash(self) -> str:
        return hashlib.sha256(self.serialize()).hexdigest()

    def manifest_json(self) -> dict:
        """Debugging sidecar: names, shapes and the content hash."""
        return {
            "format": MAGIC.decode("ascii"),
            "version": VERSION,
            "sha256": self.manifest_hash(),
            "tensors": [
                {"name": n, "shape": list(a.shape)} for n, a in self.items()
            ],
        }


def save(store: WeightStore, path) -> None:
    with open(path, "wb") as f:
        f.write(store.serialize())


def load(path) -> WeightStore:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 12:
        raise FormatError(f"weight file {path} too short for a header")
    magic, version, count = struct.unpack_from("<4sII", blob, 0)
    if magic != MAGIC:
        raise FormatError(
            f"bad magic {magic!r} in {path} (expected {MAGIC!r})"
        )
    if version != VERSION:
        raise FormatError(f"unsupported weight format version {version}")
    pos = 12
    tensors = []
    seen = set()
    for _ in range(count):
        if pos + 2 > len(blob):
            raise FormatError(f"truncated file {path}: tensor header cut off")
        (name_len,) = struct.unpack_from("<H", blob, pos)
        pos += 2
        if pos + name_len + 1 > len(blob):
            raise FormatError(f"truncated file {path}: tensor name cut off")
        name = blob[pos:pos + name_len].decode("utf-8")
        pos += name_len
        if name in seen:
            raise FormatError(f"duplicate tensor name {name!r} in {path}")
        seen.add(name)
        (rank,) = struct.unpack_from("<B", blob, pos)
        pos += 1
        if rank < 1:
            raise FormatError(f"tensor {name!r} has rank 0")
        if pos + 4 * rank > len(blob):
            raise FormatError(f"truncated file {path}: dims of {name!r} cut off")
        dims = struct.unpack_from(f"<{rank}I", blob, pos)
        pos += 4 * rank
        n = 1
        for d in dims:
            n *= d
        nbytes = 4 * n
        if pos + nbytes > len(blob):
            raise FormatError(
                f"truncated tensor {name!r}: header declares {n} values "
                f"({nbytes} bytes) but only {len(blob) - pos} bytes remain"
            )
        arr = np.frombuffer(blob, dtype="<f4", count=n, offset=pos)
        pos += nbytes
        tensors.append((name, arr.reshape(dims)))
    if pos != len(blob):
        raise FormatError(
            f"{len(blob) - pos} trailing bytes after the last tensor in {path}"
        )
    return WeightStore(tensors)


def init_random(cfg: ModelConfig, seed: int) -> WeightStore:
    """Seeded deterministic weights covering exactly the config's manifest."""
    rng = np.random.default_rng(seed)
    tensors = []
    for spec in tensor_manifest(cfg):
        kind = spec.init[0]
        if kind == "uniform":
            a = spec.init[1]
            arr = rng.uniform(-a, a, size=spec.shape)
        elif kind == "zeros":
            arr = np.zeros(spec.shape)
        elif kind == "ones":
            arr = np.ones(spec.shape)
        elif kind == "const":
            arr = np.full(spec.shape, spec.init[1])
        else:  # pragma: no cover - manifest is internal
            raise FormatError(f"unknown init kind {kind!r}")
        tensors.append((spec.name, arr.astype(np.float32)))
    return WeightStore(tensors)
