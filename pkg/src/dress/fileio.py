"""Binary file formats for every pipeline stage.

All integers are little-endian. Each format is a 4-byte magic, a u32
version, a header, and a payload. Writers may append a trailer (magic
"DRSH" + 64 hex chars) carrying the sha256 of the config that produced the
file; loaders return it so downstream stages can refuse mismatched inputs.

  DRSD  dataset     header: count u32, resolution u32, factor count u32,
                    per factor (name len u16, UTF-8 name, cardinality u16);
                    payload: pixels f32 row-major, then labels u16
  DRSL  latents     header: image count u32, group count u32, group_dim u32,
                    group names (len u16 + UTF-8 each);
                    payload: f32, image-major then group-major
  DRSS  slot codes  header: image count u32, slot count u32, signature dim
                    u32, content dim u32; payload per image: permutation u16
                    per slot, then per slot signature f32 and content f32
  DRSP  partition   header: dataset size u32, k u32, source (len u16 +
                    UTF-8); payload: labels u32
  DRSE  episodes    header: episode count u32; per episode: way u16, shots
                    u16, queries u16, source (len u16 + UTF-8), support
                    indices u32 and labels u8, query indices u32 and labels u8
  DRSM  checkpoint  header: layer count u32, layer sizes u32 each, parameter
                    count u64; payload: f32 parameters, then a u8 flag and,
                    if set, Adam state (step u64, first and second moments
                    f64 each)
"""

from __future__ import annotations

import struct
from typing import Sequence

import numpy as np

from .clustering import Partition
from .datagen import Dataset, FactorSpec
from .encoders import LatentRep, SlotRep
from .metalearn import MetaState
from .nncore import AdamState, MLPArch, adam_init, num_params
from .taskgen import Episode

VERSION = 1
TRAILER_MAGIC = b"DRSH"


class FileFormatError(ValueError):
    """The bytes on disk do not match the documented layout."""


class _Reader:
    def __init__(self, data: bytes, path: str):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FileFormatError(f"{self.path}: truncated (needed {n} bytes at offset {self.pos})")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack("<" + fmt, self.take(struct.calcsize("<" + fmt)))

    def u8(self) -> int:
        return self.unpack("B")[0]

    def u16(self) -> int:
        return self.unpack("H")[0]

    def u32(self) -> int:
        return self.unpack("I")[0]

    def u64(self) -> int:
        return self.unpack("Q")[0]

    def string(self) -> str:
        return self.take(self.u16()).decode("utf-8")

    def array(self, dtype: str, count: int) -> np.ndarray:
        itemsize = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(count * itemsize), dtype=dtype).copy()


def _check_header(r: _Reader, magic: bytes):
    got = r.take(4)
    if got != magic:
        raise FileFormatError(f"{r.path}: expected magic {magic!r}, found {got!r}")
    version = r.u32()
    if version != VERSION:
        raise FileFormatError(f"{r.path}: unsupported version {version}")


def _read_trailer(r: _Reader) -> str | None:
    """Optional config-hash trailer after the documented body."""
    remaining = len(r.data) - r.pos
    if remaining == 0:
        return None
    if remaining != 4 + 64 or r.take(4) != TRAILER_MAGIC:
        raise FileFormatError(f"{r.path}: {remaining} unexpected trailing bytes")
    return r.take(64).decode("ascii")


def _string_bytes(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"string too long to store: {len(raw)} bytes")
    return struct.pack("<H", len(raw)) + raw


def _finish(path: str, body: bytearray, config_hash: str | None) -> None:
    if config_hash is not None:
        if len(config_hash) != 64:
            raise ValueError(f"config hash must be 64 hex chars, got {len(config_hash)}")
        body += TRAILER_MAGIC + config_hash.encode("ascii")
    with open(path, "wb") as fh:
        fh.write(body)


def save_dataset(path: str, d: Dataset, config_hash: str | None = None) -> None:
    body = bytearray(b"DRSD")
    body += struct.pack("<IIII", VERSION, len(d), d.resolution, len(d.spec))
    for f in d.spec:
        body += _string_bytes(f.name) + struct.pack("<H", f.cardinality)
    body += np.ascontiguousarray(d.images, dtype="<f4").tobytes()
    body += np.ascontiguousarray(d.labels, dtype="<u2").tobytes()
    _finish(path, body, config_hash)


def load_dataset(path: str) -> tuple[Dataset, str | None]:
    """The generating seed is not part of the format; the loaded Dataset
    carries seed 0."""
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    _check_header(r, b"DRSD")
    count, resolution, num_factors = r.unpack("III")
    spec = [FactorSpec(r.string(), r.u16()) for _ in range(num_factors)]
    images = r.array("<f4", count * resolution * resolution * 3)
    images = images.reshape(count, resolution, resolution, 3)
    labels = r.array("<u2", count * num_factors).reshape(count, num_factors).astype(np.int64)
    trailer = _read_trailer(r)
    return Dataset(images=images, labels=labels, spec=spec, seed=0), trailer


def save_latents(path: str, reps: Sequence[LatentRep], config_hash: str | None = None) -> None:
    if not reps:
        raise ValueError("no latent representations to save")
    names = reps[0].group_names
    dims = {len(g) for rep in reps for g in rep.groups}
    if len(dims) != 1:
        raise ValueError(f"file format requires one uniform group_dim, found {sorted(dims)}")
    group_dim = dims.pop()
    body = bytearray(b"DRSL")
    body += struct.pack("<IIII", VERSION, len(reps), len(names), group_dim)
    for name in names:
        body += _string_bytes(name)
    payload = np.stack([np.stack(rep.groups) for rep in reps])  # (n, G, dim)
    body += np.ascontiguousarray(payload, dtype="<f4").tobytes()
    _finish(path, body, config_hash)


def load_latents(path: str) -> tuple[list[LatentRep], str | None]:
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    _check_header(r, b"DRSL")
    count, num_groups, group_dim = r.unpack("III")
    names = [r.string() for _ in range(num_groups)]
    flat = r.array("<f4", count * num_groups * group_dim).astype(np.float64)
    payload = flat.reshape(count, num_groups, group_dim)
    trailer = _read_trailer(r)
    reps = [LatentRep(groups=list(payload[i]), group_names=list(names))
            for i in range(count)]
    return reps, trailer


def save_slots(path: str, slot_reps: Sequence[SlotRep], config_hash: str | None = None) -> None:
    if not slot_reps:
        raise ValueError("no slot representations to save")
    num_slots = len(slot_reps[0].slots)
    sig_dim = len(slot_reps[0].slots[0][0])
    content_dim = len(slot_reps[0].slots[0][1])
    body = bytearray(b"DRSS")
    body += struct.pack("<IIIII", VERSION, len(slot_reps), num_slots, sig_dim, content_dim)
    for i, rep in enumerate(slot_reps):
        if len(rep.slots) != num_slots:
            raise ValueError(f"image {i}: slot count differs from image 0")
        body += np.ascontiguousarray(rep.permutation, dtype="<u2").tobytes()
        for sig, content in rep.slots:
            if len(sig) != sig_dim or len(content) != content_dim:
                raise ValueError(f"image {i}: slot shape differs from image 0")
            body += np.ascontiguousarray(sig, dtype="<f4").tobytes()
            body += np.ascontiguousarray(content, dtype="<f4").tobytes()
    _finish(path, body, config_hash)


def load_slots(path: str) -> tuple[list[SlotRep], str | None]:
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    _check_header(r, b"DRSS")
    count, num_slots, sig_dim, content_dim = r.unpack("IIII")
    reps = []
    for _ in range(count):
        perm = r.array("<u2", num_slots).astype(np.int64)
        slots = []
        for _ in range(num_slots):
            sig = r.array("<f4", sig_dim).astype(np.float64)
            content = r.array("<f4", content_dim).astype(np.float64)
            slots.append((sig, content))
        reps.append(SlotRep(slots=slots, permutation=perm))
    trailer = _read_trailer(r)
    return reps, trailer


def save_partition(path: str, part: Partition, config_hash: str | None = None) -> None:
    body = bytearray(b"DRSP")
    body += struct.pack("<III", VERSION, len(part.labels), part.k)
    body += _string_bytes(part.source)
    body += np.ascontiguousarray(part.labels, dtype="<u4").tobytes()
    _finish(path, body, config_hash)


def load_partition(path: str) -> tuple[Partition, str | None]:
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    _check_header(r, b"DRSP")
    size, k = r.unpack("II")
    source = r.string()
    labels = r.array("<u4", size).astype(np.int64)
    trailer = _read_trailer(r)
    return Partition(labels=labels, k=k, source=source), trailer


def save_episodes(path: str, episodes: Sequence[Episode], config_hash: str | None = None) -> None:
    body = bytearray(b"DRSE")
    body += struct.pack("<II", VERSION, len(episodes))
    for ep in episodes:
        body += struct.pack("<HHH", ep.way, ep.shots, ep.queries)
        body += _string_bytes(ep.source)
        s_idx, s_y, q_idx, q_y = ep.arrays()
        body += np.ascontiguousarray(s_idx, dtype="<u4").tobytes()
        body += np.ascontiguousarray(s_y, dtype="u1").tobytes()
        body += np.ascontiguousarray(q_idx, dtype="<u4").tobytes()
        body += np.ascontiguousarray(q_y, dtype="u1").tobytes()
    _finish(path, body, config_hash)


def load_episodes(path: str) -> tuple[list[Episode], str | None]:
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    _check_header(r, b"DRSE")
    (count,) = r.unpack("I")
    episodes = []
    for _ in range(count):
        way, shots, queries = r.unpack("HHH")
        source = r.string()
        s_idx = r.array("<u4", way * shots)
        s_y = r.array("u1", way * shots)
        q_idx = r.array("<u4", way * queries)
        q_y = r.array("u1", way * queries)
        episodes.append(Episode(
            support=[(int(i), int(c)) for i, c in zip(s_idx, s_y)],
            query=[(int(i), int(c)) for i, c in zip(q_idx, q_y)],
            way=way, shots=shots, queries=queries, source=source))
    trailer = _read_trailer(r)
    return episodes, trailer


def save_checkpoint(path: str, arch: MLPArch, phi: np.ndarray,
                    adam: AdamState | None, config_hash: str | None = None) -> None:
    if phi.size != num_params(arch):
        raise ValueError(f"parameter vector has {phi.size} values, arch needs {num_params(arch)}")
    body = bytearray(b"DRSM")
    body += struct.pack("<II", VERSION, len(arch.layer_sizes))
    body += struct.pack(f"<{len(arch.layer_sizes)}I", *arch.layer_sizes)
    body += struct.pack("<Q", phi.size)
    body += np.ascontiguousarray(phi, dtype="<f4").tobytes()
    if adam is None:
        body += struct.pack("B", 0)
    else:
        if adam.m.size != phi.size or adam.v.size != phi.size:
            raise ValueError("Adam moment size does not match the parameter count")
        body += struct.pack("B", 1)
        body += struct.pack("<Q", adam.step)
        body += np.ascontiguousarray(adam.m, dtype="<f8").tobytes()
        body += np.ascontiguousarray(adam.v, dtype="<f8").tobytes()
    _finish(path, body, config_hash)


def load_checkpoint(path: str) -> tuple[MLPArch, np.ndarray, AdamState | None, str | None]:
    with open(path, "rb") as fh:
        r = _Reader(fh.read(), path)
    _check_header(r, b"DRSM")
    (num_layers,) = r.unpack("I")
    sizes = r.unpack(f"{num_layers}I")
    arch = MLPArch(tuple(sizes))
    (count,) = r.unpack("Q")
    if count != num_params(arch):
        raise FileFormatError(f"{path}: parameter count {count} does not match architecture")
    phi = r.array("<f4", count)
    adam = None
    if r.u8():
        step = r.u64()
        m = r.array("<f8", count)
        v = r.array("<f8", count)
        adam = AdamState(step=step, m=m, v=v)
    trailer = _read_trailer(r)
    return arch, phi, adam, trailer


def checkpoint_to_state(arch: MLPArch, phi: np.ndarray, adam: AdamState | None,
                        config: dict) -> MetaState:
    """Rebuild a resumable MetaState; the epoch equals the Adam step count
    because meta-training takes exactly one outer step per epoch."""
    if adam is None:
        adam = adam_init(phi.size)
    return MetaState(phi=phi, adam=adam, epoch=adam.step, config=dict(config))


def save_ppm(path: str, image: np.ndarray, comment: str | None = None) -> None:
    """Binary portable pixmap (P6, maxval 255) with an optional comment line."""
    if image.ndim != 3 or image.shape[2] != 3 or image.dtype != np.uint8:
        raise ValueError(f"expected (H, W, 3) uint8 image, got {image.shape} {image.dtype}")
    h, w = image.shape[:2]
    header = b"P6\n"
    if comment is not None:
        if "\n" in comment:
            raise ValueError("comment must be a single line")
        header += b"# " + comment.encode("utf-8") + b"\n"
    header += f"{w} {h}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header + np.ascontiguousarray(image).tobytes())
