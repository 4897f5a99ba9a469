"""Reproducible random streams.

Every random draw in the package goes through a :class:`RandomSource`.  A
source is built from an :class:`RngStream` (master seed, stream id) and owns
four independent lanes, each a PCG64 generator seeded from
``SeedSequence(master_seed, spawn_key=(stream_id, lane))``:

* ``bits``     fair bits, drawn in 64-bit words and consumed LSB first,
* ``index``    uniform integers in ``[0, n)`` by 32-bit rejection sampling,
* ``uniform``  doubles in the open interval (0, 1), 53 bits per word,
* ``misc``     a plain :class:`numpy.random.Generator` for everything else.

Each lane is consumed sequentially, so drawing ``a`` items then ``b`` items
gives exactly the same values as drawing ``a + b`` at once.  That property
lets the scalar reference walkers and the vectorised/compiled engines agree
bit for bit when fed from the same stream.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ALGORITHM = "numpy.PCG64+SeedSequence(entropy=master_seed, spawn_key=(stream_id, lane)); lanes=bits,index,uniform,misc"

_MASK64 = (1 << 64) - 1
_LANES = {"bits": 0, "index": 1, "uniform": 2, "misc": 3}


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed <= _MASK64:
            raise ValueError(f"master_seed must fit in 64 bits, got {self.master_seed}")
        if not 0 <= self.stream_id <= _MASK64:
            raise ValueError(f"stream_id must fit in 64 bits, got {self.stream_id}")


def _lane_generator(stream: RngStream, lane: str) -> np.random.Generator:
    ss = np.random.SeedSequence(stream.master_seed, spawn_key=(stream.stream_id, _LANES[lane]))
    return np.random.Generator(np.random.PCG64(ss))


class RandomSource:
    """Buffered random draws for one replication or one walk."""

    algorithm = ALGORITHM

    def __init__(self, stream: RngStream):
        self.stream = stream
        self._bits_gen = _lane_generator(stream, "bits")
        self._index_gen = _lane_generator(stream, "index")
        self._uniform_gen = _lane_generator(stream, "uniform")
        self.generator = _lane_generator(stream, "misc")
        self._bit_buf = np.empty(0, dtype=np.uint8)
        self._u32_buf = np.empty(0, dtype=np.uint64)

    # -- fair bits -----------------------------------------------------
    def fair_words(self, count: int) -> np.ndarray:
        """Return ``count`` raw 64-bit words from the bit lane.

        Only valid when no partially consumed word is pending, otherwise the
        stream position would become ambiguous.
        """
        if self._bit_buf.size:
            raise RuntimeError("bit lane has a partially consumed word; cannot hand out raw words")
        return self._bits_gen.bit_generator.random_raw(int(count)).astype(np.uint64)

    def fair_bit_block(self, nbits: int) -> np.ndarray:
        """Words covering the next ``nbits`` bits; bits past ``nbits`` stay queued.

        After this call the lane is positioned exactly at bit ``nbits``, so a
        following :meth:`fair_bits` or :meth:`fair_bit_block` continues the
        same sequence.  Unused high bits of the last returned word are zero
        when the lane was not word-aligned.
        """
        if self._bit_buf.size:
            bits = self.fair_bits(nbits)
            padded = np.zeros((int(nbits) + 63) // 64 * 64, dtype=np.uint8)
            padded[: bits.size] = bits
            return np.packbits(padded, bitorder="little").view("<u8").astype(np.uint64)
        words = self.fair_words((int(nbits) + 63) // 64)
        rem = int(nbits) % 64
        if rem:
            tail = np.unpackbits(words[-1:].astype("<u8").view(np.uint8), bitorder="little")
            self._bit_buf = tail[rem:]
        return words

    def fair_bits(self, count: int) -> np.ndarray:
        """Return ``count`` fair bits (uint8 0/1)."""
        count = int(count)
        if count <= self._bit_buf.size:
            out, self._bit_buf = self._bit_buf[:count], self._bit_buf[count:]
            return out
        need = count - self._bit_buf.size
        words = self._bits_gen.bit_generator.random_raw((need + 63) // 64)
        fresh = np.unpackbits(words.astype("<u8").view(np.uint8), bitorder="little")
        out = np.concatenate([self._bit_buf, fresh[:need]])
        self._bit_buf = fresh[need:]
        return out

    # -- uniform indices -----------------------------------------------
    def _raw_u32(self, count: int) -> np.ndarray:
        if count > self._u32_buf.size:
            words = self._index_gen.bit_generator.random_raw((count - self._u32_buf.size + 1) // 2 + 1)
            halves = np.empty(2 * words.size, dtype=np.uint64)
            halves[0::2] = words & np.uint64(0xFFFFFFFF)
            halves[1::2] = words >> np.uint64(32)
            self._u32_buf = np.concatenate([self._u32_buf, halves])
        return self._u32_buf

    def choice_index(self, n: int, count: int) -> np.ndarray:
        """Return ``count`` exact-uniform integers in ``[0, n)``."""
        n, count = int(n), int(count)
        if n < 1:
            raise ValueError("n must be >= 1")
        if count == 0:
            return np.empty(0, dtype=np.int64)
        limit = np.uint64((1 << 32) - ((1 << 32) % n))
        want = count
        while True:
            raw = self._raw_u32(want + 8 + want // 64)
            ok = np.flatnonzero(raw < limit)
            if ok.size >= count:
                cut = ok[count - 1] + 1
                vals = raw[ok[:count]] % np.uint64(n)
                self._u32_buf = raw[cut:]
                return vals.astype(np.int64)
            want = raw.size + count

    # -- uniforms ------------------------------------------------------
    def uniforms(self, count: int) -> np.ndarray:
        """Return ``count`` doubles strictly inside (0, 1)."""
        words = self._uniform_gen.bit_generator.random_raw(int(count))
        return ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def split_stream(master: RngStream, stream_id: int) -> RandomSource:
    """Deterministic, platform-independent substream ``stream_id`` of ``master``.

    The substream key combines the master's own id with ``stream_id`` so
    nested splitting never collides with a sibling split.
    """
    key = (master.stream_id * 0x9E3779B97F4A7C15 + int(stream_id) + 1) & _MASK64
    return RandomSource(RngStream(master.master_seed, key))


def source_for(seed: int, replication: int) -> RandomSource:
    """The source used for replication ``replication`` of an experiment seeded with ``seed``."""
    return split_stream(RngStream(seed), replication)
