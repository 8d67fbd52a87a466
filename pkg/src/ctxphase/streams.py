"""Counter-based random bit streams keyed by (seed, stream id).

Bit ``i`` of a stream depends only on the key and ``i``, so any slice of
pair ids can be regenerated independently of the others.
"""

from __future__ import annotations

import numpy as np

CONTEXT_STREAMS = {"Z": 0, "X": 3}
STATION_STREAMS = {"A": 1, "B": 2}


def philox_key(seed: int, stream: int) -> int:
    words = np.random.SeedSequence([int(seed), int(stream)]).generate_state(2, np.uint64)
    return int(words[0]) | (int(words[1]) << 64)


def keyed_bits(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Bits ``start .. start+count-1`` of the stream, as int8 zeros and ones."""
    if start < 0 or count < 0:
        raise ValueError("start and count must be non-negative")
    block, skip = divmod(start, 4)
    bitgen = np.random.Philox(key=philox_key(seed, stream), counter=block)
    raw = bitgen.random_raw(skip + count)[skip:]
    return (raw >> np.uint64(63)).astype(np.int8)


class BitStream:
    """Lazily cached view of one keyed stream, indexed by pair id."""

    def __init__(self, seed: int, stream: int, chunk: int = 4096):
        self.seed, self.stream, self.chunk = seed, stream, chunk
        self._start = 0
        self._bits = np.zeros(0, dtype=np.int8)

    def __getitem__(self, i: int) -> int:
        if not self._start <= i < self._start + len(self._bits):
            self._start = (i // self.chunk) * self.chunk
            self._bits = keyed_bits(self.seed, self.stream, self._start, self.chunk)
        return int(self._bits[i - self._start])


def class_draws(seed: int, n: int, start: int = 0, context: str = "Z") -> np.ndarray:
    """Context class per pair id (0 = class 1, 1 = class 2), each with probability 1/2.

    Each measurement context (Z or X) has its own independent stream.
    """
    return keyed_bits(seed, CONTEXT_STREAMS[context], start, n)
