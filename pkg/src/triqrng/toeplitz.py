"""Strong extraction to uniform bits: seeded Toeplitz hashing over GF(2)
plus the two-source cyclic-convolution extractor that provisions the seed.

Toeplitz convention (fixed, golden-vector tested): for input length n and
output length m, the matrix is m x n with

    T[i][j] = s[n - 1 + i - j]

where s is the seed bit string of length n + m - 1, bit 0 first. Output
bit i is the GF(2) inner product of row i with the input. Equivalently,
output bits are coefficients n-1 .. n+m-2 of the carryless product
s(t) * x(t), which is what the fast path computes.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .bits import BitBlock


@dataclass
class ToeplitzSeed:
    """Seed bits defining one n->m Toeplitz hash."""

    bits: BitBlock
    n: int
    m: int

    def __post_init__(self) -> None:
        if self.m > self.n:
            raise ValueError("m must be <= n")
        if self.bits.len != self.n + self.m - 1:
            raise ValueError(f"seed must hold n + m - 1 = {self.n + self.m - 1} bits, got {self.bits.len}")


def toeplitz_extract(block: BitBlock, seed: ToeplitzSeed, m: int) -> BitBlock:
    """Reference GF(2) matrix-vector path (the oracle for the fast paths)."""
    if block.len != seed.n:
        raise ValueError(f"input length {block.len} != seed.n {seed.n}")
    if m != seed.m:
        raise ValueError(f"m {m} != seed.m {seed.m}")
    s = seed.bits.bits()
    x = block.bits().astype(np.int64)
    n = seed.n
    rows = s[(n - 1 + np.arange(m)[:, None]) - np.arange(n)[None, :]]
    return BitBlock.from_bits(((rows.astype(np.int64) @ x) & 1).astype(np.uint8))


def _bits_to_int(bits: np.ndarray) -> int:
    return int.from_bytes(np.packbits(bits, bitorder="little").tobytes(), "little")


def _int_to_bits(value: int, nbits: int) -> np.ndarray:
    raw = value.to_bytes((nbits + 7) // 8, "little")
    return np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[:nbits]


def clmul(a: int, b: int) -> int:
    """Carryless (GF(2)[t]) product of two bit polynomials."""
    out = 0
    while b:
        low = b & -b
        out ^= a << (low.bit_length() - 1)
        b ^= low
    return out


def toeplitz_extract_fast(block: BitBlock, seed: ToeplitzSeed, m: int) -> BitBlock:
    """Same contract as toeplitz_extract via one carryless multiplication."""
    if block.len != seed.n:
        raise ValueError(f"input length {block.len} != seed.n {seed.n}")
    if m != seed.m:
        raise ValueError(f"m {m} != seed.m {seed.m}")
    n = seed.n
    prod = clmul(_bits_to_int(seed.bits.bits()), _bits_to_int(block.bits()))
    window = (prod >> (n - 1)) & ((1 << m) - 1)
    return BitBlock.from_bits(_int_to_bits(window, m))


class ToeplitzExtractor:
    """A cached seed expanded once for high-rate batch extraction.

    The expanded row matrix is reused across blocks (the seed is reusable);
    the batch path multiplies in float32 (exact: row sums are < 2^24) and
    reduces mod 2. Bit-exact against toeplitz_extract.
    """

    def __init__(self, seed: ToeplitzSeed):
        self.seed = seed
        s = seed.bits.bits()
        n, m = seed.n, seed.m
        idx = (n - 1 + np.arange(m)[:, None]) - np.arange(n)[None, :]
        self._rows_t = np.ascontiguousarray(s[idx].T.astype(np.float32))  # (n, m)

    def extract(self, block: BitBlock) -> BitBlock:
        return BitBlock.from_bits(self.extract_batch(block.bits()[None, :])[0])

    def extract_batch(self, blocks: np.ndarray) -> np.ndarray:
        """(B, n) 0/1 array -> (B, m) 0/1 array."""
        if blocks.ndim != 2 or blocks.shape[1] != self.seed.n:
            raise ValueError(f"expected (B, {self.seed.n}) bit array")
        counts = blocks.astype(np.float32) @ self._rows_t
        return (counts.astype(np.uint32) & 1).astype(np.uint8)


# ---------------------------------------------------------------------------
# Dodis two-source extractor: first m bits of the cyclic GF(2) convolution,
# valid when the length is a prime with 2 as a primitive root.

def _order_of_two(n: int) -> int:
    order, v = 1, 2 % n
    while v != 1:
        v = (v * 2) % n
        order += 1
        if order > n:  # pragma: no cover - cannot happen for prime n
            raise ArithmeticError("order computation diverged")
    return order


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def is_admissible(n: int) -> bool:
    """True when n is prime and 2 is a primitive root modulo n."""
    if n < 3 or not _is_prime(n):
        return False
    return _order_of_two(n) == n - 1


ADMISSIBLE_PRIMES: tuple[int, ...] = tuple(p for p in range(3, 4100) if is_admissible(p))


def next_admissible(n: int) -> int:
    """Smallest admissible prime >= n."""
    p = max(3, n)
    while not is_admissible(p):
        p += 1
    return p


def dodis_extract(x: BitBlock, y: BitBlock, m: int) -> BitBlock:
    """First m bits of x * y in GF(2)[t] / (t^n - 1)."""
    n = x.len
    if y.len != n:
        raise ValueError("x and y must have equal length")
    if not is_admissible(n):
        raise ValueError(f"n={n} is not an admissible length (prime with 2 a primitive root)")
    if not 0 < m <= n:
        raise ValueError("need 0 < m <= n")
    prod = clmul(_bits_to_int(x.bits()), _bits_to_int(y.bits()))
    folded = (prod & ((1 << n) - 1)) ^ (prod >> n)  # t^n == 1
    return BitBlock.from_bits(_int_to_bits(folded & ((1 << m) - 1), m))


# ---------------------------------------------------------------------------
# Seed provisioning

class BitSource:
    """Pulls fixed-size bit chunks out of an iterator of BitBlocks."""

    def __init__(self, blocks: Iterable[BitBlock]):
        self._it: Iterator[BitBlock] = iter(blocks)
        self._buf = np.zeros(0, dtype=np.uint8)

    def take(self, nbits: int) -> np.ndarray:
        parts = [self._buf]
        have = self._buf.size
        while have < nbits:
            try:
                blk = next(self._it)
            except StopIteration:
                raise RuntimeError("entropy stream exhausted while assembling seed") from None
            parts.append(blk.bits())
            have += blk.len
        cat = np.concatenate(parts) if len(parts) > 1 else parts[0]
        self._buf = cat[nbits:]
        return cat[:nbits]


def seed_chain(source: BitSource, n: int, m: int, chunk_bits: int | None = None) -> ToeplitzSeed:
    """Assemble an n->m Toeplitz seed from raw entropy via Dodis extraction.

    Each round draws two fresh raw blocks of an admissible prime length p
    (the smallest admissible prime covering the remaining need, or covering
    `chunk_bits` when given) and contributes dodis_extract(x, y) output
    bits; chunks are concatenated until n + m - 1 seed bits exist.
    """
    need = n + m - 1
    pieces: list[np.ndarray] = []
    remaining = need
    while remaining > 0:
        p = next_admissible(remaining if chunk_bits is None else min(chunk_bits, remaining))
        x = BitBlock.from_bits(source.take(p))
        y = BitBlock.from_bits(source.take(p))
        out = dodis_extract(x, y, min(p, remaining))
        pieces.append(out.bits())
        remaining -= out.len
    return ToeplitzSeed(bits=BitBlock.from_bits(np.concatenate(pieces)), n=n, m=m)


# Seed cache layout: little-endian uint32 n, uint32 m, then the packed seed
# bits MSB-first (ceil((n+m-1)/8) bytes).

def save_seed(seed: ToeplitzSeed, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", seed.n, seed.m))
        fh.write(seed.bits.tobytes())


def load_seed(path: str) -> ToeplitzSeed:
    with open(path, "rb") as fh:
        n, m = struct.unpack("<II", fh.read(8))
        data = fh.read()
    nbits = n + m - 1
    if len(data) != (nbits + 7) // 8:
        raise ValueError(f"seed file {path} is truncated")
    return ToeplitzSeed(bits=BitBlock.from_bytes(data, nbits), n=n, m=m)


def obtain_seed(source: BitSource, n: int, m: int, cache_path: str | None = None) -> ToeplitzSeed:
    """Load a cached seed when present and compatible, else generate and cache."""
    if cache_path and os.path.exists(cache_path):
        seed = load_seed(cache_path)
        if seed.n == n and seed.m == m:
            return seed
    seed = seed_chain(source, n, m)
    if cache_path:
        save_seed(seed, cache_path)
    return seed
