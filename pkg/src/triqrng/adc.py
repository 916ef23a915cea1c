"""Digitizer model: voltage-to-code mapping with bounded DNL.

Codes are offset binary internally and exposed as signed two's-complement
integers in [-2^(N-1), 2^(N-1)-1]. Differential nonlinearity is modeled as
deterministic bounded uniform jitter on the bin edges; dnl_max < 0.5
guarantees strictly increasing edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .source import QuadratureFrame


@dataclass(frozen=True)
class AdcSpec:
    """Digitizer geometry: bit depth, full-scale span, DNL bound."""

    bits: int = 16
    range_v: float = 0.128  # full-scale peak-to-peak span
    dnl_max: float = 0.0    # max edge deviation in units of the ideal bin width
    dnl_seed: int = 0

    def __post_init__(self) -> None:
        if not 4 <= self.bits <= 24:
            raise ValueError("bits must be in [4, 24]")
        if self.range_v <= 0:
            raise ValueError("range_v must be positive")
        if self.dnl_max < 0:
            raise ValueError("dnl_max must be >= 0")

    @property
    def bin_width(self) -> float:
        """Ideal bin width: range_v / 2^bits."""
        return self.range_v / (1 << self.bits)

    @property
    def code_min(self) -> int:
        return -(1 << (self.bits - 1))

    @property
    def code_max(self) -> int:
        return (1 << (self.bits - 1)) - 1


@dataclass
class CodeBlock:
    """Signed digitizer codes plus the spec that produced them."""

    codes: np.ndarray
    spec: AdcSpec
    clamped: int = 0  # samples that fell outside full scale

    def __post_init__(self) -> None:
        self.codes = np.asarray(self.codes)
        if self.codes.size:
            lo, hi = int(self.codes.min()), int(self.codes.max())
            if lo < self.spec.code_min or hi > self.spec.code_max:
                raise ValueError(f"codes out of range for {self.spec.bits} bits")

    def __len__(self) -> int:
        return self.codes.size

    def clamped_fraction(self) -> float:
        return self.clamped / self.codes.size if self.codes.size else 0.0

    def tofile(self, path: str) -> None:
        """Write as little-endian signed 16-bit raw."""
        self.codes.astype("<i2").tofile(path)


def dnl_profile(spec: AdcSpec) -> np.ndarray:
    """Per-edge offsets (volts) for the 2^bits - 1 interior bin edges.

    Deterministic in dnl_seed; every |offset| <= dnl_max * bin width, and
    the perturbed edges stay strictly increasing.
    """
    if spec.dnl_max >= 0.5:
        raise ValueError("dnl_max >= 0.5 can invert bins; rejected")
    n_edges = (1 << spec.bits) - 1
    if spec.dnl_max == 0.0:
        return np.zeros(n_edges)
    rng = np.random.Generator(np.random.PCG64(spec.dnl_seed))
    return rng.uniform(-spec.dnl_max, spec.dnl_max, size=n_edges) * spec.bin_width


@lru_cache(maxsize=8)
def _edges(spec: AdcSpec) -> np.ndarray:
    ideal = -spec.range_v / 2 + spec.bin_width * np.arange(1, 1 << spec.bits)
    return ideal + dnl_profile(spec)


def quantize_channel(volts: np.ndarray, spec: AdcSpec) -> CodeBlock:
    """Map one voltage record to codes; out-of-range values clamp."""
    v = np.asarray(volts, dtype=np.float64)
    edges = _edges(spec)
    idx = np.searchsorted(edges, v, side="right")
    clamped = int(np.count_nonzero(v < -spec.range_v / 2) + np.count_nonzero(v >= spec.range_v / 2))
    codes = (idx - (1 << (spec.bits - 1))).astype(np.int32)
    return CodeBlock(codes=codes, spec=spec, clamped=clamped)


def quantize(frame: QuadratureFrame, spec: AdcSpec) -> tuple[CodeBlock, CodeBlock]:
    """Digitize both quadratures of a frame."""
    return quantize_channel(frame.i_samples, spec), quantize_channel(frame.q_samples, spec)


def dequantize(codes: np.ndarray, spec: AdcSpec) -> np.ndarray:
    """Code -> ideal bin center, in volts."""
    return (np.asarray(codes, dtype=np.float64) + 0.5) * spec.bin_width
