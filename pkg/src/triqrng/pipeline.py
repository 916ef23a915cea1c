"""Streaming orchestration: source -> ADC -> certification -> extractors.

All three output types derive from one simulated I/Q stream; selecting an
output type is pure routing and never changes how many raw samples are
consumed. Uniform extraction runs per 1536-bit block (96 samples x 16
bits per channel), Gaussian extraction per filled pool, Rayleigh values
per sample. I and Q blocks interleave alternately (I first) in the merged
uniform output. Certification is re-run every `recertify_every` blocks
and appended to the report log.
"""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .adc import CodeBlock, dequantize, quantize_channel
from .bits import BitBlock, codes_to_bits
from .config import PipelineConfig
from .entropy import (
    EntropyReport,
    conditional_variance,
    effective_photon_number,
    extractable_length,
    min_entropy_nonlinear,
    solve_g_star,
)
from .gaussian import (
    RecursiveMatrix,
    bit_reversal_permutation,
    grid_step,
    msb_truncate,
    normalize_pool,
    output_precision,
    precision_from_report,
    requantize,
    scaled_hadamard,
    wallace_pass,
)
from .rayleigh import rayleigh_raw, savitzky_golay
from .source import psd_estimate, simulate_quadratures
from .toeplitz import BitSource, ToeplitzExtractor, ToeplitzSeed, obtain_seed

PSD_FLOOR_FRACTION = 1e-12


class StartupError(RuntimeError):
    """Configuration rejected at pipeline startup."""


def certify_channel(
    channel: str,
    total_volts: np.ndarray,
    background_volts: np.ndarray,
    config: PipelineConfig,
) -> EntropyReport:
    """Certify one channel from digitized records plus an LO-off background.

    The quantum-only PSD is the total PSD minus the background PSD (floored
    to stay positive); its prediction error at the configured order is the
    conditional quantum variance feeding the effective photon number.
    """
    spec = config.adc_spec()
    sigma_m2 = float(np.var(total_volts))
    fs = config.sample_rate_hz
    psd_total = psd_estimate(total_volts, config.psd_segment, fs)
    psd_bg = psd_estimate(background_volts, config.psd_segment, fs)
    quantum = psd_total[:, 1] - psd_bg[:, 1]
    floor = PSD_FLOOR_FRACTION * float(psd_total[:, 1].max())
    quantum = np.maximum(quantum, floor)
    psd_quantum = np.column_stack([psd_total[:, 0], quantum])
    sigma_qc2 = conditional_variance(psd_quantum, config.prediction_order)
    n_eff = effective_photon_number(sigma_m2, sigma_qc2)
    h_sample = min_entropy_nonlinear(n_eff, spec)
    h_sample = min(max(h_sample, 0.0), float(spec.bits))
    h_bit = h_sample / spec.bits
    return EntropyReport(
        channel=channel,
        h_min_per_sample=h_sample,
        h_min_per_bit=h_bit,
        g_star=solve_g_star(spec.bin_width, spec.range_v / 2),
        n_eff=n_eff,
        sigma_m2=sigma_m2,
        sigma_qc2=sigma_qc2,
        epsilon=config.epsilon,
        extractable_fraction=extractable_length(config.block_n, h_bit, config.epsilon) / config.block_n,
        adc_bits=spec.bits,
        dnl_max=spec.dnl_max,
        prediction_order=config.prediction_order,
        psd_segment=config.psd_segment,
        n_samples=int(total_volts.size),
    )


def certify(config: PipelineConfig, seed_offset: int = 0) -> dict[str, EntropyReport]:
    """Simulate a measurement plus background record and certify both channels."""
    model = config.noise_model()
    spec = config.adc_spec()
    count = config.certify_samples
    frame = simulate_quadratures(model, count, config.prng_seed + seed_offset, config.sample_rate_hz)
    bg_model = replace(model, sigma_q2=0.0, lo_power_mw=0.0, responsivity=None)
    bg = simulate_quadratures(bg_model, count, config.prng_seed + seed_offset + 10_000,
                              config.sample_rate_hz)
    reports = {}
    for channel, tot, back in (
        ("i", frame.i_samples, bg.i_samples),
        ("q", frame.q_samples, bg.q_samples),
    ):
        tv = dequantize(quantize_channel(tot, spec).codes, spec)
        bv = dequantize(quantize_channel(back, spec).codes, spec)
        reports[channel] = certify_channel(channel, tv, bv, config)
    return reports


@dataclass
class BlockBatch:
    """One batch of per-channel outputs from the streaming engine."""

    uniform: bytes                      # interleaved I/Q extracted blocks, packed
    uniform_bits: int
    gaussian_i: np.ndarray              # fixed-point codes (may be empty until a pool fills)
    gaussian_q: np.ndarray
    rayleigh: np.ndarray                # float32 denoised-raw amplitudes
    raw_samples_consumed: int


class Pipeline:
    """Block-streaming engine bound to one config.

    Startup certifies both channels and provisions (or loads) the Toeplitz
    seed; the block geometry is validated against the leftover-hash budget
    of the worst channel before any extraction happens.
    """

    def __init__(self, config: PipelineConfig, seed_cache_path: str | None = None):
        self.config = config
        self.spec = config.adc_spec()
        self.model = config.noise_model()
        self.samples_per_block = config.block_n // self.spec.bits
        self.reports: list[dict[str, EntropyReport]] = []
        self.raw_samples_consumed = 0
        self.blocks_since_certification = 0
        self._stream_seed = config.prng_seed
        self._chunk_index = 0

        self._recertify(0)
        worst = min(r.h_min_per_bit for r in self.reports[0].values())
        budget = extractable_length(config.block_n, worst, config.epsilon)
        if config.block_m > budget:
            raise StartupError(
                f"block_m={config.block_m} exceeds the leftover-hash budget "
                f"{budget} for certified h_min_per_bit={worst:.4f} at epsilon={config.epsilon:g}"
            )

        self.seed = self._provision_seed(seed_cache_path)
        self._extractor = ToeplitzExtractor(self.seed)
        if config.matrix is not None:
            self._matrix = RecursiveMatrix(np.asarray(config.matrix, dtype=np.float64))
            if self._matrix.k != config.k:
                raise StartupError(f"inline matrix is {self._matrix.k}x{self._matrix.k}, config k={config.k}")
        else:
            self._matrix = RecursiveMatrix(scaled_hadamard(config.k))
        self._m_bits = precision_from_report(self._worst_report())
        self.n_out = output_precision(self._m_bits, config.k)
        self._perm = bit_reversal_permutation(config.pool_size)
        self._pool_buf: dict[str, np.ndarray] = {
            "i": np.zeros(0, dtype=np.int64),
            "q": np.zeros(0, dtype=np.int64),
        }

    # -- startup helpers ---------------------------------------------------

    def _worst_report(self) -> EntropyReport:
        latest = self.reports[-1]
        return min(latest.values(), key=lambda r: r.h_min_per_bit)

    def _recertify(self, offset: int) -> None:
        self.reports.append(certify(self.config, seed_offset=offset))
        self.blocks_since_certification = 0

    def _provision_seed(self, cache_path: str | None) -> ToeplitzSeed:
        cfg = self.config

        def raw_blocks():
            k = 0
            while True:
                frame = simulate_quadratures(self.model, 4096, cfg.prng_seed + 900_000 + k)
                codes = quantize_channel(frame.i_samples, self.spec)
                yield codes_to_bits(codes.codes, self.spec.bits)
                k += 1

        return obtain_seed(BitSource(raw_blocks()), cfg.block_n, cfg.block_m, cache_path)

    # -- streaming ---------------------------------------------------------

    def _next_codes(self, n_blocks: int) -> tuple[CodeBlock, CodeBlock]:
        count = n_blocks * self.samples_per_block
        frame = simulate_quadratures(self.model, count, self._stream_seed + 1_000_000 + self._chunk_index,
                                     self.config.sample_rate_hz)
        self._chunk_index += 1
        self.raw_samples_consumed += 2 * count
        return (
            quantize_channel(frame.i_samples, self.spec),
            quantize_channel(frame.q_samples, self.spec),
        )

    def _extract_uniform(self, codes_i: CodeBlock, codes_q: CodeBlock, n_blocks: int) -> bytes:
        cfg = self.config
        out = bytearray()
        bits_i = codes_to_bits(codes_i.codes, self.spec.bits).bits().reshape(n_blocks, cfg.block_n)
        bits_q = codes_to_bits(codes_q.codes, self.spec.bits).bits().reshape(n_blocks, cfg.block_n)
        ext_i = self._extractor.extract_batch(bits_i)
        ext_q = self._extractor.extract_batch(bits_q)
        interleaved = np.empty((2 * n_blocks, cfg.block_m), dtype=np.uint8)
        interleaved[0::2] = ext_i
        interleaved[1::2] = ext_q
        out += np.packbits(interleaved.reshape(-1)).tobytes()
        return bytes(out)

    def _gaussian_from_pools(self, channel: str, truncated: np.ndarray, passes: int) -> np.ndarray:
        cfg = self.config
        buf = np.concatenate([self._pool_buf[channel], truncated])
        outs = []
        while buf.size >= cfg.pool_size:
            chunk, buf = buf[: cfg.pool_size], buf[cfg.pool_size :]
            pool = normalize_pool(chunk.astype(np.float64)[self._perm], k=cfg.k)
            for _ in range(passes):
                pool = wallace_pass(pool, self._matrix)
            outs.append(requantize(pool.values, self.n_out, self.config.output_grid_sigma))
        self._pool_buf[channel] = buf
        return np.concatenate(outs) if outs else np.zeros(0, dtype=np.int64)

    def process_blocks(
        self,
        n_blocks: int,
        want: frozenset[str] | set[str] = frozenset({"uniform", "gaussian", "rayleigh"}),
    ) -> BlockBatch:
        """Consume n_blocks worth of raw samples per channel and extract.

        Raw consumption is identical whatever `want` selects; the argument
        only routes which outputs are materialized.
        """
        cfg = self.config
        if self.blocks_since_certification + n_blocks > cfg.recertify_every:
            self._recertify(self._chunk_index + 1)
        codes_i, codes_q = self._next_codes(n_blocks)
        self.blocks_since_certification += n_blocks

        uniform = b""
        gauss_i = np.zeros(0, dtype=np.int64)
        gauss_q = np.zeros(0, dtype=np.int64)
        ray = np.zeros(0, dtype=np.float32)
        if "uniform" in want:
            uniform = self._extract_uniform(codes_i, codes_q, n_blocks)
        if "gaussian" in want:
            gauss_i = self._gaussian_from_pools("i", msb_truncate(codes_i, self._m_bits), cfg.passes_i)
            gauss_q = self._gaussian_from_pools("q", msb_truncate(codes_q, self._m_bits), cfg.passes_q)
        if "rayleigh" in want:
            ti = msb_truncate(codes_i, self._m_bits).astype(np.float64) + 0.5
            tq = msb_truncate(codes_q, self._m_bits).astype(np.float64) + 0.5
            raw = rayleigh_raw(ti, tq)
            if raw.size >= cfg.sg_window:
                raw = savitzky_golay(raw, cfg.sg_window, cfg.sg_order)
            ray = raw.astype(np.float32)
        return BlockBatch(
            uniform=uniform,
            uniform_bits=len(uniform) * 8,
            gaussian_i=gauss_i,
            gaussian_q=gauss_q,
            rayleigh=ray,
            raw_samples_consumed=self.raw_samples_consumed,
        )


@dataclass
class PipelineRun:
    uniform: bytes
    gaussian_i: np.ndarray
    gaussian_q: np.ndarray
    rayleigh: np.ndarray
    reports: list[dict[str, EntropyReport]]
    raw_samples_consumed: int
    n_out: int
    gaussian_grid_step: float


def run_pipeline(
    config: PipelineConfig,
    duration_blocks: int,
    want: set[str] = frozenset({"uniform", "gaussian", "rayleigh"}),
    seed_cache_path: str | None = None,
    batch_blocks: int = 512,
) -> PipelineRun:
    """Run the streaming engine for a fixed number of per-channel blocks."""
    if duration_blocks <= 0:
        raise ValueError("duration_blocks must be positive")
    pipe = Pipeline(config, seed_cache_path=seed_cache_path)
    uniform = bytearray()
    gi, gq, ray = [], [], []
    remaining = duration_blocks
    while remaining > 0:
        n = min(batch_blocks, remaining)
        batch = pipe.process_blocks(n, want=want)
        uniform += batch.uniform
        gi.append(batch.gaussian_i)
        gq.append(batch.gaussian_q)
        ray.append(batch.rayleigh)
        remaining -= n
    return PipelineRun(
        uniform=bytes(uniform),
        gaussian_i=np.concatenate(gi) if gi else np.zeros(0, dtype=np.int64),
        gaussian_q=np.concatenate(gq) if gq else np.zeros(0, dtype=np.int64),
        rayleigh=np.concatenate(ray) if ray else np.zeros(0, dtype=np.float32),
        reports=pipe.reports,
        raw_samples_consumed=pipe.raw_samples_consumed,
        n_out=pipe.n_out,
        gaussian_grid_step=grid_step(pipe.n_out, config.output_grid_sigma),
    )


# ---------------------------------------------------------------------------
# benchmarks

def _time_stage(fn, *args, repeats: int = 3) -> float:
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench(config: PipelineConfig, seconds: float = 2.0, threads: int = 1) -> dict:
    """Desk-scale throughput measurement with warmup excluded.

    Reports raw sample rate, uniform bit rate, Gaussian value rate, the
    naive vs fast single-block Toeplitz comparison, and per-stage timings.
    Machine-readable (JSON-safe) dict.
    """
    from .toeplitz import toeplitz_extract, toeplitz_extract_fast

    if seconds <= 0:
        raise ValueError("seconds must be positive")
    pipe = Pipeline(config)
    pipe.process_blocks(64)  # warmup: JIT-free but primes caches/allocators

    batch = 512
    t_end = time.perf_counter() + seconds
    blocks = 0
    uniform_bits = 0
    gauss_values = 0
    t0 = time.perf_counter()
    if threads > 1:
        # thread-parallel uniform extraction over independent pipelines
        pipes = [Pipeline(config) for _ in range(threads)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            while time.perf_counter() < t_end:
                futs = [pool.submit(p.process_blocks, batch, frozenset({"uniform"})) for p in pipes]
                for f in futs:
                    b = f.result()
                    uniform_bits += b.uniform_bits
                blocks += batch * threads
    else:
        while time.perf_counter() < t_end:
            b = pipe.process_blocks(batch)
            uniform_bits += b.uniform_bits
            gauss_values += b.gaussian_i.size + b.gaussian_q.size
            blocks += batch
    elapsed = time.perf_counter() - t0

    # stage timings on a fixed workload
    model = pipe.model
    stage_count = 1 << 18
    frame = simulate_quadratures(model, stage_count, 123)
    stage = {
        "simulate_s_per_msample": _time_stage(simulate_quadratures, model, stage_count, 55) / stage_count * 1e6,
        "quantize_s_per_msample": _time_stage(quantize_channel, frame.i_samples, pipe.spec) / stage_count * 1e6,
    }

    # naive vs fast single-block comparison
    rng = np.random.default_rng(0)
    block = BitBlock.from_bits(rng.integers(0, 2, config.block_n).astype(np.uint8))
    t_naive = _time_stage(toeplitz_extract, block, pipe.seed, config.block_m)
    t_fast = _time_stage(toeplitz_extract_fast, block, pipe.seed, config.block_m)
    raw_samples = blocks * pipe.samples_per_block * 2

    return {
        "seconds": elapsed,
        "threads": threads,
        "blocks": blocks,
        "raw_samples_per_s": raw_samples / elapsed,
        "raw_bits_per_s": raw_samples * pipe.spec.bits / elapsed,
        "uniform_bits_per_s": uniform_bits / elapsed,
        "gaussian_values_per_s": gauss_values / elapsed,
        "toeplitz_naive_blocks_per_s": 1.0 / t_naive,
        "toeplitz_fast_blocks_per_s": 1.0 / t_fast,
        "stage_timings": stage,
    }


def bench_json(config: PipelineConfig, seconds: float = 2.0, threads: int = 1) -> str:
    return json.dumps(bench(config, seconds, threads), indent=2)
