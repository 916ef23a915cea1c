import numpy as np
import pytest

from triqrng.config import PipelineConfig
from triqrng.entropy import extractable_length
from triqrng.pipeline import Pipeline, StartupError, certify, run_pipeline


def fast_config(**kw) -> PipelineConfig:
    base = dict(certify_samples=1 << 18, recertify_every=1 << 20)
    base.update(kw)
    return PipelineConfig(**base)


@pytest.fixture(scope="module")
def preset_reports():
    return certify(fast_config())


def test_certify_reports_both_channels(preset_reports):
    assert set(preset_reports) == {"i", "q"}
    for rep in preset_reports.values():
        assert 0.6 < rep.h_min_per_bit < 0.8
        assert rep.sigma_m2 > rep.sigma_qc2 > 0
        assert rep.n_eff > 0
        assert 0 < rep.extractable_fraction <= 1


def test_certify_deterministic():
    a = certify(fast_config())
    b = certify(fast_config())
    assert a["i"].h_min_per_bit == b["i"].h_min_per_bit


def test_zero_excess_certifies_higher():
    noisy = certify(fast_config())
    quiet = certify(fast_config(sigma_e2=0.0))
    assert quiet["i"].h_min_per_bit > noisy["i"].h_min_per_bit
    assert quiet["q"].h_min_per_bit > noisy["q"].h_min_per_bit


def test_block_geometry_exact():
    run = run_pipeline(fast_config(), duration_blocks=1, want={"uniform"})
    # 1024 extracted bits per 1536-bit input block, two channels interleaved
    assert len(run.uniform) * 8 == 2 * 1024


def test_uniform_output_deterministic():
    a = run_pipeline(fast_config(), duration_blocks=4, want={"uniform"})
    b = run_pipeline(fast_config(), duration_blocks=4, want={"uniform"})
    assert a.uniform == b.uniform


def test_type_switching_keeps_raw_consumption_fixed():
    runs = [
        run_pipeline(fast_config(), duration_blocks=8, want=w)
        for w in ({"uniform"}, {"gaussian"}, {"rayleigh"}, {"uniform", "gaussian", "rayleigh"})
    ]
    consumed = {r.raw_samples_consumed for r in runs}
    assert len(consumed) == 1


def test_gaussian_output_precision_and_pool_granularity():
    cfg = fast_config(pool_size=4096)
    samples_per_block = cfg.block_n // cfg.adc_bits
    blocks_for_two_pools = -(-2 * 4096 // samples_per_block)
    run = run_pipeline(cfg, duration_blocks=blocks_for_two_pools, want={"gaussian"})
    assert run.n_out == 14
    assert run.gaussian_i.size == 2 * 4096
    assert run.gaussian_q.size == 2 * 4096
    assert run.gaussian_i.min() >= -(1 << 13)
    assert run.gaussian_i.max() <= (1 << 13) - 1


def test_rayleigh_output_nonnegative():
    run = run_pipeline(fast_config(), duration_blocks=8, want={"rayleigh"})
    assert run.rayleigh.size > 0
    assert float(run.rayleigh.min()) >= 0.0


def test_startup_gate_rejects_overcommitted_geometry():
    # demand more output bits than the certified budget allows
    with pytest.raises(StartupError) as err:
        Pipeline(fast_config(block_n=1536, block_m=1248))
    msg = str(err.value)
    assert "block_m=1248" in msg and "budget" in msg


def test_startup_gate_matches_extractable_length():
    pipe = Pipeline(fast_config())
    worst = min(r.h_min_per_bit for r in pipe.reports[0].values())
    budget = extractable_length(1536, worst, pipe.config.epsilon)
    assert pipe.config.block_m <= budget


def test_recertification_cadence():
    cfg = fast_config(recertify_every=8, certify_samples=1 << 16)
    pipe = Pipeline(cfg)
    assert len(pipe.reports) == 1
    pipe.process_blocks(8)
    assert len(pipe.reports) == 1
    pipe.process_blocks(8)  # would exceed the window -> recertifies first
    assert len(pipe.reports) == 2


def test_seed_cache_roundtrip(tmp_path):
    path = str(tmp_path / "seed.bin")
    a = run_pipeline(fast_config(), 2, want={"uniform"}, seed_cache_path=path)
    b = run_pipeline(fast_config(prng_seed=99), 2, want={"uniform"}, seed_cache_path=path)
    # same cached seed, different source stream: mapping fixed, outputs differ
    assert a.uniform != b.uniform


def test_reports_log_accumulates():
    run = run_pipeline(fast_config(recertify_every=4, certify_samples=1 << 16), 16)
    assert len(run.reports) >= 2
