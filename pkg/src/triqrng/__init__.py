"""triqrng: tri-type quantum RNG post-processing stack.

A simulated dual-quadrature homodyne entropy source drives min-entropy
certification and three extraction pipelines (uniform, Gaussian,
Rayleigh), with statistical validation, a streaming CLI, and a local
bit-serving HTTP endpoint.
"""

from .adc import AdcSpec, CodeBlock, dequantize, dnl_profile, quantize, quantize_channel
from .bits import BitBlock, codes_to_bits
from .config import PipelineConfig, default_config, load_config, write_config
from .entropy import (
    EntropyReport,
    conditional_variance,
    effective_photon_number,
    extractable_length,
    min_entropy_iid,
    min_entropy_nonlinear,
    solve_g_star,
)
from .gaussian import (
    GaussianPool,
    RecursiveMatrix,
    gaussian_extract,
    msb_truncate,
    normalize_pool,
    output_precision,
    scaled_hadamard,
    wallace_pass,
)
from .pipeline import Pipeline, bench, certify, run_pipeline
from .rayleigh import phase_uniform, rayleigh_raw, savitzky_golay, smooth_histogram
from .service import RandomService, serve
from .source import (
    NoiseModel,
    QuadratureFrame,
    lo_power_sweep,
    psd_estimate,
    simulate_quadratures,
)
from .stats import GofReport, bit_tests, chi2_test, ks_test
from .toeplitz import (
    ADMISSIBLE_PRIMES,
    BitSource,
    ToeplitzExtractor,
    ToeplitzSeed,
    dodis_extract,
    is_admissible,
    seed_chain,
    toeplitz_extract,
    toeplitz_extract_fast,
)

__version__ = "0.1.0"
