"""Command-line interface.

Subcommands: simulate, certify, extract, test, bench, serve. All accept
-c/--config pointing at an INI file (defaults ship in-package); reports
are emitted as JSON. TRIQRNG_LISTEN overrides the service listen address.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from .adc import quantize
from .config import PipelineConfig, default_config, load_config, write_config
from .pipeline import bench_json, certify, run_pipeline
from .service import serve
from .source import simulate_quadratures, write_frame_csv, write_frame_raw
from .stats import bit_tests, chi2_test, ks_test
from .bits import BitBlock


def _config_from(args) -> PipelineConfig:
    return load_config(args.config) if args.config else default_config()


def _cmd_simulate(args) -> int:
    cfg = _config_from(args)
    frame = simulate_quadratures(cfg.noise_model(), args.count, cfg.prng_seed)
    if args.format == "csv":
        write_frame_csv(frame, args.out + ".csv")
        print(f"wrote {args.out}.csv")
    elif args.format == "raw":
        write_frame_raw(frame, args.out + ".i.f32", args.out + ".q.f32")
        print(f"wrote {args.out}.i.f32 / {args.out}.q.f32")
    else:  # codes
        ci, cq = quantize(frame, cfg.adc_spec())
        ci.tofile(args.out + ".i.i16")
        cq.tofile(args.out + ".q.i16")
        print(f"wrote {args.out}.i.i16 / {args.out}.q.i16 "
              f"(clamped {ci.clamped}/{cq.clamped})")
    return 0


def _cmd_certify(args) -> int:
    cfg = _config_from(args)
    file_args = (args.i_file, args.q_file, args.bg_i_file, args.bg_q_file)
    if any(file_args):
        if not all(file_args):
            print("certify from files needs all of --i, --q, --bg-i, --bg-q", file=sys.stderr)
            return 2
        from .adc import dequantize
        from .pipeline import certify_channel

        spec = cfg.adc_spec()
        load = lambda path: dequantize(np.fromfile(path, dtype="<i2").astype(np.int64), spec)
        reports = {
            "i": certify_channel("i", load(args.i_file), load(args.bg_i_file), cfg),
            "q": certify_channel("q", load(args.q_file), load(args.bg_q_file), cfg),
        }
    else:
        reports = certify(cfg)
    payload = {ch: asdict(r) for ch, r in reports.items()}
    text = json.dumps(payload, indent=2)
    if args.json_out:
        with open(args.json_out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _cmd_extract(args) -> int:
    cfg = _config_from(args)
    if args.window:
        cfg = PipelineConfig(**{**asdict_config(cfg), "sg_window": args.window})
    if args.order:
        cfg = PipelineConfig(**{**asdict_config(cfg), "sg_order": args.order})
    run = run_pipeline(cfg, args.blocks, want={args.type}, seed_cache_path=args.seed_cache)
    if args.type == "rayleigh" and args.histogram_mode:
        return _write_rayleigh_histogram(run.rayleigh, cfg, args)
    if args.type == "uniform":
        data = run.uniform
    elif args.type == "gaussian":
        if args.format == "csv":
            data = _csv_bytes(run.gaussian_i.astype(np.float64) * run.gaussian_grid_step,
                              run.gaussian_q.astype(np.float64) * run.gaussian_grid_step)
        else:
            shift = 16 - run.n_out
            inter = np.empty(run.gaussian_i.size + run.gaussian_q.size, dtype=np.int64)
            inter[0::2] = run.gaussian_i
            inter[1::2] = run.gaussian_q
            data = (inter << shift).astype("<i2").tobytes()
    else:
        if args.format == "csv":
            data = _csv_bytes(run.rayleigh)
        else:
            data = run.rayleigh.astype("<f4").tobytes()
    if args.stdout:
        sys.stdout.buffer.write(data)
    else:
        with open(args.out, "wb") as fh:
            fh.write(data)
        print(f"wrote {len(data)} bytes to {args.out}")
    return 0


def _csv_bytes(*columns) -> bytes:
    rows = zip(*columns)
    lines = [",".join(repr(float(v)) for v in row) for row in rows]
    return ("\n".join(lines) + "\n").encode()


def _write_rayleigh_histogram(values, cfg: PipelineConfig, args) -> int:
    from .rayleigh import smooth_histogram

    bins = 256
    counts, edges = np.histogram(values, bins=bins)
    smoothed = smooth_histogram(counts.astype(np.float64), cfg.sg_window, cfg.sg_order)
    centers = 0.5 * (edges[:-1] + edges[1:])
    lines = ["bin_center,count,smoothed"]
    lines += [f"{repr(float(c))},{int(o)},{repr(float(s))}"
              for c, o, s in zip(centers, counts, smoothed)]
    data = ("\n".join(lines) + "\n").encode()
    if args.stdout:
        sys.stdout.buffer.write(data)
    else:
        with open(args.out, "wb") as fh:
            fh.write(data)
        print(f"wrote histogram ({bins} bins) to {args.out}")
    return 0


def asdict_config(cfg: PipelineConfig) -> dict:
    from dataclasses import asdict as _asdict

    return _asdict(cfg)


def _cmd_test(args) -> int:
    reports = []
    if args.bits_file:
        data = open(args.bits_file, "rb").read()
        reports.extend(bit_tests(BitBlock.from_bytes(data), alpha=args.alpha))
    if args.samples_file:
        samples = np.fromfile(args.samples_file, dtype="<f4").astype(np.float64)
        reports.append(ks_test(samples, args.reference, alpha=args.alpha))
        reports.append(chi2_test(samples, args.reference, alpha=args.alpha))
    if not reports:
        print("nothing to test: pass --bits and/or --samples", file=sys.stderr)
        return 2
    print(json.dumps([asdict(r) for r in reports], indent=2))
    return 0 if all(r.passed for r in reports) else 1


def _cmd_bench(args) -> int:
    cfg = _config_from(args)
    print(bench_json(cfg, seconds=args.seconds, threads=args.threads))
    return 0


def _cmd_serve(args) -> int:
    cfg = _config_from(args)
    listen = os.environ.get("TRIQRNG_LISTEN") or args.listen or cfg.listen
    cfg = PipelineConfig(**{**asdict_config(cfg), "listen": listen})
    svc = serve(cfg)
    print(f"serving on {cfg.listen.rsplit(':', 1)[0]}:{svc.port} (ctrl-c to stop)")
    try:
        import time

        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        svc.stop()
    return 0


def _cmd_init_config(args) -> int:
    write_config(default_config(), args.out)
    print(f"wrote default config to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="triqrng", description=__doc__)
    ap.add_argument("-c", "--config", help="INI config file (defaults built in)")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("simulate", help="generate an I/Q record")
    p.add_argument("-n", "--count", type=int, default=1 << 16)
    p.add_argument("--out", required=True, help="output path prefix")
    p.add_argument("--format", choices=["raw", "csv", "codes"], default="codes")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("certify", help="emit per-channel entropy reports as JSON")
    p.add_argument("--json-out", help="also write the JSON document here")
    p.add_argument("--i", dest="i_file", help="int16-LE code file, I channel")
    p.add_argument("--q", dest="q_file", help="int16-LE code file, Q channel")
    p.add_argument("--bg-i", dest="bg_i_file", help="int16-LE LO-off background, I")
    p.add_argument("--bg-q", dest="bg_q_file", help="int16-LE LO-off background, Q")
    p.set_defaults(fn=_cmd_certify)

    p = sub.add_parser("extract", help="run the pipeline and emit one output type")
    p.add_argument("--type", choices=["uniform", "gaussian", "rayleigh"], required=True)
    p.add_argument("--blocks", type=int, default=4096, help="1536-bit blocks per channel")
    p.add_argument("--out", default="out.bin")
    p.add_argument("--stdout", action="store_true")
    p.add_argument("--seed-cache", help="Toeplitz seed cache path")
    p.add_argument("--format", choices=["bin", "csv"], default="bin")
    p.add_argument("--window", type=int, help="Savitzky-Golay window override")
    p.add_argument("--order", type=int, help="Savitzky-Golay order override")
    p.add_argument("--histogram-mode", action="store_true",
                   help="rayleigh only: emit a smoothed histogram CSV instead of the stream")
    p.set_defaults(fn=_cmd_extract)

    p = sub.add_parser("test", help="statistical tests on bit or sample files")
    p.add_argument("--bits", dest="bits_file", help="packed bit file (MSB-first)")
    p.add_argument("--samples", dest="samples_file", help="float32-LE sample file")
    p.add_argument("--reference", choices=["gaussian", "rayleigh", "uniform"], default="gaussian")
    p.add_argument("--alpha", type=float, default=0.01)
    p.set_defaults(fn=_cmd_test)

    p = sub.add_parser("bench", help="throughput benchmark (JSON)")
    p.add_argument("--seconds", type=float, default=2.0)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("serve", help="start the local HTTP bit service")
    p.add_argument("--listen", help="host:port (or TRIQRNG_LISTEN env var)")
    p.set_defaults(fn=_cmd_serve)

    p = sub.add_parser("init-config", help="write the default config file")
    p.add_argument("--out", default="triqrng.ini")
    p.set_defaults(fn=_cmd_init_config)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
