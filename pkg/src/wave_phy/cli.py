"""``wave-phy`` command line: sweeps, presets, closed-form validation, I/Q frame codec."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .numerology import mode_by_name, payload_capacity
from .rxchain import FrameNotDetected, receive_frame
from .txchain import read_iq, transmit_frame, write_iq

log = logging.getLogger("wave_phy")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(","))


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(","))


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, type=Path, help="CSV output path")
    p.add_argument("--plot", type=Path, help="directory for SVG plots")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--snr-grid", type=_floats, help="comma-separated SNR values in dB")
    p.add_argument("--modes", type=lambda s: tuple(s.split(",")), help="comma-separated MCS names")
    p.add_argument("--speeds", type=_floats, help="comma-separated speeds in km/h")
    p.add_argument("--symbols-per-frame", type=_ints)
    p.add_argument("--min-bits", type=int)
    p.add_argument("--min-errors", type=int)
    p.add_argument("--max-frames", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--paired", action="store_true", default=None,
                   help="share per-frame random streams across points")


def _run(config: harness.SweepConfig, args) -> int:
    n = len(config.points())
    log.info("running %s: %d points, jobs=%d", config.name, n, args.jobs)
    points = harness.run_sweep(config, jobs=args.jobs)
    harness.write_csv(points, args.out, seed=config.seed)
    print(f"wrote {len(points)} points to {args.out}")
    if args.plot:
        for path in harness.write_plots(points, args.plot):
            print(f"wrote {path}")
    return 0


def _overrides(args) -> dict:
    return dict(
        snr_grid=args.snr_grid, modes=args.modes, speeds=args.speeds,
        symbols_per_frame=args.symbols_per_frame, min_bits=args.min_bits,
        min_errors=args.min_errors, max_frames=args.max_frames, seed=args.seed, paired=args.paired,
    )


def cmd_sweep(args) -> int:
    config = harness.with_overrides(harness.SweepConfig.from_json(args.config), **_overrides(args))
    return _run(config, args)


def cmd_preset(args) -> int:
    config = harness.with_overrides(harness.preset(args.name), **_overrides(args))
    return _run(config, args)


def cmd_validate(args) -> int:
    failed = 0
    print(f"{'oracle':<24}{'snr_db':>8}{'bits':>10}{'ber':>13}{'theory':>13}  result")
    for kind, snr, pt, theory, ok in harness.run_validation(args.bits, args.seed):
        failed += not ok
        print(f"{kind:<24}{snr:>8g}{pt.bits:>10}{pt.ber:>13.4e}{theory:>13.4e}  {'PASS' if ok else 'FAIL'}")
    return 1 if failed else 0


def _read_payload(path: str | None) -> bytes:
    if path is None or path == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def cmd_encode(args) -> int:
    mode = mode_by_name(args.mode)
    bits = np.unpackbits(np.frombuffer(_read_payload(args.payload), dtype=np.uint8), bitorder="little")
    n_symbols = args.symbols or -(-(bits.size + 22) // mode.n_dbps)
    frame = transmit_frame(bits, mode, n_symbols)
    write_iq(args.iq, frame.samples)
    print(f"{mode} {n_symbols} symbols {bits.size // 8} octets -> {args.iq} ({len(frame)} samples)")
    return 0


def cmd_decode(args) -> int:
    mode = mode_by_name(args.mode)
    rx = read_iq(args.iq)
    octets = args.octets if args.octets is not None else payload_capacity(mode, args.symbols) // 8
    try:
        bits = receive_frame(rx, mode, args.symbols, payload_bits=8 * octets,
                             sync="sts" if args.detect else "genie", offset=args.offset)
    except FrameNotDetected as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    data = np.packbits(bits, bitorder="little").tobytes()
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.write(data.hex() + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wave-phy", description="802.11p baseband PHY simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run a BER/SNR sweep from a JSON config")
    p.add_argument("--config", required=True, type=Path)
    _add_run_options(p)
    _add_overrides(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("preset", help="run one of the built-in scenario presets")
    p.add_argument("name", choices=harness.PRESETS)
    _add_run_options(p)
    _add_overrides(p)
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("validate", help="check uncoded BPSK against closed-form BER")
    p.add_argument("--bits", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("encode", help="encode a payload file into an I/Q frame")
    p.add_argument("--iq", required=True, type=Path, help="output float32 I/Q file")
    p.add_argument("--mode", default="BPSK-1/2")
    p.add_argument("--symbols", type=int, help="DATA symbols (default: smallest that fits)")
    p.add_argument("--payload", help="payload file (default: stdin)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode an I/Q frame back to payload bytes")
    p.add_argument("--iq", required=True, type=Path, help="input float32 I/Q file")
    p.add_argument("--mode", default="BPSK-1/2")
    p.add_argument("--symbols", type=int, required=True)
    p.add_argument("--octets", type=int, help="payload length (default: frame capacity)")
    p.add_argument("--offset", type=int, default=0, help="known frame start sample")
    p.add_argument("--detect", action="store_true", help="estimate frame start from the preamble")
    p.add_argument("--out", type=Path, help="write payload bytes here instead of hex to stdout")
    p.set_defaults(func=cmd_decode)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
