"""Command-line front end: rate/BER sweeps, channel dump and self-validation.

Exit codes: 0 on success, 1 on validation failure, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, SystemConfig, config_digest, parse_config
from .harness import channel_dump, run_ber_sweep, run_rate_sweep, validate


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otfsftn",
        description="Link-level sweeps for precoded faster-than-Nyquist "
        "delay-Doppler transmission.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, needs_config: bool) -> None:
        p.add_argument("--config", required=needs_config, help="YAML config file")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--out", default=None, help="output path (default: stdout)")

    p_rate = sub.add_parser("rate", help="information-rate sweep to CSV")
    common(p_rate, True)
    p_rate.add_argument("--threads", type=int, default=1, help="worker threads (speed only)")

    p_ber = sub.add_parser("ber", help="uncoded BER sweep to CSV")
    common(p_ber, True)
    p_ber.add_argument("--threads", type=int, default=1, help="worker threads (speed only)")
    p_ber.add_argument("--llr-out", default=None, help="also dump per-frame LLR records here")

    p_dump = sub.add_parser("channel-dump", help="serialize one channel realization")
    common(p_dump, True)

    p_val = sub.add_parser("validate", help="run the invariant self-checks")
    common(p_val, False)
    return parser


def _load_config(path: str | None, seed: int | None) -> tuple[SystemConfig | None, str | None]:
    if path is None:
        return None, None
    text = Path(path).read_text()
    cfg = parse_config(text)
    if seed is not None:
        cfg = replace(cfg, master_seed=seed)
    return cfg, config_digest(text)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg, digest = _load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "rate":
            result = run_rate_sweep(cfg, threads=args.threads, digest=digest)
            _emit(result.to_csv(), args.out)
        elif args.command == "ber":
            if args.llr_out is not None:
                with open(args.llr_out, "w") as sink:
                    result = run_ber_sweep(cfg, threads=args.threads, digest=digest, llr_sink=sink)
            else:
                result = run_ber_sweep(cfg, threads=args.threads, digest=digest)
            _emit(result.to_csv(), args.out)
        elif args.command == "channel-dump":
            _emit(channel_dump(cfg, digest=digest), args.out)
        elif args.command == "validate":
            report = validate(cfg, seed=args.seed)
            _emit(report.format() + "\n", args.out)
            if not report.passed:
                return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
