"""
Command-line front-end.

    haar-fluctuations limits   --config configs/fig2.json
    haar-fluctuations law      --config configs/fig2.json --table
    haar-fluctuations simulate --config configs/fig4.json --samples 2000 --threads 4
    haar-fluctuations hist     --config configs/fig4.json --input out/fig4_1_1_samples.csv
    haar-fluctuations verify   --filter fig2

Exit codes: 0 success, 1 invalid input, 2 acceptance failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from haar_fluctuations.acceptance import run_suite
from haar_fluctuations.config import LOG_FORMAT, Settings, get_settings
from haar_fluctuations.schemas import CriterionResponse, VerifyResponse
from haar_fluctuations.service import ExperimentService, dump_json, load_service

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_ACCEPTANCE = 2


def _service(args: argparse.Namespace) -> ExperimentService:
    return load_service(
        args.config,
        seed=args.seed,
        samples=args.samples,
        out_dir=args.out,
        threads=args.threads,
    )


def cmd_limits(args: argparse.Namespace, settings: Settings) -> int:
    print(dump_json(_service(args).limits_response()))
    return EXIT_OK


def cmd_law(args: argparse.Namespace, settings: Settings) -> int:
    print(dump_json(_service(args).law_responses(write_tables=args.table)))
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, settings: Settings) -> int:
    reports = _service(args).simulate()
    print(dump_json(reports))
    return EXIT_OK


def cmd_hist(args: argparse.Namespace, settings: Settings) -> int:
    written = _service(args).rehistogram(args.input)
    print(json.dumps(written, indent=2))
    return EXIT_OK


def cmd_verify(args: argparse.Namespace, settings: Settings) -> int:
    seed = args.seed if args.seed is not None else settings.seed
    threads = args.threads if args.threads is not None else settings.threads
    results = run_suite(args.filter, seed=seed, n_jobs=threads)
    response = VerifyResponse(
        passed=all(r.passed for r in results),
        criteria=[
            CriterionResponse(name=r.name, passed=r.passed, detail=r.detail, runtime_seconds=r.runtime)
            for r in results
        ],
    )
    print(dump_json(response))
    return EXIT_OK if response.passed else EXIT_ACCEPTANCE


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be a 64-bit unsigned integer, got {text}")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=None, help="Master seed (overrides config and HAAR_SEED)")
    common.add_argument("--threads", type=_positive, default=None, help="Worker processes (HAAR_THREADS)")

    run = argparse.ArgumentParser(add_help=False, parents=[common])
    run.add_argument("--config", required=True, help="Run configuration JSON")
    run.add_argument("--samples", type=_positive, default=None, help="Samples per panel")
    run.add_argument("--out", default=None, help="Output directory (HAAR_OUT_DIR)")

    parser = argparse.ArgumentParser(
        prog="haar-fluctuations",
        description="Limits and fluctuation laws of polynomial models in Haar unitaries",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("limits", parents=[run], help="Limiting eigenvalues").set_defaults(handler=cmd_limits)

    law = sub.add_parser("law", parents=[run], help="Fluctuation law of each panel")
    law.add_argument("--table", action="store_true", help="Also write x, f(x), F(x) CSV tables")
    law.set_defaults(handler=cmd_law)

    sub.add_parser("simulate", parents=[run], help="Monte Carlo run with KS verdicts").set_defaults(
        handler=cmd_simulate
    )

    hist = sub.add_parser("hist", parents=[run], help="Re-bin a samples CSV")
    hist.add_argument("--input", required=True, help="Samples CSV written by simulate")
    hist.set_defaults(handler=cmd_hist)

    verify = sub.add_parser("verify", parents=[common], help="Run the acceptance suite")
    verify.add_argument("--filter", default=None, help="Criterion name or substring")
    verify.set_defaults(handler=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = get_settings()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=settings.log_level, format=LOG_FORMAT)

    try:
        return args.handler(args, settings)
    except (ValueError, FileNotFoundError) as exc:
        # pydantic's ValidationError is a ValueError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:
        logger.error(f"Unexpected failure: {exc}", exc_info=True)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
