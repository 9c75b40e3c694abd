"""
advsr command line.

Usage:
    advsr synth-data|train|attack|defend-eval|sweep|gap --config PATH [--seed N] [--out DIR]

Environment (a .env file is honoured):
    ADVSR_LOG_DIR         file logging directory (default: <out>/logs)
    ADVSR_LOG_LEVEL       console level (default: INFO)
    ADVSR_CODEC_TIMEOUT   seconds allowed for the external codec command
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

import torch
from dotenv import load_dotenv

from advsr import __version__
from advsr.exceptions import AdvsrError
from advsr.harness.config import load_config
from advsr.harness.runner import COMMANDS, EXIT_CONFIG, run_command
from advsr.logging_config import get_error_logger, get_harness_logger, log_manager


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='advsr',
        description='Adversarial attacks and defenses on speaker recognition models'
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('command', choices=sorted(COMMANDS), help='Experiment step to run')
    parser.add_argument(
        '--config',
        type=str,
        required=True,
        help='Experiment config (JSON or YAML)'
    )
    parser.add_argument('--seed', type=int, default=None, help='Override the config seed')
    parser.add_argument('--out', type=str, default=None, help='Override the output directory')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)

    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
    except AdvsrError as e:
        print(f"advsr: {e}", file=sys.stderr)
        return EXIT_CONFIG

    level_name = os.getenv('ADVSR_LOG_LEVEL', 'INFO').upper()
    log_manager.configure(
        base_dir=os.getenv('ADVSR_LOG_DIR') or str(cfg.out_dir / 'logs'),
        console_level=getattr(logging, level_name, logging.INFO),
    )
    log_manager.log_startup_info(args.command)
    logger = get_harness_logger()

    torch.manual_seed(cfg.seed)
    torch.use_deterministic_algorithms(True, warn_only=True)
    cfg.out_dir.mkdir(parents=True, exist_ok=True)

    try:
        code = run_command(args.command, cfg)
    except (AdvsrError, ValueError) as e:
        get_error_logger().error(f"{args.command} aborted: {e}")
        logger.error(f"{args.command} aborted: {e}")
        return EXIT_CONFIG
    logger.info(f"{args.command} finished with exit code {code}")
    return code


if __name__ == "__main__":
    sys.exit(main())
