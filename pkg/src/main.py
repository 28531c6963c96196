import argparse
import json
import logging
import os
import sys

# Add project root to sys.path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from config import settings
from src.db.report_store import ReportStore
from src.errors import ConfigError, LabError
from src.experiments.router import ExperimentRouter

COMMANDS = ["build-tree", "characteristics", "verify", "model-oracle", "compare"]

logger = logging.getLogger("bergman_lab")


def load_document(path: str, command: str) -> dict:
    """A config file holds either one command's document or a map keyed by command."""
    try:
        with open(path) as f:
            doc = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"could not read config {path}: {e}") from e
    if isinstance(doc, dict) and command in doc and isinstance(doc[command], dict):
        return doc[command]
    return doc


def build_parser():
    parser = argparse.ArgumentParser(description="Bergman weights laboratory")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON experiment document (defaults to config/experiments.json)")
    parser.add_argument("--out", default=settings.OUT_DIR, help="Output directory.")
    parser.add_argument("--seed", type=int, help="Overrides the config seed.")
    parser.add_argument("--threads", type=int, help="Worker threads for sweeps.")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=settings.LOG_LEVEL,
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    try:
        doc = load_document(args.config, args.command) if args.config else None
        router = ExperimentRouter(ReportStore(args.out), seed=args.seed, threads=args.threads)
        summary = router.run(args.command, doc)
    except LabError as e:
        logger.error("%s failed: %s", args.command, e)
        return e.exit_code
    logger.info("%s complete: %s", args.command, json.dumps(summary, sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
