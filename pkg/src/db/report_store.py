import csv
import json
import logging
import math
import os
from typing import Iterable, Optional

import numpy as np

from config import settings
from src.tree.bergman_tree import BergmanTree, export_tree

logger = logging.getLogger(__name__)


def _plain(value):
    """numpy scalars and arrays to plain Python for JSON."""
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


class ReportStore:
    """Owns an output directory; every write is deterministic for identical inputs."""

    def __init__(self, out_dir: Optional[str] = None):
        self.out_dir = out_dir or settings.OUT_DIR
        os.makedirs(self.out_dir, exist_ok=True)

    def path(self, name: str, suffix: str) -> str:
        return os.path.join(self.out_dir, f"{name}.{suffix}")

    def write_json(self, name: str, doc) -> str:
        path = self.path(name, "json")
        with open(path, "w") as f:
            json.dump(doc, f, sort_keys=True, indent=2, default=_plain)
            f.write("\n")
        logger.info("wrote %s", path)
        return path

    def write_tree(self, tree: BergmanTree, name: str = "tree") -> str:
        return self.write_json(name, export_tree(tree))

    def write_rows(self, name: str, rows: Iterable[dict]) -> str:
        """CSV with columns in first-seen order; floats written with repr."""
        rows = list(rows)
        columns = []
        for row in rows:
            for key in row:
                if key not in columns:
                    columns.append(key)
        path = self.path(name, "csv")
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_cell(row.get(column)) for column in columns])
        logger.info("wrote %s (%d rows)", path, len(rows))
        return path

    def read_json(self, name: str):
        with open(self.path(name, "json")) as f:
            return json.load(f)
