import hashlib
import os
import sys
import tempfile

# Add project root to sys.path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.db.report_store import ReportStore
from src.experiments.router import ExperimentRouter


def digest_dir(path):
    digests = {}
    for name in sorted(os.listdir(path)):
        with open(os.path.join(path, name), 'rb') as f:
            digests[name] = hashlib.sha256(f.read()).hexdigest()
    return digests


def check_determinism(command, seed=None):
    print(f"--- Determinism check: {command} ---")
    runs = []
    with tempfile.TemporaryDirectory() as tmp:
        for attempt in range(2):
            out_dir = os.path.join(tmp, f"run{attempt}")
            ExperimentRouter(ReportStore(out_dir), seed=seed).run(command)
            runs.append(digest_dir(out_dir))

    first, second = runs
    if first == second:
        print(f"OK: {len(first)} files hash-identical.")
        return True
    for name in sorted(set(first) | set(second)):
        if first.get(name) != second.get(name):
            print(f" - MISMATCH {name}")
    return False


if __name__ == "__main__":
    commands = sys.argv[1:] or ["build-tree", "model-oracle"]
    ok = all([check_determinism(c) for c in commands])
    sys.exit(0 if ok else 1)
