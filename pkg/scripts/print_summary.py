import json
import os
import sys

# Add project root to sys.path
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from config import settings


def print_summary(out_dir):
    print(f"--- Summaries in {out_dir} ---")
    for root, _, files in sorted(os.walk(out_dir)):
        for name in sorted(files):
            if not name.endswith('_summary.json'):
                continue
            with open(os.path.join(root, name)) as f:
                summary = json.load(f)
            print(f"\n{os.path.relpath(os.path.join(root, name), out_dir)}")
            for key, entry in sorted(summary.items()):
                if isinstance(entry, dict) and 'max_ratio' in entry:
                    extra = {k: v for k, v in entry.items() if k != 'max_ratio'}
                    print(f" - {key}: max ratio {entry['max_ratio']:.6g} {extra}")
                else:
                    print(f" - {key}: {entry}")


if __name__ == "__main__":
    print_summary(sys.argv[1] if len(sys.argv) > 1 else settings.OUT_DIR)
