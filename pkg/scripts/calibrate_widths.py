"""Refit the Landau band half-width constants and write src/hoflab/data/widths.json."""

import json
import sys

from hoflab.semiclassics import _WIDTH_FILE, calibrate_widths

if __name__ == "__main__":
    q = int(sys.argv[1]) if len(sys.argv) > 1 else 101
    data = calibrate_widths(q)
    _WIDTH_FILE.parent.mkdir(parents=True, exist_ok=True)
    _WIDTH_FILE.write_text(json.dumps(data, indent=2) + "\n")
    print(json.dumps(data, indent=2))
