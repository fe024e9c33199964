#!/usr/bin/env python3
"""Regenerate the bundled scenario files in scenarios/ from the presets."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from steersim import presets  # noqa: E402


def main():
    out_dir = Path(__file__).resolve().parents[1] / "scenarios"
    out_dir.mkdir(exist_ok=True)
    for name, build in presets.BUNDLED.items():
        scenario = build()
        path = out_dir / f"{name}.json"
        scenario.save(path)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
