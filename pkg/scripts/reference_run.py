#!/usr/bin/env python3
"""
Reference run for Pseudospherical Lab

Runs the symbolic suite, a monitored solve and both immersion branches against
configs/reference.toml and the surface export against configs/surface.toml,
writing everything under one output directory.
"""

import sys
from pathlib import Path

# Add src to path so we can import our modules
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from pss_lab.cli.main import main as run

ROOT = Path(__file__).parent.parent
CONFIG = ROOT / "configs" / "reference.toml"
SURFACE_CONFIG = ROOT / "configs" / "surface.toml"


def reference_steps(out: Path):
    """Command lines of the reference run, in order"""
    return [
        ("verify", ["verify", "--kmax", "5", "--report", str(out / "verify.json")]),
        ("monitor", ["monitor", "--config", str(CONFIG), "--out", str(out / "monitor")]),
        ("immerse mu=0", ["immerse", "--config", str(CONFIG), "--out", str(out / "strip.csv")]),
        ("immerse mu=1", ["immerse", "--mu", "1", "--beta", "1", "--b0", "1.5", "--span", "0.5",
                          "--out", str(out / "ode.csv")]),
        ("surface", ["surface", "--config", str(SURFACE_CONFIG), "--out", str(out / "surface.obj")]),
    ]


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else ROOT / "reference_output"
    out.mkdir(parents=True, exist_ok=True)

    print("🧪 Pseudospherical Lab reference run")
    print("=" * 50)

    results = {}
    for label, argv in reference_steps(out):
        print(f"\n🚀 {label}")
        results[label] = run(argv)

    print("\n" + "=" * 50)
    for label, code in results.items():
        marker = "✅" if code == 0 else ("⚠️" if code == 3 else "❌")
        print(f"{marker} {label}: exit {code}")

    print(f"\n📄 Outputs in {out}")
    return max(results.values())


if __name__ == "__main__":
    sys.exit(main())
