"""Regenerate src/kspectral/presets.json from synth.build_preset."""

import json
from pathlib import Path

from kspectral.synth import build_preset

OUT = Path(__file__).resolve().parents[1] / "src" / "kspectral" / "presets.json"


def main():
    presets = {}
    for family in ("gaussian", "gamma"):
        for k in (2, 3, 4, 8):
            for symmetric in (False, True):
                name = f"{family}-k{k}" + ("-sym" if symmetric else "")
                d = build_preset(family, k, symmetric).to_dict()
                d.pop("name")
                presets[name] = d
    OUT.write_text(json.dumps({"version": 1, "presets": presets}, indent=1) + "\n")


if __name__ == "__main__":
    main()
