#!/usr/bin/env python3
"""Fetch the two UCI benchmark datasets and convert them to LIBSVM files.

Needs network access to archive.ics.uci.edu. Writes:

  data/ionosphere.libsvm    351 examples x 34 features ('g' -> +1, 'b' -> -1)
  data/breastcancer.libsvm  699 examples x  9 features (class 2 -> -1, 4 -> +1;
                            the id column is dropped and the 16 missing '?'
                            cells are omitted, i.e. zero in sparse form)

The acceptance tests for the desk-scale benchmarks pick these files up from
data/ (or $CAPSVM_DATA_DIR) and skip with an explanation when absent.
"""

from __future__ import annotations

import argparse
import urllib.request
from pathlib import Path

IONOSPHERE_URL = (
    "https://archive.ics.uci.edu/ml/machine-learning-databases/ionosphere/ionosphere.data"
)
BREASTCANCER_URL = (
    "https://archive.ics.uci.edu/ml/machine-learning-databases/"
    "breast-cancer-wisconsin/breast-cancer-wisconsin.data"
)


def fetch(url: str) -> list[str]:
    with urllib.request.urlopen(url, timeout=60) as resp:
        text = resp.read().decode("utf-8")
    return [line.strip() for line in text.splitlines() if line.strip()]


def convert_ionosphere(lines: list[str]) -> list[str]:
    out = []
    for line in lines:
        *feats, label = line.split(",")
        if len(feats) != 34:
            raise ValueError(f"expected 34 features, got {len(feats)}: {line[:60]}")
        y = "+1" if label == "g" else "-1"
        cols = " ".join(f"{i + 1}:{float(v)!r}" for i, v in enumerate(feats))
        out.append(f"{y} {cols}")
    if len(out) != 351:
        raise ValueError(f"expected 351 examples, got {len(out)}")
    return out


def convert_breastcancer(lines: list[str]) -> list[str]:
    out = []
    for line in lines:
        cells = line.split(",")
        if len(cells) != 11:
            raise ValueError(f"expected 11 columns, got {len(cells)}: {line[:60]}")
        feats, label = cells[1:10], cells[10]
        y = "-1" if label == "2" else "+1"
        cols = " ".join(
            f"{i + 1}:{float(v)!r}" for i, v in enumerate(feats) if v != "?"
        )
        out.append(f"{y} {cols}".rstrip())
    if len(out) != 699:
        raise ValueError(f"expected 699 examples, got {len(out)}")
    return out


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default=str(Path(__file__).resolve().parent.parent / "data"))
    args = parser.parse_args()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    iono = convert_ionosphere(fetch(IONOSPHERE_URL))
    (out_dir / "ionosphere.libsvm").write_text("\n".join(iono) + "\n")
    print(f"wrote {out_dir / 'ionosphere.libsvm'} ({len(iono)} examples)")

    bc = convert_breastcancer(fetch(BREASTCANCER_URL))
    (out_dir / "breastcancer.libsvm").write_text("\n".join(bc) + "\n")
    print(f"wrote {out_dir / 'breastcancer.libsvm'} ({len(bc)} examples)")


if __name__ == "__main__":
    main()
