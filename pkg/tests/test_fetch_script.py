"""Offline tests for the dataset conversion logic in scripts/fetch_datasets.py."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "scripts"))
from fetch_datasets import convert_breastcancer, convert_ionosphere  # noqa: E402

from capsvm import load_libsvm


def test_ionosphere_conversion(tmp_path):
    row_good = ",".join(["0.5"] * 34) + ",g"
    row_bad = ",".join(["-0.25"] * 34) + ",b"
    lines = [row_good] * 200 + [row_bad] * 151
    out = convert_ionosphere(lines)
    assert len(out) == 351
    assert out[0].startswith("+1 1:0.5")
    assert out[-1].startswith("-1 1:-0.25")
    path = tmp_path / "iono.libsvm"
    path.write_text("\n".join(out) + "\n")
    data = load_libsvm(str(path))
    assert (data.num_examples, data.num_features) == (351, 34)
    assert set(data.labels) == {-1.0, 1.0}


def test_ionosphere_rejects_wrong_width():
    with pytest.raises(ValueError):
        convert_ionosphere([",".join(["1"] * 10) + ",g"] * 351)


def test_breastcancer_conversion(tmp_path):
    # id, 9 features, class; one record carries a missing cell
    base = "1000025,5,1,1,1,2,1,3,1,1,2"
    missing = "1057013,8,4,5,1,2,?,7,3,1,4"
    lines = [base] * 698 + [missing]
    out = convert_breastcancer(lines)
    assert len(out) == 699
    assert out[0].startswith("-1 1:5.0")          # class 2 -> benign -> -1
    assert out[-1].startswith("+1 ")              # class 4 -> +1
    assert "6:" not in out[-1]                    # missing cell omitted
    path = tmp_path / "bc.libsvm"
    path.write_text("\n".join(out) + "\n")
    data = load_libsvm(str(path))
    assert (data.num_examples, data.num_features) == (699, 9)
    assert data.features[-1, 5] == 0.0            # sparse omission reads as zero


def test_breastcancer_rejects_wrong_count():
    with pytest.raises(ValueError):
        convert_breastcancer(["1,2,3"] * 699)
