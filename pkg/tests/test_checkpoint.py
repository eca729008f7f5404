"""Binary weight container: exact layout, round-trips, corruption errors."""

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sgmm.checkpoint import (MAGIC, VERSION, dump_arrays, load_arrays,
                             read_checkpoint, write_checkpoint)
from sgmm.errors import FormatError


def test_golden_bytes_single_record():
    # layout oracle assembled by hand, independent of the writer
    expected = (b"SGMM"
                + struct.pack("<I", 1)            # version
                + struct.pack("<I", 1) + b"a"     # name
                + struct.pack("<I", 2)            # rank
                + struct.pack("<II", 1, 2)        # dims
                + struct.pack("<2d", 1.5, -2.0))  # payload, little-endian f64
    got = dump_arrays({"a": np.array([[1.5, -2.0]])})
    assert got == expected


def test_header():
    blob = dump_arrays({})
    assert blob[:4] == MAGIC == b"SGMM"
    assert struct.unpack("<I", blob[4:8])[0] == VERSION == 1
    assert load_arrays(blob) == {}


def test_records_sorted_by_name():
    a = {"zeta": np.ones(2), "alpha": np.zeros(3), "mid": np.arange(2.0)}
    b = {"alpha": np.zeros(3), "mid": np.arange(2.0), "zeta": np.ones(2)}
    assert dump_arrays(a) == dump_arrays(b)
    blob = dump_arrays(a)
    assert blob.find(b"alpha") < blob.find(b"mid") < blob.find(b"zeta")


def test_roundtrip_ranks_and_values():
    arrays = {
        "scalar": np.array(3.25),
        "vec": np.linspace(-1, 1, 7),
        "mat": np.arange(6.0).reshape(2, 3),
        "cube": np.arange(24.0).reshape(2, 3, 4),
        "empty": np.zeros((0, 5)),
    }
    out = load_arrays(dump_arrays(arrays))
    assert set(out) == set(arrays)
    for name, arr in arrays.items():
        assert out[name].shape == arr.shape
        np.testing.assert_array_equal(out[name], arr)
        assert out[name].dtype == np.float64


def test_roundtrip_is_bitwise_exact():
    rng = np.random.default_rng(5)
    arr = rng.standard_normal((13, 7)) * 1e-15
    out = load_arrays(dump_arrays({"w": arr}))["w"]
    assert np.array_equal(out.view(np.uint64), arr.view(np.uint64))


def test_file_roundtrip(tmp_path):
    path = tmp_path / "model.ckpt"
    arrays = {"w": np.arange(6.0).reshape(3, 2), "b": np.zeros(2)}
    write_checkpoint(path, arrays)
    out = read_checkpoint(path)
    np.testing.assert_array_equal(out["w"], arrays["w"])
    np.testing.assert_array_equal(out["b"], arrays["b"])


def test_double_dump_is_deterministic():
    arrays = {"a": np.random.default_rng(0).standard_normal((4, 4))}
    assert dump_arrays(arrays) == dump_arrays(arrays)


def test_bad_magic():
    with pytest.raises(FormatError, match="magic"):
        load_arrays(b"NOPE" + struct.pack("<I", 1))
    with pytest.raises(FormatError, match="magic"):
        load_arrays(b"SG")


def test_bad_version():
    with pytest.raises(FormatError, match="version"):
        load_arrays(MAGIC + struct.pack("<I", 9))


def test_truncation_reports_position():
    blob = dump_arrays({"weights": np.ones((3, 3))})
    with pytest.raises(FormatError, match="truncated") as exc:
        load_arrays(blob[:-8])
    assert "byte" in str(exc.value)


def test_truncated_name():
    blob = MAGIC + struct.pack("<I", VERSION) + struct.pack("<I", 10) + b"ab"
    with pytest.raises(FormatError, match="truncated"):
        load_arrays(blob)


def test_duplicate_record_rejected():
    record = (struct.pack("<I", 1) + b"x" + struct.pack("<I", 0)
              + struct.pack("<d", 1.0))
    blob = MAGIC + struct.pack("<I", VERSION) + record + record
    with pytest.raises(FormatError, match="duplicate"):
        load_arrays(blob)


def test_rank_zero_scalar_record():
    out = load_arrays(dump_arrays({"s": np.array(7.0)}))
    assert out["s"].shape == ()
    assert out["s"] == 7.0


@settings(max_examples=30, deadline=None)
@given(st.dictionaries(
    st.text(st.characters(min_codepoint=33, max_codepoint=0x2fff), min_size=1,
            max_size=20),
    st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64),
             min_size=0, max_size=8),
    max_size=5))
def test_roundtrip_property(named_lists):
    arrays = {k: np.array(v, dtype=np.float64) for k, v in named_lists.items()}
    out = load_arrays(dump_arrays(arrays))
    assert set(out) == set(arrays)
    for k in arrays:
        np.testing.assert_array_equal(out[k], arrays[k])
