import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from scaledfb import io

values = st.floats(allow_nan=False, allow_infinity=True, width=64)


@given(arrays(float, array_shapes(min_dims=2, max_dims=2, max_side=6), elements=values))
def test_matrix_roundtrip_is_bit_exact(a):
    (back,) = io.unpack_matrices(io.pack_matrix(a))
    assert back.shape == a.shape
    assert back.tobytes() == a.astype("<f8").tobytes()


def test_header_layout():
    buf = io.pack_matrix(np.array([[1.0, 2.0, 3.0]]))
    assert buf[:4] == b"VMFB"
    assert struct.unpack("<II", buf[4:12]) == (1, 3)
    assert np.frombuffer(buf[12:], "<f8").tolist() == [1.0, 2.0, 3.0]


def test_vector_is_stored_as_one_row():
    (back,) = io.unpack_matrices(io.pack_matrix(np.arange(4.0)))
    assert back.shape == (1, 4)


def test_multi_record_file(tmp_path):
    mats = [np.eye(2), np.arange(6.0).reshape(2, 3), np.zeros((0, 0))]
    io.save_matrices(tmp_path / "x.vmfb", mats)
    back = io.load_matrices(tmp_path / "x.vmfb")
    assert len(back) == 3
    for a, b in zip(mats, back):
        np.testing.assert_array_equal(a, b)
    with pytest.raises(io.FormatError):
        io.load_matrix(tmp_path / "x.vmfb")


@pytest.mark.parametrize("corrupt", [
    lambda b: b"XXXX" + b[4:],
    lambda b: b[:10],
    lambda b: b[:-3],
])
def test_corrupted_buffers_raise(corrupt):
    buf = io.pack_matrix(np.ones((2, 2)))
    with pytest.raises(io.FormatError):
        io.unpack_matrices(corrupt(buf))


row = st.fixed_dictionaries({
    "k": st.integers(0, 10**6),
    "F": st.floats(allow_nan=False, allow_infinity=False),
    "gap": st.floats(allow_nan=False, allow_infinity=False),
    "alpha": st.floats(1e-300, 1e300),
    "backtracks": st.integers(0, 100),
    "time_s": st.floats(0, 1e4),
})


@given(st.lists(row, max_size=20))
def test_history_csv_roundtrip(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("csv") / "h.csv"
    io.write_history_csv(path, rows)
    assert io.read_history_csv(path) == rows
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.startswith(b"k,F,gap,alpha,backtracks,time_s\n")


def test_json_helpers_accept_numpy_scalars(tmp_path):
    io.write_json(tmp_path / "a.json", {"b": np.int64(3), "a": np.float64(0.5), "c": np.bool_(True)})
    assert io.read_json(tmp_path / "a.json") == {"a": 0.5, "b": 3, "c": True}
    io.write_jsonl(tmp_path / "a.jsonl", [{"k": 1}, {"k": np.int32(2)}])
    assert io.read_jsonl(tmp_path / "a.jsonl") == [{"k": 1}, {"k": 2}]
