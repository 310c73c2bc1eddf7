import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from voxgrad.autodiff import FormatError, Tensor, load_tensor, save_tensor, tensor_from_bytes, tensor_to_bytes


@given(hnp.arrays(np.float64, hnp.array_shapes(min_dims=0, max_dims=5, max_side=4),
                  elements=st.floats(allow_nan=False, allow_infinity=False, width=64)))
def test_tensor_round_trip_bitwise(arr):
    back = tensor_from_bytes(tensor_to_bytes(arr)).data
    assert back.shape == arr.shape
    assert back.tobytes() == np.ascontiguousarray(arr).tobytes()


def test_layout():
    blob = tensor_to_bytes(Tensor(np.array([[1.0, 2.0, 3.0]])))
    assert blob[:4] == b"VGT1"
    assert struct.unpack("<I", blob[4:8]) == (2,)
    assert struct.unpack("<2Q", blob[8:24]) == (1, 3)
    assert np.frombuffer(blob[24:], "<f8").tolist() == [1.0, 2.0, 3.0]


def test_negative_zero_and_subnormals_survive(tmp_path):
    arr = np.array([-0.0, 5e-324, -1.7976931348623157e308])
    save_tensor(tmp_path / "t.bin", arr)
    assert load_tensor(tmp_path / "t.bin").data.tobytes() == arr.tobytes()


def test_bad_magic_and_truncation():
    blob = tensor_to_bytes(np.ones(4))
    with pytest.raises(FormatError, match="magic"):
        tensor_from_bytes(b"XXXX" + blob[4:])
    for cut in (2, 6, 12, len(blob) - 1):
        with pytest.raises(FormatError, match="truncated"):
            tensor_from_bytes(blob[:cut])
