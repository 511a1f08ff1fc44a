import struct

import numpy as np
import pytest

from snnwhiten.containers import FORMAT_VERSION, peek_kind, read_container, write_container
from snnwhiten.errors import FormatError


def test_round_trip(tmp_path):
    fields = {"a": 1.5, "n": 7, "m": np.arange(6, dtype=np.float64).reshape(2, 3),
              "f": np.ones(3, dtype=np.float32), "e": np.zeros((0, 4))}
    path = write_container(tmp_path / "x.bin", b"SNLY", fields)
    magic, got = read_container(path)
    assert magic == b"SNLY"
    assert float(got["a"]) == 1.5 and int(got["n"]) == 7
    np.testing.assert_array_equal(got["m"], fields["m"])
    assert got["f"].dtype == np.float32 and got["e"].shape == (0, 4)


def test_header_layout(tmp_path):
    path = write_container(tmp_path / "x.bin", b"SNFV", {"v": np.array([2.0])})
    raw = path.read_bytes()
    assert raw[:4] == b"SNFV"
    assert struct.unpack("<II", raw[4:12]) == (FORMAT_VERSION, 1)
    assert raw[-8:] == struct.pack("<d", 2.0)


def test_deterministic(tmp_path):
    fields = {"w": np.random.default_rng(0).random((3, 3))}
    a = write_container(tmp_path / "a.bin", b"SNWK", fields).read_bytes()
    b = write_container(tmp_path / "b.bin", b"SNWK", fields).read_bytes()
    assert a == b


@pytest.mark.parametrize("mutate", [lambda r: r[:-1], lambda r: r + b"\0", lambda r: b"XXXX" + r[4:],
                                    lambda r: r[:4] + struct.pack("<I", 99) + r[8:]])
def test_corruption(tmp_path, mutate):
    path = write_container(tmp_path / "x.bin", b"SNWT", {"v": np.arange(4.0)})
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(FormatError):
        read_container(path)


def test_peek(tmp_path):
    assert peek_kind(write_container(tmp_path / "x.bin", b"SNDG", {"k": 7})) == "dog-config"
    with pytest.raises(FormatError):
        peek_kind(tmp_path / "missing.bin")
