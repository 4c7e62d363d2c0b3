import numpy as np
import pytest

from mritask.containers import MCKS_MAGIC, read_mcks, write_mcks
from mritask.errors import FormatError


class TestMcks:
    def test_round_trip(self, rng, tmp_path):
        mck = (rng.standard_normal((3, 16, 12)) + 1j * rng.standard_normal((3, 16, 12)))
        path = tmp_path / "slice.mcks"
        write_mcks(path, mck)
        back = read_mcks(path)
        assert back.shape == (3, 16, 12)
        assert back.dtype == np.complex128
        # float32 on disk: exact for float32-representable data
        assert np.array_equal(back, mck.astype(np.complex64).astype(np.complex128))

    def test_header_layout(self, rng, tmp_path):
        mck = rng.standard_normal((2, 4, 6)) + 0j
        path = tmp_path / "slice.mcks"
        write_mcks(path, mck)
        raw = path.read_bytes()
        assert raw[:4] == MCKS_MAGIC
        assert int.from_bytes(raw[4:6], "little") == 1  # version
        assert int.from_bytes(raw[8:12], "little") == 2  # coils
        assert int.from_bytes(raw[12:16], "little") == 4  # height
        assert int.from_bytes(raw[16:20], "little") == 6  # width
        assert len(raw) == 20 + 2 * 4 * 6 * 8

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.mcks"
        path.write_bytes(b"NOPE" + bytes(16))
        with pytest.raises(FormatError):
            read_mcks(path)

    def test_truncated(self, rng, tmp_path):
        mck = rng.standard_normal((1, 4, 4)) + 0j
        path = tmp_path / "trunc.mcks"
        write_mcks(path, mck)
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(FormatError):
            read_mcks(path)

    def test_bad_version(self, rng, tmp_path):
        mck = rng.standard_normal((1, 2, 2)) + 0j
        path = tmp_path / "v9.mcks"
        write_mcks(path, mck)
        raw = bytearray(path.read_bytes())
        raw[4:6] = (9).to_bytes(2, "little")
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError):
            read_mcks(path)
