import subprocess
import sys

import numpy as np
import pytest

from riskgen.errors import DimensionError, DomainError, SchemaError
from riskgen.tensor import (
    Rng,
    load_tensor,
    matmul,
    save_tensor,
    softmax_rows,
    temporal_diff,
)


class TestMatmul:
    def test_identity(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(matmul(np.eye(2), a), a)

    def test_zeros(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(matmul(a, np.zeros((2, 2))), np.zeros((2, 2)))

    def test_hand_product(self):
        a = [[1.0, 2.0], [3.0, 4.0]]
        b = [[5.0, 6.0], [7.0, 8.0]]
        assert np.allclose(matmul(a, b), [[19.0, 22.0], [43.0, 50.0]], atol=1e-12)

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 2\)"):
            matmul(np.zeros((2, 3)), np.zeros((2, 2)))

    def test_associativity(self):
        rng = Rng(0)
        for _ in range(50):
            a = rng.normal(size=(3, 4))
            b = rng.normal(size=(4, 5))
            c = rng.normal(size=(5, 2))
            lhs = matmul(matmul(a, b), c)
            rhs = matmul(a, matmul(b, c))
            assert np.abs(lhs - rhs).max() <= 1e-9


class TestSoftmaxRows:
    def test_uniform(self):
        out = softmax_rows([[0.0, 0.0, 0.0]])
        assert np.allclose(out, 1.0 / 3.0, atol=1e-15)

    def test_shift_invariance(self):
        c = 17.3
        out = softmax_rows([[c, c + np.log(2.0)]])
        assert np.allclose(out, [[1.0 / 3.0, 2.0 / 3.0]], atol=1e-12)

    def test_scalar_oracle(self):
        # frozen from the scalar exponent oracle exp(x_i)/sum exp(x_j)
        out = softmax_rows([[1.0, 2.0, 3.0]])
        expected = [0.09003057317038046, 0.24472847105479767, 0.6652409557748219]
        assert np.allclose(out, [expected], atol=1e-12)

    def test_row_sums(self):
        rng = Rng(1)
        x = rng.uniform(-50, 50, size=(20, 7))
        out = softmax_rows(x)
        assert np.abs(out.sum(axis=1) - 1.0).max() <= 1e-12
        assert (out >= 0).all()

    def test_nan_rejected(self):
        with pytest.raises(DomainError):
            softmax_rows([[0.0, np.nan]])


class TestTemporalDiff:
    def test_constant_is_zero(self):
        assert temporal_diff(np.ones((3, 5)), axis=1).max() == 0.0

    def test_forced_values(self):
        assert np.array_equal(temporal_diff([1.0, 3.0, 2.0], axis=0), [2.0, 1.0])

    def test_loop_oracle(self):
        rng = Rng(2)
        x = rng.normal(size=(2, 4))
        out = temporal_diff(x, axis=1)
        for i in range(2):
            for t in range(3):
                assert out[i, t] == abs(x[i, t + 1] - x[i, t])

    def test_short_axis_rejected(self):
        with pytest.raises(DimensionError):
            temporal_diff(np.ones((3, 1)), axis=1)


class TestBinaryFormat:
    def test_round_trip(self, tmp_path):
        rng = Rng(3)
        x = rng.normal(size=(2, 3, 4))
        path = tmp_path / "t.rfgt"
        save_tensor(path, x)
        assert np.array_equal(load_tensor(path), x)

    def test_header_layout(self, tmp_path):
        path = tmp_path / "t.rfgt"
        save_tensor(path, np.zeros((2, 3)))
        raw = path.read_bytes()
        assert raw[:8] == b"RFGT0001"
        assert raw[8:12] == (2).to_bytes(4, "little")
        assert raw[12:20] == (2).to_bytes(8, "little")
        assert raw[20:28] == (3).to_bytes(8, "little")
        assert len(raw) == 28 + 6 * 8

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.rfgt"
        path.write_bytes(b"NOTMAGIC" + b"\x00" * 16)
        with pytest.raises(SchemaError):
            load_tensor(path)


class TestRng:
    def test_reproducible_across_processes(self):
        code = (
            "from riskgen.tensor import Rng\n"
            "r = Rng(424242)\n"
            "print(','.join(str(int(v)) for v in r.integers(0, 2**63, size=1000)))\n"
        )
        outs = [
            subprocess.run(
                [sys.executable, "-c", code], capture_output=True, text=True, check=True
            ).stdout
            for _ in range(2)
        ]
        assert outs[0] == outs[1]
        in_process = Rng(424242).integers(0, 2**63, size=1000)
        assert outs[0].strip() == ",".join(str(int(v)) for v in in_process)

    def test_children_independent_and_stable(self):
        a = Rng(9).child(0).normal(size=4)
        b = Rng(9).child(1).normal(size=4)
        a2 = Rng(9).child(0).normal(size=4)
        assert np.array_equal(a, a2)
        assert not np.array_equal(a, b)
