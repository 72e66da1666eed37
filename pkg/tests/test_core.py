import math
import os
import tempfile
import unittest

import numpy as np

from tilechol.core import (
    Precision,
    TileBuffer,
    TileIndex,
    TiledSymmetricMatrix,
    cast_scalar,
    convert_tile,
    dump_matrix,
    frobenius_norm_matrix,
    frobenius_norm_tile,
    load_matrix,
    lower_indices,
    quantize,
)
from tilechol.exceptions import MalformedInput
from tests.helpers import random_spd


class PrecisionTest(unittest.TestCase):
    def test_ordering(self):
        self.assertGreater(Precision.FP64, Precision.FP32)
        self.assertGreater(Precision.FP16, Precision.FP8E4M3)
        self.assertEqual(max([Precision.FP16, Precision.FP64, Precision.FP32]), Precision.FP64)
        self.assertEqual(sorted(Precision)[0], Precision.FP8E4M3)

    def test_parse(self):
        self.assertIs(Precision.parse("fp32"), Precision.FP32)
        self.assertIs(Precision.parse("FP8"), Precision.FP8E4M3)
        with self.assertRaises(ValueError):
            Precision.parse("FP128")

    def test_codes(self):
        for p in Precision:
            self.assertIs(Precision.from_code(p.code), p)
        self.assertEqual([p.code for p in Precision], [0, 1, 2, 3])

    def test_cast_scalar(self):
        self.assertEqual(cast_scalar(1.0 + 2.0**-30, Precision.FP32), 1.0)
        self.assertEqual(cast_scalar(1.0 + 2.0**-30, Precision.FP64), 1.0 + 2.0**-30)
        self.assertEqual(cast_scalar(0.1, Precision.FP16), 0.0999755859375)

    def test_cast_error_bound(self):
        rng = np.random.Generator(np.random.PCG64(11))
        # inside the normal range of every format, below the FP8 saturation point
        magnitudes = 2.0**rng.uniform(-6, 8, 500)
        values = magnitudes * rng.choice([-1.0, 1.0], 500)
        for p in Precision:
            for x in values:
                y = cast_scalar(x, p)
                self.assertLessEqual(abs(x - y), p.unit_roundoff * abs(x), (p, x))
                self.assertEqual(cast_scalar(y, p), y, (p, x))

    def test_fp8_saturates(self):
        self.assertEqual(cast_scalar(1000.0, Precision.FP8E4M3), 448.0)
        self.assertEqual(cast_scalar(-1e9, Precision.FP8E4M3), -448.0)
        self.assertEqual(cast_scalar(1.0625, Precision.FP8E4M3), 1.0)
        self.assertEqual(cast_scalar(1.1875, Precision.FP8E4M3), 1.25)

    def test_fp16_overflows(self):
        self.assertEqual(cast_scalar(1e6, Precision.FP16), np.inf)

    def test_quantize_returns_copy(self):
        values = np.ones((2, 2))
        out = quantize(values, Precision.FP64)
        out[0, 0] = 5.0
        self.assertEqual(values[0, 0], 1.0)


class TileTest(unittest.TestCase):
    def test_index_lower_only(self):
        TileIndex(2, 1)
        with self.assertRaises(ValueError):
            TileIndex(1, 2)
        self.assertTrue(TileIndex(3, 3).is_diagonal)

    def test_lower_indices_order(self):
        self.assertEqual([i.as_tuple() for i in lower_indices(3)],
                         [(0, 0), (1, 0), (2, 0), (1, 1), (2, 1), (2, 2)])

    def test_buffer_is_read_only(self):
        values = np.eye(3)
        t = TileBuffer(values)
        with self.assertRaises(ValueError):
            t.elements[0, 0] = 2.0
        values[0, 0] = 7.0
        self.assertEqual(t.elements[0, 0], 1.0)

    def test_buffer_quantizes(self):
        t = TileBuffer(np.full((2, 2), 0.1), Precision.FP32)
        self.assertEqual(t.elements[0, 0], float(np.float32(0.1)))
        self.assertEqual(t.nbytes, 16)

    def test_convert_up_is_exact(self):
        t = TileBuffer(np.full((2, 2), 0.1), Precision.FP16)
        up = convert_tile(t, Precision.FP64)
        self.assertIs(up.precision, Precision.FP64)
        self.assertTrue(np.array_equal(up.elements, t.elements))

    def test_convert_down_then_up(self):
        t = TileBuffer(np.full((2, 2), 0.1))
        down = convert_tile(t, Precision.FP32)
        self.assertTrue(convert_tile(convert_tile(down, Precision.FP64), Precision.FP32)
                        .same_bits(down))

    def test_norm(self):
        t = TileBuffer(np.array([[3.0, 0.0], [4.0, 0.0]]))
        self.assertEqual(frobenius_norm_tile(t), 5.0)

    def test_norm_matches_naive_loop(self):
        rng = np.random.Generator(np.random.PCG64(5))
        for _ in range(200):
            size = int(rng.integers(1, 5))
            values = rng.standard_normal((size, size)) * 10.0**rng.uniform(-3, 3)
            total = 0.0
            for j in range(size):
                for i in range(size):
                    total += values[i, j] * values[i, j]
            expected = math.sqrt(total)
            got = frobenius_norm_tile(TileBuffer(values))
            self.assertLessEqual(abs(got - expected), 4 * np.spacing(expected))


class TiledMatrixTest(unittest.TestCase):
    def test_dense_round_trip_with_padding(self):
        dense = random_spd(10, seed=1)
        A = TiledSymmetricMatrix.from_dense(dense, 4)
        self.assertEqual(A.nt, 3)
        self.assertEqual(len(A.tiles), 6)
        self.assertTrue(np.array_equal(A.to_dense(), dense))

    def test_padding_identity(self):
        A = TiledSymmetricMatrix.from_dense(random_spd(5, seed=2), 4)
        last = A[TileIndex(1, 1)].elements
        self.assertEqual(last[1, 1], 1.0)
        self.assertEqual(last[3, 3], 1.0)
        self.assertEqual(last[0, 3], 0.0)
        self.assertEqual(A.logical_block(TileIndex(1, 1)).shape, (1, 1))
        self.assertEqual(A.logical_block(TileIndex(1, 0)).shape, (1, 4))

    def test_matrix_norm_excludes_padding(self):
        dense = random_spd(9, seed=3)
        A = TiledSymmetricMatrix.from_dense(dense, 4)
        self.assertTrue(np.isclose(frobenius_norm_matrix(A), np.linalg.norm(dense), rtol=1e-12))

    def test_copy_is_independent(self):
        A = TiledSymmetricMatrix.from_dense(np.eye(4), 2)
        B = A.copy()
        B[TileIndex(0, 0)] = TileBuffer(np.zeros((2, 2)))
        self.assertEqual(A[TileIndex(0, 0)].elements[0, 0], 1.0)
        self.assertFalse(A.same_bits(B))

    def test_to_dense_lower(self):
        A = TiledSymmetricMatrix.from_dense(random_spd(6, seed=4), 3)
        lower = A.to_dense(mirror=False)
        self.assertTrue(np.array_equal(lower, np.tril(lower)))


class DumpTest(unittest.TestCase):
    def setUp(self):
        self.dir = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.dir.name, "A.bin")

    def tearDown(self):
        self.dir.cleanup()

    def test_dump_and_load(self):
        A = TiledSymmetricMatrix.from_dense(random_spd(7, seed=5), 3)
        A[TileIndex(2, 0)] = convert_tile(A[TileIndex(2, 0)], Precision.FP16)
        dump_matrix(self.path, A)
        B = load_matrix(self.path)
        self.assertTrue(A.same_bits(B))
        self.assertIs(B[TileIndex(2, 0)].precision, Precision.FP16)

    def test_layout(self):
        A = TiledSymmetricMatrix.from_dense(np.eye(2), 2)
        dump_matrix(self.path, A)
        raw = open(self.path, "rb").read()
        self.assertEqual(len(raw), 3 * 8 + 1 + 4 * 8)
        self.assertEqual(np.frombuffer(raw[:24], dtype="<u8").tolist(), [2, 2, 1])
        self.assertEqual(raw[24], 0)

    def test_truncated(self):
        A = TiledSymmetricMatrix.from_dense(np.eye(4), 2)
        dump_matrix(self.path, A)
        raw = open(self.path, "rb").read()
        with open(self.path, "wb") as f:
            f.write(raw[:-8])
        with self.assertRaises(MalformedInput):
            load_matrix(self.path)

    def test_bad_code(self):
        A = TiledSymmetricMatrix.from_dense(np.eye(2), 2)
        dump_matrix(self.path, A)
        raw = bytearray(open(self.path, "rb").read())
        raw[24] = 9
        with open(self.path, "wb") as f:
            f.write(bytes(raw))
        with self.assertRaises(MalformedInput):
            load_matrix(self.path)
