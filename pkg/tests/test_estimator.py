import math

import numpy as np
import pytest

from ajpeg.estimator import (
    ErrorNorm,
    global_error,
    local_error_bv,
    local_error_l2,
    modified_error_children,
)
from ajpeg.transform import approx_block_unquantized, idct2


class TestLocalErrorL2:
    def test_exact_approximation_is_zero(self):
        rng = np.random.default_rng(0)
        x = rng.random((8, 8))
        assert local_error_l2(x, x, 64) == 0.0

    def test_single_pixel_difference(self):
        x = np.zeros((4, 4))
        a = x.copy()
        a[2, 1] = 0.25
        assert local_error_l2(x, a, 1024) == pytest.approx(0.25 / math.sqrt(1024))

    def test_spectrally_inside_block_has_zero_error(self):
        # single in-band coefficient: the kept band reproduces it exactly
        coeffs = np.zeros((32, 32))
        coeffs[5, 5] = 15.0
        x = idct2(coeffs)
        err = local_error_l2(x, approx_block_unquantized(x), 1024)
        assert err <= 1e-12


class TestLocalErrorBV:
    def test_zero_error(self):
        x = np.full((4, 4), 0.3)
        assert local_error_bv(x, x, 16) == 0.0

    def test_constant_error_has_no_variation(self):
        x = np.zeros((3, 5))
        a = np.full((3, 5), 0.2)
        assert local_error_bv(x, a, 100) == pytest.approx(15 * 0.2 / 100)

    def test_two_pixel_jump(self):
        # hand evaluation: |a| + |b| + |a - b|
        x = np.zeros((2, 1))
        approx = np.array([[0.3], [-0.1]])
        expected = (0.3 + 0.1 + 0.4) / 50
        assert local_error_bv(x, approx, 50) == pytest.approx(expected)

    def test_counts_both_interface_directions(self):
        x = np.zeros((2, 2))
        a = np.array([[1.0, 0.0], [0.0, 0.0]])
        # mass 1 + two interfaces adjacent to the corner pixel
        assert local_error_bv(x, a, 4) == pytest.approx((1 + 1 + 1) / 4)


class TestGlobalError:
    def test_empty_and_zero(self):
        assert global_error([], "l2") == 0.0
        assert global_error([0.0, 0.0], "bv") == 0.0

    def test_l2_combines_in_quadrature(self):
        hw = 4096
        errs = [3 / math.sqrt(hw), 4 / math.sqrt(hw)]
        assert global_error(errs, "l2") == pytest.approx(5 / math.sqrt(hw))

    def test_bv_adds_linearly(self):
        assert global_error([0.1, 0.2], "bv") == pytest.approx(0.3)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            global_error([1.0], "l1")


class TestModifiedError:
    def test_balanced_case(self):
        # parent error = modified error = e and children summing to e^2
        e = 0.37
        children = [e / 2] * 4
        out = modified_error_children(e, e, children)
        assert out == pytest.approx(e / math.sqrt(2))

    def test_zero_numerator(self):
        assert modified_error_children(0.5, 0.4, [0.0] * 4) == 0.0

    def test_zero_denominator(self):
        assert modified_error_children(0.0, 0.0, [0.1, 0.2, 0.1, 0.0]) == 0.0

    def test_algebraic_identity(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            e, m = rng.random(2)
            children = rng.random(4)
            out = modified_error_children(e, m, children)
            lhs = out**2 * (e**2 + m**2)
            rhs = m**2 * float(np.sum(children**2))
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_nonincreasing_when_children_shrink(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            e, m = rng.random(2) + 0.01
            children = rng.random(4) * 0.4
            if sum(c * c for c in children) <= e * e + m * m:
                assert modified_error_children(e, m, children) <= m + 1e-15

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            modified_error_children(-0.1, 0.2, [0.1] * 4)


class TestErrorNorm:
    def test_frame_weight_used(self):
        norm = ErrorNorm("l2", 64, 32)
        assert norm.frame_pixels == 2048
        x = np.zeros((2, 2))
        a = np.full((2, 2), 1.0)
        assert norm.local_error(x, a) == pytest.approx(2 / math.sqrt(2048))

    def test_rejects_unknown_kind(self):
        with pytest.raises(ValueError):
            ErrorNorm("huber", 8, 8)


def test_refinement_can_increase_error():
    """The spectral-spike element: zero error on the parent, positive on
    the children -- squared errors are not subadditive in general."""
    coeffs = np.zeros((32, 32))
    coeffs[5, 5] = 15.0
    x = idct2(coeffs)
    frame = 1024
    parent = local_error_l2(x, approx_block_unquantized(x), frame)
    child_sq = 0.0
    for i in (0, 16):
        for j in (0, 16):
            sub = x[i : i + 16, j : j + 16]
            child_sq += local_error_l2(sub, approx_block_unquantized(sub), frame) ** 2
    assert parent <= 1e-12
    assert child_sq > 1e-6
