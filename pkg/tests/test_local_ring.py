import random

import pytest

from ultrastab.local_ring import (
    EQUAL_CHAR,
    MIXED_CHAR,
    NonUnit,
    NormValue,
    RingError,
    RingSpec,
    Scalar,
)


def test_ring_validation():
    with pytest.raises(RingError):
        RingSpec(MIXED_CHAR, 4, 3)
    with pytest.raises(RingError):
        RingSpec(MIXED_CHAR, 3, 0)
    with pytest.raises(RingError):
        RingSpec("nope", 3, 2)


def test_mixed_add_examples():
    r = RingSpec(MIXED_CHAR, 3, 4)
    assert r.add(r.from_int(80), r.from_int(1)) == 0  # 81 = 3^4
    r2 = RingSpec(MIXED_CHAR, 2, 6)
    assert r2.mul(3, 43) == 1  # 129 = 2*64 + 1


def test_equal_char_freshman_dream():
    r = RingSpec(EQUAL_CHAR, 2, 3)
    x = r.from_coeffs([1, 1])
    assert r.to_coeffs(r.mul(x, x)) == [1, 0, 1]


def test_val_examples():
    r = RingSpec(MIXED_CHAR, 3, 6)
    assert r.val(63) == 2  # 63 = 9 * 7
    assert r.val(0) == 6
    r2 = RingSpec(EQUAL_CHAR, 2, 5)
    assert r2.val(r2.from_coeffs([0, 0, 0, 1, 1])) == 3


def test_inv_examples():
    r = RingSpec(MIXED_CHAR, 2, 6)
    assert r.inv(3) == 43
    assert r.inv(1) == 1
    r2 = RingSpec(MIXED_CHAR, 3, 2)
    with pytest.raises(NonUnit):
        r2.inv(3)


def test_equal_char_inverse():
    r = RingSpec(EQUAL_CHAR, 3, 5)
    rng = random.Random(1)
    for _ in range(100):
        x = r.random_unit(rng)
        assert r.mul(x, r.inv(x)) == r.one
        assert r.inv(r.inv(x)) == x


@pytest.mark.parametrize("mode,p,K", [(MIXED_CHAR, 2, 8), (MIXED_CHAR, 5, 4),
                                      (EQUAL_CHAR, 2, 8), (EQUAL_CHAR, 3, 5)])
def test_valuation_laws(mode, p, K):
    r = RingSpec(mode, p, K)
    rng = random.Random(2)
    for _ in range(300):
        x, y = r.random_raw(rng), r.random_raw(rng)
        vx, vy = r.val(x), r.val(y)
        vs = r.val(r.add(x, y))
        assert vs >= min(vx, vy)
        if vx != vy:
            assert vs == min(vx, vy)
        assert r.val(r.mul(x, y)) == min(vx + vy, K)


def test_inv_antihomomorphism():
    r = RingSpec(EQUAL_CHAR, 2, 6)
    rng = random.Random(3)
    for _ in range(50):
        x, y = r.random_unit(rng), r.random_unit(rng)
        assert r.inv(r.mul(x, y)) == r.mul(r.inv(y), r.inv(x))


@pytest.mark.parametrize("mode", [MIXED_CHAR, EQUAL_CHAR])
def test_codec_roundtrip(mode):
    r = RingSpec(mode, 3, 4)
    rng = random.Random(4)
    for _ in range(100):
        x = r.random_raw(rng)
        assert r.decode(r.encode(x)) == x


def test_shift_updown():
    r = RingSpec(MIXED_CHAR, 2, 6)
    assert r.shift_up(3, 2) == 12
    assert r.shift_down(12, 2) == 3
    with pytest.raises(RingError):
        r.shift_down(6, 2)
    r2 = RingSpec(EQUAL_CHAR, 2, 4)
    x = r2.from_coeffs([0, 0, 1, 1])
    assert r2.to_coeffs(r2.shift_down(x, 2)) == [1, 1, 0, 0]


def test_reduce():
    r = RingSpec(MIXED_CHAR, 2, 6)
    assert r.reduce_raw(43, 3) == 3
    r2 = RingSpec(EQUAL_CHAR, 2, 6)
    x = r2.from_coeffs([1, 0, 1, 1, 0, 1])
    assert r2.with_precision(3).to_coeffs(r2.reduce_raw(x, 3)) == [1, 0, 1]


@pytest.mark.parametrize("p", [2, 3, 5, 7])
def test_equal_char_shift_reduce_odd_p(p):
    # shifts and truncations must keep whole coefficient slots, not just bits
    r = RingSpec(EQUAL_CHAR, p, 6)
    rng = random.Random(17)
    for _ in range(200):
        x = r.random_raw(rng)
        y = r.random_raw(rng)
        k = rng.randrange(0, 6)
        assert r.shift_up(x, k) == r.mul(x, r.omega_pow(k))
        m = rng.randrange(1, 7)
        rm = r.with_precision(m)
        assert r.reduce_raw(r.mul(x, y), m) == rm.mul(r.reduce_raw(x, m),
                                                      r.reduce_raw(y, m))
        assert r.reduce_raw(r.add(x, y), m) == rm.add(r.reduce_raw(x, m),
                                                      r.reduce_raw(y, m))


def test_norm_ordering():
    r = RingSpec(MIXED_CHAR, 2, 6)
    one = NormValue.one(r)
    small = NormValue.from_valuation(r, 3)
    sat = NormValue.saturated_for(r)
    assert sat < small < one
    assert sat <= sat and sat == NormValue.from_valuation(r, 6)
    assert (small * small) == NormValue.saturated_for(r)
    assert small.pow(2).saturated


def test_scalar_interface():
    r = RingSpec(MIXED_CHAR, 2, 6)
    a, b = r.scalar(3), r.scalar(43)
    assert (a * b).raw == 1
    assert (a + (-a)).is_zero()
    assert a.inv().raw == 43
    assert a.val() == 0
    assert Scalar(r, 12).val() == 2
