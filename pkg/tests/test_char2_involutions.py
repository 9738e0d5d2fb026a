import itertools
import random

import pytest

from ultrastab.local_ring import RingSpec
from ultrastab.char2_involutions import (
    PreconditionViolated,
    bg_blockform,
    frobenius_power_witness,
    involution_repair,
)
from ultrastab.ultranorm_linalg import UMatrix

from conftest import random_gl, shifted_random


def _ring(K=10):
    return RingSpec("fpx", 2, K)


def _swap_form(ring, n, l):
    rows = [[0] * n for _ in range(n)]
    for i in range(l):
        rows[i][l + i] = 1
        rows[l + i][i] = 1
    for i in range(2 * l, n):
        rows[i][i] = 1
    return UMatrix.from_int_rows(ring, rows)


def _random_involution(ring, n, rng):
    l = rng.randrange(0, n // 2 + 1)
    u = random_gl(ring, n, rng)
    return u @ _swap_form(ring, n, l) @ u.inv()


def test_bg_blockform_identity():
    ring = _ring(6)
    form = bg_blockform(UMatrix.identity(ring, 3), 6)
    assert form.swap_count == 0
    assert form.B.rows == UMatrix.identity(ring, 3).rows
    assert form.check(UMatrix.identity(ring, 3))


def test_bg_blockform_exact_swap():
    ring = _ring(6)
    a = UMatrix.from_int_rows(ring, [[0, 1], [1, 0]])
    form = bg_blockform(a, 6)
    assert form.swap_count == 1
    assert form.B.n == 0
    assert form.check(a)


def test_bg_blockform_random_involutions(rng):
    ring = _ring(8)
    for _ in range(25):
        n = rng.randrange(1, 5)
        a = _random_involution(ring, n, rng)
        k = rng.randrange(1, 9)
        form = bg_blockform(a, k)
        assert form.check(a)


def test_bg_blockform_exhaustive_small():
    # every involutory 2x2 matrix over F_2[X]/(X^2) admits a verified form
    ring = RingSpec("fpx", 2, 2)
    ident = UMatrix.identity(ring, 2)
    count = 0
    for e in itertools.product(list(ring.iter_all()), repeat=4):
        m = UMatrix(ring, 2, ((e[0], e[1]), (e[2], e[3])))
        if (m @ m).rows != ident.rows:
            continue
        form = bg_blockform(m, 2)
        assert form.check(m)
        count += 1
    assert count == 28  # 16 X-multiples of square-zero plus 3 * 4 unit lifts


def test_repair_scalar_example():
    ring = RingSpec("fpx", 2, 6)
    a = UMatrix(ring, 1, ((ring.from_coeffs([1, 0, 1]),),))
    out = involution_repair(a)
    assert out.rows == ((1,),)
    assert (a - out).min_valuation() == 2  # sqrt of the defect 2^-4


def test_repair_exact_input_unchanged(rng):
    ring = _ring(8)
    a = _random_involution(ring, 3, rng)
    out = involution_repair(a)
    assert out.rows == a.rows


def test_repair_random_quadratic_bound(rng):
    ring = _ring(10)
    ident4 = {n: UMatrix.identity(ring, n) for n in range(1, 5)}
    done = 0
    while done < 40:
        n = rng.randrange(1, 5)
        s = _random_involution(ring, n, rng)
        k = rng.randrange(1, 9)
        a = s + shifted_random(ring, n, rng, k)
        if not a.is_gl():
            continue
        dval = ((a @ a) - ident4[n]).min_valuation()
        if dval < 1 or dval >= 10:
            continue
        out = involution_repair(a)
        assert ((out @ out) - ident4[n]).min_valuation() >= 10
        dist = (a - out).min_valuation()
        assert 2 * dist >= dval
        done += 1


def test_repair_exhaustive_n2_K2():
    ring = RingSpec("fpx", 2, 2)
    ident = UMatrix.identity(ring, 2)
    elems = list(ring.iter_all())
    involutions = [UMatrix(ring, 2, ((a, b), (c, d)))
                   for a, b, c, d in itertools.product(elems, repeat=4)
                   if (UMatrix(ring, 2, ((a, b), (c, d))) @
                       UMatrix(ring, 2, ((a, b), (c, d)))).rows == ident.rows]
    checked = 0
    for e in itertools.product(elems, repeat=4):
        m = UMatrix(ring, 2, ((e[0], e[1]), (e[2], e[3])))
        dval = ((m @ m) - ident).min_valuation()
        if dval < 1 or not m.is_gl():
            continue
        out = involution_repair(m)
        d_rep = (m - out).min_valuation()
        d_best = max((m - w).min_valuation() for w in involutions)
        assert 2 * d_rep >= dval          # quadratic bound, literal form
        assert d_best >= d_rep            # repair is no better than optimum
        assert 2 * d_best >= dval         # brute force confirms attainability
        checked += 1
    assert checked == 64


def test_repair_preconditions():
    ring = RingSpec("zp", 2, 6)
    with pytest.raises(PreconditionViolated):
        involution_repair(UMatrix.identity(ring, 2))
    ring2 = _ring(6)
    bad = UMatrix.from_int_rows(ring2, [[1, 1], [1, 1]])  # not invertible
    with pytest.raises(PreconditionViolated):
        involution_repair(bad)


def test_frobenius_witness_examples(rng):
    ring = _ring(10)
    a = UMatrix(ring, 2, ((ring.from_coeffs([0, 1]), 0), (0, 0)))
    w = frobenius_power_witness(a, 1)
    assert w.valuation == 2  # ||A||^2 with ||A|| = 2^-1
    z = frobenius_power_witness(UMatrix.zero(ring, 2), 3)
    assert z.saturated
    # random nilpotent: strictly upper triangular
    for _ in range(20):
        rows = [[0] * 3 for _ in range(3)]
        for i in range(3):
            for j in range(i + 1, 3):
                rows[i][j] = ring.random_raw(rng)
        n_mat = UMatrix(ring, 3, tuple(tuple(r) for r in rows))
        frobenius_power_witness(n_mat, 2)  # raises if the identity fails
