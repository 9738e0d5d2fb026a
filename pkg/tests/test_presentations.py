import random

import pytest

from ultrastab.local_ring import NormValue, RingSpec
from ultrastab.presentations import (
    ApproxRep,
    CapExceeded,
    DefectTooLarge,
    Presentation,
    PresentationError,
    Word,
    closure_of_matrices,
    finite_image,
)
from ultrastab.ultranorm_linalg import UMatrix

from conftest import random_gl, shifted_random


def test_word_reduction():
    w = Word.parse(["s", "s^-1"], ["s"])
    assert w.letters == ()
    w2 = Word.parse(["t", "s", "s", "s", "t^-1", "s^-1", "s^-1"], ["s", "t"])
    assert w2.letters == (2, 1, 1, 1, -2, -1, -1)
    assert (w2 * w2.inverse()).letters == ()


def test_word_parse_powers():
    w = Word.parse(["s^3", "t^-2"], ["s", "t"])
    assert w.letters == (1, 1, 1, -2, -2)
    assert w.unparse(["s", "t"]) == ["s", "s", "s", "t^-1", "t^-1"]


def test_presentation_validation():
    with pytest.raises(PresentationError):
        Presentation.make(["s", "s"], [])
    with pytest.raises(PresentationError):
        Presentation.make(["s"], [["t"]])


def test_eval_word_examples():
    ring = RingSpec("zp", 2, 8)
    pres = Presentation.make(["s"], [["s", "s", "s"]])
    m = UMatrix.from_int_rows(ring, [[0, -1], [1, -1]])
    rep = ApproxRep(pres, ring, 2, [m])
    ident = UMatrix.identity(ring, 2)
    assert rep.eval_word(Word.identity()).rows == ident.rows
    assert rep.eval_word(Word.parse(["s", "s^-1"], ["s"])).rows == ident.rows
    assert rep.defect().saturated  # M^3 = I exactly

    # perturbed at level 3 with R = E_11: direct integer oracle
    pert = UMatrix.from_int_rows(ring, [[8, 0], [0, 0]])
    rep2 = ApproxRep(pres, ring, 2, [m + pert])
    def oracle_cube(a):
        n = 2
        def mul(x, y):
            return [[sum(x[i][t] * y[t][j] for t in range(n)) % 256
                     for j in range(n)] for i in range(n)]
        return mul(mul(a, a), a)
    cube = oracle_cube([[8, 255], [1, 255]])
    diff_vals = []
    for i in range(2):
        for j in range(2):
            d = (cube[i][j] - (1 if i == j else 0)) % 256
            if d:
                v = 0
                while d % 2 == 0:
                    d //= 2
                    v += 1
                diff_vals.append(v)
    assert rep2.defect() == NormValue.from_valuation(ring, min(diff_vals))
    assert rep2.defect().valuation == 3


def test_defect_empty_relators():
    ring = RingSpec("zp", 3, 4)
    rep = ApproxRep(Presentation.free(["a"]), ring, 1,
                    [UMatrix.from_int_rows(ring, [[2]])])
    assert rep.defect().saturated


def test_rep_dist(rng):
    ring = RingSpec("zp", 2, 8)
    pres = Presentation.free(["a", "b"])
    imgs = [random_gl(ring, 2, rng) for _ in range(2)]
    rep = ApproxRep(pres, ring, 2, imgs)
    assert rep.rep_dist(rep).saturated
    k = 3
    pert = shifted_random(ring, 2, rng, k)
    rep2 = rep.with_images([imgs[0] + pert, imgs[1]])
    assert rep.rep_dist(rep2).valuation >= k
    # conjugating by an element of G_k moves by at most p^-k
    u = shifted_random(ring, 2, rng, k).congruence_lift(k)
    rep3 = rep.with_images([u @ m @ u.inv() for m in imgs])
    assert rep.rep_dist(rep3) <= NormValue.from_valuation(ring, k)


def test_word_distance_transfer(rng):
    # dist over random words is controlled by the generator distances
    ring = RingSpec("zp", 3, 6)
    pres = Presentation.free(["a", "b"])
    imgs = [random_gl(ring, 2, rng) for _ in range(2)]
    rep1 = ApproxRep(pres, ring, 2, imgs)
    k = 2
    rep2 = rep1.with_images([m + shifted_random(ring, 2, rng, k) for m in imgs])
    bound = rep1.rep_dist(rep2)
    for _ in range(30):
        letters = [rng.choice([1, -1, 2, -2]) for _ in range(rng.randrange(1, 9))]
        w = Word.make(letters)
        assert rep1.eval_word(w).dist(rep2.eval_word(w)) <= bound


def test_finite_image_cyclic():
    ring = RingSpec("zp", 2, 8)
    pres = Presentation.make(["s"], [["s", "s", "s"]])
    m = UMatrix.from_int_rows(ring, [[0, -1], [1, -1]])
    pert = shifted_random(ring, 2, random.Random(0), 3)
    rep = ApproxRep(pres, ring, 2, [m + pert])
    C = finite_image(rep, 3)
    assert C.order == 3
    assert C.p_part == 0
    assert C.unit_part == 3
    assert C.element_order(C.generator_indices[0]) == 3
    assert C.inverse(C.generator_indices[0]) == C.product(
        C.generator_indices[0], C.generator_indices[0])


def test_finite_image_gl1_order2():
    ring = RingSpec("zp", 2, 8)
    pres = Presentation.make(["s"], [["s", "s"]])
    k = 4
    rep = ApproxRep(pres, ring, 1, [UMatrix.from_int_rows(ring, [[-1 + 2 ** k]])])
    C = finite_image(rep, k)
    assert C.order == 2 and C.p_part == 1


def test_finite_image_trivial():
    ring = RingSpec("zp", 5, 3)
    rep = ApproxRep(Presentation.make(["s"], [["s"]]), ring, 2,
                    [UMatrix.identity(ring, 2)])
    C = finite_image(rep, 2)
    assert C.order == 1


def test_finite_image_errors(rng):
    ring = RingSpec("zp", 2, 6)
    pres = Presentation.make(["s"], [["s", "s", "s"]])
    m = UMatrix.from_int_rows(ring, [[0, -1], [1, -1]])
    rep = ApproxRep(pres, ring, 2, [m + shifted_random(ring, 2, rng, 2)])
    with pytest.raises(DefectTooLarge):
        finite_image(rep, 5)
    with pytest.raises(CapExceeded):
        closure_of_matrices([random_gl(ring, 3, rng)], 6, cap=2)


def test_order_divides_gl_order():
    # |image| divides |GL_2(Z/2^3)| = 8^4 * (1-1/2)(1-1/4) ... spot check
    ring = RingSpec("zp", 2, 3)
    rng = random.Random(9)
    gl_order = 1
    # |GL_2(F_2)| * 2^(4*(3-1)) = 6 * 256
    gl_order = 6 * 2 ** (4 * 2)
    for _ in range(10):
        g = random_gl(ring, 2, rng)
        C = closure_of_matrices([g], 3, cap=10 ** 5)
        assert gl_order % C.order == 0


def test_defect_iff_exact_reduction(rng):
    # defect <= p^-m exactly when the mod-w^m reduction kills every relator
    ring = RingSpec("zp", 2, 8)
    pres = Presentation.make(["s"], [["s", "s", "s"]])
    m = UMatrix.from_int_rows(ring, [[0, -1], [1, -1]])
    for _ in range(20):
        k = rng.randrange(1, 7)
        rep = ApproxRep(pres, ring, 2, [m + shifted_random(ring, 2, rng, k)])
        dval = rep.defect().valuation
        for level in range(1, 8):
            reduced = rep.reduce(level)
            exact = reduced.defect().saturated
            assert exact == (dval >= level)


def test_repdist_iff_equal_reduction(rng):
    # two low-defect reps are p^-m-close exactly when their reductions agree
    ring = RingSpec("zp", 3, 6)
    pres = Presentation.make(["s"], [["s", "s", "s"]])
    m = UMatrix.from_int_rows(ring, [[0, -1], [1, -1]])
    for _ in range(20):
        k1, k2 = rng.randrange(2, 5), rng.randrange(2, 5)
        r1 = ApproxRep(pres, ring, 2, [m + shifted_random(ring, 2, rng, k1)])
        r2 = ApproxRep(pres, ring, 2, [m + shifted_random(ring, 2, rng, k2)])
        dv = r1.rep_dist(r2)
        for level in range(1, 7):
            same = all(a.reduce(level).rows == b.reduce(level).rows
                       for a, b in zip(r1.images, r2.images))
            assert same == (dv.saturated or dv.valuation >= level)


def test_json_roundtrip():
    ring = RingSpec("fpx", 2, 4)
    pres = Presentation.make(["s", "t"], [["t", "s", "t^-1", "s^-1"]])
    imgs = [UMatrix.identity(ring, 2), UMatrix.identity(ring, 2)]
    rep = ApproxRep(pres, ring, 2, imgs)
    rt = ApproxRep.from_json(rep.to_json())
    assert rt.presentation == rep.presentation
    assert all(a.rows == b.rows for a, b in zip(rt.images, rep.images))
