"""Constructive repair of approximate representations.

The engine turns a representation whose relators fail by at most p^{-k}
into an exact homomorphism at the working precision, moving each
generator image by at most p^{l-k} where p^l is the p-part of the finite
image group.  One lifting step corrects the canonical set-section of the
finite image by solving a 2-cocycle equation over the congruence kernel;
the solution is produced by averaging over the group (division by the
unit part of the order is exact, division by the p-part costs the
recorded precision), verified by direct substitution, and repaired by an
exact linear solve over the ring whenever averaging leaves a residue.
Conjugacy corrections for amalgamations solve the analogous 1-cocycle
equation.  Nothing is trusted: every step re-measures the defect and
distance it claims.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .local_ring import NormValue, RingSpec
from .presentations import (
    ApproxRep,
    CapExceeded,
    DefectTooLarge,
    FiniteImage,
    Presentation,
    PresentationError,
    closure_of_matrices,
    finite_image,
)
from .ultranorm_linalg import UMatrix, Unsolvable, solve_linear

DEFAULT_CLOSURE_CAP = 10 ** 6


class RepairError(RuntimeError):
    pass


class HypothesisViolated(RepairError):
    pass


class CharPUnsupported(RepairError):
    pass


# ---------------------------------------------------------------------------
# Ledger
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LedgerStep:
    defect_val_after: int
    distance_spent_val: int
    method: str  # "averaging" or "linear-solve"


@dataclass
class PrecisionLedger:
    """Audit trail of a repair: levels claimed, levels spent, all re-measured."""

    initial_defect_val: int
    p_part: int
    steps: List[LedgerStep] = field(default_factory=list)
    final_distance_val: Optional[int] = None
    image_order: Optional[int] = None
    working_precision: int = 0
    verified: bool = False

    @property
    def final_distance_bound_val(self) -> int:
        return self.initial_defect_val - self.p_part

    def to_json(self) -> dict:
        return {
            "initial_defect_val": self.initial_defect_val,
            "p_part": self.p_part,
            "steps": [
                {"defect_val_after": s.defect_val_after,
                 "distance_spent_val": s.distance_spent_val,
                 "method": s.method}
                for s in self.steps
            ],
            "final_distance_bound_val": self.final_distance_bound_val,
            "final_distance_val": self.final_distance_val,
            "image_order": self.image_order,
            "working_precision": self.working_precision,
            "verified": self.verified,
        }


# ---------------------------------------------------------------------------
# Cochains
# ---------------------------------------------------------------------------


@dataclass
class Cochain2:
    """A 2-cocycle on a finite image, in additive congruence coordinates.

    values[(i, j)] is the coordinate matrix of the section failure at the
    element pair (i, j), at congruence level `level`, entries defined
    mod w^mod_exp.  The group acts by conjugation through the section.
    """

    image: FiniteImage
    level: int
    mod_exp: int
    values: Dict[Tuple[int, int], UMatrix]
    act: List[UMatrix]
    act_inv: List[UMatrix]

    def action(self, g: int, m: UMatrix) -> UMatrix:
        return self.act[g] @ m @ self.act_inv[g]

    def coboundary_of(self, c: Dict[int, UMatrix], g: int, h: int) -> UMatrix:
        return self.action(g, c[h]) - c[self.image.product(g, h)] + c[g]

    def is_zero(self) -> bool:
        return all(m.min_valuation() >= self.mod_exp for m in self.values.values())

    def check_identity(self, sample: Optional[int] = None, seed: int = 0) -> None:
        """Verify g.z(h,k) - z(gh,k) + z(g,hk) - z(g,h) = 0 exactly."""
        N = self.image.order
        if sample is None or N ** 3 <= sample:
            triples = ((g, h, k) for g in range(N) for h in range(N) for k in range(N))
        else:
            rng = random.Random(seed)
            triples = ((rng.randrange(N), rng.randrange(N), rng.randrange(N))
                       for _ in range(sample))
        prod = self.image.product
        for g, h, k in triples:
            lhs = (self.action(g, self.values[(h, k)])
                   - self.values[(prod(g, h), k)]
                   + self.values[(g, prod(h, k))]
                   - self.values[(g, h)])
            if lhs.min_valuation() < self.mod_exp:
                raise RepairError(f"2-cocycle identity fails at {(g, h, k)}")


@dataclass
class Cochain1:
    """A 1-cochain on a finite image, with the precision spent to obtain it."""

    image: FiniteImage
    level: int
    mod_exp: int
    values: Dict[int, UMatrix]
    precision_loss: int = 0
    method: str = "averaging"


# ---------------------------------------------------------------------------
# Section machinery
# ---------------------------------------------------------------------------


def _sections(C: FiniteImage, gens: Sequence[UMatrix], ring: RingSpec, n: int) -> List[UMatrix]:
    """Full-precision section of C: evaluate each element's witness word."""
    sigma: List[UMatrix] = []
    for i in range(C.order):
        m = UMatrix.identity(ring, n)
        for gi in C.words[i]:
            m = m @ gens[gi]
        sigma.append(m)
    return sigma


def _section_defect_val(sigma: Sequence[UMatrix], C: FiniteImage) -> int:
    """min over pairs of val(sigma(c) sigma(d) - sigma(cd)); K when exact."""
    K = sigma[0].ring.precision
    best = K
    for c in range(C.order):
        sc = sigma[c]
        for d in range(C.order):
            diff = (sc @ sigma[d]) - sigma[C.product(c, d)]
            v = diff.min_valuation()
            if v < best:
                best = v
                if best == 0:
                    return 0
    return best


def _build_cocycle(sigma, sigma_inv, C: FiniteImage, level: int, mod_exp: int) -> Cochain2:
    ring = sigma[0].ring
    ring_q = ring.with_precision(mod_exp)
    act = [m.reduce(mod_exp) for m in sigma]
    act_inv = [m.reduce(mod_exp) for m in sigma_inv]
    values: Dict[Tuple[int, int], UMatrix] = {}
    for c in range(C.order):
        for d in range(C.order):
            z = sigma[c] @ sigma[d] @ sigma_inv[C.product(c, d)]
            values[(c, d)] = z.congruence_coords(level).reduce(mod_exp)
    return Cochain2(C, level, mod_exp, values, act, act_inv)


def build_defect_cocycle(rep: ApproxRep, C: FiniteImage, k: int, *,
                         level: Optional[int] = None) -> Cochain2:
    """The section-failure 2-cocycle of a representation at level k.

    Requires defect(rep) <= p^{-k} and working precision >= 2k; the values
    are the congruence coordinates of sigma(c) sigma(d) sigma(cd)^{-1}.
    """
    K = rep.ring.precision
    d = rep.defect()
    if not d <= NormValue.from_valuation(rep.ring, k):
        raise DefectTooLarge(f"defect {d!r} exceeds p^-{k}")
    lvl = k if level is None else level
    mod_exp = min(lvl, K - lvl)
    if mod_exp < 1:
        raise RepairError("working precision too small for this level")
    sigma = _sections(C, rep.images, rep.ring, rep.n)
    sigma_inv = [m.inv() for m in sigma]
    z = _build_cocycle(sigma, sigma_inv, C, lvl, mod_exp)
    z.check_identity(sample=125_000)
    return z


def _avg_candidate(z: Cochain2) -> Optional[Dict[int, UMatrix]]:
    """Averaging solution of the coboundary equation (delta c = z).

    b(g) = sum_h z(g, h) satisfies delta b = |C| z; dividing by the unit
    part is exact, dividing by the p-part is entrywise and returns None
    when obstructed.
    """
    C = z.image
    ring_q = z.act[0].ring
    n = z.act[0].n
    a = C.p_part
    if a >= ring_q.precision:
        return None
    minv = ring_q.inv(ring_q.from_int(C.unit_part))
    c: Dict[int, UMatrix] = {}
    for g in range(C.order):
        b = UMatrix.zero(ring_q, n)
        for h in range(C.order):
            b = b + z.values[(g, h)]
        t = b.scale(minv)
        if a:
            if t.min_valuation() < a:
                return None
            rows = tuple(tuple(ring_q.shift_down(x, a) for x in row) for row in t.rows)
            t = UMatrix(ring_q, n, rows)
        c[g] = t
    return c


def _verify_h2(z: Cochain2, c: Dict[int, UMatrix], tol_exp: int) -> bool:
    """Check delta c == z with entries agreeing mod w^tol_exp."""
    for (g, h), zv in z.values.items():
        if (z.coboundary_of(c, g, h) - zv).min_valuation() < tol_exp:
            return False
    return True


def _generator_classes(C: FiniteImage) -> List[int]:
    out = []
    for g in C.generator_indices:
        if g not in out and g != 0:
            out.append(g)
    return out or [0]


def _solve_h2_linear(z: Cochain2) -> Dict[int, UMatrix]:
    """Exact coboundary solve delta c = z as a linear system over the ring.

    Unknowns are c(g) for g != identity (c(e) = 0 is forced); equations are
    taken at generator pairs, which determine a 2-cocycle.
    """
    C = z.image
    ring_q = z.act[0].ring
    n = z.act[0].n
    N = C.order
    nvars = (N - 1) * n * n
    gens = _generator_classes(C)
    rows: List[List[int]] = []
    rhs: List[int] = []

    def var(e: int, a: int, b: int) -> int:
        return (e - 1) * n * n + a * n + b

    for s in gens:
        us = z.act[s]
        uinv = z.act_inv[s]
        for d in range(N):
            sd = C.product(s, d)
            zv = z.values[(s, d)]
            for r in range(n):
                for t in range(n):
                    row = [0] * nvars
                    # s . c(d) contributes u[r][a] * uinv[b][t] per entry (a, b)
                    if d != 0:
                        for a in range(n):
                            ura = us.rows[r][a]
                            if ura == 0:
                                continue
                            for b in range(n):
                                coef = ring_q.mul(ura, uinv.rows[b][t])
                                if coef:
                                    j = var(d, a, b)
                                    row[j] = ring_q.add(row[j], coef)
                    if sd != 0:
                        j = var(sd, r, t)
                        row[j] = ring_q.sub(row[j], ring_q.one)
                    if s != 0:
                        j = var(s, r, t)
                        row[j] = ring_q.add(row[j], ring_q.one)
                    rows.append(row)
                    rhs.append(zv.rows[r][t])
    result = solve_linear(rows, rhs, ring_q)
    c: Dict[int, UMatrix] = {0: UMatrix.zero(ring_q, n)}
    x = result.particular
    for e in range(1, N):
        rows_e = tuple(tuple(x[var(e, a, b)] for b in range(n)) for a in range(n))
        c[e] = UMatrix(ring_q, n, rows_e)
    return c


def average_solve_h2(z: Cochain2, C: Optional[FiniteImage] = None) -> Cochain1:
    """Solve the coboundary equation for a defect 2-cocycle.

    Averaging first; the result is verified by substitution at the reduced
    precision and the exact linear solver takes over when averaging is
    obstructed or leaves a residue.  Raises Unsolvable when no solution
    exists (a hypothesis violation upstream).
    """
    image = C if C is not None else z.image
    a = image.p_part
    tol = z.mod_exp - a
    c = _avg_candidate(z)
    if c is not None and tol > 0 and _verify_h2(z, c, tol):
        return Cochain1(image, z.level, z.mod_exp, c, precision_loss=a,
                        method="averaging")
    c = _solve_h2_linear(z)
    if not _verify_h2(z, c, z.mod_exp):
        raise Unsolvable("linear solve yielded a non-solution", 0)
    return Cochain1(image, z.level, z.mod_exp, c, precision_loss=0,
                    method="linear-solve")


# ---------------------------------------------------------------------------
# One lifting step and the full repair loop
# ---------------------------------------------------------------------------


@dataclass
class _StepResult:
    new_gens: List[UMatrix]
    defect_val_after: int
    distance_spent_val: int
    method: str
    image_order: int
    p_part: int


def _apply_correction(sigma, corr: Dict[int, UMatrix], level: int, ring: RingSpec):
    new_sigma = []
    for i, s in enumerate(sigma):
        u = corr[i].lift_to(ring).congruence_lift(level)
        new_sigma.append(u @ s)
    return new_sigma


def _section_lift_once(ring: RingSpec, n: int, gens: Sequence[UMatrix], k: int,
                       cap: int) -> _StepResult:
    """One precision-doubling correction of the section at level k."""
    K = ring.precision
    C = closure_of_matrices([g.reduce(k) for g in gens], k, cap=cap)
    a = C.p_part
    if not ring.is_mixed and a > 0:
        raise CharPUnsupported(
            "equal characteristic repair requires an image of order coprime to p")
    if k <= 2 * a:
        raise HypothesisViolated(f"need defect level k > 2l (k={k}, l={a})")
    j = k - a
    target = min(2 * j, K)
    mod_exp = target - j
    sigma = _sections(C, gens, ring, n)
    sigma_inv = [m.inv() for m in sigma]
    z = _build_cocycle(sigma, sigma_inv, C, j, mod_exp)
    amin = min(a, mod_exp)
    for v in z.values.values():
        if v.min_valuation() < amin:
            raise RepairError("cocycle values are not divisible by the p-part")

    method = "averaging"
    cand = _avg_candidate(z)
    new_sigma = None
    measured = -1
    if cand is not None:
        corr = {g: -m for g, m in cand.items()}
        new_sigma = _apply_correction(sigma, corr, j, ring)
        measured = _section_defect_val(new_sigma, C)
    if new_sigma is None or measured < target:
        method = "linear-solve"
        neg = {g: -m for g, m in _solve_h2_linear(z).items()}
        # _solve_h2_linear solves delta c = z, so -c cancels the failure.
        new_sigma = _apply_correction(sigma, neg, j, ring)
        measured = _section_defect_val(new_sigma, C)
        if measured < target:
            raise Unsolvable(
                f"lift step failed to reach level {target} (got {measured})",
                measured)
    gen_classes = [C.index_of(g.reduce(k)) for g in gens]
    new_gens = [new_sigma[c] for c in gen_classes]
    return _StepResult(new_gens, measured, j, method, C.order, a)


def lift_step(rep: ApproxRep, k: int, C: FiniteImage) -> ApproxRep:
    """One lifting step: defect level k becomes >= 2(k - l), distance <= p^{l-k}."""
    d = rep.defect()
    if not d <= NormValue.from_valuation(rep.ring, k):
        raise DefectTooLarge(f"defect {d!r} exceeds p^-{k}")
    if d.saturated:
        return rep
    l = C.p_part
    if k <= 2 * l:
        raise HypothesisViolated(f"need k > 2l (k={k}, l={l})")
    step = _section_lift_once(rep.ring, rep.n, rep.images, k, cap=DEFAULT_CLOSURE_CAP)
    out = rep.with_images(step.new_gens)
    K = rep.ring.precision
    target = min(2 * (k - l), K)
    if not out.defect() <= NormValue.from_valuation(rep.ring, target):
        raise RepairError("lift step did not reach its promised defect level")
    if not rep.rep_dist(out) <= NormValue.from_valuation(rep.ring, k - l):
        raise RepairError("lift step moved farther than promised")
    return out


def repair_finite_image(rep: ApproxRep, cap: int = DEFAULT_CLOSURE_CAP
                        ) -> Tuple[ApproxRep, PrecisionLedger]:
    """Repair a representation into an exact homomorphism at precision K.

    The output factors through the finite image C of the input at its
    defect level; the distance moved is at most p^l * defect where
    p^l = p-part of |C|.  Every claim is re-measured before returning.
    """
    ring = rep.ring
    K = ring.precision
    d = rep.defect()
    if d.saturated:
        ledger = PrecisionLedger(initial_defect_val=K, p_part=0,
                                 working_precision=K, verified=True)
        ledger.final_distance_val = K
        try:
            ledger.image_order = closure_of_matrices(list(rep.images), K,
                                                     cap=cap).order
        except CapExceeded:
            pass
        return rep, ledger
    k0 = d.valuation
    if k0 < 1:
        raise DefectTooLarge("defect must be < 1 (some relator fails mod w)")
    C0 = finite_image(rep, k0, cap=cap)
    l0 = C0.p_part
    if not ring.is_mixed and l0 > 0:
        raise CharPUnsupported(
            "equal characteristic repair needs a p'-image; "
            "order-2 images route through the involution repair")
    if k0 <= 2 * l0:
        raise HypothesisViolated(f"need defect level k > 2l (k={k0}, l={l0})")

    ledger = PrecisionLedger(initial_defect_val=k0, p_part=l0,
                             image_order=C0.order, working_precision=K)
    gens = list(rep.images)
    k = k0
    iterations = 0
    while k < K:
        if iterations >= K:
            raise RepairError("lifting loop exceeded its iteration bound")
        step = _section_lift_once(ring, rep.n, gens, k, cap=cap)
        ledger.steps.append(LedgerStep(step.defect_val_after,
                                       step.distance_spent_val, step.method))
        gens = step.new_gens
        k = step.defect_val_after
        iterations += 1

    out = rep.with_images(gens)
    if not out.defect().saturated:
        raise RepairError("repaired representation is not exact at precision K")
    dist = rep.rep_dist(out)
    ledger.final_distance_val = dist.valuation
    if not dist <= NormValue.from_valuation(ring, k0 - l0):
        raise RepairError("repair moved farther than the certified bound")
    if C0.order <= cap:
        img = closure_of_matrices(list(out.images), K, cap=cap)
        ledger.image_order = img.order
        if C0.order % img.order != 0:
            raise RepairError("repaired image order does not divide |C|")
    ledger.verified = True
    return out, ledger


# ---------------------------------------------------------------------------
# Conjugacy (1-cocycle) solving
# ---------------------------------------------------------------------------


def build_discrepancy_cochain(psi1: Sequence[UMatrix], psi2: Sequence[UMatrix],
                              C: FiniteImage, level: int, mod_exp: int) -> Cochain1:
    """Coordinates of psi2(g) psi1(g)^{-1} for two homs agreeing coarsely."""
    values: Dict[int, UMatrix] = {}
    for g in range(C.order):
        diff = psi2[g] @ psi1[g].inv()
        values[g] = diff.congruence_coords(level).reduce(mod_exp)
    return Cochain1(C, level, mod_exp, values)


def solve_h1_conjugator(disc: Cochain1, C: FiniteImage, act: Sequence[UMatrix],
                        act_inv: Sequence[UMatrix], *,
                        force_linear: bool = False) -> UMatrix:
    """A matrix T (in coordinates) with g.T - T = -D(g) for all g.

    Averaging: summing the cocycle identity gives |C| D(g) = b - g.b with
    b = sum_h D(h), so T = b / |C| works; division by the p-part is exact
    on divisible values and the linear solver covers the rest.
    """
    ring_q = act[0].ring
    n = act[0].n
    a = C.p_part
    ok = not force_linear and a < ring_q.precision
    t = UMatrix.zero(ring_q, n)
    if ok:
        minv = ring_q.inv(ring_q.from_int(C.unit_part))
        b = UMatrix.zero(ring_q, n)
        for g in range(C.order):
            b = b + disc.values[g]
        t = b.scale(minv)
        if a:
            if t.min_valuation() < a:
                ok = False
            else:
                t = UMatrix(ring_q, n,
                            tuple(tuple(ring_q.shift_down(x, a) for x in row)
                                  for row in t.rows))
    tol = disc.mod_exp - a
    if ok and tol > 0:
        for g in range(C.order):
            lhs = act[g] @ t @ act_inv[g] - t + disc.values[g]
            if lhs.min_valuation() < tol:
                ok = False
                break
    if ok and tol > 0:
        return t
    # Exact linear solve: unknown T with g.T - T = -D(g) at generator classes.
    nvars = n * n
    rows: List[List[int]] = []
    rhs: List[int] = []
    for s in _generator_classes(C):
        us, uinv = act[s], act_inv[s]
        dv = disc.values[s]
        for r in range(n):
            for c in range(n):
                row = [0] * nvars
                for a_ in range(n):
                    ura = us.rows[r][a_]
                    if ura == 0:
                        continue
                    for b_ in range(n):
                        coef = ring_q.mul(ura, uinv.rows[b_][c])
                        if coef:
                            row[a_ * n + b_] = ring_q.add(row[a_ * n + b_], coef)
                row[r * n + c] = ring_q.sub(row[r * n + c], ring_q.one)
                rows.append(row)
                rhs.append(ring_q.neg(dv.rows[r][c]))
    res = solve_linear(rows, rhs, ring_q)
    x = res.particular
    t = UMatrix(ring_q, n, tuple(tuple(x[r * n + c] for c in range(n)) for r in range(n)))
    for g in range(C.order):
        lhs = act[g] @ t @ act_inv[g] - t + disc.values[g]
        if lhs.min_valuation() < disc.mod_exp:
            raise Unsolvable("conjugator system has no exact solution",
                             lhs.min_valuation())
    return t


def _agreement_val(psi1: Sequence[UMatrix], psi2: Sequence[UMatrix]) -> int:
    K = psi1[0].ring.precision
    best = K
    for m1, m2 in zip(psi1, psi2):
        v = (m1 - m2).min_valuation()
        if v < best:
            best = v
    return best


def align_homomorphisms(psi1: Sequence[UMatrix], psi2: Sequence[UMatrix],
                        C: FiniteImage) -> Tuple[UMatrix, List[LedgerStep]]:
    """Find t with t psi1(g) t^{-1} = psi2(g) exactly, for all g.

    Both inputs must be genuine homomorphisms of C at full precision that
    agree at some positive level; t lies in the congruence ball of that
    level minus the p-part.  Precision doubles each round.
    """
    ring = psi1[0].ring
    n = psi1[0].n
    K = ring.precision
    a = C.p_part
    if not ring.is_mixed and a > 0:
        raise CharPUnsupported("equal characteristic alignment needs a p'-image")
    cur = list(psi1)
    total = UMatrix.identity(ring, n)
    steps: List[LedgerStep] = []
    rounds = 0
    while True:
        k = _agreement_val(cur, psi2)
        if k >= K:
            break
        if k <= 2 * a:
            raise HypothesisViolated(f"homomorphisms agree only at level {k} <= 2l")
        if rounds >= K:
            raise RepairError("alignment loop exceeded its iteration bound")
        j = k - a
        target = min(2 * j, K)
        mod_exp = target - j
        act = [m.reduce(mod_exp) for m in psi2]
        act_inv = [m.inv().reduce(mod_exp) for m in psi2]
        disc = build_discrepancy_cochain(cur, psi2, C, j, mod_exp)
        tmat = solve_h1_conjugator(disc, C, act, act_inv)
        tfull = tmat.lift_to(ring).congruence_lift(j)
        tinv = tfull.inv()
        moved = [tfull @ m @ tinv for m in cur]
        got = _agreement_val(moved, psi2)
        if got < target:
            tmat = solve_h1_conjugator(disc, C, act, act_inv, force_linear=True)
            tfull = tmat.lift_to(ring).congruence_lift(j)
            tinv = tfull.inv()
            moved = [tfull @ m @ tinv for m in cur]
            got = _agreement_val(moved, psi2)
            if got < target:
                raise Unsolvable(f"alignment failed to reach level {target}", got)
        cur = moved
        steps.append(LedgerStep(got, j, "conjugation"))
        total = tfull @ total
        rounds += 1
    return total, steps


# ---------------------------------------------------------------------------
# Graphs of groups
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GogVertex:
    name: str
    generators: Tuple[str, ...]
    relators: Tuple[Tuple[str, ...], ...] = ()


@dataclass(frozen=True)
class GogEdge:
    source: str
    target: str
    word_source: Tuple[str, ...]
    word_target: Tuple[str, ...]
    letter: str
    in_tree: bool


@dataclass(frozen=True)
class GraphOfGroups:
    vertices: Tuple[GogVertex, ...]
    edges: Tuple[GogEdge, ...]

    def __post_init__(self):
        names = [v.name for v in self.vertices]
        if len(set(names)) != len(names):
            raise PresentationError("duplicate vertex names")
        gen_owner: Dict[str, str] = {}
        for v in self.vertices:
            for g in v.generators:
                if g in gen_owner:
                    raise PresentationError(f"generator {g} owned by two vertices")
                gen_owner[g] = v.name
        for e in self.edges:
            if e.source not in names or e.target not in names:
                raise PresentationError("edge endpoint is not a vertex")
            if e.letter in gen_owner:
                raise PresentationError(f"edge letter {e.letter} clashes with a vertex generator")
        if sum(1 for e in self.edges if e.in_tree) != len(names) - 1:
            raise PresentationError("tree edges must form a spanning tree")

    def vertex(self, name: str) -> GogVertex:
        return next(v for v in self.vertices if v.name == name)

    def standard_presentation(self) -> Presentation:
        gens: List[str] = []
        for v in self.vertices:
            gens.extend(v.generators)
        for e in self.edges:
            gens.append(e.letter)
        relators: List[List[str]] = []
        for v in self.vertices:
            relators.extend([list(r) for r in v.relators])
        for e in self.edges:
            conj = ([e.letter] + list(e.word_source) + [f"{e.letter}^-1"]
                    + _invert_tokens(e.word_target))
            relators.append(conj)
            if e.in_tree:
                relators.append([e.letter])
        return Presentation.make(gens, relators)

    def to_json(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "graph_of_groups",
            "vertices": [
                {"name": v.name, "generators": list(v.generators),
                 "relators": [list(r) for r in v.relators]}
                for v in self.vertices
            ],
            "edges": [
                {"source": e.source, "target": e.target,
                 "word_source": list(e.word_source),
                 "word_target": list(e.word_target),
                 "letter": e.letter, "in_tree": e.in_tree}
                for e in self.edges
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GraphOfGroups":
        vertices = tuple(
            GogVertex(v["name"], tuple(v["generators"]),
                      tuple(tuple(r) for r in v.get("relators", [])))
            for v in obj["vertices"]
        )
        edges = tuple(
            GogEdge(e["source"], e["target"], tuple(e["word_source"]),
                    tuple(e["word_target"]), e["letter"], bool(e["in_tree"]))
            for e in obj["edges"]
        )
        return cls(vertices, edges)


def _invert_tokens(tokens: Sequence[str]) -> List[str]:
    out = []
    for tok in reversed(tokens):
        if tok.endswith("^-1"):
            out.append(tok[:-3])
        else:
            out.append(f"{tok}^-1")
    return out


def _eval_tokens(images: Dict[str, UMatrix], tokens: Sequence[str],
                 ring: RingSpec, n: int) -> UMatrix:
    out = UMatrix.identity(ring, n)
    for tok in tokens:
        if tok.endswith("^-1"):
            out = out @ images[tok[:-3]].inv()
        else:
            out = out @ images[tok]
    return out


def _hom_from_closure(gen_mats: List[UMatrix], C: FiniteImage, level: int,
                      cap: int) -> List[UMatrix]:
    """Elementwise hom C -> GL at full precision from exact-order generators.

    Requires the full-precision closure of the generators to reduce
    bijectively onto C; the returned list is indexed like C's elements.
    """
    ring = gen_mats[0].ring
    K = ring.precision
    full = closure_of_matrices(gen_mats, K, cap=cap)
    if full.order != C.order:
        raise HypothesisViolated(
            f"edge subgroup grows under precision refinement "
            f"({C.order} -> {full.order}): order bound hypothesis fails")
    out: List[Optional[UMatrix]] = [None] * C.order
    for elem in full.elements:
        idx = C.index_of(elem.reduce(level))
        if out[idx] is not None:
            raise HypothesisViolated("edge subgroup does not reduce bijectively")
        out[idx] = elem
    return out  # type: ignore[return-value]


def graph_repair(gog: GraphOfGroups, rep: ApproxRep, cap: int = DEFAULT_CLOSURE_CAP
                 ) -> Tuple[ApproxRep, PrecisionLedger]:
    """Repair a representation of a graph-of-groups presentation.

    Tree edge letters are sent to the identity, each vertex is repaired
    through its finite image, amalgamations along a spanning tree and the
    remaining edge letters are corrected by solved conjugators.  The output
    satisfies every relator exactly; the distance moved is at most
    p^l * defect for the largest p-part l met along the way.
    """
    pres = gog.standard_presentation()
    if rep.presentation != pres:
        raise PresentationError(
            "representation does not carry the standard graph-of-groups presentation")
    ring = rep.ring
    n = rep.n
    K = ring.precision
    d = rep.defect()
    if d.saturated:
        ledger = PrecisionLedger(initial_defect_val=K, p_part=0,
                                 working_precision=K, verified=True)
        ledger.final_distance_val = K
        return rep, ledger
    k0 = d.valuation
    if k0 < 1:
        raise DefectTooLarge("defect must be < 1")

    images: Dict[str, UMatrix] = {
        name: rep.images[i] for i, name in enumerate(pres.generators)
    }
    steps: List[LedgerStep] = []

    # (1) tree edge letters become the identity.
    for e in gog.edges:
        if e.in_tree:
            images[e.letter] = UMatrix.identity(ring, n)

    # (2) vertex repairs through their finite images at the defect level.
    for v in gog.vertices:
        if not v.generators:
            continue
        gens = [images[g] for g in v.generators]
        k = k0
        while k < K:
            step = _section_lift_once(ring, n, gens, k, cap=cap)
            steps.append(LedgerStep(step.defect_val_after,
                                    step.distance_spent_val, step.method))
            gens = step.new_gens
            k = step.defect_val_after
        for name, mat in zip(v.generators, gens):
            images[name] = mat

    # (3) amalgamate along a BFS spanning tree rooted at the first vertex.
    order = {v.name: i for i, v in enumerate(gog.vertices)}
    adjacency: Dict[str, List[GogEdge]] = {v.name: [] for v in gog.vertices}
    for e in gog.edges:
        if e.in_tree:
            adjacency[e.source].append(e)
            adjacency[e.target].append(e)
    root = gog.vertices[0].name
    visited = {root}
    queue = [root]
    tree_order: List[Tuple[GogEdge, str]] = []  # (edge, child vertex)
    while queue:
        cur = queue.pop(0)
        for e in sorted(adjacency[cur], key=lambda e: order[e.source] + order[e.target]):
            other = e.target if e.source == cur else e.source
            if other not in visited:
                visited.add(other)
                queue.append(other)
                tree_order.append((e, other))
    if len(visited) != len(gog.vertices):
        raise PresentationError("spanning tree does not reach every vertex")

    def edge_sides(e: GogEdge) -> Tuple[UMatrix, UMatrix]:
        src = _eval_tokens(images, e.word_source, ring, n)
        tgt = _eval_tokens(images, e.word_target, ring, n)
        return src, tgt

    for e, child in tree_order:
        src, tgt = edge_sides(e)
        # With t_e = I the relation says src = tgt exactly; conjugate the
        # child's vertex images so that its side lands on the parent's.
        parent_side, child_side = (src, tgt) if child == e.target else (tgt, src)
        k_agree = (parent_side - child_side).min_valuation()
        if k_agree >= K:
            continue
        Ce = closure_of_matrices([parent_side.reduce(k_agree)], k_agree, cap=cap)
        psi_parent = _hom_from_closure([parent_side], Ce, k_agree, cap)
        psi_child = _hom_from_closure([child_side], Ce, k_agree, cap)
        t, st = align_homomorphisms(psi_child, psi_parent, Ce)
        steps.extend(st)
        tinv = t.inv()
        for g in gog.vertex(child).generators:
            images[g] = t @ images[g] @ tinv

    # (4) non-tree edge letters are corrected by conjugators.
    for e in gog.edges:
        if e.in_tree:
            continue
        src, tgt = edge_sides(e)
        t0 = images[e.letter]
        conj_src = t0 @ src @ t0.inv()
        k_agree = (conj_src - tgt).min_valuation()
        if k_agree >= K:
            continue
        Ce = closure_of_matrices([tgt.reduce(k_agree)], k_agree, cap=cap)
        t0inv = t0.inv()
        psi_src = _hom_from_closure([conj_src], Ce, k_agree, cap)
        psi_tgt = _hom_from_closure([tgt], Ce, k_agree, cap)
        t, st = align_homomorphisms(psi_src, psi_tgt, Ce)
        steps.extend(st)
        images[e.letter] = t @ t0

    out = ApproxRep(pres, ring, n,
                    [images[name] for name in pres.generators])
    # The certified loss is the shallowest correction level actually spent;
    # with p'-images everywhere it is zero and the estimate is optimal.
    j_min = min((s.distance_spent_val for s in steps), default=k0)
    loss = max(0, k0 - j_min)
    ledger = PrecisionLedger(initial_defect_val=k0, p_part=loss,
                             steps=steps, working_precision=K)
    if not out.defect().saturated:
        raise RepairError("graph repair left a relator inexact")
    dist = rep.rep_dist(out)
    ledger.final_distance_val = dist.valuation
    if not dist <= NormValue.from_valuation(ring, k0 - loss):
        raise RepairError("graph repair moved farther than the certified bound")
    ledger.verified = True
    return out, ledger
