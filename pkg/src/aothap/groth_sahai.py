"""Groth-Sahai commitments and proofs for pairing product equations.

An equation has the form

    prod_q e(a_q * prod_i x_i^alpha[q][i], b_q * prod_i y_i^beta[q][i]) = t

with secret witnesses x_i in G1 and y_i in G2. Commitments live in G1^3 and
G2^3 under a CRS ``(u1, u2, u3, v1, v2, v3)``; the verifier checks the
3x3 GT-matrix identity

    prod_q F(c^_q, d^_q) = mu_T(t) * prod_j F(u_j, P_j) F(P'_j, v_j).

Three shapes are supported and nothing else: ``GENERAL`` (both P and P'),
``LINEAR_G1`` (only G1 witnesses, proof is P) and ``LINEAR_G2`` (only G2
witnesses, proof is P'). A system of equations shares one set of
commitments and carries one proof part per equation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

from .bilinear import G1, G2, GT, BilinearGroup, Element


class Mode(enum.Enum):
    SOUND = "sound"
    WI = "wi"


class Shape(enum.IntEnum):
    GENERAL = 0
    LINEAR_G1 = 1
    LINEAR_G2 = 2


class GsError(ValueError):
    pass


class WitnessError(GsError):
    """Witnesses do not satisfy the equation they are supposed to prove."""


class ShapeMismatchError(GsError):
    pass


class TrapdoorError(GsError):
    pass


class UnsupportedEquationError(GsError):
    pass


Vec3 = tuple  # three elements of one group


def _ident3(group: BilinearGroup, kind: str) -> Vec3:
    i = group.identity(kind)
    return (i, i, i)


def _vmul(x: Vec3, y: Vec3) -> Vec3:
    return (x[0] * y[0], x[1] * y[1], x[2] * y[2])


def _vpow(x: Vec3, k: int) -> Vec3:
    k %= x[0].group.order
    if k == 0:
        return _ident3(x[0].group, x[0].kind)
    if k == 1:
        return x
    return tuple(e if e.is_identity() else e**k for e in x)


def _mu(elem: Element) -> Vec3:
    i = elem.group.identity(elem.kind)
    return (i, i, elem)


@dataclass(frozen=True)
class GsCrs:
    group: BilinearGroup
    u: tuple[Vec3, Vec3, Vec3]
    v: tuple[Vec3, Vec3, Vec3]
    mode: Mode

    def elements(self) -> list[Element]:
        return [e for vec in self.u + self.v for e in vec]


@dataclass(frozen=True)
class GsTrapdoor:
    a: int
    b: int
    xi1: int
    xi2: int
    kind: str  # "extraction" | "simulation"


def gs_crs_gen(group: BilinearGroup, mode: Mode = Mode.SOUND, rng=None, *, a=None, b=None,
               xi1=None, xi2=None) -> tuple[GsCrs, GsTrapdoor]:
    a = a if a is not None else group.random_scalar(rng, nonzero=True)
    b = b if b is not None else group.random_scalar(rng, nonzero=True)
    xi1 = xi1 if xi1 is not None else group.random_scalar(rng)
    xi2 = xi2 if xi2 is not None else group.random_scalar(rng)
    if a % group.order == 0 or b % group.order == 0:
        raise GsError("CRS exponents a, b must be non-zero")

    def vectors(g):
        one = group.identity(g.kind)
        v1 = (g**a, one, g)
        v2 = (one, g**b, g)
        v3 = _vmul(_vpow(v1, xi1), _vpow(v2, xi2))
        if mode is Mode.WI:
            v3 = _vmul(v3, _mu(g))
        return (v1, v2, v3)

    crs = GsCrs(group, vectors(group.g1), vectors(group.g2), mode)
    kind = "extraction" if mode is Mode.SOUND else "simulation"
    return crs, GsTrapdoor(a, b, xi1, xi2, kind)


@dataclass(frozen=True)
class Commitment:
    """A commitment vector; ``randomness`` stays with the committer and never hits the wire."""

    kind: str
    vec: Vec3
    randomness: tuple[int, int, int] | None = field(default=None, compare=False, repr=False)


def _commit(crs: GsCrs, x: Element, rand) -> Vec3:
    base = crs.u if x.kind == G1 else crs.v
    out = _mu(x)
    for vec, r in zip(base, rand):
        out = _vmul(out, _vpow(vec, r))
    return out


def _fresh(crs: GsCrs, rng) -> tuple[int, int, int]:
    return tuple(crs.group.random_scalar(rng) for _ in range(3))


def commit_g1(crs: GsCrs, x: Element, rng=None, randomness=None) -> Commitment:
    if x.kind != G1:
        raise TypeError("commit_g1 takes a G1 element")
    rand = tuple(randomness) if randomness is not None else _fresh(crs, rng)
    return Commitment(G1, _commit(crs, x, rand), rand)


def commit_g2(crs: GsCrs, y: Element, rng=None, randomness=None) -> Commitment:
    if y.kind != G2:
        raise TypeError("commit_g2 takes a G2 element")
    rand = tuple(randomness) if randomness is not None else _fresh(crs, rng)
    return Commitment(G2, _commit(crs, y, rand), rand)


def commitment_pow(com: Commitment, v: int) -> Commitment:
    p = com.vec[0].group.order
    rand = None
    if com.randomness is not None:
        rand = tuple(r * v % p for r in com.randomness)
    return Commitment(com.kind, _vpow(com.vec, v), rand)


def extract_commitment(trapdoor: GsTrapdoor, com) -> Element:
    """Open a Sound-CRS commitment: Z / (X^(1/a) * Y^(1/b))."""
    if trapdoor.kind != "extraction":
        raise TrapdoorError("extraction needs an extraction trapdoor (Sound CRS)")
    x, y, z = com.vec if isinstance(com, Commitment) else com
    group = z.group
    return z / (x ** group.inv(trapdoor.a) * y ** group.inv(trapdoor.b))


@dataclass(frozen=True)
class PPE:
    a: tuple  # G1 constant per term, None for the identity
    alpha: tuple[tuple[int, ...], ...]
    b: tuple  # G2 constant per term, None for the identity
    beta: tuple[tuple[int, ...], ...]
    target: Element
    shape: Shape

    @classmethod
    def build(cls, terms, target: Element, n_x: int, n_y: int, shape: Shape | None = None) -> "PPE":
        """Build from ``(a, {x_index: coeff}, b, {y_index: coeff})`` terms."""
        a, alpha, b, beta = [], [], [], []
        for ta, tx, tb, ty in terms:
            if (ta is None and not any(tx.values())) or (tb is None and not any(ty.values())):
                # pairs with the identity, so any witness in it would go unchecked
                raise UnsupportedEquationError("term has an empty side")
            a.append(ta)
            b.append(tb)
            alpha.append(tuple(tx.get(i, 0) for i in range(n_x)))
            beta.append(tuple(ty.get(i, 0) for i in range(n_y)))
        has_x = any(any(row) for row in alpha)
        has_y = any(any(row) for row in beta)
        inferred = Shape.GENERAL
        if has_x and not has_y:
            inferred = Shape.LINEAR_G1
        elif has_y and not has_x:
            inferred = Shape.LINEAR_G2
        elif not has_x and not has_y:
            raise UnsupportedEquationError("equation has no witnesses")
        eq = cls(tuple(a), tuple(alpha), tuple(b), tuple(beta), target, shape or inferred)
        eq.check_shape()
        return eq

    @property
    def n_x(self) -> int:
        return len(self.alpha[0]) if self.alpha else 0

    @property
    def n_y(self) -> int:
        return len(self.beta[0]) if self.beta else 0

    def check_shape(self) -> None:
        if not (len(self.a) == len(self.b) == len(self.alpha) == len(self.beta)):
            raise ShapeMismatchError("term lists have different lengths")
        if len({len(r) for r in self.alpha}) > 1 or len({len(r) for r in self.beta}) > 1:
            raise ShapeMismatchError("ragged exponent matrix")
        if self.shape is Shape.LINEAR_G1 and any(any(r) for r in self.beta):
            raise ShapeMismatchError("LINEAR_G1 equation with G2 witnesses")
        if self.shape is Shape.LINEAR_G2 and any(any(r) for r in self.alpha):
            raise ShapeMismatchError("LINEAR_G2 equation with G1 witnesses")


@dataclass(frozen=True)
class EquationProof:
    p: tuple[Vec3, Vec3, Vec3] | None  # over G2
    p_prime: tuple[Vec3, Vec3, Vec3] | None  # over G1


@dataclass(frozen=True)
class PPEProof:
    c: tuple[Vec3, ...]
    d: tuple[Vec3, ...]
    parts: tuple[EquationProof, ...]

    def elements(self) -> list[Element]:
        out = [e for vec in self.c + self.d for e in vec]
        for part in self.parts:
            for vecs in (part.p, part.p_prime):
                if vecs is not None:
                    out.extend(e for vec in vecs for e in vec)
        return out


def _as_system(equations) -> tuple[PPE, ...]:
    if isinstance(equations, PPE):
        return (equations,)
    eqs = tuple(equations)
    if not eqs:
        raise ShapeMismatchError("empty equation system")
    if len({(e.n_x, e.n_y) for e in eqs}) != 1:
        raise ShapeMismatchError("equations disagree on witness counts")
    return eqs


def _term_g1(group: BilinearGroup, a, row, xs) -> Element:
    acc = a if a is not None else group.identity(G1)
    for x, k in zip(xs, row):
        if k:
            acc = acc * x**k
    return acc


def _term_g2(group: BilinearGroup, b, row, ys) -> Element:
    acc = b if b is not None else group.identity(G2)
    for y, k in zip(ys, row):
        if k:
            acc = acc * y**k
    return acc


def evaluate(group: BilinearGroup, eq: PPE, xs: Sequence[Element], ys: Sequence[Element]) -> Element:
    """Left-hand side of ``eq`` at the given witnesses."""
    pairs = []
    for a, arow, b, brow in zip(eq.a, eq.alpha, eq.b, eq.beta):
        x = _term_g1(group, a, arow, xs)
        y = _term_g2(group, b, brow, ys)
        if not (x.is_identity() or y.is_identity()):
            pairs.append((x, y))
    return group.multi_pair(pairs) if pairs else group.identity(GT)


def _hat_c(group, eq: PPE, q: int, c: Sequence[Vec3]) -> Vec3:
    acc = _mu(eq.a[q]) if eq.a[q] is not None else _ident3(group, G1)
    for vec, k in zip(c, eq.alpha[q]):
        if k:
            acc = _vmul(acc, _vpow(vec, k))
    return acc


def _hat_d(group, eq: PPE, q: int, d: Sequence[Vec3]) -> Vec3:
    acc = _mu(eq.b[q]) if eq.b[q] is not None else _ident3(group, G2)
    for vec, k in zip(d, eq.beta[q]):
        if k:
            acc = _vmul(acc, _vpow(vec, k))
    return acc


def _equation_proof(crs: GsCrs, eq: PPE, d: Sequence[Vec3], xs, r, s) -> EquationProof:
    group = crs.group
    p = group.order
    n_q = len(eq.a)
    big_p = big_pp = None
    if eq.shape in (Shape.GENERAL, Shape.LINEAR_G1):
        d_hats = [_hat_d(group, eq, q, d) for q in range(n_q)]
        big_p = []
        for j in range(3):
            acc = _ident3(group, G2)
            for q in range(n_q):
                rho = sum(k * ri[j] for k, ri in zip(eq.alpha[q], r)) % p
                if rho:
                    acc = _vmul(acc, _vpow(d_hats[q], rho))
            big_p.append(acc)
        big_p = tuple(big_p)
    if eq.shape in (Shape.GENERAL, Shape.LINEAR_G2):
        x_terms = [_term_g1(group, eq.a[q], eq.alpha[q], xs) for q in range(n_q)]
        big_pp = []
        for j in range(3):
            acc = group.identity(G1)
            for q in range(n_q):
                tau = sum(k * si[j] for k, si in zip(eq.beta[q], s)) % p
                if tau and not x_terms[q].is_identity():
                    acc = acc * x_terms[q] ** tau
            big_pp.append(_mu(acc))
        big_pp = tuple(big_pp)
    return EquationProof(big_p, big_pp)


def prove_ppe(crs: GsCrs, equations, xs: Sequence[Element], ys: Sequence[Element], rng=None,
              d_given: dict[int, Commitment] | None = None) -> PPEProof:
    """``d_given`` reuses existing G2 commitments (with randomness) so two proofs can share a witness."""
    eqs = _as_system(equations)
    xs, ys = list(xs), list(ys)
    if len(xs) != eqs[0].n_x or len(ys) != eqs[0].n_y:
        raise ShapeMismatchError("witness counts do not match the equations")
    for k, eq in enumerate(eqs):
        if evaluate(crs.group, eq, xs, ys) != eq.target:
            raise WitnessError(f"witnesses do not satisfy equation {k}")
    c = [commit_g1(crs, x, rng) for x in xs]
    d_given = d_given or {}
    d = [d_given.get(j) or commit_g2(crs, y, rng) for j, y in enumerate(ys)]
    if any(cm.randomness is None for cm in d):
        raise WitnessError("a reused commitment must carry its randomness")
    d_vecs = tuple(cm.vec for cm in d)
    r = [cm.randomness for cm in c]
    s = [cm.randomness for cm in d]
    parts = tuple(_equation_proof(crs, eq, d_vecs, xs, r, s) for eq in eqs)
    return PPEProof(tuple(cm.vec for cm in c), d_vecs, parts)


def _check_structure(eqs: tuple[PPE, ...], proof: PPEProof) -> None:
    if len(proof.parts) != len(eqs):
        raise ShapeMismatchError("proof and system have different equation counts")
    if len(proof.c) != eqs[0].n_x or len(proof.d) != eqs[0].n_y:
        raise ShapeMismatchError("proof commits to the wrong number of witnesses")
    for eq, part in zip(eqs, proof.parts):
        want_p = eq.shape in (Shape.GENERAL, Shape.LINEAR_G1)
        want_pp = eq.shape in (Shape.GENERAL, Shape.LINEAR_G2)
        if (part.p is not None) != want_p or (part.p_prime is not None) != want_pp:
            raise ShapeMismatchError(f"proof part does not match {eq.shape.name} shape")


def verify_ppe(crs: GsCrs, equations, proof: PPEProof) -> bool:
    eqs = _as_system(equations)
    _check_structure(eqs, proof)
    group = crs.group
    for eq, part in zip(eqs, proof.parts):
        n_q = len(eq.a)
        c_hats = [_hat_c(group, eq, q, proof.c) for q in range(n_q)]
        d_hats = [_hat_d(group, eq, q, proof.d) for q in range(n_q)]
        for i in range(3):
            for k in range(3):
                pairs = [(ch[i], dh[k]) for ch, dh in zip(c_hats, d_hats)]
                if part.p is not None:
                    pairs += [(crs.u[j][i].inverse(), part.p[j][k]) for j in range(3)]
                if part.p_prime is not None:
                    pairs += [(part.p_prime[j][i].inverse(), crs.v[j][k]) for j in range(3)]
                pairs = [(x, y) for x, y in pairs if not (x.is_identity() or y.is_identity())]
                want = eq.target if i == k == 2 else group.identity(GT)
                got = group.multi_pair(pairs) if pairs else group.identity(GT)
                if got != want:
                    return False
    return True


def simulate_proof(crs: GsCrs, trapdoor: GsTrapdoor, equations, rng=None) -> PPEProof:
    """Proof without witnesses, using the WI-CRS simulation trapdoor.

    Every witness is committed as the identity. Equations that hold at the
    all-identity assignment are proved with that opening; an equation that
    instead pins one witness to its group generator (``e(g1, g') = e(g1, g2)``)
    opens that commitment to the generator, which the trapdoor allows.
    """
    if trapdoor.kind != "simulation" or crs.mode is not Mode.WI:
        raise TrapdoorError("simulation needs a WI CRS and its simulation trapdoor")
    eqs = _as_system(equations)
    group = crs.group
    p = group.order
    xs0 = [group.identity(G1)] * eqs[0].n_x
    ys0 = [group.identity(G2)] * eqs[0].n_y
    c = [commit_g1(crs, x, rng) for x in xs0]
    d = [commit_g2(crs, y, rng) for y in ys0]
    d_vecs = tuple(cm.vec for cm in d)
    r0 = [cm.randomness for cm in c]
    s0 = [cm.randomness for cm in d]

    def shifted(rand):
        return ((rand[0] + trapdoor.xi1) % p, (rand[1] + trapdoor.xi2) % p, (rand[2] - 1) % p)

    parts = []
    for k, eq in enumerate(eqs):
        if evaluate(group, eq, xs0, ys0) == eq.target:
            parts.append(_equation_proof(crs, eq, d_vecs, xs0, r0, s0))
            continue
        opened = None
        for j in range(eq.n_y):
            if not any(row[j] for row in eq.beta):
                continue
            ys = list(ys0)
            ys[j] = group.g2
            if evaluate(group, eq, xs0, ys) == eq.target:
                s = list(s0)
                s[j] = shifted(s0[j])
                opened = _equation_proof(crs, eq, d_vecs, xs0, r0, s)
                break
        if opened is None:
            for i in range(eq.n_x):
                if not any(row[i] for row in eq.alpha):
                    continue
                xs = list(xs0)
                xs[i] = group.g1
                if evaluate(group, eq, xs, ys0) == eq.target:
                    r = list(r0)
                    r[i] = shifted(r0[i])
                    opened = _equation_proof(crs, eq, d_vecs, xs, r, s0)
                    break
        if opened is None:
            raise UnsupportedEquationError(f"equation {k} is outside the simulatable family")
        parts.append(opened)
    return PPEProof(tuple(cm.vec for cm in c), d_vecs, tuple(parts))
