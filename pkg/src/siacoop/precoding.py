"""Transmit basis construction and exact alignment containment checks.

Each stream-j basis column is a product of generator powers applied to
the all-ones vector: per user k, the residual coefficients carry
exponents alpha[k][i], the desired coefficients (r != j) carry
beta[k][r], and the common coefficient soaks up the remaining degree so
every column has per-user total degree P = (2M-1)n.  Both extension
levels share the same P, which turns every containment condition into
an exact column identity: multiplying a level-n column by its condition
generator lands bit-for-bit on the level-(n+1) column whose exponent
tuple is shifted by one in that slot.

For M >= 2 every stream's basis additionally carries a fixed stream tag
(each user's own-stream desired coefficient raised to the power n+1);
see _stream_tag for why the bases would otherwise share columns and the
decodability rank conditions could never hold.
"""

from __future__ import annotations

import itertools
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChannelError, ResourceBoundError
from .rings import DiagonalOperator

__all__ = [
    "Slot",
    "GeneratorSet",
    "ExponentIndex",
    "PrecodingBasis",
    "AlignmentReport",
    "condition_slots",
    "extract_generators",
    "enumerate_indices",
    "build_basis",
    "build_all_bases",
    "check_alignment",
]

DEFAULT_ENUMERATION_BOUND = 2 ** 20
FLOAT_ALIGN_RTOL = 1e-9

# kind is 't_res' (residual-interferer coefficient T_{k,i}) or 'g'
# (desired coefficient G_{k,r}); k is the decoder, idx the subspace.
Slot = namedtuple("Slot", ["kind", "k", "idx"])


def condition_slots(K, M, j):
    """The K(2M-1) exponent slots of stream j, in fixed (k-major) order."""
    slots = []
    for k in range(1, K + 1):
        for i in range(1, M + 1):
            slots.append(Slot("t_res", k, i))
        for r in range(1, M + 1):
            if r != j:
                slots.append(Slot("g", k, r))
    return slots


@dataclass
class GeneratorSet:
    """Post-processing coefficients of all K decoders, relabeled.

    T[k] is decoder k's common coefficient, G[k][r] the desired
    coefficient of subspace r, T_res[k][i] the residual interferer's
    coefficient at subspace i (1-based dict/list access via getters).
    """

    K: int
    M: int
    _T: dict
    _G: dict
    _T_res: dict

    def T(self, k):
        return self._T[k]

    def G(self, k, r):
        return self._G[k][r - 1]

    def T_res(self, k, i):
        return self._T_res[k][i - 1]

    def for_slot(self, slot):
        if slot.kind == "t_res":
            return self.T_res(slot.k, slot.idx)
        return self.G(slot.k, slot.idx)

    @property
    def ring(self):
        return self._T[1].ring

    @property
    def dim(self):
        return self._T[1].dim


def extract_generators(processed_by_k):
    """Relabel the K processed decoder states into generator coefficients.

    Raises DegenerateChannelError when some common coefficient has a zero
    entry (a measure-zero event for generic channels); callers should
    resample the channel realization.
    """
    ks = sorted(processed_by_k)
    K = len(ks)
    if ks != list(range(1, K + 1)):
        raise ValueError("need processed states for every decoder 1..K")
    M = processed_by_k[1].M
    T, G, T_res = {}, {}, {}
    for k in ks:
        st = processed_by_k[k]
        if not st.Tk.nonzero_everywhere():
            raise DegenerateChannelError(
                f"decoder {k}: common coefficient has zero entries; "
                "resample the channel")
        T[k] = st.Tk
        G[k] = list(st.g)
        T_res[k] = list(st.r)
    return GeneratorSet(K=K, M=M, _T=T, _G=G, _T_res=T_res)


@dataclass(frozen=True)
class ExponentIndex:
    """One basis column's exponent tuple over the K(2M-1) slots."""

    j: int
    level: int  # n or n+1
    exps: tuple


def _level_radix(params, level):
    if level == params.n:
        return params.n  # exponents in {0..n-1}
    if level == params.n + 1:
        return params.n + 1  # exponents in {0..n}
    raise ValueError(f"level must be n={params.n} or n+1, got {level}")


def enumerate_indices(params, j, level, bound=DEFAULT_ENUMERATION_BOUND):
    """All exponent indices of stream j at one level, lexicographically."""
    radix = _level_radix(params, level)
    count = radix ** params.l
    if count > bound:
        raise ResourceBoundError(
            f"enumeration of {count} indices exceeds bound {bound}")
    for exps in itertools.product(range(radix), repeat=params.l):
        yield ExponentIndex(j=j, level=level, exps=exps)


@dataclass
class PrecodingBasis:
    """Columns of one stream's basis at one extension level.

    `columns` has shape (ncols, lambda_n), row c being the column whose
    exponent tuple is `indices[c]`; `position` maps exponent tuples back
    to column positions.  Column order is lexicographic and
    deterministic.
    """

    j: int
    level: int
    slots: list
    indices: list
    columns: np.ndarray
    w: np.ndarray
    omitted_slot: int | None = None

    @property
    def ncols(self):
        return self.columns.shape[0]

    def __post_init__(self):
        self.position = {idx.exps: c for c, idx in enumerate(self.indices)}

    def column(self, exps):
        return self.columns[self.position[tuple(exps)]]


def _per_user_variants(generators, params, slots_k, radix, omit):
    """All exponent assignments of one user's slots, with the common
    coefficient raised to the complementary degree.

    Returns (tuples, ops) where ops[v] realizes exponent tuple tuples[v]
    over this user's slots.  Slots marked omitted are pinned to zero.
    """
    k = slots_k[0].k
    ring = generators.ring
    ranges = [range(1) if s in omit else range(radix) for s in slots_k]
    tuples, ops = [], []
    T_pows = {}
    for assignment in itertools.product(*ranges):
        s_k = sum(assignment)
        h = params.P - s_k
        if h < 0:
            raise AssertionError("negative homogenizer degree; "
                                 "exponent box inconsistent with P")
        if h not in T_pows:
            T_pows[h] = ring.pow(generators.T(k).entries, h)
        acc = T_pows[h]
        for slot, e in zip(slots_k, assignment):
            if e:
                acc = ring.mul(acc, ring.pow(
                    generators.for_slot(slot).entries, e))
        tuples.append(assignment)
        ops.append(acc)
    return tuples, ops


def _stream_tag(generators, params, j):
    """Fixed diagonal factor that keeps the M stream bases column-disjoint.

    For M >= 2 the exponent boxes of different streams overlap wherever
    all cross-stream exponents are zero: those columns contain no
    stream-identifying generator, so distinct streams' bases would share
    identical columns, and each all-zero-exponent desired column would
    bit-for-bit equal an interference column of another stream.  Both
    collapses are structural (they hold for every channel realization),
    capping the decodability condition-matrix rank strictly below
    lambda_n.  Raising each user's own-stream desired coefficient to the
    fixed power n+1 -- one above the largest variable exponent -- gives
    every stream a disjoint exponent pattern.  The tag is the same
    diagonal at both extension levels and sits outside the homogenizer
    accounting, so every containment witness identity survives
    unchanged.  A single stream cannot collide with itself, so no tag is
    applied at M = 1.
    """
    if params.M < 2:
        return None
    ring = generators.ring
    tag = None
    for k in range(1, params.K + 1):
        p = ring.pow(generators.G(k, j).entries, params.n + 1)
        tag = p if tag is None else ring.mul(tag, p)
    return tag


def _rowwise_outer(ring, a, b):
    """All pairwise elementwise row products, a-major order."""
    if ring._mersenne:
        from . import _gf61
        out = np.empty((a.shape[0] * b.shape[0], a.shape[1]),
                       dtype=np.uint64)
        _gf61.mul_outer(np.ascontiguousarray(a), np.ascontiguousarray(b),
                        out)
        return out
    prod = ring.mul(a[:, None, :], b[None, :, :])
    return prod.reshape(a.shape[0] * b.shape[0], a.shape[1])


def build_basis(generators, params, j, level,
                bound=DEFAULT_ENUMERATION_BOUND, omit_slot=None):
    """Materialize the stream-j basis at one level.

    `omit_slot` (an index into the slot list) pins that slot's exponent
    to zero at both levels -- a diagnostic ablation that removes exactly
    the columns witnessing that slot's containment condition.
    """
    radix = _level_radix(params, level)
    count = radix ** params.l
    if count > bound:
        raise ResourceBoundError(
            f"basis of {count} columns exceeds enumeration bound {bound}")
    slots = condition_slots(params.K, params.M, j)
    omit = {slots[omit_slot]} if omit_slot is not None else set()
    ring = generators.ring
    lam = generators.dim
    if lam != params.lambda_n:
        raise ValueError("generator dimension does not match lambda_n")

    # per-user variant tables, then a Kronecker-style expansion in the
    # fixed k-major slot order (k = 1 most significant)
    per_k = 2 * params.M - 1
    cols = None
    tuple_lists = None
    for k in range(params.K):
        slots_k = slots[k * per_k:(k + 1) * per_k]
        tuples_k, ops_k = _per_user_variants(
            generators, params, slots_k, radix, omit)
        block = np.stack(ops_k)
        if cols is None:
            cols = block
            tuple_lists = [t for t in tuples_k]
        else:
            cols = _rowwise_outer(ring, cols, block)
            tuple_lists = [t0 + t1 for t0 in tuple_lists for t1 in tuples_k]

    tag = _stream_tag(generators, params, j)
    if tag is not None:
        cols = ring.mul(cols, tag[None, :])

    indices = [ExponentIndex(j=j, level=level, exps=t) for t in tuple_lists]
    w = ring.ones(lam)
    return PrecodingBasis(j=j, level=level, slots=slots, indices=indices,
                          columns=cols, w=w, omitted_slot=omit_slot)


def build_all_bases(generators, params, bound=DEFAULT_ENUMERATION_BOUND,
                    omit_slot=None):
    """Both-level bases for every stream: {j: {level: PrecodingBasis}}."""
    bases = {}
    for j in range(1, params.M + 1):
        bases[j] = {
            params.n: build_basis(generators, params, j, params.n,
                                  bound=bound, omit_slot=omit_slot),
            params.n + 1: build_basis(generators, params, j, params.n + 1,
                                      bound=bound, omit_slot=omit_slot),
        }
    return bases


@dataclass
class ConditionResult:
    j: int
    slot: Slot
    slot_index: int
    passed: bool
    failure_mode: str | None = None
    counterexample: tuple | None = None


@dataclass
class AlignmentReport:
    K: int
    M: int
    n: int
    conditions: list

    @property
    def all_pass(self):
        return all(c.passed for c in self.conditions)

    def failing(self):
        return [c for c in self.conditions if not c.passed]


def check_alignment(bases, generators, params, rel_tol=FLOAT_ALIGN_RTOL):
    """Check every containment condition as a column identity.

    For each stream j and each of its K(2M-1) slots: every level-n
    column, multiplied by the slot's generator, must equal the common
    coefficient times the level-(n+1) column at the slot-incremented
    exponent tuple.  Exact over the prime field, relative over floats.
    Failures are report content, never exceptions.
    """
    ring = generators.ring
    results = []
    for j in sorted(bases):
        basis_n = bases[j][params.n]
        basis_n1 = bases[j][params.n + 1]
        slots = basis_n.slots
        for s_idx, slot in enumerate(slots):
            gen = generators.for_slot(slot).entries
            Tk = generators.T(slot.k).entries
            passed = True
            mode = None
            counterexample = None
            # gather witness columns via the slot-increment map
            targets = []
            for idx in basis_n.indices:
                shifted = list(idx.exps)
                shifted[s_idx] += 1
                shifted = tuple(shifted)
                pos = basis_n1.position.get(shifted)
                if pos is None:
                    passed = False
                    mode = "missing-witness-column"
                    counterexample = idx.exps
                    break
                targets.append(pos)
            if passed and basis_n.ncols:
                lhs = ring.mul(gen, basis_n.columns)
                rhs = ring.mul(Tk, basis_n1.columns[np.array(targets)])
                if ring.is_exact:
                    bad = np.nonzero(np.any(lhs != rhs, axis=1))[0]
                else:
                    scale = max(float(np.max(np.abs(lhs))),
                                float(np.max(np.abs(rhs))), 1e-300)
                    bad = np.nonzero(
                        np.max(np.abs(lhs - rhs), axis=1) > rel_tol * scale
                    )[0]
                if bad.size:
                    passed = False
                    mode = "column-identity-violated"
                    counterexample = basis_n.indices[int(bad[0])].exps
            results.append(ConditionResult(
                j=j, slot=slot, slot_index=s_idx, passed=passed,
                failure_mode=mode, counterexample=counterexample))
    return AlignmentReport(K=params.K, M=params.M, n=params.n,
                           conditions=results)
