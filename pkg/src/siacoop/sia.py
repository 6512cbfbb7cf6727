"""Stacked decoding and the successive alignment elimination.

The decoder of message k stacks the M cooperating received signals into
M lambda-dimensional subspaces.  M of the M+1 interferers are then
isolated, one per subspace, by M-1 rounds of chained row combinations;
after the final round every subspace carries its isolated interferer
with one common coefficient Tk, which is what makes the transmit-side
alignment possible.

Row combinations use the convention

    subspace_j  <-  C[s][s] . subspace_j  -  C[j][s] . subspace_s

where s runs over the chain of source subspaces.  All M target updates
of one round read a snapshot of the pre-round coefficients; row signs
are normalized at the end so the diagonal blocks match exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import cooperation_set, wrap_user
from .errors import SiaInvariantError
from .rings import DiagonalOperator, diag_linear

__all__ = [
    "DecoderState",
    "ProcessedState",
    "SiaOracle",
    "stack_decoder",
    "sia_step",
    "sia_run",
    "sia_oracle",
    "cramer_check",
]

FLOAT_ZERO_RTOL = 1e-9
FLOAT_CRAMER_RTOL = 1e-8

_ORACLE_MAX_M = 6


def _wrap_sub(j, M):
    """Cyclic subspace index in {1..M}."""
    return (j - 1) % M + 1


@dataclass
class DecoderState:
    """Relabeled coefficient blocks of one decoder's stacked signal.

    C[m][i] is the coefficient of isolated-interferer slot i in subspace
    m (0-based lists, slots ordered per `interferer_order`), g[m] the
    desired-signal coefficient and r[m] the residual interferer's.
    `extra` optionally carries further per-subspace operators (e.g. the
    receiver combining weights tracked by the link simulation) through
    the same row operations.
    """

    k: int
    C: list
    g: list
    r: list
    interferer_order: tuple  # M isolated transmitter indices + residual
    extra: list | None = None

    @property
    def M(self):
        return len(self.C)

    @property
    def ring(self):
        return self.g[0].ring

    @property
    def dim(self):
        return self.g[0].dim


@dataclass
class ProcessedState(DecoderState):
    Tk: DiagonalOperator = None
    step_count: int = 0
    sign_normalization: tuple = ()


def stack_decoder(channels, k):
    """Relabel channel operators into the decoder-k coefficient blocks.

    Subspace m is receiver (k+m-1 mod K); the isolated interferer slots
    are transmitters [k-1, k+1, ..., k+M-1] (mod K) and the residual is
    transmitter k+M (mod K).
    """
    params = channels.params
    K, M = params.K, params.M
    if not 1 <= k <= K:
        raise ValueError(f"decoder index {k} out of range 1..{K}")
    receivers = cooperation_set(k, K, M).members
    isolated = [wrap_user(k - 1, K)] + [wrap_user(k + d, K)
                                        for d in range(1, M)]
    residual = wrap_user(k + M, K)
    C = [[channels.h(rx, tx) for tx in isolated] for rx in receivers]
    g = [channels.h(rx, k) for rx in receivers]
    r = [channels.h(rx, residual) for rx in receivers]
    return DecoderState(k=k, C=C, g=g, r=r,
                        interferer_order=tuple(isolated) + (residual,))


def _combine_row(target, source, a, b):
    """componentwise a . target - b . source over parallel row structures."""
    return [diag_linear(a, t, b, s) for t, s in zip(target, source)]


def sia_step(state, D):
    """One elimination round: remove interferer slot (j - D mod M) from
    every subspace j via the chained combination through sources
    j-D, ..., j-1 (cyclic).  All targets read pre-round coefficients.
    """
    M = state.M
    if not 1 <= D <= M - 1:
        raise ValueError(f"step index D={D} out of range 1..{M - 1}")
    has_extra = state.extra is not None
    newC, newg, newr = [], [], []
    newextra = [] if has_extra else None
    for j in range(1, M + 1):
        row = list(state.C[j - 1]) + [state.g[j - 1], state.r[j - 1]]
        if has_extra:
            row += list(state.extra[j - 1])
        for off in range(D, 0, -1):
            s = _wrap_sub(j - off, M)
            src = list(state.C[s - 1]) + [state.g[s - 1], state.r[s - 1]]
            if has_extra:
                src += list(state.extra[s - 1])
            a = state.C[s - 1][s - 1]
            b = row[s - 1]
            row = _combine_row(row, src, a, b)
        newC.append(row[:M])
        newg.append(row[M])
        newr.append(row[M + 1])
        if has_extra:
            newextra.append(row[M + 2:])
    return DecoderState(k=state.k, C=newC, g=newg, r=newr,
                        interferer_order=state.interferer_order,
                        extra=newextra)


def _neg(op):
    return DiagonalOperator(op.ring, op.ring.neg(op.entries), copy=False)


def _max_magnitude(state):
    m = 0.0
    for row in state.C:
        for op in row:
            m = max(m, float(np.max(np.abs(op.entries))))
    for op in list(state.g) + list(state.r):
        m = max(m, float(np.max(np.abs(op.entries))))
    return m


def _row_sign(diag, ref, ring, maxmag):
    """Decide the +-1 normalization of a processed row, or fail."""
    if ring.is_exact:
        if np.array_equal(diag.entries, ref.entries):
            return 1
        if np.array_equal(diag.entries, ring.neg(ref.entries)):
            return -1
        raise SiaInvariantError(
            "processed diagonal block is not +-(common coefficient)")
    d_plus = float(np.max(np.abs(diag.entries - ref.entries)))
    d_minus = float(np.max(np.abs(diag.entries + ref.entries)))
    sign = 1 if d_plus <= d_minus else -1
    if min(d_plus, d_minus) > FLOAT_ZERO_RTOL * maxmag:
        raise SiaInvariantError(
            "processed diagonal blocks disagree beyond float tolerance")
    return sign


def sia_run(state):
    """Run all M-1 elimination rounds and normalize row signs.

    Verifies the post-processing structure (off-diagonal blocks zero,
    diagonal blocks equal to the common coefficient) and raises
    SiaInvariantError if the adopted conventions are violated.
    """
    M = state.M
    st = state
    for D in range(1, M):
        st = sia_step(st, D)
    ring = st.ring
    maxmag = _max_magnitude(st) if not ring.is_exact else 0.0

    signs = [1]
    ref = st.C[0][0]
    for m in range(2, M + 1):
        signs.append(_row_sign(st.C[m - 1][m - 1], ref, ring, maxmag))

    def scale_row(items, sign):
        return items if sign == 1 else [_neg(op) for op in items]

    C = [scale_row(st.C[m], signs[m]) for m in range(M)]
    g = [st.g[m] if signs[m] == 1 else _neg(st.g[m]) for m in range(M)]
    r = [st.r[m] if signs[m] == 1 else _neg(st.r[m]) for m in range(M)]
    extra = None
    if st.extra is not None:
        extra = [scale_row(st.extra[m], signs[m]) for m in range(M)]

    # structural checks
    for m in range(M):
        for i in range(M):
            if i == m:
                continue
            entries = C[m][i].entries
            if ring.is_exact:
                if np.any(entries != 0):
                    raise SiaInvariantError(
                        f"off-diagonal block ({m + 1},{i + 1}) is nonzero")
            elif float(np.max(np.abs(entries))) > FLOAT_ZERO_RTOL * maxmag:
                raise SiaInvariantError(
                    f"off-diagonal block ({m + 1},{i + 1}) exceeds tolerance")
    Tk = C[0][0]
    if ring.is_exact:
        for m in range(1, M):
            if not np.array_equal(C[m][m].entries, Tk.entries):
                raise SiaInvariantError("diagonal blocks differ after "
                                        "sign normalization")

    return ProcessedState(k=st.k, C=C, g=g, r=r,
                          interferer_order=st.interferer_order,
                          extra=extra, Tk=Tk, step_count=M - 1,
                          sign_normalization=tuple(signs))


@dataclass
class SiaOracle:
    """Cramer-rule reference quantities from brute-force cofactor dets."""

    Tk_ref: DiagonalOperator
    g_ref: list
    r_ref: list


def _det_entries(ring, mat):
    """Cofactor-expansion determinant of a matrix of entry arrays over
    the commutative ring of diagonal operators."""
    M = len(mat)
    if M == 1:
        return mat[0][0]
    acc = None
    for c in range(M):
        minor = [row[:c] + row[c + 1:] for row in mat[1:]]
        term = ring.mul(mat[0][c], _det_entries(ring, minor))
        if acc is None:
            acc = term if c % 2 == 0 else ring.neg(term)
        elif c % 2 == 0:
            acc = ring.add(acc, term)
        else:
            acc = ring.sub(acc, term)
    return acc


def sia_oracle(state):
    """Independent Cramer/determinant reference for a fresh decoder state.

    Computes det(C) and the determinants with column i replaced by the
    desired (g) and residual (r) coefficient columns, by cofactor
    expansion over the diagonal-operator ring.  M <= 6 keeps the
    factorial cost in check.
    """
    M = state.M
    if M > _ORACLE_MAX_M:
        raise ValueError(f"cofactor oracle limited to M <= {_ORACLE_MAX_M}")
    ring = state.ring
    mat = [[op.entries for op in row] for row in state.C]
    det = _det_entries(ring, mat)
    g_col = [op.entries for op in state.g]
    r_col = [op.entries for op in state.r]
    g_ref, r_ref = [], []
    for i in range(M):
        mg = [row[:i] + [g_col[m]] + row[i + 1:]
              for m, row in enumerate(mat)]
        mr = [row[:i] + [r_col[m]] + row[i + 1:]
              for m, row in enumerate(mat)]
        g_ref.append(DiagonalOperator(ring, _det_entries(ring, mg),
                                      copy=False))
        r_ref.append(DiagonalOperator(ring, _det_entries(ring, mr),
                                      copy=False))
    return SiaOracle(Tk_ref=DiagonalOperator(ring, det, copy=False),
                     g_ref=g_ref, r_ref=r_ref)


def cramer_check(initial, processed, rel_tol=FLOAT_CRAMER_RTOL):
    """Cross-multiplied ratio consistency between the elimination output
    and the determinant oracle, at diagonal positions where det(C) is
    nonzero.  Exact over the prime field; relative over floats.

    The elimination may carry an extraneous common factor relative to
    the raw determinant, which the cross-multiplication cancels.
    """
    ring = initial.ring
    oracle = sia_oracle(initial)
    mask = oracle.Tk_ref.entries != 0
    if not np.any(mask):
        return True
    Tk = processed.Tk.entries
    Tk_ref = oracle.Tk_ref.entries
    for proc, ref in zip(list(processed.g) + list(processed.r),
                         list(oracle.g_ref) + list(oracle.r_ref)):
        lhs = ring.mul(proc.entries, Tk_ref)
        rhs = ring.mul(ref.entries, Tk)
        if ring.is_exact:
            if not np.array_equal(lhs[mask], rhs[mask]):
                return False
        else:
            scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), 1e-300)
            if float(np.max(np.abs(lhs - rhs)[mask] / scale[mask])) > rel_tol:
                return False
    return True
