"""Numba kernels for arithmetic modulo the Mersenne prime 2^61 - 1.

All kernels operate on flat (or 2-D, for elimination) uint64 arrays whose
entries are canonical, i.e. in [0, p).  The 122-bit product is formed by
one widening 64x64 -> 128 multiply (a single machine instruction via the
LLVM intrinsic below); reduction uses 2^64 = 8 (mod p).
"""

import numpy as np
from llvmlite import ir
from numba import njit, uint64
from numba.core import types
from numba.extending import intrinsic

MERSENNE61 = (1 << 61) - 1

_P = uint64(MERSENNE61)


@intrinsic
def _umul128(typingctx, a, b):
    """(low, high) 64-bit halves of the full 128-bit product a*b."""
    sig = types.UniTuple(types.uint64, 2)(types.uint64, types.uint64)

    def codegen(context, builder, signature, args):
        i128 = ir.IntType(128)
        i64 = ir.IntType(64)
        prod = builder.mul(builder.zext(args[0], i128),
                           builder.zext(args[1], i128))
        lo = builder.trunc(prod, i64)
        hi = builder.trunc(builder.lshr(prod, ir.Constant(i128, 64)), i64)
        return context.make_tuple(builder, signature.return_type, [lo, hi])

    return sig, codegen


@njit(uint64(uint64, uint64), cache=True, inline="always")
def mul_scalar(a, b):
    # a*b = hi*2^64 + lo with hi < 2^58; hi<<3 and lo>>61 share no bits
    lo, hi = _umul128(a, b)
    acc = (lo & _P) + ((hi << uint64(3)) | (lo >> uint64(61)))
    acc = (acc & _P) + (acc >> uint64(61))
    if acc >= _P:
        acc -= _P
    return acc


@njit(uint64(uint64, uint64), cache=True, inline="always")
def _mul_loose(a, b):
    """Product reduced only to [0, p]; callers must fold the one
    possible wrap themselves (p folds to 0)."""
    lo, hi = _umul128(a, b)
    acc = (lo & _P) + ((hi << uint64(3)) | (lo >> uint64(61)))
    return (acc & _P) + (acc >> uint64(61))


@njit(uint64(uint64, uint64), cache=True)
def pow_scalar(base, e):
    acc = uint64(1)
    b = base
    while e > uint64(0):
        if e & uint64(1):
            acc = mul_scalar(acc, b)
        b = mul_scalar(b, b)
        e >>= uint64(1)
    return acc


@njit(uint64(uint64), cache=True, inline="always")
def inv_scalar(a):
    return pow_scalar(a, _P - uint64(2))


@njit(cache=True)
def mul_arrays(a, b, out):
    for i in range(a.size):
        out[i] = mul_scalar(a[i], b[i])


@njit(cache=True)
def linear_arrays(alpha, x, beta, y, out):
    """out = alpha*x - beta*y (mod p), elementwise."""
    for i in range(x.size):
        v = mul_scalar(alpha[i], x[i]) + _P - mul_scalar(beta[i], y[i])
        if v >= _P:
            v -= _P
        out[i] = v


@njit(cache=True)
def sub_arrays(a, b, out):
    for i in range(a.size):
        v = a[i] + _P - b[i]
        if v >= _P:
            v -= _P
        out[i] = v


@njit(cache=True)
def add_arrays(a, b, out):
    for i in range(a.size):
        v = a[i] + b[i]
        if v >= _P:
            v -= _P
        out[i] = v


@njit(cache=True)
def neg_array(a, out):
    for i in range(a.size):
        if a[i] == uint64(0):
            out[i] = uint64(0)
        else:
            out[i] = _P - a[i]


@njit(cache=True)
def pow_arrays(a, e, out):
    for i in range(a.size):
        out[i] = pow_scalar(a[i], e)


@njit(cache=True)
def inv_arrays(a, out):
    for i in range(a.size):
        out[i] = pow_scalar(a[i], _P - uint64(2))


@njit(cache=True)
def mul_outer(a, b, out):
    """out[i*q + j, :] = a[i, :] * b[j, :] (mod p) for all row pairs."""
    p_rows = a.shape[0]
    q_rows = b.shape[0]
    cols = a.shape[1]
    for i in range(p_rows):
        for j in range(q_rows):
            row = out[i * q_rows + j]
            for t in range(cols):
                row[t] = mul_scalar(a[i, t], b[j, t])


@njit(uint64(uint64, uint64), cache=True, inline="always")
def _sub_loose(x, prod):
    """x - prod (mod p) for canonical x and a loose product in [0, p]."""
    v = x + (_P + _P) - prod
    v = (v & _P) + (v >> uint64(61))
    v = (v & _P) + (v >> uint64(61))
    return v - (_P if v == _P else uint64(0))


@njit(cache=True)
def echelon_forward_reference(m, pivot_cols):
    """Plain one-pivot-at-a-time forward reduction (reference kernel).

    Same contract and bit-identical output as `echelon_forward`; kept
    as the oracle for the blocked kernel and for small inputs.
    """
    rows, cols = m.shape
    rank = 0
    for c in range(pivot_cols):
        piv = -1
        for r in range(rank, rows):
            if m[r, c] != uint64(0):
                piv = r
                break
        if piv < 0:
            continue
        if piv != rank:
            for t in range(c, cols):
                tmp = m[rank, t]
                m[rank, t] = m[piv, t]
                m[piv, t] = tmp
        inv = inv_scalar(m[rank, c])
        prow = m[rank]
        for t in range(c, cols):
            prow[t] = mul_scalar(prow[t], inv)
        for r in range(rank + 1, rows):
            mrow = m[r]
            f = mrow[c]
            if f == uint64(0):
                continue
            for t in range(c, cols):
                mrow[t] = _sub_loose(mrow[t], _mul_loose(f, prow[t]))
        rank += 1
        if rank == rows:
            break
    return rank


_PANEL = 64
_TILE = 512
_LIMB_MASK = np.uint64((1 << 21) - 1)


@njit(cache=True)
def _panel_factor(m, c0, c1, rank, piv_cols, invs):
    """Factor one panel of pivot columns in place.

    Eliminated entries of the rows below keep their multiplier in place
    for the blocked trailing update; the pivot rows' own trailing
    columns are brought up to date before returning.  Returns the new
    rank and the number of pivots found in the panel.
    """
    rows, cols = m.shape
    rank0 = rank
    npiv = 0
    for c in range(c0, c1):
        piv = -1
        for r in range(rank, rows):
            if m[r, c] != uint64(0):
                piv = r
                break
        if piv < 0:
            continue
        if piv != rank:
            for t in range(cols):
                tmp = m[rank, t]
                m[rank, t] = m[piv, t]
                m[piv, t] = tmp
        inv = inv_scalar(m[rank, c])
        prow = m[rank]
        for t in range(c, c1):
            prow[t] = mul_scalar(prow[t], inv)
        for r in range(rank + 1, rows):
            mrow = m[r]
            f = mrow[c]
            if f == uint64(0):
                continue
            for t in range(c + 1, c1):
                mrow[t] = _sub_loose(mrow[t], _mul_loose(f, prow[t]))
        piv_cols[npiv] = c
        invs[npiv] = inv
        npiv += 1
        rank += 1
        if rank == rows:
            break

    # carry the panel's row operations into the pivot rows' own
    # trailing columns (each against the already-finished rows above)
    for j in range(npiv):
        rowj = m[rank0 + j]
        for i in range(j):
            f = rowj[piv_cols[i]]
            if f == uint64(0):
                continue
            prow = m[rank0 + i]
            for t in range(c1, cols):
                rowj[t] = _sub_loose(rowj[t], _mul_loose(f, prow[t]))
        inv = invs[j]
        for t in range(c1, cols):
            rowj[t] = mul_scalar(rowj[t], inv)
        for i in range(j):
            rowj[piv_cols[i]] = uint64(0)
    return rank, npiv


@njit(cache=True)
def _gather_multipliers(m, rank, piv_cols, fs):
    """Move the stored panel multipliers of rows >= rank into fs."""
    rows = m.shape[0]
    npiv = piv_cols.shape[0]
    for r in range(rank, rows):
        mrow = m[r]
        frow = fs[r - rank]
        for i in range(npiv):
            frow[i] = mrow[piv_cols[i]]
            mrow[piv_cols[i]] = uint64(0)


@njit(cache=True, inline="always")
def _weighted(x, s):
    """x * 2^s mod p for x < 2^61 and 0 <= s < 61, result < 2^61 + 2^s."""
    return ((x & ((uint64(1) << uint64(61 - s)) - uint64(1))) << uint64(s)) \
        + (x >> uint64(61 - s))


@njit(cache=True)
def _combine_sub(blk, d0, d1, d2, d3, d4):
    """blk -= d0 + d1*2^21 + d2*2^42 + d3*2^63 + d4*2^84 (mod p).

    The d arrays hold exact integer convolution sums of 21-bit limb
    products (< 2^50, exactly representable in binary64).  2^61 = 1
    (mod p), so the block weights reduce to shifts by 0, 21, 42, 2, 23;
    each partial sum is folded to stay below 2^63 before the next is
    added, and the final two folds land in [0, p], the loose range
    accepted by _sub_loose.
    """
    rem, tt = d0.shape
    for r in range(rem):
        brow = blk[r]
        for t in range(tt):
            acc = uint64(d0[r, t]) + _weighted(uint64(d1[r, t]), 21)
            acc = (acc & _P) + (acc >> uint64(61))
            acc += _weighted(uint64(d2[r, t]), 42)
            acc = (acc & _P) + (acc >> uint64(61))
            acc += _weighted(uint64(d3[r, t]), 2)
            acc = (acc & _P) + (acc >> uint64(61))
            acc += _weighted(uint64(d4[r, t]), 23)
            acc = (acc & _P) + (acc >> uint64(61))
            acc = (acc & _P) + (acc >> uint64(61))
            brow[t] = _sub_loose(brow[t], acc)


def _limbs(a):
    """Split canonical/loose (< 2^61) entries into three 21-bit limbs,
    exactly representable as binary64 for error-free BLAS products."""
    return ((a & _LIMB_MASK).astype(np.float64),
            ((a >> np.uint64(21)) & _LIMB_MASK).astype(np.float64),
            (a >> np.uint64(42)).astype(np.float64))


def echelon_forward(m, pivot_cols):
    """In-place forward row reduction of a 2-D uint64 matrix mod p.

    Pivots are only searched within the first `pivot_cols` columns; any
    trailing columns are carried through the row operations but never
    pivoted on, which leaves their residual (rows >= rank) available for
    span-membership tests.  Returns the rank of the pivoted column block.

    Row operations are reorganized into panels of `_PANEL` pivot
    columns.  The rank-npiv trailing update -- all of the cubic work --
    is performed as error-free float64 matrix products: multipliers and
    pivot rows are split into three 21-bit limbs, the nine limb-pair
    products (each an exact integer below 2^50 after accumulating over
    the panel) are formed with BLAS, and a fused kernel recombines the
    limb weights mod p and subtracts in place.  The arithmetic is exact,
    so the reduced matrix is bit-identical to the one-pivot-at-a-time
    reference.
    """
    rows, cols = m.shape
    rank = 0
    c0 = 0
    piv_cols = np.empty(_PANEL, np.int64)
    invs = np.empty(_PANEL, np.uint64)
    while c0 < pivot_cols and rank < rows:
        c1 = min(c0 + _PANEL, pivot_cols)
        rank0 = rank
        rank, npiv = _panel_factor(m, c0, c1, rank, piv_cols, invs)
        if npiv == 0:
            c0 = c1
            continue
        rem = rows - rank
        if rem > 0:
            fs = np.empty((rem, npiv), np.uint64)
            _gather_multipliers(m, rank, piv_cols[:npiv], fs)
            if cols - c1 > 0:
                f0, f1, f2 = _limbs(fs)
                for t0 in range(c1, cols, _TILE):
                    t1 = min(t0 + _TILE, cols)
                    u0, u1, u2 = _limbs(
                        np.ascontiguousarray(m[rank0:rank0 + npiv, t0:t1]))
                    d0 = f0 @ u0
                    d1 = f0 @ u1 + f1 @ u0
                    d2 = f0 @ u2 + f1 @ u1 + f2 @ u0
                    d3 = f1 @ u2 + f2 @ u1
                    d4 = f2 @ u2
                    _combine_sub(m[rank:, t0:t1], d0, d1, d2, d3, d4)
        c0 = c1
    return rank
