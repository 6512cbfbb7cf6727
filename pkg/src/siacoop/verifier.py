"""Decodability rank checks and degrees-of-freedom accounting.

Per decoder k there are M conditions: the lambda x lambda matrix whose
columns are the desired block G[k][j].F_n^j next to the M interference
blocks T[k].F_{n+1}^m must be full rank.  The M conditions of one
decoder share all their interference columns, so the default path
eliminates that shared block once and tests each desired block against
its span -- an exact equivalence, not an approximation.  Primary
verdicts come from the prime-field policy; float ranks are advisory.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .channel import build_params
from .errors import ResourceBoundError
from .rings import DenseMatrix, echelon_with_prefix, rank

__all__ = [
    "RankReport",
    "SubspaceRankResult",
    "DofReport",
    "assemble_condition",
    "check_rank_conditions",
    "assemble_full_matrix",
    "dof_table",
]

DEFAULT_MEMORY_BUDGET = 2 * 1024 ** 3  # bytes
# above this lambda the shared-block elimination path kicks in
_SHARED_ELIMINATION_MIN_DIM = 512


def _check_budget(rows, cols, itemsize, budget):
    need = rows * cols * itemsize
    if need > budget:
        raise ResourceBoundError(
            f"matrix of {rows}x{cols} needs {need} bytes, "
            f"budget is {budget}")


def _interference_block(k, bases, generators, params):
    """Columns [T[k].F_{n+1}^1 | ... | T[k].F_{n+1}^M], shape (lam, M*mu_n1)."""
    ring = generators.ring
    Tk = generators.T(k).entries
    blocks = [ring.mul(Tk, bases[m][params.n + 1].columns).T
              for m in range(1, params.M + 1)]
    return np.hstack(blocks)


def _desired_block(k, j, bases, generators, params):
    """Columns G[k][j].F_n^j, shape (lam, mu_n)."""
    ring = generators.ring
    return ring.mul(generators.G(k, j).entries, bases[j][params.n].columns).T


def assemble_condition(k, j, bases, generators, params,
                       memory_budget=DEFAULT_MEMORY_BUDGET):
    """The lambda x lambda decodability matrix of decoder k, subspace j."""
    lam = params.lambda_n
    ring = generators.ring
    _check_budget(lam, lam, np.dtype(ring.dtype).itemsize, memory_budget)
    m = np.hstack([_desired_block(k, j, bases, generators, params),
                   _interference_block(k, bases, generators, params)])
    if m.shape != (lam, lam):
        raise AssertionError("condition matrix is not lambda x lambda")
    return DenseMatrix(ring, m, copy=False)


@dataclass
class SubspaceRankResult:
    j: int
    rows: int
    cols: int
    rank: int
    required: int
    policy: str
    elapsed: float

    @property
    def passed(self):
        return self.rank == self.required


@dataclass
class RankReport:
    k: int
    results: list

    @property
    def passed(self):
        return all(r.passed for r in self.results)


def check_rank_conditions(k, bases, generators, params, policy="exact",
                          tol=1e-10, memory_budget=DEFAULT_MEMORY_BUDGET,
                          shared=None):
    """Rank-check all M decodability conditions of decoder k.

    With `shared` (default: automatic above dimension 512) the common
    interference block is eliminated once and each desired block is
    reduced against its pivots; rank(condition_j) is then the shared
    rank plus the rank of the residual desired columns.
    """
    lam = params.lambda_n
    M = params.M
    ring = generators.ring
    if shared is None:
        shared = lam >= _SHARED_ELIMINATION_MIN_DIM
    results = []
    if not shared:
        for j in range(1, M + 1):
            t0 = time.perf_counter()
            cond = assemble_condition(k, j, bases, generators, params,
                                      memory_budget)
            r = rank(cond, policy=policy, tol=tol)
            results.append(SubspaceRankResult(
                j=j, rows=lam, cols=lam, rank=r, required=lam,
                policy=policy, elapsed=time.perf_counter() - t0))
        return RankReport(k=k, results=results)

    t0 = time.perf_counter()
    inter = _interference_block(k, bases, generators, params)
    desired = [_desired_block(k, j, bases, generators, params)
               for j in range(1, M + 1)]
    width = inter.shape[1] + sum(d.shape[1] for d in desired)
    _check_budget(lam, width, np.dtype(ring.dtype).itemsize, memory_budget)
    shared_cols = inter.shape[1]
    aug = np.hstack([inter] + desired)
    del inter  # hstack copied it; free half a GiB on the large instance
    rank_shared, reduced = echelon_with_prefix(
        aug, ring, pivot_cols=shared_cols, policy=policy, tol=tol)
    shared_elapsed = time.perf_counter() - t0
    offset = shared_cols
    for j in range(1, M + 1):
        t0 = time.perf_counter()
        w = desired[j - 1].shape[1]
        residual = reduced[rank_shared:, offset:offset + w].copy()
        offset += w
        r_extra, _ = echelon_with_prefix(residual, ring, policy=policy,
                                         tol=tol)
        results.append(SubspaceRankResult(
            j=j, rows=lam, cols=lam, rank=rank_shared + r_extra,
            required=lam, policy=policy,
            elapsed=shared_elapsed / M + (time.perf_counter() - t0)))
    return RankReport(k=k, results=results)


def assemble_full_matrix(k, bases, generators, params,
                         memory_budget=DEFAULT_MEMORY_BUDGET):
    """The stacked M*lambda x M*lambda decodability matrix: desired
    blocks on one block diagonal, the per-subspace interference groups
    on another."""
    lam, M = params.lambda_n, params.M
    ring = generators.ring
    size = M * lam
    _check_budget(size, size, np.dtype(ring.dtype).itemsize, memory_budget)
    out = ring.zeros((size, size))
    mu_n = params.mu_n
    inter = _interference_block(k, bases, generators, params)
    for i in range(M):
        d = _desired_block(k, i + 1, bases, generators, params)
        out[i * lam:(i + 1) * lam, i * mu_n:(i + 1) * mu_n] = d
        c0 = M * mu_n + i * inter.shape[1]
        out[i * lam:(i + 1) * lam, c0:c0 + inter.shape[1]] = inter
    return DenseMatrix(ring, out, copy=False)


@dataclass
class DofRow:
    n: int
    mu_n: int
    mu_n1: int
    lambda_n: int
    dof_total: Fraction
    dof_limit: Fraction


@dataclass
class DofReport:
    K: int
    M: int
    rows: list

    @property
    def limit(self):
        return Fraction(self.K * self.M, self.M + 1)


def dof_table(K, M, n_range):
    """Exact rational DoF accounting for a range of extension indices.

    The total K*M*mu_n/lambda_n is strictly increasing in n and stays
    strictly below the limit KM/(M+1) for every finite n.
    """
    rows = []
    for n in n_range:
        p = build_params(K, M, n)
        rows.append(DofRow(n=n, mu_n=p.mu_n, mu_n1=p.mu_n1,
                           lambda_n=p.lambda_n, dof_total=p.dof_total,
                           dof_limit=p.dof_limit))
    return DofReport(K=K, M=M, rows=rows)
