"""Scheme parameters, cooperation sets and random symbol-extended channels.

The scheme works over a symbol extension of length lambda_n = mu_n +
M*mu_{n+1} with mu_n = n^l and l = K(2M-1); it is defined for K = M + 2.
All user and receiver indices are 1-based and wrap cyclically modulo K.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import ResourceBoundError
from .rings import DiagonalOperator

import numpy as np

__all__ = [
    "SchemeParams",
    "CooperationSet",
    "ChannelSet",
    "build_params",
    "cooperation_set",
    "sample_channels",
    "wrap_user",
]

DEFAULT_MATERIALIZATION_BOUND = 2 ** 14


def wrap_user(i, K):
    """Map any integer onto the cyclic user index set {1..K}."""
    return (i - 1) % K + 1


@dataclass(frozen=True)
class SchemeParams:
    """All derived extension quantities for one (K, M, n) configuration.

    Every field is an exact (unbounded) integer; lambda_n grows as fast
    as (n+1)^(K(2M-1)) so configurations quickly become parameter-
    arithmetic-only.  `materializable` says whether operators of
    dimension lambda_n may actually be allocated.
    """

    K: int
    M: int
    n: int
    l: int
    mu_n: int
    mu_n1: int
    lambda_n: int
    P: int
    materialization_bound: int = DEFAULT_MATERIALIZATION_BOUND

    @property
    def materializable(self):
        return self.lambda_n <= self.materialization_bound

    @property
    def dof_total(self):
        """Total achieved DoF K*M*mu_n/lambda_n as an exact rational."""
        return Fraction(self.K * self.M * self.mu_n, self.lambda_n)

    @property
    def dof_limit(self):
        return Fraction(self.K * self.M, self.M + 1)

    @property
    def streams_per_user(self):
        return self.M * self.mu_n


def build_params(K, M, n, materialization_bound=DEFAULT_MATERIALIZATION_BOUND):
    """Compute the extension arithmetic for one configuration.

    Raises ValueError unless K = M + 2, M >= 1 and n >= 1; the scheme is
    undefined otherwise.
    """
    K, M, n = int(K), int(M), int(n)
    if M < 1:
        raise ValueError("cooperation order M must be >= 1")
    if n < 1:
        raise ValueError("extension index n must be >= 1")
    if K != M + 2:
        raise ValueError(f"scheme requires K = M + 2, got K={K}, M={M}")
    l = K * (2 * M - 1)
    mu_n = n ** l
    mu_n1 = (n + 1) ** l
    lambda_n = mu_n + M * mu_n1
    P = (2 * M - 1) * n
    return SchemeParams(K=K, M=M, n=n, l=l, mu_n=mu_n, mu_n1=mu_n1,
                        lambda_n=lambda_n, P=P,
                        materialization_bound=materialization_bound)


@dataclass(frozen=True)
class CooperationSet:
    """The ordered receivers (i, i+1, ..., i+M-1 mod K) decoding message i."""

    owner: int
    members: tuple

    def __len__(self):
        return len(self.members)


def cooperation_set(i, K, M):
    if not 1 <= i <= K:
        raise ValueError(f"receiver index {i} out of range 1..{K}")
    members = tuple(wrap_user(i + m, K) for m in range(M))
    return CooperationSet(owner=i, members=members)


class ChannelSet:
    """All K*K diagonal channel operators of one realization.

    H[j][i] (1-based via the `h` accessor) is the symbol-extended channel
    from transmitter i to receiver j.  Immutable after sampling and
    bit-reproducible from (params, ring, seed).
    """

    def __init__(self, params, ring, seed, operators):
        self.params = params
        self.ring = ring
        self.seed = seed
        self._H = operators  # K x K nested list, 0-based
        self.dim = operators[0][0].dim

    def h(self, j, i):
        """Channel operator from transmitter i to receiver j (1-based)."""
        return self._H[j - 1][i - 1]

    @property
    def K(self):
        return self.params.K


def sample_channels(params, ring, seed, dim=None):
    """Draw one fully-connected channel realization.

    Entries are i.i.d. from the ring's generic nonzero distribution and
    the draw order is fixed (j-major), so regeneration from
    (params, ring, seed) is bit-identical.  `dim` overrides the
    extension length for structure-only studies of the elimination at
    artificial sizes; everything downstream of the precoding needs the
    true lambda_n.
    """
    lam = params.lambda_n if dim is None else int(dim)
    if lam > params.materialization_bound:
        raise ResourceBoundError(
            f"extension length {lam} exceeds the materialization "
            f"bound {params.materialization_bound}")
    rng = np.random.default_rng(seed)
    K = params.K
    ops = [[DiagonalOperator(ring, ring.sample(rng, lam), copy=False)
            for _ in range(K)] for _ in range(K)]
    return ChannelSet(params, ring, seed, ops)


def identity_channels(params, ring):
    """Fully degenerate all-ones channels, for diagnostics only."""
    if not params.materializable:
        raise ResourceBoundError("lambda_n exceeds the materialization bound")
    K, lam = params.K, params.lambda_n
    ops = [[DiagonalOperator(ring, ring.ones(lam), copy=False)
            for _ in range(K)] for _ in range(K)]
    return ChannelSet(params, ring, None, ops)
