"""Scalar rings and the diagonal-operator algebra.

Every quantity in the scheme lives over one of three commutative rings:
IEEE-754 binary64 reals, binary64 complex numbers, or the prime field
GF(p) with p = 2^61 - 1 by default.  Symbol-extended channels are
lambda x lambda diagonal matrices, stored as their entry vectors;
composition is the elementwise product and is therefore exactly
commutative over every ring (floats included, bitwise).

Exact rank computation over the prime field uses Gaussian elimination
with modular pivot inverses; the float policy uses partial pivoting with
a threshold relative to the largest entry magnitude of the matrix.
"""

from __future__ import annotations

import numpy as np

from . import _gf61

MERSENNE61 = _gf61.MERSENNE61

__all__ = [
    "MERSENNE61",
    "ScalarRing",
    "DiagonalOperator",
    "DenseMatrix",
    "diag_compose",
    "diag_linear",
    "diag_pow",
    "identity_operator",
    "zero_operator",
    "rank",
    "echelon_with_prefix",
]


def _is_prime(n):
    """Deterministic Miller-Rabin, valid for all n < 2^64."""
    if n < 2:
        return False
    for q in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % q == 0:
            return n == q
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


class ScalarRing:
    """One of the three scalar rings, with vectorized arithmetic on arrays.

    Parameters
    ----------
    kind : str
        'real', 'complex' or 'gf'.
    p : int, optional
        Prime modulus for the 'gf' kind.  The default is the Mersenne
        prime 2^61 - 1, which has a fast reduction path; other moduli are
        accepted up to 2^31 so products fit into uint64 without splitting.
    """

    _KINDS = ("real", "complex", "gf")

    def __init__(self, kind, p=None):
        if kind not in self._KINDS:
            raise ValueError(f"unknown ring kind {kind!r}")
        if kind == "gf":
            p = MERSENNE61 if p is None else int(p)
            if p != MERSENNE61 and p >= (1 << 31):
                raise ValueError(
                    "prime moduli other than 2^61 - 1 must be below 2^31")
            if not _is_prime(p):
                raise ValueError(f"{p} is not prime")
        elif p is not None:
            raise ValueError("modulus only applies to the prime-field ring")
        self.kind = kind
        self.p = p

    @classmethod
    def real(cls):
        return cls("real")

    @classmethod
    def complex(cls):
        return cls("complex")

    @classmethod
    def prime_field(cls, p=None):
        return cls("gf", p)

    @classmethod
    def from_name(cls, name, p=None):
        name = name.lower()
        if name in ("real", "real-binary64"):
            return cls.real()
        if name in ("complex", "complex-binary64"):
            return cls.complex()
        if name in ("gf", "primefield", "prime-field"):
            return cls.prime_field(p)
        raise ValueError(f"unknown ring name {name!r}")

    # -- identity ---------------------------------------------------------

    def __eq__(self, other):
        return (isinstance(other, ScalarRing)
                and self.kind == other.kind and self.p == other.p)

    def __hash__(self):
        return hash((self.kind, self.p))

    def __repr__(self):
        if self.kind == "gf":
            return f"ScalarRing(gf, p={self.p})"
        return f"ScalarRing({self.kind})"

    @property
    def dtype(self):
        if self.kind == "real":
            return np.float64
        if self.kind == "complex":
            return np.complex128
        return np.uint64

    @property
    def is_exact(self):
        return self.kind == "gf"

    @property
    def _mersenne(self):
        return self.kind == "gf" and self.p == MERSENNE61

    # -- elementwise arithmetic on ndarrays -------------------------------

    def _coerce(self, a):
        arr = np.asarray(a, dtype=self.dtype)
        if self.kind == "gf" and arr.size and int(arr.max()) >= self.p:
            raise ValueError("entries must be canonical, below the modulus")
        return arr

    def mul(self, a, b):
        if self.kind == "complex":
            # numpy's complex multiply kernel is not bitwise symmetric in
            # its operands, but composing diagonal operators must be.  Build
            # the product from real components: binary64 multiply and add
            # commute bitwise, so swapping a and b gives identical output.
            a = np.asarray(a, dtype=np.complex128)
            b = np.asarray(b, dtype=np.complex128)
            re = np.asarray(a.real * b.real - a.imag * b.imag)
            im = np.asarray(a.real * b.imag + a.imag * b.real)
            out = np.empty(re.shape, dtype=np.complex128)
            out.real, out.imag = re, im
            return out
        if self.kind != "gf":
            return a * b
        if self._mersenne:
            a, b = np.broadcast_arrays(a, b)
            out = np.empty(a.shape, dtype=np.uint64)
            _gf61.mul_arrays(np.ascontiguousarray(a).ravel(),
                             np.ascontiguousarray(b).ravel(), out.ravel())
            return out
        return (a * b) % np.uint64(self.p)

    def add(self, a, b):
        if self.kind != "gf":
            return a + b
        if self._mersenne:
            a, b = np.broadcast_arrays(a, b)
            out = np.empty(a.shape, dtype=np.uint64)
            _gf61.add_arrays(np.ascontiguousarray(a).ravel(),
                             np.ascontiguousarray(b).ravel(), out.ravel())
            return out
        return (a + b) % np.uint64(self.p)

    def sub(self, a, b):
        if self.kind != "gf":
            return a - b
        if self._mersenne:
            a, b = np.broadcast_arrays(a, b)
            out = np.empty(a.shape, dtype=np.uint64)
            _gf61.sub_arrays(np.ascontiguousarray(a).ravel(),
                             np.ascontiguousarray(b).ravel(), out.ravel())
            return out
        return (a + (np.uint64(self.p) - b)) % np.uint64(self.p)

    def neg(self, a):
        if self.kind != "gf":
            return -a
        a = np.asarray(a, dtype=np.uint64)
        if self._mersenne:
            out = np.empty(a.shape, dtype=np.uint64)
            _gf61.neg_array(np.ascontiguousarray(a).ravel(), out.ravel())
            return out
        return np.where(a == 0, a, np.uint64(self.p) - a)

    def linear(self, alpha, x, beta, y):
        """alpha*x - beta*y, elementwise (single fused pass over GF)."""
        if self.kind != "gf":
            return alpha * x - beta * y
        if self._mersenne:
            alpha, x, beta, y = np.broadcast_arrays(alpha, x, beta, y)
            out = np.empty(x.shape, dtype=np.uint64)
            _gf61.linear_arrays(np.ascontiguousarray(alpha).ravel(),
                                np.ascontiguousarray(x).ravel(),
                                np.ascontiguousarray(beta).ravel(),
                                np.ascontiguousarray(y).ravel(), out.ravel())
            return out
        p = np.uint64(self.p)
        return ((alpha * x) % p + (p - (beta * y) % p)) % p

    def pow(self, a, e):
        e = int(e)
        if e < 0:
            raise ValueError("exponent must be nonnegative")
        if self.kind != "gf":
            return np.power(a, e)
        a = np.asarray(a, dtype=np.uint64)
        if self._mersenne:
            out = np.empty(a.shape, dtype=np.uint64)
            _gf61.pow_arrays(np.ascontiguousarray(a).ravel(),
                             np.uint64(e), out.ravel())
            return out
        acc = np.ones(a.shape, dtype=np.uint64)
        base = a.copy()
        p = np.uint64(self.p)
        while e:
            if e & 1:
                acc = (acc * base) % p
            base = (base * base) % p
            e >>= 1
        return acc

    def inv(self, a):
        if self.kind != "gf":
            return 1.0 / a
        a = np.asarray(a, dtype=np.uint64)
        if np.any(a == 0):
            raise ZeroDivisionError("zero has no inverse in GF(p)")
        if self._mersenne:
            out = np.empty(a.shape, dtype=np.uint64)
            _gf61.inv_arrays(np.ascontiguousarray(a).ravel(), out.ravel())
            return out
        return self.pow(a, self.p - 2)

    # -- constants and sampling -------------------------------------------

    def ones(self, shape):
        return np.ones(shape, dtype=self.dtype)

    def zeros(self, shape):
        return np.zeros(shape, dtype=self.dtype)

    def sample(self, rng, shape):
        """Draw generic nonzero entries.

        GF(p): uniform on {1, ..., p-1}.  Real: random sign with magnitude
        uniform on [0.5, 2].  Complex: the same magnitude law with uniform
        phase.  Bounded away from zero so float coefficient products stay
        well conditioned.
        """
        if self.kind == "gf":
            return rng.integers(1, self.p, size=shape, dtype=np.uint64)
        mag = rng.uniform(0.5, 2.0, size=shape)
        if self.kind == "real":
            sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
            return sign * mag
        phase = rng.uniform(0.0, 2.0 * np.pi, size=shape)
        return mag * np.exp(1j * phase)


class DiagonalOperator:
    """A lambda x lambda diagonal matrix stored as its entry vector.

    Immutable: the entry array is made read-only at construction.
    """

    __slots__ = ("ring", "entries")

    def __init__(self, ring, entries, copy=True):
        arr = np.array(entries, dtype=ring.dtype, copy=copy)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("entries must be a nonempty 1-D sequence")
        if ring.kind == "gf" and int(arr.max()) >= ring.p:
            raise ValueError("entries must be canonical, below the modulus")
        arr.flags.writeable = False
        object.__setattr__(self, "ring", ring)
        object.__setattr__(self, "entries", arr)

    def __setattr__(self, name, value):
        raise AttributeError("DiagonalOperator is immutable")

    @property
    def dim(self):
        return self.entries.size

    def __repr__(self):
        return f"DiagonalOperator(dim={self.dim}, ring={self.ring})"

    def __eq__(self, other):
        return (isinstance(other, DiagonalOperator)
                and self.ring == other.ring
                and self.dim == other.dim
                and bool(np.array_equal(self.entries, other.entries)))

    def is_zero(self):
        return bool(np.all(self.entries == 0))

    def nonzero_everywhere(self):
        return bool(np.all(self.entries != 0))


def _check_compat(*ops):
    ring, dim = ops[0].ring, ops[0].dim
    for op in ops[1:]:
        if op.ring != ring:
            raise ValueError("ring mismatch between operators")
        if op.dim != dim:
            raise ValueError(f"dimension mismatch: {op.dim} != {dim}")
    return ring


def diag_compose(a, b):
    """Elementwise product a . b; commutative and bitwise symmetric."""
    ring = _check_compat(a, b)
    return DiagonalOperator(ring, ring.mul(a.entries, b.entries), copy=False)


def diag_linear(alpha, x, beta, y):
    """The row combination alpha . x - beta . y."""
    ring = _check_compat(alpha, x, beta, y)
    out = ring.linear(alpha.entries, x.entries, beta.entries, y.entries)
    return DiagonalOperator(ring, out, copy=False)


def diag_pow(a, e):
    """Elementwise e-th power; e = 0 gives the identity."""
    e = int(e)
    if e < 0:
        raise ValueError("exponent must be nonnegative")
    return DiagonalOperator(a.ring, a.ring.pow(a.entries, e), copy=False)


def identity_operator(ring, dim):
    return DiagonalOperator(ring, ring.ones(dim), copy=False)


def zero_operator(ring, dim):
    return DiagonalOperator(ring, ring.zeros(dim), copy=False)


class DenseMatrix:
    """A dense rows x cols matrix over a scalar ring."""

    __slots__ = ("ring", "data")

    def __init__(self, ring, data, copy=True):
        arr = np.array(data, dtype=ring.dtype, copy=copy)
        if arr.ndim != 2:
            raise ValueError("data must be 2-D")
        self.ring = ring
        self.data = arr

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    def __repr__(self):
        return f"DenseMatrix({self.rows}x{self.cols}, ring={self.ring})"


# -- rank ------------------------------------------------------------------


def _echelon_gf_generic(m, p, pivot_cols):
    """Forward elimination mod a small prime; numpy row ops, in place."""
    rows, cols = m.shape
    pq = np.uint64(p)
    rank = 0
    for c in range(pivot_cols):
        col = m[rank:, c]
        nz = np.nonzero(col)[0]
        if nz.size == 0:
            continue
        piv = rank + int(nz[0])
        if piv != rank:
            m[[rank, piv]] = m[[piv, rank]]
        inv = np.uint64(pow(int(m[rank, c]), p - 2, p))
        m[rank, c:] = (m[rank, c:] * inv) % pq
        f = m[rank + 1:, c].copy()
        if f.size:
            m[rank + 1:, c:] = (
                m[rank + 1:, c:] + (pq - f[:, None]) * m[rank, c:] % pq
            ) % pq
        rank += 1
        if rank == rows:
            break
    return rank


def _echelon_float(m, tol_abs, pivot_cols):
    """Forward elimination with partial pivoting; pivots below tol_abs
    are treated as zero.  In place, returns the rank."""
    rows, cols = m.shape
    rank = 0
    for c in range(pivot_cols):
        col = np.abs(m[rank:, c])
        piv = rank + int(np.argmax(col))
        if np.abs(m[piv, c]) <= tol_abs:
            continue
        if piv != rank:
            m[[rank, piv]] = m[[piv, rank]]
        m[rank, c:] /= m[rank, c]
        f = m[rank + 1:, c].copy()
        if f.size:
            m[rank + 1:, c:] -= f[:, None] * m[rank, c:]
        rank += 1
        if rank == rows:
            break
    return rank


def echelon_with_prefix(matrix, ring, pivot_cols=None, policy="exact",
                        tol=1e-10):
    """Row-reduce `matrix` (a 2-D ndarray, modified in place), pivoting
    only within the first `pivot_cols` columns.

    Returns ``(rank, matrix)`` where rank counts pivots found in the
    prefix block.  Rows at index >= rank hold the residual of any
    trailing columns against the span of the prefix columns, so
    ``rank([prefix | extra]) = rank + rank(residual of extra)``.
    """
    if pivot_cols is None:
        pivot_cols = matrix.shape[1]
    if policy == "exact":
        if ring.kind != "gf":
            raise ValueError("exact rank policy requires the prime field")
        if ring._mersenne:
            r = _gf61.echelon_forward(matrix, pivot_cols)
        else:
            r = _echelon_gf_generic(matrix, ring.p, pivot_cols)
        return int(r), matrix
    if policy == "float":
        if ring.kind == "gf":
            raise ValueError("float rank policy requires a float ring")
        maxmag = float(np.max(np.abs(matrix))) if matrix.size else 0.0
        r = _echelon_float(matrix, tol * maxmag, pivot_cols)
        return int(r), matrix
    raise ValueError(f"unknown rank policy {policy!r}")


def rank(m, policy="exact", tol=1e-10):
    """Rank of a DenseMatrix.

    policy='exact' runs field elimination with modular pivot inverses and
    is deterministic and exact over GF(p); policy='float' uses partial
    pivoting with the pivot threshold tol * max|entry|.
    """
    work = m.data.copy()
    r, _ = echelon_with_prefix(work, m.ring, policy=policy, tol=tol)
    return r
