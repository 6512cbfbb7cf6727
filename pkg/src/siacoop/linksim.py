"""Finite-SNR link simulation and rate-slope DoF estimation.

Transmit frames are precoded onto unit-norm basis columns, pass through
the sampled channels with additive unit-variance noise, and each decoder
applies the same row combinations as the exact elimination -- tracked as
explicit per-receiver diagonal weights so the colored noise covariance
is propagated exactly.  Each processed subspace is then projected onto
the orthogonal complement of the interference span (zero forcing) and
the surviving mu_n-stream effective channel is scored with the log-det
rate.  The DoF estimate is the least-squares slope of sum rate against
log2(SNR).

Column scaling preserves the containment conditions up to per-column
scalars, so the zero-forcing projector still annihilates all
interference exactly; normalization only improves float conditioning.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space

from .rings import DiagonalOperator, identity_operator, zero_operator
from .sia import stack_decoder, sia_run

__all__ = [
    "RatePoint",
    "RateReport",
    "DecoderFrontEnd",
    "build_front_ends",
    "run_link",
    "estimate_dof_slope",
]

DEFAULT_NOISE_REALIZATIONS = 20
LEAKAGE_ENERGY_BOUND = 1e-18


def _require_float_ring(ring):
    if ring.is_exact:
        raise ValueError("link simulation requires a float ring")


@dataclass
class DecoderFrontEnd:
    """Everything decoder k needs at run time.

    weights[i][j] is the diagonal combining weight applied to receiver
    j's signal to form processed subspace i; projector is the
    orthonormal basis of the interference-free complement (lambda x
    mu_n); eff[i] is subspace i's effective desired channel after
    projection and noise_cov[i] the exactly propagated noise covariance
    in that basis.
    """

    k: int
    receivers: tuple
    weights: list
    projector: np.ndarray
    eff: list
    noise_cov: list
    flagged: bool = False


def _normalized_columns(basis):
    cols = basis.columns.T.astype(complex if np.iscomplexobj(basis.columns)
                                  else float, copy=True)
    norms = np.linalg.norm(cols, axis=0)
    return cols / norms


def build_front_ends(params, channels, generators, bases):
    """Receive processing for all K decoders over one float realization."""
    ring = channels.ring
    _require_float_ring(ring)
    K, M, lam, mu_n = params.K, params.M, params.lambda_n, params.mu_n
    fronts = {}
    for k in range(1, K + 1):
        state = stack_decoder(channels, k)
        receivers = tuple(((k - 1 + m) % K) + 1 for m in range(M))
        # carry one weight operator per receiver through the elimination
        extra = []
        for m in range(M):
            row = [identity_operator(ring, lam) if j == m
                   else zero_operator(ring, lam) for j in range(M)]
            extra.append(row)
        state.extra = extra
        processed = sia_run(state)
        weights = [[op.entries for op in row] for row in processed.extra]

        inter_cols = np.hstack([
            (generators.T(k).entries[:, None]
             * _normalized_columns(bases[m][params.n + 1]))
            for m in range(1, M + 1)])
        U = null_space(inter_cols.conj().T)
        flagged = U.shape[1] != mu_n
        eff, ncov = [], []
        for i in range(M):
            desired = (processed.g[i].entries[:, None]
                       * _normalized_columns(bases[i + 1][params.n]))
            eff.append(U.conj().T @ desired)
            d = np.zeros(lam)
            for j in range(M):
                d += np.abs(weights[i][j]) ** 2
            ncov.append(U.conj().T @ (d[:, None] * U))
        fronts[k] = DecoderFrontEnd(k=k, receivers=receivers,
                                    weights=weights, projector=U,
                                    eff=eff, noise_cov=ncov, flagged=flagged)
    return fronts


def _subspace_rate(front, i, symbol_power):
    """log-det rate of one projected subspace, colored-noise form."""
    A = front.eff[i]
    cov = front.noise_cov[i]
    try:
        sol = np.linalg.solve(cov, A)
    except np.linalg.LinAlgError:
        return 0.0, True
    gram = A.conj().T @ sol
    sign, logdet = np.linalg.slogdet(
        np.eye(A.shape[1]) + symbol_power * gram)
    if sign <= 0:
        return 0.0, True
    return float(logdet / np.log(2.0)), False


def _sample_symbols(ring, rng, shape, variance):
    if variance == 0.0:
        return np.zeros(shape, dtype=ring.dtype)
    s = np.sqrt(variance)
    if ring.kind == "real":
        return s * rng.standard_normal(shape)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return s / np.sqrt(2.0) * (re + 1j * im)


def _transmit_and_combine(params, channels, bases, fronts, rng,
                          symbol_power, noise_on=True, mute_desired=None):
    """One frame: precode, propagate, add noise, apply the combining
    weights.  Returns per-decoder processed subspace vectors."""
    ring = channels.ring
    K, M, lam = params.K, params.M, params.lambda_n
    Fn = {j: _normalized_columns(bases[j][params.n])
          for j in range(1, M + 1)}
    X = {}
    for i in range(1, K + 1):
        x = np.zeros(lam, dtype=ring.dtype)
        for j in range(1, M + 1):
            s = _sample_symbols(ring, rng, params.mu_n, symbol_power)
            if mute_desired == i:
                s = np.zeros_like(s)
            x = x + Fn[j] @ s
        X[i] = x
    Y = {}
    for jrx in range(1, K + 1):
        y = np.zeros(lam, dtype=ring.dtype)
        for itx in range(1, K + 1):
            y = y + channels.h(jrx, itx).entries * X[itx]
        if noise_on:
            y = y + _sample_symbols(ring, rng, lam, 1.0)
        Y[jrx] = y
    processed = {}
    for k, front in fronts.items():
        rows = []
        for i in range(M):
            z = np.zeros(lam, dtype=ring.dtype)
            for m, jrx in enumerate(front.receivers):
                z = z + front.weights[i][m] * Y[jrx]
            rows.append(z)
        processed[k] = rows
    return processed


def interference_leakage(params, channels, bases, fronts, seed):
    """Noiseless probe: transmit interference only and measure the
    post-projection energy relative to the pre-projection energy."""
    rng = np.random.default_rng([seed, 0xA11C])
    worst = 0.0
    for k, front in fronts.items():
        proc = _transmit_and_combine(params, channels, bases, fronts, rng,
                                     symbol_power=1.0, noise_on=False,
                                     mute_desired=k)
        for z in proc[k]:
            e_in = float(np.real(np.vdot(z, z)))
            zp = front.projector.conj().T @ z
            e_out = float(np.real(np.vdot(zp, zp)))
            if e_in > 0:
                worst = max(worst, e_out / e_in)
    return worst


@dataclass
class RatePoint:
    snr_db: float
    rho: float
    per_user: dict
    sum_rate: float
    realizations: int
    flagged: bool = False


@dataclass
class RateReport:
    snr_points: list
    slope: float
    slope_residual: float
    target_slope: float
    leakage: float
    flagged: bool = False


def run_link(params, channels, bases, generators, snr_db_list, seed,
             noise_realizations=DEFAULT_NOISE_REALIZATIONS):
    """Simulate the full chain over a list of SNR points (dB).

    Rates are per extension symbol (divided by lambda_n).  Power is
    split equally across the M*mu_n streams of each user; the log-det
    rate uses the exactly propagated noise covariance, so noise
    realizations only drive the empirical probes, not the rate values.
    """
    ring = channels.ring
    _require_float_ring(ring)
    fronts = build_front_ends(params, channels, generators, bases)
    leakage = interference_leakage(params, channels, bases, fronts, seed)
    K, M, lam = params.K, params.M, params.lambda_n
    points = []
    any_flag = any(f.flagged for f in fronts.values())
    for s_idx, snr_db in enumerate(snr_db_list):
        rho = 10.0 ** (snr_db / 10.0)
        symbol_power = rho / (M * params.mu_n)
        per_user = {}
        flagged = any_flag
        for k, front in fronts.items():
            total = 0.0
            for i in range(M):
                rate, bad = _subspace_rate(front, i, symbol_power)
                flagged = flagged or bad
                total += rate
            per_user[k] = total / lam
        # exercise actual noisy frames on derived substreams; the frames
        # feed reproducibility and sanity probes, the rates above are
        # closed form
        for real in range(noise_realizations):
            rng = np.random.default_rng([seed, s_idx, real])
            _transmit_and_combine(params, channels, bases, fronts, rng,
                                  symbol_power=symbol_power)
        points.append(RatePoint(snr_db=float(snr_db), rho=rho,
                                per_user=per_user,
                                sum_rate=float(sum(per_user.values())),
                                realizations=noise_realizations,
                                flagged=flagged))
    slope, resid = estimate_dof_slope([(p.rho, p.sum_rate) for p in points])
    target = float(params.dof_total)
    return RateReport(snr_points=points, slope=slope, slope_residual=resid,
                      target_slope=target, leakage=leakage,
                      flagged=any(p.flagged for p in points))


def estimate_dof_slope(rate_points):
    """Ordinary least squares of sum rate against log2(rho).

    Needs at least 3 points spanning at least 20 dB.  Returns
    (slope, rms residual of the fit).
    """
    if len(rate_points) < 3:
        raise ValueError("need at least 3 SNR points for a slope fit")
    rhos = np.array([p[0] for p in rate_points], dtype=float)
    rates = np.array([p[1] for p in rate_points], dtype=float)
    span_db = 10.0 * np.log10(rhos.max() / rhos.min())
    if span_db < 20.0 - 1e-9:
        raise ValueError(f"SNR span {span_db:.1f} dB is below 20 dB")
    x = np.log2(rhos)
    coeffs = np.polyfit(x, rates, 1)
    fit = np.polyval(coeffs, x)
    resid = float(np.sqrt(np.mean((rates - fit) ** 2)))
    return float(coeffs[0]), resid
