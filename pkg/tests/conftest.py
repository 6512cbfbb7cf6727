import numpy as np
import pytest

import siacoop as sc


@pytest.fixture(scope="session")
def gf():
    return sc.ScalarRing.prime_field()


@pytest.fixture(scope="session")
def real():
    return sc.ScalarRing.real()


@pytest.fixture(scope="session")
def cplx():
    return sc.ScalarRing.complex()


def run_pipeline(K, M, n, ring, seed, **kwargs):
    """channels -> SIA -> generators -> bases, for one realization."""
    params = sc.build_params(K, M, n)
    channels = sc.sample_channels(params, ring, seed)
    processed = {k: sc.sia_run(sc.stack_decoder(channels, k))
                 for k in range(1, K + 1)}
    generators = sc.extract_generators(processed)
    bases = sc.build_all_bases(generators, params, **kwargs)
    return params, channels, processed, generators, bases


def stacked_channels(params, ring, dim, trials, seed0=0):
    """Stack `trials` independent dim-sized channel realizations into one
    ChannelSet of dimension dim*trials.

    All downstream coefficient arithmetic is entrywise, so trial t lives
    untouched on diagonal positions [t*dim, (t+1)*dim): one stacked run
    is exactly `trials` independent runs.
    """
    from siacoop.channel import ChannelSet
    draws = [sc.sample_channels(params, ring, seed0 + t, dim=dim)
             for t in range(trials)]
    K = params.K
    ops = [[sc.DiagonalOperator(
                ring, np.concatenate([d.h(j, i).entries for d in draws]),
                copy=False)
            for i in range(1, K + 1)] for j in range(1, K + 1)]
    return ChannelSet(params, ring, None, ops)
