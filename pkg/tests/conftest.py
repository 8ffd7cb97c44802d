import numpy as np
import pytest

from kswkit import keyswitch as ks
from kswkit.modring import PrimeContext, ntt_primes
from kswkit.rns import RnsBasis, RnsPolynomial


def contexts(bits, n, count, skip=0):
    return [PrimeContext.build(q, n) for q in ntt_primes(bits, n, count, skip)]


def basis(ctxs, role):
    return RnsBasis(tuple(ctxs), (role,) * len(ctxs))


def random_poly(rng, b: RnsBasis, n: int) -> RnsPolynomial:
    return RnsPolynomial(np.stack([rng.integers(0, q, n, dtype=np.int64) for q in b.moduli]), b)


class KeySet:
    def __init__(self, params, seed=11):
        self.params = params
        self.s_from = ks.keygen(params, seed)
        self.s_to = ks.keygen(params, seed + 1)
        self.swk = ks.gen_swk_klss(self.s_from, self.s_to, params, seed + 2)


_KEYS = {}


def keyset(**kw) -> KeySet:
    p = ks.KswParams(**kw)
    if p not in _KEYS:
        _KEYS[p] = KeySet(p)
    return _KEYS[p]


@pytest.fixture(scope="session")
def desk():
    return keyset()
