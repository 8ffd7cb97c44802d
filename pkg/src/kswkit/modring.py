"""Word-sized prime-field arithmetic and NTT-friendly prime generation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from kswkit.errors import NoPrimeFound

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)

# numpy int64 can hold a product of two residues only below this bound
INT64_SAFE_BITS = 31


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin for n < 3.3e24 (covers every 62-bit word)."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, r = n - 1, 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def _is_pow2(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class PrimeContext:
    """A prime modulus q with a primitive 2N-th root of unity.

    Barrett constants (``k``, ``mu``) are precomputed for ``mod_mul``.
    """

    q: int
    n: int
    psi: int
    psi_inv: int = field(repr=False)
    n_inv: int = field(repr=False)
    k: int = field(repr=False)
    mu: int = field(repr=False)

    @classmethod
    def build(cls, q: int, n: int, psi: int | None = None) -> "PrimeContext":
        if (q - 1) % (2 * n) != 0:
            raise ValueError(f"q={q} is not 1 mod 2N for N={n}")
        if psi is None:
            psi = primitive_root_2n(q, n)
        k = q.bit_length()
        return cls(
            q=q,
            n=n,
            psi=psi,
            psi_inv=pow(psi, -1, q),
            n_inv=pow(n, -1, q),
            k=k,
            mu=(1 << (2 * k)) // q,
        )

    @property
    def bits(self) -> int:
        return self.k

    @property
    def dtype(self):
        """Array dtype that can hold residue products without overflow."""
        return np.int64 if self.k <= INT64_SAFE_BITS else object

    def check(self) -> None:
        """Raise AssertionError if any context invariant is broken."""
        q, n = self.q, self.n
        assert (q - 1) % (2 * n) == 0
        assert pow(self.psi, 2 * n, q) == 1
        assert pow(self.psi, n, q) == q - 1
        assert self.psi * self.psi_inv % q == 1
        assert n * self.n_inv % q == 1


def primitive_root_2n(q: int, n: int) -> int:
    """Smallest-base primitive 2N-th root of unity modulo prime q.

    For g = x^((q-1)/2N), g^N = -1 already forces order exactly 2N since
    2N is a power of two, so no factorisation of q-1 is needed.
    """
    if (q - 1) % (2 * n) != 0:
        raise ValueError(f"q={q} is not 1 mod 2N for N={n}")
    e = (q - 1) // (2 * n)
    for x in range(2, q):
        g = pow(x, e, q)
        if pow(g, n, q) == q - 1:
            return g
    raise ValueError(f"no primitive 2N-th root mod {q}")  # unreachable for prime q


def ntt_primes(bit_width: int, n: int, count: int, skip: int = 0) -> list[int]:
    """The ``skip``-th through ``skip+count-1``-th primes of the descending scan."""
    if not 2 <= bit_width <= 62:
        raise ValueError("bit_width must be within [2, 62]")
    if not _is_pow2(n):
        raise ValueError("n must be a power of two")
    step = 2 * n
    lo = 1 << (bit_width - 1)
    top = (1 << bit_width) - 1
    cand = top - ((top - 1) % step)  # largest value <= top that is 1 mod 2n
    found: list[int] = []
    while cand >= lo:
        if is_prime(cand):
            if skip:
                skip -= 1
            else:
                found.append(cand)
                if len(found) == count:
                    return found
        cand -= step
    raise NoPrimeFound(
        f"only {len(found)} of {count} primes = 1 mod {step} with {bit_width} bits"
    )


def find_ntt_prime(bit_width: int, n: int, index: int = 0) -> PrimeContext:
    """The ``index``-th NTT-friendly prime below 2^bit_width, as a context."""
    q = ntt_primes(bit_width, n, 1, skip=index)[0]
    return PrimeContext.build(q, n)


def mod_mul(a: int, b: int, ctx: PrimeContext) -> int:
    """(a*b) mod q by Barrett reduction, canonical output in [0, q)."""
    x = a * b
    t = (x * ctx.mu) >> (2 * ctx.k)
    r = x - t * ctx.q
    while r >= ctx.q:
        r -= ctx.q
    return r


# Vectorised helpers. Inputs are canonical residues held in ctx.dtype arrays.


def as_residues(values, q: int) -> np.ndarray:
    """Reduce arbitrary integers (python ints allowed) into [0, q)."""
    dt = np.int64 if q.bit_length() <= INT64_SAFE_BITS else object
    arr = np.asarray(values, dtype=object) if dt is object else np.asarray(values)
    if arr.dtype == object:
        out = np.array([int(v) % q for v in arr.ravel()], dtype=object).reshape(arr.shape)
        return out.astype(dt) if dt is not object else out
    return np.mod(arr.astype(np.int64), q)


def vmul(a: np.ndarray, b, q: int) -> np.ndarray:
    return (a * b) % q


def vadd(a: np.ndarray, b, q: int) -> np.ndarray:
    return (a + b) % q


def vsub(a: np.ndarray, b, q: int) -> np.ndarray:
    return (a - b) % q


def centered(x: int, q: int) -> int:
    """Representative of x mod q in (-q/2, q/2]."""
    x %= q
    return x - q if x > q // 2 else x
