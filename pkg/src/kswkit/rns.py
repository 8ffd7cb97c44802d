"""RNS bases, approximate basis conversion, ModDown and a CRT oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import prod

import numpy as np

from kswkit import ntt
from kswkit.errors import BasisOverlap, DomainMismatch, MissingLimbs
from kswkit.modring import PrimeContext, centered
from kswkit.ntt import Domain

ROLES = ("Q", "P", "T")


@dataclass(frozen=True)
class RnsBasis:
    """Ordered primes with role labels and CRT constants.

    ``hat_inv[i]`` is (M/q_i)^-1 mod q_i where M is the basis product.
    """

    primes: tuple[PrimeContext, ...]
    roles: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.roles:
            object.__setattr__(self, "roles", ("Q",) * len(self.primes))
        if len(self.roles) != len(self.primes):
            raise ValueError("one role label per prime")
        if any(r not in ROLES for r in self.roles):
            raise ValueError(f"roles must be drawn from {ROLES}")
        if len(set(self.moduli)) != len(self.moduli):
            raise ValueError("moduli must be distinct primes")

    def __len__(self) -> int:
        return len(self.primes)

    @property
    def moduli(self) -> tuple[int, ...]:
        return tuple(p.q for p in self.primes)

    @property
    def n(self) -> int:
        return self.primes[0].n

    @cached_property
    def product(self) -> int:
        return prod(self.moduli)

    @cached_property
    def hat(self) -> tuple[int, ...]:
        return tuple(self.product // q for q in self.moduli)

    @cached_property
    def hat_inv(self) -> tuple[int, ...]:
        return tuple(pow(h % q, -1, q) for h, q in zip(self.hat, self.moduli))

    def hat_mod(self, target: "RnsBasis") -> np.ndarray:
        """Matrix [i, j] = (M/q_i) mod p_j, as python ints."""
        return np.array([[h % p for p in target.moduli] for h in self.hat], dtype=object)

    def check_constants(self) -> bool:
        """Recompute the CRT constants from scratch and compare."""
        M = 1
        for q in self.moduli:
            M *= q
        for i, q in enumerate(self.moduli):
            h = M // q
            if h != self.hat[i] or (h * self.hat_inv[i]) % q != 1:
                return False
        return M == self.product

    def disjoint(self, other: "RnsBasis") -> bool:
        return not set(self.moduli) & set(other.moduli)

    def sub(self, indices) -> "RnsBasis":
        idx = list(indices)
        return RnsBasis(tuple(self.primes[i] for i in idx), tuple(self.roles[i] for i in idx))

    def with_role(self, role: str) -> "RnsBasis":
        return self.sub(i for i, r in enumerate(self.roles) if r == role)

    def __add__(self, other: "RnsBasis") -> "RnsBasis":
        return RnsBasis(self.primes + other.primes, self.roles + other.roles)


@dataclass
class RnsPolynomial:
    """Residues of one polynomial, shape (limbs, N), stored as python-int friendly arrays."""

    limbs: np.ndarray
    basis: RnsBasis
    domain: Domain = Domain.COEFF
    level: int | None = field(default=None)

    def __post_init__(self):
        if self.limbs.shape[0] != len(self.basis):
            raise ValueError("limb count does not match basis")

    @property
    def n(self) -> int:
        return self.limbs.shape[1]

    def copy(self) -> "RnsPolynomial":
        return RnsPolynomial(self.limbs.copy(), self.basis, self.domain, self.level)

    def restrict(self, basis: RnsBasis) -> "RnsPolynomial":
        """Select the limbs of ``basis`` (all of which must be present)."""
        pos = {q: i for i, q in enumerate(self.basis.moduli)}
        missing = [q for q in basis.moduli if q not in pos]
        if missing:
            raise MissingLimbs(f"moduli {missing} absent")
        rows = [pos[q] for q in basis.moduli]
        return RnsPolynomial(self.limbs[rows].copy(), basis, self.domain, self.level)

    def to_eval(self) -> "RnsPolynomial":
        if self.domain != Domain.COEFF:
            raise DomainMismatch("already in evaluation domain")
        rows = np.stack([ntt.forward(self.limbs[i], p) for i, p in enumerate(self.basis.primes)])
        return RnsPolynomial(rows, self.basis, Domain.EVAL, self.level)

    def to_coeff(self) -> "RnsPolynomial":
        if self.domain != Domain.EVAL:
            raise DomainMismatch("already in coefficient domain")
        rows = np.stack([ntt.inverse(self.limbs[i], p) for i, p in enumerate(self.basis.primes)])
        return RnsPolynomial(rows, self.basis, Domain.COEFF, self.level)

    # ring arithmetic, limb by limb
    def _zip(self, other: "RnsPolynomial", op) -> "RnsPolynomial":
        if other.basis.moduli != self.basis.moduli or other.domain != self.domain:
            raise DomainMismatch("operands differ in basis or domain")
        rows = np.stack([op(a, b) % q for a, b, q in zip(self.limbs, other.limbs, self.basis.moduli)])
        return RnsPolynomial(rows, self.basis, self.domain, self.level)

    def __add__(self, other):
        return self._zip(other, lambda a, b: a + b)

    def __sub__(self, other):
        return self._zip(other, lambda a, b: a - b)

    def __mul__(self, other):
        if self.domain != Domain.EVAL:
            raise DomainMismatch("pointwise product needs evaluation domain")
        return self._zip(other, lambda a, b: a * b)

    def scale(self, c: int) -> "RnsPolynomial":
        rows = np.stack([(a * (c % q)) % q for a, q in zip(self.limbs, self.basis.moduli)])
        return RnsPolynomial(rows, self.basis, self.domain, self.level)


def _dtype(basis: RnsBasis):
    return object if any(p.dtype is object for p in basis.primes) else np.int64


def decompose(values, basis: RnsBasis, domain: Domain = Domain.COEFF) -> RnsPolynomial:
    """Residues of integer coefficients (python ints allowed) under ``basis``."""
    vals = [int(v) for v in values]
    dt = _dtype(basis)
    rows = np.array([[v % q for v in vals] for q in basis.moduli], dtype=object)
    return RnsPolynomial(rows.astype(dt), basis, domain)


def zeros(basis: RnsBasis, n: int, domain: Domain = Domain.COEFF) -> RnsPolynomial:
    return RnsPolynomial(np.zeros((len(basis), n), dtype=_dtype(basis)), basis, domain)


def crt_reconstruct(x: RnsPolynomial) -> list[int]:
    """Exact centered integer value of every coefficient."""
    if x.domain != Domain.COEFF:
        raise DomainMismatch("CRT reconstruction needs coefficient domain")
    b = x.basis
    M = b.product
    acc = [0] * x.n
    for row, q, h, hi in zip(x.limbs, b.moduli, b.hat, b.hat_inv):
        f = h * hi
        for k, v in enumerate(row.tolist()):
            acc[k] += int(v) * f
    return [centered(v, M) for v in acc]


def _scaled_source(x: RnsPolynomial) -> list[np.ndarray]:
    """y_i = [x_i * (M/q_i)^-1]_{q_i}, centered into (-q_i/2, q_i/2]."""
    out = []
    for row, q, hi in zip(x.limbs, x.basis.moduli, x.basis.hat_inv):
        y = (row * hi) % q
        out.append(np.where(y > q // 2, y - q, y))
    return out


def bconv(x: RnsPolynomial, target: RnsBasis) -> RnsPolynomial:
    """Approximate fast base conversion of ``x`` onto ``target``.

    For a coefficient with centered value v the result represents
    v + e*M (M the source product) with |e| <= len(source)/2 + 1/2.
    """
    if x.domain != Domain.COEFF:
        raise DomainMismatch("basis conversion runs in coefficient domain")
    if not x.basis.disjoint(target):
        raise BasisOverlap("source and target share moduli")
    ys = _scaled_source(x)
    H = x.basis.hat_mod(target)
    dt = _dtype(target)
    rows = []
    for j, p in enumerate(target.moduli):
        acc = np.zeros(x.n, dtype=dt)
        for i, y in enumerate(ys):
            acc = (acc + (y % p) * int(H[i, j])) % p
        rows.append(acc)
    return RnsPolynomial(np.stack(rows).astype(dt), target, Domain.COEFF, x.level)


def bconv_fused_t_to_q(x: RnsPolynomial, target: RnsBasis) -> RnsPolynomial:
    """Single-hop conversion from the auxiliary basis straight onto Q.

    Only one approximation is taken, so the result is v + T*e.
    """
    return bconv(x, target)


def bconv_two_step(x: RnsPolynomial, middle: RnsBasis, target: RnsBasis) -> RnsPolynomial:
    """Reference route through an intermediate basis: v + T*e1 + P*e2."""
    return bconv(bconv(x, middle), target)


def mod_down(x: RnsPolynomial, p_basis: RnsBasis, q_basis: RnsBasis) -> RnsPolynomial:
    """Approximate division by P = prod(p_basis), landing on ``q_basis``.

    Computes (x - BConv_{P->Q}([x]_P)) * P^-1 limb by limb.
    """
    if x.domain != Domain.COEFF:
        raise DomainMismatch("ModDown runs in coefficient domain")
    xp = x.restrict(p_basis)
    xq = x.restrict(q_basis)
    conv = bconv(xp, q_basis)
    P = p_basis.product
    rows = []
    for a, c, q in zip(xq.limbs, conv.limbs, q_basis.moduli):
        rows.append(((a - c) % q * pow(P % q, -1, q)) % q)
    return RnsPolynomial(np.stack(rows), q_basis, Domain.COEFF, x.level)
