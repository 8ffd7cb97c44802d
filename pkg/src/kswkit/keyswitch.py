"""Hybrid and KLSS key switching over RNS, with a small RLWE harness.

Limb layout. The extended modulus at level l is ordered P-first,
``[p_0 .. p_{alpha-1}, q_0 .. q_l]``. Hybrid digits are contiguous runs of
alpha Q-limbs. KLSS groups are contiguous runs of alpha' limbs of the
extended modulus; the P-first order keeps every full group identical
across levels, so their keys can be shared.

KLSS key material. For digit n the hybrid key (b_n, a_n) satisfies
``b_n + a_n*s_to = P*g_n*s_from + e_n (mod PQ)`` where g_n is 1 on the
limbs of digit n and 0 elsewhere. The grid entry K[j][m][n] is that key
restricted to group m and lifted to its centered integer; it is stored
in NTT form over the auxiliary basis T. T is large enough that
``sum_n D_n * K[j][m][n]`` never wraps, so each group's integer is
recovered exactly and the groups CRT-combine to the same value the
hybrid inner product would produce.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import ceil, log2, prod

import numpy as np

from kswkit import ntt
from kswkit.errors import BadExponent, BadWeight, LevelExhausted, LevelMismatch
from kswkit.modring import PrimeContext, ntt_primes
from kswkit.ntt import Domain
from kswkit.rns import (
    RnsBasis,
    RnsPolynomial,
    bconv,
    bconv_fused_t_to_q,
    crt_reconstruct,
    decompose,
    mod_down,
)

# gaussian samples are clipped at this many standard deviations
TAIL = 6.0


@dataclass(frozen=True)
class KswParams:
    n: int = 1024
    L: int = 8
    dnum: int = 2
    alpha_prime: int = 2
    h: int = 64
    sigma: float = 3.2
    word_bits: int = 28
    alpha_override: int | None = None
    ip_defer_bits: int = 6
    t_limbs_override: int | None = None

    def __post_init__(self):
        if self.L < 0 or self.dnum < 1 or self.alpha_prime < 1:
            raise ValueError("need L >= 0, dnum >= 1, alpha' >= 1")
        if self.h > self.n:
            raise BadWeight(f"h={self.h} exceeds N={self.n}")
        if self.alpha * self.dnum < self.L + 1 and self.alpha_override is None:
            raise ValueError("alpha*dnum must cover L+1 limbs")

    @property
    def alpha(self) -> int:
        if self.alpha_override is not None:
            return self.alpha_override
        return ceil((self.L + 1) / self.dnum)

    @property
    def k(self) -> int:
        return self.alpha

    def beta(self, l: int) -> int:
        return ceil((l + 1) / self.alpha)

    def beta_tilde(self, l: int) -> int:
        return ceil((l + self.alpha + 1) / self.alpha_prime)

    @property
    def t_limbs(self) -> int:
        """Auxiliary limb count so the exact inner product never wraps.

        The KLSS inner product sums beta*N products of a converted digit
        (at most Q_digit*(alpha+2)/2) and a key coefficient (at most
        G/2); T must exceed eight times that so the float rounding in
        recovery has slack.
        """
        if self.t_limbs_override is not None:
            return self.t_limbs_override
        w = self.word_bits
        bound_bits = (
            log2(self.beta(self.L)) + log2(self.n) + log2((self.alpha + 2) / 2)
            + w * self.alpha + w * self.alpha_prime - 1 + 3
        )
        return ceil((bound_bits + 1) / (w - 1))

    @cached_property
    def _primes(self) -> list[PrimeContext]:
        count = self.L + 1 + self.alpha + self.t_limbs
        return [PrimeContext.build(q, self.n) for q in ntt_primes(self.word_bits, self.n, count)]

    @cached_property
    def q_basis(self) -> RnsBasis:
        return RnsBasis(tuple(self._primes[: self.L + 1]), ("Q",) * (self.L + 1))

    @cached_property
    def p_basis(self) -> RnsBasis:
        a = self.L + 1
        return RnsBasis(tuple(self._primes[a : a + self.alpha]), ("P",) * self.alpha)

    @cached_property
    def t_basis(self) -> RnsBasis:
        a = self.L + 1 + self.alpha
        return RnsBasis(tuple(self._primes[a:]), ("T",) * self.t_limbs)

    def q_level(self, l: int) -> RnsBasis:
        return self.q_basis.sub(range(l + 1))

    def pq_level(self, l: int) -> RnsBasis:
        return self.p_basis + self.q_level(l)

    def digit_basis(self, l: int, n: int) -> RnsBasis:
        lo, hi = n * self.alpha, min((n + 1) * self.alpha, l + 1)
        return self.q_basis.sub(range(lo, hi))

    def group_basis(self, l: int, m: int) -> RnsBasis:
        pq = self.pq_level(l)
        lo, hi = m * self.alpha_prime, min((m + 1) * self.alpha_prime, len(pq))
        return pq.sub(range(lo, hi))

    def noise_bound(self, l: int) -> float:
        """Worst-case keyswitch residual at level l (both methods)."""
        a = self.alpha
        qmax = prod(sorted(self.q_basis.moduli, reverse=True)[:a])
        ratio = qmax / self.p_basis.product
        ip = self.beta(l) * self.n * (a + 2) / 2 * ratio * TAIL * self.sigma
        return ip + (a / 2 + 1) * (self.h + 1)


@dataclass(frozen=True)
class SecretKey:
    coeffs: np.ndarray  # ternary integers, length N

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self.coeffs))

    def rns(self, basis: RnsBasis, domain: Domain = Domain.EVAL) -> RnsPolynomial:
        p = decompose(self.coeffs, basis)
        return p.to_eval() if domain == Domain.EVAL else p


def keygen(params: KswParams, seed: int) -> SecretKey:
    """Ternary secret with exactly ``h`` nonzero coefficients."""
    if params.h > params.n:
        raise BadWeight(f"h={params.h} exceeds N={params.n}")
    rng = np.random.default_rng(seed)
    s = np.zeros(params.n, dtype=np.int64)
    pos = rng.choice(params.n, size=params.h, replace=False)
    s[pos] = rng.choice(np.array([-1, 1]), size=params.h)
    return SecretKey(s)


def poly_mul_int(a, b) -> np.ndarray:
    """Negacyclic product of two integer polynomials (python ints)."""
    n = len(a)
    full = np.convolve(np.asarray(a, dtype=object), np.asarray(b, dtype=object))
    out = full[:n].copy()
    out[: len(full) - n] -= full[n:]
    return out


def square_key(s: SecretKey) -> SecretKey:
    return SecretKey(poly_mul_int(s.coeffs, s.coeffs).astype(np.int64))


def _gaussian(rng, n: int, sigma: float) -> np.ndarray:
    e = np.rint(rng.normal(0.0, sigma, n))
    return np.clip(e, -TAIL * sigma, TAIL * sigma).astype(np.int64)


def _uniform(rng, basis: RnsBasis, domain: Domain) -> RnsPolynomial:
    rows = np.stack([rng.integers(0, q, basis.n, dtype=np.int64) for q in basis.moduli])
    return RnsPolynomial(rows, basis, domain)


# ---------------------------------------------------------------------------
# keys


@dataclass
class SwitchingKeyHybrid:
    """Per digit n, a pair (b_n, a_n) over P+Q_L in evaluation domain."""

    digits: list[tuple[RnsPolynomial, RnsPolynomial]]
    params: KswParams = field(repr=False)


@dataclass
class SwitchingKeyKlss:
    """Grid of auxiliary-basis keys, built lazily per group.

    ``entry(l, j, m, n)`` is K[j][m][n] at level l. The dense grid for one
    level has shape 2 x beta_tilde(l) x beta(l).
    """

    hybrid: SwitchingKeyHybrid = field(repr=False)
    params: KswParams = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def shape(self, l: int) -> tuple[int, int, int]:
        return (2, self.params.beta_tilde(l), self.params.beta(l))

    def entry(self, l: int, j: int, m: int, n: int) -> RnsPolynomial:
        g = self.params.group_basis(l, m)
        key = (g.moduli, j, n)
        if key not in self._cache:
            src = self.hybrid.digits[n][j].restrict(g).to_coeff()
            lifted = decompose(crt_reconstruct(src), self.params.t_basis)
            self._cache[key] = lifted.to_eval()
        return self._cache[key]

    def grid(self, l: int) -> list[list[list[RnsPolynomial]]]:
        _, bt, b = self.shape(l)
        return [[[self.entry(l, j, m, n) for n in range(b)] for m in range(bt)] for j in range(2)]


def _gadget(params: KswParams, n: int, basis: RnsBasis) -> list[int]:
    """P*g_n reduced per limb of ``basis``."""
    digit = set(params.digit_basis(params.L, n).moduli)
    P = params.p_basis.product
    return [(P % q) if q in digit else 0 for q in basis.moduli]


def gen_swk_hybrid(s_from: SecretKey, s_to: SecretKey, params: KswParams,
                   seed: int) -> SwitchingKeyHybrid:
    rng = np.random.default_rng(seed)
    basis = params.pq_level(params.L)
    sf = s_from.rns(basis)
    st = s_to.rns(basis)
    digits = []
    for n in range(params.beta(params.L)):
        a = _uniform(rng, basis, Domain.EVAL)
        e = decompose(_gaussian(rng, params.n, params.sigma), basis).to_eval()
        gad = _gadget(params, n, basis)
        rows = []
        for i, q in enumerate(basis.moduli):
            v = (-a.limbs[i] * st.limbs[i] + e.limbs[i] + gad[i] * sf.limbs[i]) % q
            rows.append(v)
        b = RnsPolynomial(np.stack(rows), basis, Domain.EVAL)
        digits.append((b, a))
    return SwitchingKeyHybrid(digits, params)


def gen_swk_klss(s_from: SecretKey, s_to: SecretKey, params: KswParams,
                 seed: int) -> SwitchingKeyKlss:
    return SwitchingKeyKlss(gen_swk_hybrid(s_from, s_to, params, seed), params)


# ---------------------------------------------------------------------------
# kernels


def inner_product(xs: list[np.ndarray], ys: list[np.ndarray], moduli,
                  defer_bits: int = 6) -> np.ndarray:
    """sum_i xs[i]*ys[i] per limb, reducing only every 2^w products.

    Arrays have shape (limbs, N). The deferral window shrinks
    automatically so the int64 accumulator can never overflow.
    """
    qs = np.array(moduli, dtype=object).reshape(-1, 1)
    qmax = max(moduli)
    headroom = 63 - 2 * qmax.bit_length()
    if headroom < 0:
        acc = np.zeros_like(np.asarray(xs[0], dtype=object))
        for x, y in zip(xs, ys):
            acc = (acc + np.asarray(x, dtype=object) * np.asarray(y, dtype=object)) % qs
        return acc
    window = 1 << min(defer_bits, headroom)
    qv = qs.astype(np.int64)
    acc = np.zeros(np.shape(xs[0]), dtype=np.int64)
    pending = 0
    for x, y in zip(xs, ys):
        acc += x.astype(np.int64) * y.astype(np.int64)
        pending += 1
        if pending == window:
            acc %= qv
            pending = 0
    return acc % qv


def _assemble(parts: dict[int, np.ndarray], basis: RnsBasis, dtype) -> np.ndarray:
    return np.stack([parts[q] for q in basis.moduli]).astype(dtype)


def _mod_up(d: RnsPolynomial, digit: RnsBasis, full: RnsBasis) -> RnsPolynomial:
    """Extend digit residues to the whole of ``full`` (approximate outside)."""
    dn = d.restrict(digit)
    rest = full.sub(i for i, q in enumerate(full.moduli) if q not in set(digit.moduli))
    parts = {q: r for q, r in zip(digit.moduli, dn.limbs)}
    if len(rest):
        ext = bconv(dn, rest)
        parts.update({q: r for q, r in zip(rest.moduli, ext.limbs)})
    return RnsPolynomial(_assemble(parts, full, dn.limbs.dtype), full, Domain.COEFF)


def _level_of(d: RnsPolynomial, params: KswParams) -> int:
    l = len(d.basis) - 1
    if l < 0:
        raise LevelExhausted("no live limbs")
    if d.basis.moduli != params.q_level(l).moduli:
        raise LevelMismatch("input limbs are not a prefix of the Q chain")
    return l


def keyswitch_hybrid(d: RnsPolynomial, swk: SwitchingKeyHybrid, params: KswParams,
                     trace: list | None = None) -> tuple[RnsPolynomial, RnsPolynomial]:
    """Decompose, mod-up, inner product with the digit keys, ModDown."""
    if d.domain != Domain.COEFF:
        d = d.to_coeff()
    l = _level_of(d, params)
    full = params.pq_level(l)
    digits = []
    for n in range(params.beta(l)):
        up = _mod_up(d, params.digit_basis(l, n), full).to_eval()
        digits.append(up.limbs)
        if trace is not None:
            trace.append(("ntt_group", n))
    out = []
    for j in range(2):
        keys = [swk.digits[n][j].restrict(full).limbs for n in range(len(digits))]
        if trace is not None:
            trace.extend(("ip", j, 0, n) for n in range(len(digits)))
        acc = inner_product(digits, keys, full.moduli, params.ip_defer_bits)
        c = RnsPolynomial(acc, full, Domain.EVAL).to_coeff()
        out.append(mod_down(c, params.p_basis, params.q_level(l)))
    if trace is not None:
        trace.append(("intt_group", 0))
    return out[0], out[1]


def recover_exact(x: RnsPolynomial, target: RnsBasis) -> RnsPolynomial:
    """Exact conversion of a small centered value (|v| < M/8) to ``target``.

    Approximate fast conversion gives v + M*e; e is recovered as
    rint(sum y_i/m_i) in double precision and removed.
    """
    approx = bconv(x, target)
    fr = np.zeros(x.n)
    for row, q, hi in zip(x.limbs, x.basis.moduli, x.basis.hat_inv):
        y = (row * hi) % q
        y = np.where(y > q // 2, y - q, y)
        fr += y.astype(np.float64) / q
    e = np.rint(fr).astype(np.int64)
    M = x.basis.product
    rows = [(a - e * (M % p)) % p for a, p in zip(approx.limbs, target.moduli)]
    return RnsPolynomial(np.stack(rows), target, Domain.COEFF, x.level)


def keyswitch_klss(d: RnsPolynomial, swk: SwitchingKeyKlss, params: KswParams,
                   trace: list | None = None,
                   fused: bool = False) -> tuple[RnsPolynomial, RnsPolynomial]:
    """Gadget-decompose into T, inner product on the grid, recover limbs, ModDown.

    With ``fused=True`` the group that coincides with P (requires
    alpha == alpha') is not recovered onto P; its T-value is converted
    straight to Q instead.
    """
    if d.domain != Domain.COEFF:
        d = d.to_coeff()
    l = _level_of(d, params)
    tb = params.t_basis
    beta, bt = params.beta(l), params.beta_tilde(l)
    if fused and params.group_basis(l, 0).moduli != params.p_basis.moduli:
        raise ValueError("fused conversion needs the first group to equal P (alpha == alpha')")
    dig = []
    for n in range(beta):
        dn = d.restrict(params.digit_basis(l, n))
        dig.append(bconv(dn, tb).to_eval().limbs)
        if trace is not None:
            trace.append(("ntt_group", n))
    acc = [[None] * bt for _ in range(2)]
    for j in range(2):
        for m in range(bt):
            keys = [swk.entry(l, j, m, n).limbs for n in range(beta)]
            if trace is not None:
                trace.extend(("ip", j, m, n) for n in range(beta))
            acc[j][m] = inner_product(dig, keys, tb.moduli, params.ip_defer_bits)
    full = params.pq_level(l)
    ql = params.q_level(l)
    out = []
    recovered = [dict() for _ in range(2)]
    first = []
    for m in range(bt):
        g = params.group_basis(l, m)
        for j in range(2):
            ct = RnsPolynomial(acc[j][m], tb, Domain.EVAL).to_coeff()
            if fused and m == 0:
                first.append(ct)
                continue
            r = recover_exact(ct, g)
            recovered[j].update({q: row for q, row in zip(g.moduli, r.limbs)})
        if trace is not None:
            trace.append(("intt_group", m))
    for j in range(2):
        if fused:
            conv = bconv_fused_t_to_q(first[j], ql)
            P = params.p_basis.product
            rows = []
            for q, c in zip(ql.moduli, conv.limbs):
                rows.append(((recovered[j][q] - c) % q * pow(P % q, -1, q)) % q)
            out.append(RnsPolynomial(np.stack(rows), ql, Domain.COEFF))
        else:
            x = RnsPolynomial(_assemble(recovered[j], full, np.int64), full, Domain.COEFF)
            out.append(mod_down(x, params.p_basis, ql))
    return out[0], out[1]


def keyswitch(d, swk, params, method: str = "klss", **kw):
    if method == "hybrid":
        sw = swk.hybrid if isinstance(swk, SwitchingKeyKlss) else swk
        return keyswitch_hybrid(d, sw, params, **kw)
    if method == "klss":
        return keyswitch_klss(d, swk, params, **kw)
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# ciphertexts


@dataclass
class Ciphertext:
    c0: RnsPolynomial
    c1: RnsPolynomial
    level: int
    scale: float = 1.0


def encrypt(m, s: SecretKey, params: KswParams, l: int, seed: int,
            scale: float = 1.0) -> Ciphertext:
    """Secret-key RLWE encryption of the integer polynomial m at level l."""
    rng = np.random.default_rng(seed)
    basis = params.q_level(l)
    a = _uniform(rng, basis, Domain.EVAL)
    e = _gaussian(rng, params.n, params.sigma)
    me = decompose(np.asarray(m, dtype=object) + e, basis).to_eval()
    c0 = (me - a * s.rns(basis)).to_coeff()
    return Ciphertext(c0, a.to_coeff(), l, scale)


def decrypt(ct: Ciphertext, s: SecretKey) -> list[int]:
    basis = ct.c0.basis
    v = ct.c0.to_eval() + ct.c1.to_eval() * s.rns(basis)
    return crt_reconstruct(v.to_coeff())


def rescale(x: RnsPolynomial) -> RnsPolynomial:
    """Divide by the top limb with rounding toward its centered residue."""
    top = x.basis.moduli[-1]
    last = x.limbs[-1]
    last_c = np.where(last > top // 2, last - top, last)
    lower = x.basis.sub(range(len(x.basis) - 1))
    rows = []
    for row, q in zip(x.limbs[:-1], lower.moduli):
        rows.append(((row - last_c) % q * pow(top % q, -1, q)) % q)
    return RnsPolynomial(np.stack(rows), lower, Domain.COEFF)


def hmult_relin(ct_a: Ciphertext, ct_b: Ciphertext, swk, params: KswParams,
                method: str = "klss") -> Ciphertext:
    """Tensor, relinearise with ``swk`` (s^2 -> s) and rescale by one limb."""
    if ct_a.level != ct_b.level:
        raise LevelMismatch(f"levels {ct_a.level} and {ct_b.level}")
    if ct_a.level < 1:
        raise LevelExhausted("hmult needs level >= 1")
    a0, a1 = ct_a.c0.to_eval(), ct_a.c1.to_eval()
    b0, b1 = ct_b.c0.to_eval(), ct_b.c1.to_eval()
    d0 = a0 * b0
    d1 = a0 * b1 + a1 * b0
    d2 = (a1 * b1).to_coeff()
    u0, u1 = keyswitch(d2, swk, params, method)
    c0 = d0.to_coeff() + u0
    c1 = d1.to_coeff() + u1
    top = c0.basis.moduli[-1]
    return Ciphertext(rescale(c0), rescale(c1), ct_a.level - 1,
                      ct_a.scale * ct_b.scale / top)


def automorph(x: RnsPolynomial, k: int) -> RnsPolynomial:
    """X -> X^k on coefficients: pure index permutation with sign flips."""
    n = x.n
    if k % 2 == 0:
        raise BadExponent(f"k={k} is even")
    if x.domain != Domain.COEFF:
        raise ValueError("automorphism is applied in coefficient domain")
    idx = (np.arange(n) * k) % (2 * n)
    neg = idx >= n
    dst = np.where(neg, idx - n, idx)
    rows = np.empty_like(x.limbs)
    for r, (row, q) in enumerate(zip(x.limbs, x.basis.moduli)):
        rows[r, dst] = np.where(neg, (-row) % q, row)
    return RnsPolynomial(rows, x.basis, x.domain, x.level)


# ---------------------------------------------------------------------------
# measurement


def _log2_inf(values) -> float:
    m = max((abs(int(v)) for v in values), default=0)
    return float("-inf") if m == 0 else log2(m)


def noise_of(ct_or_pair, s: SecretKey, reference) -> float:
    """log2 of ||c0 + c1*s - reference||_inf (centered), -inf when exact."""
    if isinstance(ct_or_pair, Ciphertext):
        c0, c1 = ct_or_pair.c0, ct_or_pair.c1
    else:
        c0, c1 = ct_or_pair
    basis = c0.basis
    v = crt_reconstruct((c0.to_eval() + c1.to_eval() * s.rns(basis)).to_coeff())
    M = basis.product
    diff = []
    for a, b in zip(v, reference):
        r = (a - int(b)) % M
        diff.append(r - M if r > M // 2 else r)
    return _log2_inf(diff)


def keyswitch_residual(d: RnsPolynomial, out, s_from: SecretKey, s_to: SecretKey) -> list[int]:
    """Centered coefficients of u0 + u1*s_to - d*s_from over the live Q limbs."""
    u0, u1 = out
    basis = u0.basis
    v = u0.to_eval() + u1.to_eval() * s_to.rns(basis) - d.to_eval() * s_from.rns(basis)
    return crt_reconstruct(v.to_coeff())


def residual_norm(d, out, s_from, s_to) -> int:
    return max(abs(v) for v in keyswitch_residual(d, out, s_from, s_to))
