"""Negacyclic NTT: standard, four-step and seven-stage multi-step variants.

Every variant is natural-order in and out. All butterfly twiddles and
twist factors are read from a precomputed :class:`TwiddleSchedule`; the
kernels never derive roots on the fly, so corrupting a schedule entry
corrupts the transform (used as a negative control by the CLI).

Index conventions for the split ``N = N1*N2``: input ``x[n1*N2 + n2]``,
output ``X[k1 + N1*k2]``. The column transforms are negacyclic of size
N1 (root psi^N2); after the twist psi^(n2*(2*k1+1)) the row transforms are
cyclic of size N2 (root omega = psi^(2*N1)).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np

from kswkit.errors import BadSplit, DomainMismatch
from kswkit.modring import PrimeContext

VARIANTS = ("standard", "four-step", "multi-step")


class Domain(str, Enum):
    COEFF = "coefficient"
    EVAL = "evaluation"


@dataclass
class PolyVector:
    coeffs: np.ndarray
    domain: Domain = Domain.COEFF
    ordering: str = "natural"

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs)
        if self.coeffs.ndim != 1:
            raise ValueError("PolyVector holds a single length-N vector")


def _log2(n: int) -> int:
    if n < 1 or n & (n - 1):
        raise BadSplit(f"{n} is not a power of two")
    return n.bit_length() - 1


def default_split(n: int) -> tuple[int, int]:
    """Balanced split; the first factor takes the extra 2 when log2 n is odd."""
    lg = _log2(n)
    b = lg // 2
    return 1 << (lg - b), 1 << b


def bitrev(x: int, bits: int) -> int:
    return int(format(x, f"0{bits}b")[::-1], 2) if bits else 0


# ---------------------------------------------------------------------------
# root trees for x^m - c


def root_exponents(m: int, cyclic: bool) -> tuple[list[list[int]], int, list[int]]:
    """Exponents of the butterfly roots for an m-point transform.

    Roots are powers of zeta, where zeta has order 2m (negacyclic) or m
    (cyclic). Returns (per-layer group root exponents, order of zeta,
    evaluation exponent held at each output slot).
    """
    order = m if cyclic else 2 * m
    cs = [0 if cyclic else m]
    layers = []
    for _ in range(_log2(m)):
        rs = [c // 2 for c in cs]
        layers.append(rs)
        cs = [e for r in rs for e in (r, (r + order // 2) % order)]
    return layers, order, [c % order if order else 0 for c in cs]


def closed_form_exponent(m: int, cyclic: bool, layer: int, group: int) -> int:
    """Closed-form root exponent; must agree with :func:`root_exponents`."""
    lg = _log2(m)
    if cyclic:
        return bitrev(group, layer) * (m >> (layer + 1))
    return bitrev((1 << layer) + group, lg)


@dataclass(frozen=True)
class KernelTable:
    """Butterfly twiddles of one sub-transform stage.

    ``tw`` has shape (passes, layers, m/2): entry [p, s, b] is the factor
    used by butterfly b of layer s on the p-th row this stage processes.
    """

    name: str
    m: int
    cyclic: bool
    zeta: int
    tw: np.ndarray = field(repr=False)
    itw: np.ndarray = field(repr=False)
    perm: np.ndarray = field(repr=False)
    m_inv: int = 0


def _kernel_table(name: str, m: int, cyclic: bool, zeta: int, q: int,
                  passes: int, dtype) -> KernelTable:
    layers, order, finals = root_exponents(m, cyclic)
    nl = len(layers)
    half = max(m // 2, 1)
    row = np.zeros((nl, half), dtype=object)
    irow = np.zeros((nl, half), dtype=object)
    zinv = pow(zeta, -1, q)
    for s, rs in enumerate(layers):
        t = m >> (s + 1)
        for b in range(m // 2):
            e = rs[b // t]
            row[s, b] = pow(zeta, e, q)
            irow[s, b] = pow(zinv, e, q)
    tw = np.broadcast_to(row.astype(dtype), (passes, nl, half)).copy()
    itw = np.broadcast_to(irow.astype(dtype), (passes, nl, half)).copy()
    slot = {e: p for p, e in enumerate(finals)}
    if cyclic:
        want = [k % order if order else 0 for k in range(m)]
    else:
        want = [(2 * k + 1) % order for k in range(m)]
    perm = np.array([slot[e] for e in want], dtype=np.int64)
    return KernelTable(name, m, cyclic, zeta, tw, itw, perm, pow(m, -1, q))


def _ct(a: np.ndarray, kt: KernelTable, q: int) -> np.ndarray:
    """Forward kernel over the last axis; a has shape (..., passes, m)."""
    m = kt.m
    if m == 1:
        return a
    lead = a.shape[:-1]
    P = kt.tw.shape[0]
    a = a.copy()
    for s in range(kt.tw.shape[1]):
        g = 1 << s
        t = m >> (s + 1)
        v = a.reshape(lead[:-1] + (P, g, 2, t))
        w = kt.tw[:, s, :].reshape(P, g, t)
        u0 = v[..., 0, :]
        u1 = (v[..., 1, :] * w) % q
        v0 = (u0 + u1) % q
        v1 = (u0 - u1) % q
        v[..., 0, :] = v0
        v[..., 1, :] = v1
        a = v.reshape(lead + (m,))
    return a[..., kt.perm]


def _gs(a: np.ndarray, kt: KernelTable, q: int) -> np.ndarray:
    """Inverse kernel, including the 1/m scaling."""
    m = kt.m
    if m == 1:
        return a.copy()
    lead = a.shape[:-1]
    P = kt.itw.shape[0]
    b = np.empty_like(a)
    b[..., kt.perm] = a
    a = b
    for s in reversed(range(kt.itw.shape[1])):
        g = 1 << s
        t = m >> (s + 1)
        v = a.reshape(lead[:-1] + (P, g, 2, t))
        w = kt.itw[:, s, :].reshape(P, g, t)
        u0 = v[..., 0, :]
        u1 = v[..., 1, :]
        v0 = (u0 + u1) % q
        v1 = ((u0 - u1) % q * w) % q
        v[..., 0, :] = v0
        v[..., 1, :] = v1
        a = v.reshape(lead + (m,))
    return (a * kt.m_inv) % q


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class TwiddleSchedule:
    variant: str
    n: int
    q: int
    split: tuple[int, ...]
    stages: dict = field(repr=False)
    twists: dict = field(repr=False)

    def fixed_stage_names(self) -> tuple[str, ...]:
        """Stages whose tables must not vary from pass to pass."""
        if self.variant == "multi-step":
            return ("N12", "N21", "N22")
        return ()

    def is_pass_invariant(self, name: str) -> bool:
        tw = self.stages[name].tw
        return bool(np.all(tw == tw[:1]))


def _twist(rows: int, cols: int, root: int, q: int, f, dtype) -> tuple[np.ndarray, np.ndarray]:
    """Table root^f(r, c) of shape (rows, cols) and its inverse."""
    e = np.array([[f(r, c) for c in range(cols)] for r in range(rows)], dtype=object)
    inv = pow(root, -1, q)
    fw = np.vectorize(lambda x: pow(root, int(x), q), otypes=[object])(e)
    bw = np.vectorize(lambda x: pow(inv, int(x), q), otypes=[object])(e)
    return fw.astype(dtype), bw.astype(dtype)


def _check_split(n: int, split: tuple[int, ...], parts: int) -> None:
    if len(split) != parts or any(s < 1 or s & (s - 1) for s in split):
        raise BadSplit(f"need {parts} power-of-two factors, got {split}")
    if int(np.prod(split)) != n:
        raise BadSplit(f"split {split} does not multiply to N={n}")


@lru_cache(maxsize=256)
def _schedule(variant: str, ctx: PrimeContext, split: tuple[int, ...]) -> TwiddleSchedule:
    n, q, psi, dt = ctx.n, ctx.q, ctx.psi, ctx.dtype
    if variant == "standard":
        st = {"N": _kernel_table("N", n, False, psi, q, 1, dt)}
        return TwiddleSchedule(variant, n, q, (n,), st, {})
    if variant == "four-step":
        _check_split(n, split, 2)
        n1, n2 = split
        omega = pow(psi, 2 * n1, q)
        st = {
            "N1": _kernel_table("N1", n1, False, pow(psi, n2, q), q, n2, dt),
            "N2": _kernel_table("N2", n2, True, omega, q, n1, dt),
        }
        tws = {"hadamard": _twist(n2, n1, psi, q, lambda a, b: a * (2 * b + 1), dt)}
        return TwiddleSchedule(variant, n, q, split, st, tws)
    if variant == "multi-step":
        _check_split(n, split, 4)
        n11, n12, n21, n22 = split
        n1, n2 = n11 * n12, n21 * n22
        psi1 = pow(psi, n2, q)
        omega = pow(psi, 2 * n1, q)
        st = {
            "N11": _kernel_table("N11", n11, False, pow(psi1, n12, q), q, n2 * n12, dt),
            "N12": _kernel_table("N12", n12, True, pow(psi1, 2 * n11, q), q, n2 * n11, dt),
            "N21": _kernel_table("N21", n21, True, pow(omega, n22, q), q, n1 * n22, dt),
            "N22": _kernel_table("N22", n22, True, pow(omega, n21, q), q, n1 * n21, dt),
        }
        tws = {
            "N1-twist": _twist(n12, n11, psi1, q, lambda a, b: a * (2 * b + 1), dt),
            "hadamard": _twist(n2, n1, psi, q, lambda a, b: a * (2 * b + 1), dt),
            "N2-twist": _twist(n22, n21, omega, q, lambda a, b: a * b, dt),
        }
        return TwiddleSchedule(variant, n, q, split, st, tws)
    raise ValueError(f"unknown variant {variant!r}")


def corrupted(schedule: TwiddleSchedule, stage: str, index: tuple[int, int, int] = (0, 0, 0),
              delta: int = 1) -> TwiddleSchedule:
    """Copy of ``schedule`` with one forward twiddle perturbed (test hook)."""
    kt = schedule.stages[stage]
    tw = kt.tw.copy()
    tw[index] = (tw[index] + delta) % schedule.q
    stages = dict(schedule.stages)
    stages[stage] = KernelTable(kt.name, kt.m, kt.cyclic, kt.zeta, tw, kt.itw, kt.perm, kt.m_inv)
    return TwiddleSchedule(schedule.variant, schedule.n, schedule.q, schedule.split,
                           stages, schedule.twists)


def twiddle_schedule(variant: str, ctx: PrimeContext,
                     split: tuple[int, ...] | None = None) -> TwiddleSchedule:
    """Build (or fetch from cache) the twiddle schedule for one variant."""
    if split is None:
        if variant == "four-step":
            split = default_split(ctx.n)
        elif variant == "multi-step":
            a, b = default_split(ctx.n)
            split = default_split(a) + default_split(b)
        else:
            split = (ctx.n,)
    return _schedule(variant, ctx, tuple(int(s) for s in split))


# ---------------------------------------------------------------------------
# array-level transforms; x has shape (..., N)


def _fwd_standard(x, sch: TwiddleSchedule, trace):
    out = _ct(x[..., None, :], sch.stages["N"], sch.q)[..., 0, :]
    if trace is not None:
        trace.append(("N", out.copy()))
    return out


def _inv_standard(x, sch: TwiddleSchedule):
    return _gs(x[..., None, :], sch.stages["N"], sch.q)[..., 0, :]


def _fwd_four(x, sch: TwiddleSchedule, trace):
    q = sch.q
    n1, n2 = sch.split
    lead = x.shape[:-1]
    a = np.swapaxes(x.reshape(lead + (n1, n2)), -1, -2)            # [n2, n1]
    a = _ct(a, sch.stages["N1"], q)                                  # [n2, k1]
    _mark(trace, "N1-NTT", a)
    a = np.swapaxes((a * sch.twists["hadamard"][0]) % q, -1, -2)     # [k1, n2]
    _mark(trace, "transpose+hadamard", a)
    a = _ct(a, sch.stages["N2"], q)                                  # [k1, k2]
    _mark(trace, "N2-NTT", a)
    return np.swapaxes(a, -1, -2).reshape(lead + (sch.n,))


def _inv_four(x, sch: TwiddleSchedule):
    q = sch.q
    n1, n2 = sch.split
    lead = x.shape[:-1]
    a = np.swapaxes(x.reshape(lead + (n2, n1)), -1, -2)
    a = _gs(a, sch.stages["N2"], q)
    a = (np.swapaxes(a, -1, -2) * sch.twists["hadamard"][1]) % q
    a = _gs(a, sch.stages["N1"], q)
    return np.swapaxes(a, -1, -2).reshape(lead + (sch.n,))


def _mark(trace, name, a):
    if trace is not None:
        trace.append((name, np.array(a, copy=True)))


def _fwd_multi(x, sch: TwiddleSchedule, trace):
    q = sch.q
    n11, n12, n21, n22 = sch.split
    n1, n2 = n11 * n12, n21 * n22
    lead = x.shape[:-1]
    st, tw = sch.stages, sch.twists
    # columns of the N1 x N2 matrix, each split as n1 = n11*N12 + n12
    a = np.swapaxes(x.reshape(lead + (n1, n2)), -1, -2)                 # [n2, n1]
    a = np.swapaxes(a.reshape(lead + (n2, n11, n12)), -1, -2)           # [n2, n12, n11]
    # stage 1: N11-NTT
    a = _ct(a.reshape(lead + (n2 * n12, n11)), st["N11"], q)
    _mark(trace, "N11-NTT", a)
    # stage 2: N1 intra-transpose + twist
    a = (a.reshape(lead + (n2, n12, n11)) * tw["N1-twist"][0]) % q
    a = np.swapaxes(a, -1, -2)                                           # [n2, k11, n12]
    _mark(trace, "N1-transpose+twist", a)
    # stage 3: N12-NTT
    a = _ct(a.reshape(lead + (n2 * n11, n12)), st["N12"], q)
    _mark(trace, "N12-NTT", a)
    # stage 4: transpose-with-buffer + Hadamard
    a = np.swapaxes(a.reshape(lead + (n2, n11, n12)), -1, -2)           # [n2, k12, k11]
    a = (a.reshape(lead + (n2, n1)) * tw["hadamard"][0]) % q            # [n2, k1]
    a = np.swapaxes(a, -1, -2)                                           # [k1, n2]
    a = np.swapaxes(a.reshape(lead + (n1, n21, n22)), -1, -2)           # [k1, n22, n21]
    _mark(trace, "transpose+hadamard", a)
    # stage 5: N21-NTT
    a = _ct(a.reshape(lead + (n1 * n22, n21)), st["N21"], q)
    _mark(trace, "N21-NTT", a)
    # stage 6: N2 intra-transpose + twist
    a = (a.reshape(lead + (n1, n22, n21)) * tw["N2-twist"][0]) % q
    a = np.swapaxes(a, -1, -2)                                           # [k1, k21, n22]
    _mark(trace, "N2-transpose+twist", a)
    # stage 7: N22-NTT
    a = _ct(a.reshape(lead + (n1 * n21, n22)), st["N22"], q)
    _mark(trace, "N22-NTT", a)
    a = np.swapaxes(a.reshape(lead + (n1, n21, n22)), -1, -2)           # [k1, k22, k21]
    a = a.reshape(lead + (n1, n2))                                       # [k1, k2]
    return np.swapaxes(a, -1, -2).reshape(lead + (sch.n,))


def _inv_multi(x, sch: TwiddleSchedule):
    q = sch.q
    n11, n12, n21, n22 = sch.split
    n1, n2 = n11 * n12, n21 * n22
    lead = x.shape[:-1]
    st, tw = sch.stages, sch.twists
    a = np.swapaxes(x.reshape(lead + (n2, n1)), -1, -2)                 # [k1, k2]
    a = np.swapaxes(a.reshape(lead + (n1, n22, n21)), -1, -2)           # [k1, k21, k22]
    a = _gs(a.reshape(lead + (n1 * n21, n22)), st["N22"], q)
    a = np.swapaxes(a.reshape(lead + (n1, n21, n22)), -1, -2)           # [k1, n22, k21]
    a = (a * tw["N2-twist"][1]) % q
    a = _gs(a.reshape(lead + (n1 * n22, n21)), st["N21"], q)
    a = np.swapaxes(a.reshape(lead + (n1, n22, n21)), -1, -2)           # [k1, n21, n22]
    a = np.swapaxes(a.reshape(lead + (n1, n2)), -1, -2)                 # [n2, k1]
    a = (a * tw["hadamard"][1]) % q
    a = np.swapaxes(a.reshape(lead + (n2, n12, n11)), -1, -2)           # [n2, k11, k12]
    a = _gs(a.reshape(lead + (n2 * n11, n12)), st["N12"], q)
    a = np.swapaxes(a.reshape(lead + (n2, n11, n12)), -1, -2)           # [n2, n12, k11]
    a = (a * tw["N1-twist"][1]) % q
    a = _gs(a.reshape(lead + (n2 * n12, n11)), st["N11"], q)
    a = np.swapaxes(a.reshape(lead + (n2, n12, n11)), -1, -2)           # [n2, n11, n12]
    a = np.swapaxes(a.reshape(lead + (n2, n1)), -1, -2)                 # [n1, n2]
    return a.reshape(lead + (sch.n,))


_FWD = {"standard": _fwd_standard, "four-step": _fwd_four, "multi-step": _fwd_multi}
_INV = {"standard": _inv_standard, "four-step": _inv_four, "multi-step": _inv_multi}


def forward(x: np.ndarray, ctx: PrimeContext, variant: str = "standard",
            schedule: TwiddleSchedule | None = None, trace: list | None = None) -> np.ndarray:
    """NTT over the last axis of ``x`` (any leading batch shape)."""
    sch = schedule or twiddle_schedule(variant, ctx)
    x = np.asarray(x).astype(ctx.dtype)
    if x.shape[-1] != ctx.n:
        raise BadSplit(f"last axis has {x.shape[-1]} entries, N={ctx.n}")
    return _FWD[sch.variant](x, sch, trace)


def inverse(x: np.ndarray, ctx: PrimeContext, variant: str = "standard",
            schedule: TwiddleSchedule | None = None) -> np.ndarray:
    sch = schedule or twiddle_schedule(variant, ctx)
    x = np.asarray(x).astype(ctx.dtype)
    if x.shape[-1] != ctx.n:
        raise BadSplit(f"last axis has {x.shape[-1]} entries, N={ctx.n}")
    return _INV[sch.variant](x, sch)


# ---------------------------------------------------------------------------
# PolyVector front end


def _expect(p: PolyVector, domain: Domain) -> None:
    if p.domain != domain:
        raise DomainMismatch(f"expected {domain.value} domain, got {p.domain.value}")


def ntt_standard(p: PolyVector, ctx: PrimeContext) -> PolyVector:
    _expect(p, Domain.COEFF)
    return PolyVector(forward(p.coeffs, ctx, "standard"), Domain.EVAL)


def intt_standard(p: PolyVector, ctx: PrimeContext) -> PolyVector:
    _expect(p, Domain.EVAL)
    return PolyVector(inverse(p.coeffs, ctx, "standard"), Domain.COEFF)


def ntt_four_step(p: PolyVector, ctx: PrimeContext,
                  schedule: TwiddleSchedule | None = None) -> PolyVector:
    _expect(p, Domain.COEFF)
    sch = schedule or twiddle_schedule("four-step", ctx)
    return PolyVector(forward(p.coeffs, ctx, schedule=sch), Domain.EVAL)


def intt_four_step(p: PolyVector, ctx: PrimeContext,
                   schedule: TwiddleSchedule | None = None) -> PolyVector:
    _expect(p, Domain.EVAL)
    sch = schedule or twiddle_schedule("four-step", ctx)
    return PolyVector(inverse(p.coeffs, ctx, schedule=sch), Domain.COEFF)


def ntt_multi_step(p: PolyVector, ctx: PrimeContext,
                   schedule: TwiddleSchedule | None = None,
                   trace: list | None = None) -> PolyVector:
    """Seven-stage transform; pass a list as ``trace`` to capture each stage."""
    _expect(p, Domain.COEFF)
    sch = schedule or twiddle_schedule("multi-step", ctx)
    return PolyVector(forward(p.coeffs, ctx, schedule=sch, trace=trace), Domain.EVAL)


def intt_multi_step(p: PolyVector, ctx: PrimeContext,
                    schedule: TwiddleSchedule | None = None) -> PolyVector:
    _expect(p, Domain.EVAL)
    sch = schedule or twiddle_schedule("multi-step", ctx)
    return PolyVector(inverse(p.coeffs, ctx, schedule=sch), Domain.COEFF)


def naive_ntt(x, ctx: PrimeContext) -> np.ndarray:
    """O(N^2) reference: X[k] = sum_n x[n] psi^(n(2k+1))."""
    q, n, psi = ctx.q, ctx.n, ctx.psi
    out = []
    for k in range(n):
        w = pow(psi, 2 * k + 1, q)
        acc, p = 0, 1
        for v in x:
            acc = (acc + int(v) * p) % q
            p = p * w % q
        out.append(acc)
    return np.array(out, dtype=object)


def negacyclic_schoolbook(x, y, q: int) -> np.ndarray:
    """Product of x and y in Z_q[X]/(X^N + 1), computed directly."""
    n = len(x)
    out = [0] * n
    for i in range(n):
        xi = int(x[i])
        if not xi:
            continue
        for j in range(n):
            k = i + j
            if k < n:
                out[k] += xi * int(y[j])
            else:
                out[k - n] -= xi * int(y[j])
    return np.array([v % q for v in out], dtype=object)
