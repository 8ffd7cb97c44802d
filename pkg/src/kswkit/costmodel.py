"""ModMul accounting for hybrid and KLSS key switching, parameter selection
and per-level alpha scheduling.

Unit costs (ModMuls):

* one limb NTT or INTT: (N/2)*log2(N) butterflies + N twists
* BConv a -> b limbs: a*N scalings + a*b*N MACs
* inner product of one limb pair: N
* ModDown of one component: BConv(alpha -> l+1) + (l+1)*N corrections

Per level l, with beta = ceil((l+1)/alpha), L' = l+1+alpha and
beta~ = ceil((l+alpha+1)/alpha'):

hybrid
    ntt      beta*L' (mod-up) + 2*(l+1) (result back to evaluation form)
    intt     2*L' (recover form) + (l+1) (input to coefficient form)
    bconv    beta * BConv(alpha -> L')
    ip       2*beta*L' pairs
klss
    ntt      beta*alpha' (decomposition) + 2*(l+1)
    intt     2*beta~*alpha' (recover limbs) + (l+1)
    bconv    beta * BConv(alpha -> alpha') + 2*beta~ * BConv(alpha' -> alpha)
    ip       2*beta~*beta*alpha' pairs

Both methods share the same ModDown term.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field, replace
from math import ceil, log2
from typing import Callable, Iterable, Protocol

from kswkit.errors import InsufficientDepth, LevelUnderflow

# N -> (h, log PQ, lambda, L_target), 128-bit security rows
SECURITY_ROWS = {
    1 << 15: (512, 782, 134.4, 22),
    1 << 16: (512, 1656, 133.0, 45),
    1 << 17: (512, 3276, 134.5, 91),
    1 << 18: (512, 6804, 128.3, 189),
}

FFT_ITER = 6
L_BOOT = 2 * FFT_ITER + 9
EVALMOD_DEPTH = L_BOOT - 2 * FFT_ITER

# alpha' per N used when reproducing the dnum 2..5 comparison; see README
ALPHA_PRIME_PROFILE = {1 << 16: 5, 1 << 17: 9, 1 << 18: 16}

# published reference values for that comparison: dnum -> per-N cells
REFERENCE_REDUCTION = {
    2: (1.06, 1.12, 1.17),
    3: (9.9, 5.7, 6.4),
    4: (23.8, 20.6, 17.3),
    5: (34.1, 32.3, 29.9),
}

CLASSES = ("ntt", "intt", "bconv", "ip", "hadamard", "moddown")


def ntt_unit(n: int) -> int:
    return (n // 2) * int(log2(n)) + n


def bconv_unit(a: int, b: int, n: int) -> int:
    return a * n + a * b * n


def ip_unit(n: int) -> int:
    return n


def max_level_for_dnum(dnum: int, l_target: int) -> int:
    """Largest L such that L + ceil((L+1)/dnum) fits the target level budget."""
    if dnum < 1 or l_target < 1:
        raise ValueError("dnum and L_target must be >= 1")
    return (dnum * l_target - 1) // (dnum + 1)


@dataclass(frozen=True)
class CostParams:
    n: int = 1 << 16
    dnum: int = 6
    alpha_prime: int = 4
    word_bits: int = 36
    l_target: int | None = None
    L_override: int | None = None

    @property
    def L_target(self) -> int:
        if self.l_target is not None:
            return self.l_target
        if self.n not in SECURITY_ROWS:
            raise ValueError(f"no embedded L_target for N={self.n}; set l_target")
        return SECURITY_ROWS[self.n][3]

    @property
    def L(self) -> int:
        if self.L_override is not None:
            return self.L_override
        return max_level_for_dnum(self.dnum, self.L_target)

    @property
    def alpha(self) -> int:
        return ceil((self.L + 1) / self.dnum)

    @property
    def k_max(self) -> int:
        return self.alpha

    @property
    def m_unit(self) -> int:
        return self.n * int(log2(self.n))


@dataclass(frozen=True)
class CostReport:
    method: str
    l: int
    alpha: int
    dnum: int
    ntt: int = 0
    intt: int = 0
    bconv: int = 0
    ip: int = 0
    hadamard: int = 0
    moddown: int = 0

    @property
    def total(self) -> int:
        return sum(getattr(self, c) for c in CLASSES)

    def shares(self) -> dict[str, float]:
        t = self.total
        return {c: getattr(self, c) / t for c in CLASSES} if t else {}

    def __add__(self, other: "CostReport") -> "CostReport":
        kw = {c: getattr(self, c) + getattr(other, c) for c in CLASSES}
        return replace(self, **kw)

    def row(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d


def _moddown(n: int, l: int, alpha: int) -> int:
    return 2 * (bconv_unit(alpha, l + 1, n) + (l + 1) * n)


def modmul_count_hybrid(params: CostParams, l: int, alpha: int | None = None) -> CostReport:
    a = alpha or params.alpha
    n = params.n
    beta = ceil((l + 1) / a)
    lp = l + 1 + a
    u = ntt_unit(n)
    return CostReport(
        "hybrid", l, a, params.dnum,
        ntt=(beta * lp + 2 * (l + 1)) * u,
        intt=(2 * lp + (l + 1)) * u,
        bconv=beta * bconv_unit(a, lp, n),
        ip=2 * beta * lp * ip_unit(n),
        moddown=_moddown(n, l, a),
    )


def modmul_count_klss(params: CostParams, l: int, alpha: int | None = None) -> CostReport:
    a = alpha or params.alpha
    ap = params.alpha_prime
    n = params.n
    beta = ceil((l + 1) / a)
    bt = ceil((l + a + 1) / ap)
    u = ntt_unit(n)
    return CostReport(
        "klss", l, a, params.dnum,
        ntt=(beta * ap + 2 * (l + 1)) * u,
        intt=(2 * bt * ap + (l + 1)) * u,
        bconv=beta * bconv_unit(a, ap, n) + 2 * bt * bconv_unit(ap, a, n),
        ip=2 * bt * beta * ap * ip_unit(n),
        moddown=_moddown(n, l, a),
    )


def modmul_count(params: CostParams, l: int, method: str, alpha: int | None = None) -> CostReport:
    if method == "hybrid":
        return modmul_count_hybrid(params, l, alpha)
    if method == "klss":
        return modmul_count_klss(params, l, alpha)
    raise ValueError(f"unknown method {method!r}")


def sweep_total(params: CostParams, method: str) -> CostReport:
    """Sum of the per-level reports over every level 0..L."""
    rep = modmul_count(params, 0, method)
    for l in range(1, params.L + 1):
        rep = rep + modmul_count(params, l, method)
    return replace(rep, l=params.L)


def compare_methods(params: CostParams) -> dict:
    """hybrid/klss totals summed over levels, the ratio and the reduction in %."""
    h = sweep_total(params, "hybrid").total
    k = sweep_total(params, "klss").total
    return {
        "n": params.n, "dnum": params.dnum, "L": params.L, "alpha": params.alpha,
        "alpha_prime": params.alpha_prime, "hybrid": h, "klss": k,
        "klss_over_hybrid": k / h, "reduction_pct": (h / k - 1.0) * 100.0,
    }


def comparison_params(n: int, dnum: int, alpha_prime: int | None = None) -> CostParams:
    ap = alpha_prime if alpha_prime is not None else ALPHA_PRIME_PROFILE[n]
    return CostParams(n=n, dnum=dnum, alpha_prime=ap)


def comparison_cell(n: int, dnum: int, alpha_prime: int | None = None) -> float:
    """Ratio klss/hybrid for dnum=2, otherwise hybrid/klss - 1 in percent."""
    c = compare_methods(comparison_params(n, dnum, alpha_prime))
    return c["klss_over_hybrid"] if dnum == 2 else c["reduction_pct"]


def ekey_memory_requirement(params: CostParams, l: int, alpha: int | None = None) -> int:
    """Bytes of evaluation key touched by one KLSS inner product at level l."""
    a = alpha or params.alpha
    beta = ceil((l + 1) / a)
    bt = ceil((l + a + 1) / params.alpha_prime)
    return 2 * beta * bt * params.alpha_prime * params.n * ceil(params.word_bits / 8)


def beta_tilde_variants(params: CostParams, l: int, alpha: int | None = None) -> dict:
    """Both readings of beta~ so reports can show where they disagree."""
    a = alpha or params.alpha
    return {"symbol_table": ceil((l + a + 1) / params.alpha_prime),
            "instance_table": (params.L + a) / a}


# ---------------------------------------------------------------------------
# alpha schedule


@dataclass
class AlphaSchedule:
    alpha: dict[int, int]
    table: dict[int, dict[int, int]] = field(repr=False)

    def is_constant(self) -> bool:
        return len(set(self.alpha.values())) <= 1

    def change_points(self) -> list[int]:
        ls = sorted(self.alpha)
        return [l for a, l in zip(ls, ls[1:]) if self.alpha[a] != self.alpha[l]]

    def verify(self, params: CostParams) -> bool:
        """Exhaustive re-scan: no admissible alpha beats the scheduled one."""
        for l, a in self.alpha.items():
            best = modmul_count_klss(params, l, a).total
            for cand in admissible_alphas(params, l):
                if modmul_count_klss(params, l, cand).total < best:
                    return False
        return True

    def rows(self) -> list[dict]:
        return [{"l": l, "alpha": a, "modmuls": self.table[l][a]} for l, a in sorted(self.alpha.items())]


def admissible_alphas(params: CostParams, l: int) -> range:
    return range(1, min(l + 1, params.k_max) + 1)


def select_alpha_per_level(params: CostParams) -> AlphaSchedule:
    sched: dict[int, int] = {}
    table: dict[int, dict[int, int]] = {}
    for l in range(params.L + 1):
        costs = {a: modmul_count_klss(params, l, a).total for a in admissible_alphas(params, l)}
        table[l] = costs
        sched[l] = min(costs, key=lambda a: (costs[a], a))
    return AlphaSchedule(sched, table)


# ---------------------------------------------------------------------------
# operation-level costs and T_mult,a/slot


def hmult_cost(params: CostParams, l: int, method: str = "klss", alpha: int | None = None) -> CostReport:
    """Tensor product, relinearisation and rescale at level l."""
    ks = modmul_count(params, l, method, alpha)
    return replace(ks, hadamard=ks.hadamard + 4 * (l + 1) * params.n + 2 * l * params.n)


def rotate_cost(params: CostParams, l: int, method: str = "klss", alpha: int | None = None) -> CostReport:
    return modmul_count(params, l, method, alpha)


def cmult_cost(params: CostParams, l: int) -> CostReport:
    return CostReport("klss", l, params.alpha, params.dnum,
                      hadamard=2 * (l + 1) * params.n + 2 * l * params.n)


def ptmatvec_cost(params: CostParams, l: int, rotations: int = 2,
                  method: str = "klss", alpha: int | None = None) -> CostReport:
    """One hoisted linear-transform level: a single decomposition feeds
    ``rotations`` automorphism + inner-product groups, then one recovery."""
    ks = modmul_count(params, l, method, alpha)
    return replace(
        ks,
        ip=ks.ip * rotations,
        hadamard=2 * rotations * (l + 1) * params.n + 2 * l * params.n,
    )


def bootstrap_ops(fft_iter: int = FFT_ITER) -> list[str]:
    """Coarse bootstrapping: CoeffToSlot, EvalMod, SlotToCoeff."""
    return ["ptmatvec"] * fft_iter + ["hmult"] * EVALMOD_DEPTH + ["ptmatvec"] * fft_iter


def bootstrap_cost(params: CostParams, method: str = "klss") -> CostReport:
    total = None
    l = params.L
    for op in bootstrap_ops():
        rep = ptmatvec_cost(params, l, method=method) if op == "ptmatvec" else hmult_cost(params, l, method)
        total = rep if total is None else total + rep
        l -= 1
    return total


class TimingSource(Protocol):
    def t_boot(self) -> float: ...

    def t_mult(self, l: int) -> float: ...


@dataclass
class CostTiming:
    """Timing proportional to ModMul counts (1 ModMul = ``ns_per_modmul``)."""

    params: CostParams
    method: str = "klss"
    ns_per_modmul: float = 1.0

    def t_boot(self) -> float:
        return bootstrap_cost(self.params, self.method).total * self.ns_per_modmul

    def t_mult(self, l: int) -> float:
        return hmult_cost(self.params, l, self.method).total * self.ns_per_modmul


@dataclass
class ConstantTiming:
    boot: float
    mult: float | Callable[[int], float]

    def t_boot(self) -> float:
        return self.boot

    def t_mult(self, l: int) -> float:
        return self.mult(l) if callable(self.mult) else self.mult


def t_mult_per_slot(timing: TimingSource, params: CostParams, l_boot: int = L_BOOT) -> float:
    """(T_boot + sum_{l=1}^{L-L_boot} T_mult(l)) / (L - L_boot) * 2/N."""
    usable = params.L - l_boot
    if usable <= 0:
        raise InsufficientDepth(f"L={params.L} leaves no level beyond bootstrapping ({l_boot})")
    acc = timing.t_boot() + sum(timing.t_mult(l) for l in range(1, usable + 1))
    return acc / usable * 2.0 / params.n


def dnum_max(n: int) -> int:
    """dnum beyond which alpha is 1 and L stops growing."""
    return SECURITY_ROWS[n][3] - 1


def normalized_dnum(d: float, n: int) -> int:
    return 1 + round(d * (dnum_max(n) - 1))


def dnum_sweep(n: int, alpha_prime: int = 4, points: Iterable[float] = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0),
               method: str = "klss") -> list[dict]:
    rows = []
    for d in points:
        dnum = normalized_dnum(d, n)
        p = CostParams(n=n, dnum=dnum, alpha_prime=alpha_prime)
        try:
            t = t_mult_per_slot(CostTiming(p, method), p)
        except InsufficientDepth:
            t = float("inf")
        rows.append({"d": d, "dnum": dnum, "L": p.L, "alpha": p.alpha, "t_mult_a_slot": t})
    return rows


# ---------------------------------------------------------------------------
# compiler pass


KSW_OPS = ("hmult", "rotate", "ptmatvec")
KNOWN_OPS = KSW_OPS + ("cmult", "bootstrap")


@dataclass(frozen=True)
class PlanEntry:
    op: str
    level: int
    alpha: int | None
    method: str = "klss"
    in_bootstrap: bool = False


def compile_app(ops: Iterable[str], params: CostParams, schedule: AlphaSchedule | None = None,
                start_level: int | None = None, method: str = "klss") -> list[PlanEntry]:
    """Lower an HE op sequence into a level-annotated kernel plan."""
    sched = schedule or select_alpha_per_level(params)
    l = params.L if start_level is None else start_level
    plan: list[PlanEntry] = []

    def emit(op, lvl, boot=False):
        a = sched.alpha.get(lvl) if op in KSW_OPS else None
        plan.append(PlanEntry(op, lvl, a, method, boot))

    for op in ops:
        if op not in KNOWN_OPS:
            raise ValueError(f"unknown HE op {op!r}")
        if op == "bootstrap":
            if params.L <= L_BOOT:
                raise InsufficientDepth("bootstrapping needs L > L_boot")
            lvl = params.L
            for sub in bootstrap_ops():
                emit(sub, lvl, True)
                lvl -= 1
            l = params.L - L_BOOT
            continue
        if op in ("hmult", "cmult", "ptmatvec"):
            if l < 1:
                raise LevelUnderflow(f"{op} at level {l} without bootstrapping")
            emit(op, l)
            l -= 1
        else:
            emit(op, l)
    return plan


# ---------------------------------------------------------------------------
# serialisation


def to_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def to_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
