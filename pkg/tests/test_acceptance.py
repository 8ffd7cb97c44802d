"""Acceptance criteria 1-10.

Each check prints one ``criterion N: PASS|FAIL`` line. Run this file
directly (``python3 tests/test_acceptance.py``) for just the summary.
"""

import random
import sys
import time
from math import ceil
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import basis, contexts, random_poly  # noqa: E402
from kswkit import costmodel as cm  # noqa: E402
from kswkit import hwsim, ntt, verify  # noqa: E402
from kswkit.keyswitch import KswParams  # noqa: E402
from kswkit.modring import PrimeContext, ntt_primes  # noqa: E402
from kswkit.rns import bconv, bconv_fused_t_to_q, bconv_two_step, crt_reconstruct  # noqa: E402

SIZES = [1 << k for k in (4, 6, 8, 10, 12, 14)]


def check_1():
    t0 = time.perf_counter()
    rows = verify.ntt_suites(SIZES, primes=3, inputs=5, conv_max_n=0, seed=1)
    dt = time.perf_counter() - t0
    rows = [r for r in rows if r["suite"] in ("equivalence", "roundtrip")]
    ok = all(r["passed"] == r["total"] for r in rows) and dt < 60
    n = sum(r["total"] for r in rows if r["suite"] == "equivalence")
    return ok, f"{n} equivalence cases over N=2^4..2^14, roundtrips exact, {dt:.1f}s"


def check_2():
    tables = 0
    for n in SIZES:
        for q in ntt_primes(28, n, 3):
            sch = ntt.twiddle_schedule("multi-step", PrimeContext.build(q, n))
            for name in ("N12", "N21", "N22"):
                tw = sch.stages[name].tw
                if not all(np.array_equal(tw[p], tw[0]) for p in range(tw.shape[0])):
                    return False, f"{name} varies at N={n}"
                tables += 1
    return True, f"{tables} stage tables identical across passes"


def check_3():
    coeffs = 0
    for n in (8, 64):
        pool = contexts(28, n, 19)
        src, wide = basis(pool[:3], "Q"), basis(pool[3:8], "P")
        rng = np.random.default_rng(n)
        while coeffs < 1000 * (1 if n == 8 else 2):
            x = random_poly(rng, src, n)
            v = crt_reconstruct(x)
            got = crt_reconstruct(bconv(x, wide))
            for vi, gi in zip(v, got):
                d = gi - vi
                if d % src.product or abs(d // src.product) > len(src):
                    return False, f"bad multiplier at N={n}"
                coeffs += 1
    fused_sum = two_sum = 0
    total = 0
    for n in (8, 64):
        pool = contexts(28, n, 19)
        t, p, q = basis(pool[:2], "T"), basis(pool[2:6], "P"), basis(pool[6:13], "Q")
        rng = np.random.default_rng(100 + n)
        while total < 1000 * (1 if n == 8 else 2):
            x = random_poly(rng, t, n)
            v = crt_reconstruct(x)
            f = crt_reconstruct(bconv_fused_t_to_q(x, q))
            s = crt_reconstruct(bconv_two_step(x, p, q))
            for vi, fi, si in zip(v, f, s):
                if (fi - vi) % t.product:
                    return False, "fused error not a multiple of T"
                fused_sum += abs(fi - vi)
                two_sum += abs(si - vi)
                total += 1
    ok = fused_sum <= two_sum
    return ok, f"{coeffs} BConv coefficients in law; fused/two-step mean error ratio {fused_sum / two_sum:.2e} over {total}"


def check_4():
    t0 = time.perf_counter()
    margin = float("inf")
    for n in (1 << 9, 1 << 10):
        for dnum in (2, 4):
            p = KswParams(n=n, L=8, dnum=dnum, alpha_prime=2)
            rows = verify.ksw_suite(p, 20, seed=dnum)
            if not all(r["within_bound"] and r["agree"] for r in rows):
                return False, f"bound exceeded at N={n}, dnum={dnum}"
            margin = min(margin, min(r["bound_log2"] - r["noise_log2"] for r in rows))
    dt = time.perf_counter() - t0
    return dt < 300, f"80 inputs per method, noise at least 2^{margin:.1f} below bound, {dt:.1f}s"


def check_5():
    if cm.max_level_for_dnum(6, 45) != 38:
        return False, "L(6, 45) != 38"
    for _, (_, _, _, lt) in cm.SECURITY_ROWS.items():
        for dnum in range(1, lt + 1):
            L = cm.max_level_for_dnum(dnum, lt)
            fits = [x for x in range(lt + 1) if x + 1 + ceil((x + 1) / dnum) <= lt + 1]
            if L != max(fits):
                return False, f"dnum={dnum}, L_target={lt}"
    return True, "L=38 at (6, 45); every security row agrees with the limb budget"


def check_6():
    cells = []
    for dnum in sorted(cm.REFERENCE_REDUCTION):
        for i, n in enumerate(sorted(cm.ALPHA_PRIME_PROFILE)):
            c = cm.comparison_cell(n, dnum)
            ref = cm.REFERENCE_REDUCTION[dnum][i]
            sign = c > 1.0 if dnum == 2 else c > 0.0
            near = True if dnum == 2 else abs(c - ref) <= 3.0
            cells.append((sign and near, round(c, 2)))
    ok = len(cells) == 12 and all(c[0] for c in cells)
    return ok, "cells " + " ".join(str(c[1]) for c in cells)


def check_7():
    p = cm.CostParams(n=1 << 16, dnum=6, alpha_prime=4)
    s = cm.select_alpha_per_level(p)
    ok = sorted(s.alpha) == list(range(39)) and not s.is_constant() and s.verify(p)
    return ok, f"change points at l={s.change_points()}, argmin re-scan {'ok' if s.verify(p) else 'failed'}"


def check_8():
    prof = hwsim.get_profile("taiyi")
    for seed in range(100):
        rng = random.Random(seed)
        d = hwsim.Dag()
        for i in range(rng.randint(1, 60)):
            deps = [j for j in range(i) if rng.random() < 0.1]
            d.add(rng.choice(hwsim.KERNEL_CLASSES), rng.randint(1, 50000), deps)
        ser = hwsim.execute(d, prof, "serial")
        par = hwsim.execute(d, prof, "parallel")
        if ser.total_cycles != sum(hwsim.kernel_cycles(x, prof) for x in d.nodes):
            return False, f"conservation broken, seed {seed}"
        if not par.critical_path <= par.total_cycles <= ser.total_cycles:
            return False, f"parallel total out of range, seed {seed}"
        if par.to_json() != hwsim.execute(d, prof, "parallel").to_json():
            return False, f"nondeterministic, seed {seed}"
    return True, "100 random DAGs"


def check_9():
    dag = hwsim.workload_dag("bootstrapping", cm.CostParams())
    sh = hwsim.breakdown_report(hwsim.execute(dag, hwsim.get_profile("sharp-like"), "serial"))
    return sh["ip"] > sh["ntt"], f"IP {sh['ip']:.3f} vs NTT {sh['ntt']:.3f}"


def check_10():
    dag = hwsim.workload_dag("bootstrapping", cm.CostParams())
    prof = hwsim.get_profile("taiyi")
    s = hwsim.execute(dag, prof, "serial").total_cycles
    p = hwsim.execute(dag, prof, "parallel").total_cycles
    return 1.5 <= s / p <= 5.0, f"speedup {s / p:.2f} ({s} -> {p} cycles)"


CHECKS = [check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8, check_9, check_10]


def _line(i, ok, detail):
    return f"criterion {i}: {'PASS' if ok else 'FAIL'} ({detail})"


@pytest.mark.parametrize("i", range(1, 11))
def test_criterion(i, capsys):
    ok, detail = CHECKS[i - 1]()
    with capsys.disabled():
        print("\n" + _line(i, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    bad = 0
    for i, fn in enumerate(CHECKS, 1):
        ok, detail = fn()
        bad += not ok
        print(_line(i, ok, detail))
    sys.exit(1 if bad else 0)
