"""Self-check suites shared by the CLI and the test-suite."""

from __future__ import annotations

from math import log2

import numpy as np

from kswkit import keyswitch as ks
from kswkit import ntt
from kswkit.modring import PrimeContext, ntt_primes
from kswkit.rns import RnsPolynomial, crt_reconstruct


def ntt_suites(sizes: list[int], primes: int = 3, inputs: int = 5, word_bits: int = 28,
               seed: int = 0, conv_max_n: int = 256,
               corrupt: str | None = None) -> list[dict]:
    """Variant equivalence, roundtrip, convolution and fixed-twiddle checks.

    ``corrupt`` names a multi-step stage whose first twiddle is perturbed
    before running; every affected check must then fail.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        tally = {s: [0, 0] for s in ("equivalence", "roundtrip", "convolution", "fixed_twiddle")}
        for q in ntt_primes(word_bits, n, primes):
            ctx = PrimeContext.build(q, n)
            scheds = {v: ntt.twiddle_schedule(v, ctx) for v in ntt.VARIANTS}
            if corrupt:
                scheds["multi-step"] = ntt.corrupted(scheds["multi-step"], corrupt)
            sch = scheds["multi-step"]
            for name in sch.fixed_stage_names():
                tally["fixed_twiddle"][1] += 1
                tally["fixed_twiddle"][0] += sch.is_pass_invariant(name)
            for _ in range(inputs):
                x = rng.integers(0, q, n, dtype=np.int64).astype(ctx.dtype)
                outs = {v: ntt.forward(x, ctx, schedule=s) for v, s in scheds.items()}
                ref = outs["standard"]
                tally["equivalence"][1] += 1
                tally["equivalence"][0] += all(np.array_equal(ref, o) for o in outs.values())
                for v, s in scheds.items():
                    tally["roundtrip"][1] += 1
                    back = ntt.inverse(outs[v], ctx, schedule=s)
                    tally["roundtrip"][0] += bool(np.array_equal(back, x))
                if n <= conv_max_n:
                    y = rng.integers(0, q, n, dtype=np.int64).astype(ctx.dtype)
                    s = scheds["multi-step"]
                    fx, fy = ntt.forward(x, ctx, schedule=s), ntt.forward(y, ctx, schedule=s)
                    prod = ntt.inverse((fx * fy) % q, ctx, schedule=scheds["standard"])
                    want = ntt.negacyclic_schoolbook(x, y, q)
                    tally["convolution"][1] += 1
                    tally["convolution"][0] += bool(np.array_equal(prod.astype(object), want))
        for suite, (ok, tot) in tally.items():
            rows.append({"suite": suite, "n": n, "passed": int(ok), "total": tot})
    return rows


def ksw_suite(params: ks.KswParams, inputs: int, seed: int,
              levels: list[int] | None = None) -> list[dict]:
    """Both key-switch methods on random inputs; one row per (input, level, method)."""
    rng = np.random.default_rng(seed)
    key_seeds = rng.integers(0, 2**32, 3)
    s_from = ks.keygen(params, int(key_seeds[0]))
    s_to = ks.keygen(params, int(key_seeds[1]))
    swk = ks.gen_swk_klss(s_from, s_to, params, int(key_seeds[2]))
    rows = []
    for lvl in levels if levels is not None else [params.L]:
        basis = params.q_level(lvl)
        bound = params.noise_bound(lvl)
        for i in range(inputs):
            d = RnsPolynomial(
                np.stack([rng.integers(0, q, params.n, dtype=np.int64) for q in basis.moduli]), basis)
            res = {}
            for method in ("hybrid", "klss"):
                out = ks.keyswitch(d, swk, params, method)
                res[method] = (out, ks.residual_norm(d, out, s_from, s_to))
            # agreement: the two outputs decrypt to values within both bounds
            diff = _decrypt_gap(res["hybrid"][0], res["klss"][0], s_to)
            for method, (_, norm) in res.items():
                rows.append({
                    "input": i, "level": lvl, "method": method,
                    "noise_log2": round(log2(norm), 6) if norm else float("-inf"),
                    "bound_log2": round(log2(bound), 6),
                    "within_bound": int(norm <= bound),
                    "agreement_log2": round(log2(diff), 6) if diff else float("-inf"),
                    "agree": int(diff <= 2 * bound),
                })
    return rows


def _decrypt_gap(a, b, s) -> int:
    """||(a0 + a1*s) - (b0 + b1*s)||_inf over the output limbs."""
    basis = a[0].basis
    sv = s.rns(basis)
    va = a[0].to_eval() + a[1].to_eval() * sv
    vb = b[0].to_eval() + b[1].to_eval() * sv
    return max(abs(v) for v in crt_reconstruct((va - vb).to_coeff()))
