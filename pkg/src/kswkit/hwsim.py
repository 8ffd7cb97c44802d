"""Cycle-level accelerator model: lower kernel plans to dependence graphs
and time them on component profiles in serial or parallel mode.

Kernel volume units: NTT, INTT and automorphism kernels count streamed
elements (limbs * N); every other kernel counts modular multiplies.
A component's throughput is in the same unit per cycle.
"""

from __future__ import annotations

import heapq
import json
from collections import defaultdict
from dataclasses import dataclass, field, replace
from math import ceil
from typing import Iterable

from kswkit import costmodel as cm
from kswkit.costmodel import CostParams, PlanEntry
from kswkit.errors import CyclicGraph, UnknownKernel

COMPONENTS = ("NTTU", "BConvU", "HP-IP", "EWE", "AutoU")
KERNEL_CLASSES = ("ntt", "intt", "bconv", "ip", "hadamard", "automorph", "moddown")


@dataclass(frozen=True)
class Component:
    lanes: int
    throughput: int
    depth: int
    instances: int = 1
    energy_per_op: float = 0.0

    def __post_init__(self):
        if self.throughput <= 0 or self.instances <= 0:
            raise ValueError("throughput and instance count must be positive")


@dataclass(frozen=True)
class HardwareProfile:
    name: str
    components: dict
    routing: dict
    clock_ghz: float = 1.0
    ip_bandwidth_cap: int | None = None

    def component_for(self, klass: str) -> str:
        if klass not in self.routing:
            raise UnknownKernel(f"no component handles {klass!r}")
        return self.routing[klass]

    def with_instances(self, comp: str, count: int) -> "HardwareProfile":
        comps = dict(self.components)
        comps[comp] = replace(comps[comp], instances=count)
        return replace(self, components=comps)

    def with_energy(self, weights: dict) -> "HardwareProfile":
        comps = {k: replace(c, energy_per_op=weights.get(k, 0.0)) for k, c in self.components.items()}
        return replace(self, components=comps)


_ROUTE = {
    "ntt": "NTTU", "intt": "NTTU", "bconv": "BConvU", "ip": "HP-IP",
    "hadamard": "EWE", "automorph": "AutoU", "moddown": "BConvU",
}

# HP-IP parallelism: 256 VEC-PEs x H=4 PEs x 6 MACs
HPIP_MACS = 256 * 4 * 6

PROFILES = {
    "taiyi": HardwareProfile(
        "taiyi",
        {
            "NTTU": Component(1024, 1024, 32),
            "BConvU": Component(1024, 4096, 16),
            "HP-IP": Component(256, HPIP_MACS, 12),
            "EWE": Component(1024, 1024, 8),
            "AutoU": Component(1024, 1024, 4),
        },
        dict(_ROUTE),
    ),
    "sharp-like": HardwareProfile(
        "sharp-like",
        {
            "NTTU": Component(1024, 1024, 32),
            "BConvU": Component(1024, 4096, 16),
            "EWE": Component(1024, 1024, 8),
            "AutoU": Component(1024, 1024, 4),
        },
        {**_ROUTE, "ip": "EWE"},
    ),
}


def get_profile(name: str) -> HardwareProfile:
    if name not in PROFILES:
        raise KeyError(f"unknown profile {name!r}; choose from {sorted(PROFILES)}")
    return PROFILES[name]


# ---------------------------------------------------------------------------
# DAG


@dataclass(frozen=True)
class KernelInstr:
    id: int
    klass: str
    volume: int
    deps: tuple[int, ...] = ()
    tag: str = ""

    def __post_init__(self):
        if self.klass not in KERNEL_CLASSES:
            raise UnknownKernel(f"unknown kernel class {self.klass!r}")
        if self.volume <= 0:
            raise ValueError("kernel volume must be positive")


@dataclass
class Dag:
    nodes: list[KernelInstr] = field(default_factory=list)

    def add(self, klass: str, volume: int, deps: Iterable[int] = (), tag: str = "") -> int:
        i = len(self.nodes)
        self.nodes.append(KernelInstr(i, klass, int(volume), tuple(sorted(set(deps))), tag))
        return i

    def __len__(self) -> int:
        return len(self.nodes)

    def topo_order(self) -> list[int]:
        indeg = [0] * len(self.nodes)
        succ = defaultdict(list)
        for n in self.nodes:
            for d in n.deps:
                if not 0 <= d < len(self.nodes):
                    raise CyclicGraph(f"node {n.id} depends on missing node {d}")
                succ[d].append(n.id)
                indeg[n.id] += 1
        ready = [i for i, k in enumerate(indeg) if k == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            i = heapq.heappop(ready)
            order.append(i)
            for s in succ[i]:
                indeg[s] -= 1
                if indeg[s] == 0:
                    heapq.heappush(ready, s)
        if len(order) != len(self.nodes):
            raise CyclicGraph("dependence graph has a cycle")
        return order

    def tag_counts(self) -> dict[str, int]:
        out: dict[str, int] = defaultdict(int)
        for n in self.nodes:
            out[n.tag] += 1
        return dict(out)


def _union(frontier: list[list[int]], limbs: Iterable[int]) -> list[int]:
    out: list[int] = []
    for i in limbs:
        out.extend(frontier[i])
    return out


def _keyswitch(dag: Dag, n: int, l: int, alpha: int, alpha_prime: int, method: str,
               frontier: list[list[int]], rotations: int = 1) -> list[list[int]]:
    """Append one key switch of a coefficient-form input.

    ``frontier[i]`` lists the nodes that produce Q-limb i of the input.
    Returns the producers of each output Q-limb. Digit decomposition only
    waits for its own limbs, ModDown only waits for the groups holding P
    limbs, and each group's fix-up only waits for its own recovery.
    """
    beta = ceil((l + 1) / alpha)
    digit_limbs = [range(d * alpha, min((d + 1) * alpha, l + 1)) for d in range(beta)]
    if method == "klss":
        bt = ceil((l + alpha + 1) / alpha_prime)
        digits = []
        for lim in digit_limbs:
            b = dag.add("bconv", cm.bconv_unit(len(lim), alpha_prime, n), _union(frontier, lim), "decomp_bconv")
            digits.append(dag.add("ntt", alpha_prime * n, [b], "ntt_group"))
        groups: list[list[int]] = [[] for _ in range(bt)]
        for _ in range(rotations):
            feed = digits
            if rotations > 1:
                feed = [dag.add("automorph", alpha_prime * n, [x], "automorph") for x in digits]
            for j in range(2):
                for m in range(bt):
                    for d in range(beta):
                        groups[m].append(dag.add("ip", alpha_prime * n, [feed[d]], "ip"))
        rec = []
        for m in range(bt):
            it = dag.add("intt", 2 * alpha_prime * n, groups[m], "intt_group")
            rec.append(dag.add("bconv", 2 * cm.bconv_unit(alpha_prime, alpha, n), [it], "recover_bconv"))
        # extended-modulus positions: P limbs first, then Q limb i at alpha + i
        owner = [pos // alpha_prime for pos in range(alpha + l + 1)]
        p_groups = sorted(set(owner[:alpha]))
        md = dag.add("moddown", 2 * cm.bconv_unit(alpha, l + 1, n), [rec[m] for m in p_groups], "moddown")
        out: list[list[int]] = [[] for _ in range(l + 1)]
        for m in range(bt):
            qs = [pos - alpha for pos in range(alpha + l + 1) if owner[pos] == m and pos >= alpha]
            if not qs:
                continue
            fix = dag.add("hadamard", 2 * len(qs) * n, [md, rec[m]], "moddown_fixup")
            for i in qs:
                out[i] = [fix]
        return out
    if method == "hybrid":
        lp = l + 1 + alpha
        digits = []
        for lim in digit_limbs:
            b = dag.add("bconv", cm.bconv_unit(len(lim), lp, n), _union(frontier, lim), "decomp_bconv")
            digits.append(dag.add("ntt", lp * n, [b], "ntt_group"))
        acc = []
        for _ in range(rotations):
            feed = digits
            if rotations > 1:
                feed = [dag.add("automorph", lp * n, [x], "automorph") for x in digits]
            for j in range(2):
                for d in range(beta):
                    acc.append(dag.add("ip", lp * n, [feed[d]], "ip"))
        it = dag.add("intt", 2 * lp * n, acc, "intt_group")
        md = dag.add("moddown", 2 * cm.bconv_unit(alpha, l + 1, n), [it], "moddown")
        fix = dag.add("hadamard", 2 * (l + 1) * n, [md], "moddown_fixup")
        return [[fix] for _ in range(l + 1)]
    raise UnknownKernel(f"unknown keyswitch method {method!r}")


def _per_limb(dag: Dag, klass: str, vol: int, frontier: list[list[int]], tag: str,
              extra: Iterable[int] = (), count: int | None = None) -> list[list[int]]:
    """One node per limb; ``extra`` limbs feed every node (e.g. the dropped top limb)."""
    k = len(frontier) if count is None else count
    shared = _union(frontier, extra)
    return [[dag.add(klass, vol, frontier[i] + shared, tag)] for i in range(k)]


def generate_instructions(plan: Iterable[PlanEntry], params: CostParams) -> Dag:
    """Expand plan entries into kernels, limb by limb where the data allows.

    Consecutive entries are chained through per-limb producers.
    """
    dag = Dag()
    n, ap = params.n, params.alpha_prime
    front: list[list[int]] | None = None
    for e in plan:
        a = e.alpha or params.alpha
        l = e.level
        if front is None:
            cur = [[] for _ in range(l + 1)]
        elif l + 1 <= len(front):
            cur = front[: l + 1]
        else:
            # modulus raise: every limb depends on the whole input
            everything = _union(front, range(len(front)))
            cur = [everything for _ in range(l + 1)]
        if e.op == "hmult":
            t = _per_limb(dag, "hadamard", 4 * n, cur, "tensor")
            i = _per_limb(dag, "intt", n, t, "in_intt")
            ks = _keyswitch(dag, n, l, a, ap, e.method, i)
            o = _per_limb(dag, "ntt", 2 * n, ks, "out_ntt")
            front = _per_limb(dag, "hadamard", 2 * n, o, "rescale", extra=[l], count=l)
        elif e.op == "rotate":
            i = _per_limb(dag, "intt", n, cur, "in_intt")
            ks = _keyswitch(dag, n, l, a, ap, e.method, i)
            o = _per_limb(dag, "ntt", 2 * n, ks, "out_ntt")
            front = _per_limb(dag, "automorph", 2 * n, o, "automorph")
        elif e.op == "ptmatvec":
            i = _per_limb(dag, "intt", n, cur, "in_intt")
            ks = _keyswitch(dag, n, l, a, ap, e.method, i, rotations=2)
            o = _per_limb(dag, "ntt", 2 * n, ks, "out_ntt")
            front = _per_limb(dag, "hadamard", 6 * n, o, "ptmult", extra=[l], count=l)
        elif e.op == "cmult":
            front = _per_limb(dag, "hadamard", 4 * n, cur, "cmult", extra=[l], count=l)
        else:
            raise UnknownKernel(f"plan entry {e.op!r} has no kernel expansion")
    return dag


# ---------------------------------------------------------------------------
# execution


def kernel_cycles(instr: KernelInstr, profile: HardwareProfile) -> int:
    comp = profile.components[profile.component_for(instr.klass)]
    tput = comp.throughput
    if instr.klass == "ip" and profile.ip_bandwidth_cap:
        tput = min(tput, profile.ip_bandwidth_cap)
    return -(-instr.volume // tput) + comp.depth


@dataclass
class SimReport:
    mode: str
    profile: str
    total_cycles: int
    busy: dict
    utilization: dict
    class_cycles: dict
    class_volume: dict
    critical_path: int
    kernels: int
    energy: float = 0.0

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2, sort_keys=True) + "\n"

    def component_rows(self) -> list[dict]:
        return [
            {"component": c, "busy_cycles": self.busy[c], "utilization": round(self.utilization[c], 9)}
            for c in sorted(self.busy)
        ]


def critical_path(dag: Dag, profile: HardwareProfile) -> int:
    finish = {}
    for i in dag.topo_order():
        node = dag.nodes[i]
        start = max((finish[d] for d in node.deps), default=0)
        finish[i] = start + kernel_cycles(node, profile)
    return max(finish.values(), default=0)


def execute(dag: Dag, profile: HardwareProfile, mode: str = "parallel") -> SimReport:
    if mode not in ("serial", "parallel"):
        raise ValueError("mode must be serial or parallel")
    order = dag.topo_order()
    cyc = [kernel_cycles(n, profile) for n in dag.nodes]
    busy = {c: 0 for c in profile.components}
    cls_c: dict[str, int] = defaultdict(int)
    cls_v: dict[str, int] = defaultdict(int)
    for n, c in zip(dag.nodes, cyc):
        busy[profile.component_for(n.klass)] += c
        cls_c[n.klass] += c
        cls_v[n.klass] += n.volume
    if mode == "serial":
        total = sum(cyc[i] for i in order)
    else:
        total = _list_schedule(dag, profile, cyc)
    util = {}
    for c, comp in profile.components.items():
        util[c] = busy[c] / (total * comp.instances) if total else 0.0
    rep = SimReport(mode, profile.name, total, busy, util, dict(sorted(cls_c.items())),
                    dict(sorted(cls_v.items())), critical_path(dag, profile), len(dag))
    rep.energy = energy_report(rep, profile)
    return rep


def _list_schedule(dag: Dag, profile: HardwareProfile, cyc: list[int]) -> int:
    """Earliest-ready-first list scheduling, FIFO on ties, per-instance queues."""
    n = len(dag.nodes)
    if n == 0:
        return 0
    succ = defaultdict(list)
    missing = [len(x.deps) for x in dag.nodes]
    for x in dag.nodes:
        for d in x.deps:
            succ[d].append(x.id)
    free = {c: [0] * comp.instances for c, comp in profile.components.items()}
    ready_at = [0] * n
    heap = [(0, i) for i in range(n) if missing[i] == 0]
    heapq.heapify(heap)
    finish = [0] * n
    while heap:
        r, i = heapq.heappop(heap)
        comp = profile.component_for(dag.nodes[i].klass)
        slots = free[comp]
        k = min(range(len(slots)), key=lambda s: (slots[s], s))
        start = max(r, slots[k])
        finish[i] = start + cyc[i]
        slots[k] = finish[i]
        for s in succ[i]:
            ready_at[s] = max(ready_at[s], finish[i])
            missing[s] -= 1
            if missing[s] == 0:
                heapq.heappush(heap, (ready_at[s], s))
    return max(finish)


def breakdown_report(report: SimReport) -> dict[str, float]:
    """Share of busy cycles per kernel class."""
    tot = sum(report.class_cycles.values())
    if not tot:
        return {}
    return {k: v / tot for k, v in sorted(report.class_cycles.items())}


def energy_report(report: SimReport, profile: HardwareProfile) -> float:
    """Sum over kernel classes of op volume times the component's weight."""
    e = 0.0
    for klass, vol in report.class_volume.items():
        e += vol * profile.components[profile.component_for(klass)].energy_per_op
    return e


# ---------------------------------------------------------------------------
# workloads


def bootstrapping_plan(params: CostParams, method: str = "klss") -> list[PlanEntry]:
    return cm.compile_app(["bootstrap"], params, method=method)


def helr_plan(params: CostParams, iterations: int = 2, batch: int = 4, method: str = "klss") -> list[PlanEntry]:
    """Logistic-regression style: rotate-and-sum batches then a few hmults per iteration."""
    ops: list[str] = []
    for _ in range(iterations):
        ops.append("bootstrap")
        ops.extend(["rotate"] * batch + ["hmult", "cmult", "hmult"])
    return cm.compile_app(ops, params, method=method, start_level=params.L - cm.L_BOOT)


def resnet_plan(params: CostParams, blocks: int = 3, rotations: int = 8, method: str = "klss") -> list[PlanEntry]:
    """Convolution blocks as rotations + plaintext mults, activation as hmults."""
    ops: list[str] = []
    for _ in range(blocks):
        ops.append("bootstrap")
        ops.extend(["rotate"] * rotations + ["cmult"] + ["hmult"] * 3)
    return cm.compile_app(ops, params, method=method, start_level=params.L - cm.L_BOOT)


WORKLOADS = {"bootstrapping": bootstrapping_plan, "helr": helr_plan, "resnet": resnet_plan}


def workload_dag(name: str, params: CostParams, method: str = "klss") -> Dag:
    if name not in WORKLOADS:
        raise KeyError(f"unknown workload {name!r}; choose from {sorted(WORKLOADS)}")
    return generate_instructions(WORKLOADS[name](params, method=method), params)
