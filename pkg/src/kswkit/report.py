"""Optional figures. CSV/JSON stay canonical; these are conveniences.

matplotlib is imported lazily so the rest of the package never needs it.
SVG output is made byte-stable by fixing the hash salt and dropping the
creation date.
"""

from __future__ import annotations

from pathlib import Path


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "kswkit"
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    _plt().close(fig)
    return path


def alpha_curve(rows: list[dict], path: Path) -> Path:
    """Scheduled alpha and its ModMul count per level."""
    plt = _plt()
    ls = [r["l"] for r in rows]
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.step(ls, [r["alpha"] for r in rows], where="mid", color="tab:blue")
    ax.set_xlabel("level l")
    ax.set_ylabel("alpha", color="tab:blue")
    ax2 = ax.twinx()
    ax2.plot(ls, [r["modmuls"] for r in rows], color="tab:red", lw=1)
    ax2.set_ylabel("ModMuls", color="tab:red")
    fig.tight_layout()
    return _save(fig, path)


def dnum_sweep(rows: list[dict], path: Path) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for n in sorted({r["n"] for r in rows}):
        pts = [r for r in rows if r["n"] == n and r["t_mult_a_slot"] != float("inf")]
        ax.plot([r["d"] for r in pts], [r["t_mult_a_slot"] for r in pts], marker="o",
                label=f"N=2^{n.bit_length() - 1}")
    ax.set_xlabel("normalised dnum")
    ax.set_ylabel("T_mult,a/slot (ModMuls)")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    return _save(fig, path)


def breakdown(shares: dict[str, float], title: str, path: Path) -> Path:
    plt = _plt()
    fig, ax = plt.subplots(figsize=(5, 3))
    keys = sorted(shares)
    ax.bar(keys, [shares[k] for k in keys])
    ax.set_ylabel("busy share")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)
