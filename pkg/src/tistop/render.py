"""Text renderings of strategy trees: stop = filled, continue = hollow, randomized = grey with its probability."""
from __future__ import annotations

from .lattice import Strategy, snap


def _kind(p: float) -> str:
    if p == 1.0:
        return "stop"
    if p == 0.0:
        return "continue"
    return "random"


def _actions(s: Strategy):
    probs = snap(s.probs)
    for (t, x), _ in s.items():
        p = float(probs[t, (t - x) // 2])
        yield t, x, p, _kind(p)


_STYLE = {
    "stop": 'style=filled, fillcolor=black',
    "continue": 'style=solid, fillcolor=white',
    "random": 'style=filled, fillcolor=grey70',
}


def to_dot(s: Strategy, name: str = "strategy") -> str:
    lines = [
        f"digraph {name} {{",
        "  rankdir=LR;",
        '  node [shape=circle, fixedsize=true, width=0.3, label=""];',
    ]
    for t, x, p, kind in _actions(s):
        label = f"({t},{x})" if kind != "random" else f"({t},{x})\\n{p:.5f}"
        lines.append(f'  "{t},{x}" [{_STYLE[kind]}, xlabel="{label}"];')
    for t, x, _, _ in _actions(s):
        if t < s.horizon:
            lines.append(f'  "{t},{x}" -> "{t + 1},{x + 1}";')
            lines.append(f'  "{t},{x}" -> "{t + 1},{x - 1}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def to_ascii(s: Strategy) -> str:
    """Grid with time across and state down: ``#`` stop, ``o`` continue, a number for randomization."""
    T = s.horizon
    width = 7
    cells = {(t, x): ("#" if k == "stop" else "o" if k == "continue" else f"{p:.3f}") for t, x, p, k in _actions(s)}
    header = "x\\t".rjust(4) + "".join(str(t).center(width) for t in range(T + 1))
    rows = [header]
    for x in range(T, -T - 1, -1):
        rows.append(f"{x:>4}" + "".join(cells.get((t, x), "").center(width) for t in range(T + 1)))
    return "\n".join(r.rstrip() for r in rows) + "\n"


def render_strategy(s: Strategy, fmt: str = "dot") -> str:
    if fmt == "dot":
        return to_dot(s)
    if fmt == "ascii":
        return to_ascii(s)
    raise ValueError(f"unknown render format {fmt!r}")
