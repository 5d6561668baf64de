"""Text renderings of gridworld policies: waiting time (or value) above an arrow."""
from .documents import PolicyDocument
from .gridworld import GridSpec, display_index, make_indexing

ASCII_ARROWS = {"north": "^", "south": "v", "east": ">", "west": "<"}
UNICODE_ARROWS = {"north": "↑", "south": "↓", "east": "→", "west": "←"}


def render_policy(doc: PolicyDocument, spec: GridSpec, unicode: bool = False, top: str = "tau") -> str:
    """Draw the grid with one two-line cell per map square.

    ``top`` selects what sits above the arrow: ``"tau"`` or ``"value"``.
    """
    index = make_indexing(spec)
    by_label = {r.display: r for r in doc.records}
    arrows = UNICODE_ARROWS if unicode else ASCII_ARROWS
    wall = "█" if unicode else "#"
    uppers = {}
    lowers = {}
    for cell, state in index.cell_to_state.items():
        rec = by_label[display_index(index, state)]
        uppers[cell] = str(rec.tau) if top == "tau" else f"{rec.value:.2f}"
        lowers[cell] = arrows.get(rec.action, rec.action[:1])
    width = max(3, max(len(s) for s in uppers.values()) + 2)
    rule = "+" + "+".join("-" * width for _ in range(spec.cols)) + "+"
    out = [rule]
    for r in range(spec.rows):
        hi, lo = [], []
        for c in range(spec.cols):
            if (r, c) in uppers:
                hi.append(uppers[(r, c)].center(width))
                lo.append(lowers[(r, c)].center(width))
            else:
                hi.append(wall * width)
                lo.append(wall * width)
        out.append("|" + "|".join(hi) + "|")
        out.append("|" + "|".join(lo) + "|")
        out.append(rule)
    absorbing = by_label.get(display_index(index, index.absorbing_state))
    if absorbing is not None:
        out.append(f"absorbing state {absorbing.display}: tau={absorbing.tau} action={absorbing.action}")
    return "\n".join(out) + "\n"
