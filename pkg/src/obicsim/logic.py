"""Switch-level static evaluation and reverse-biased junction enumeration.

Transistors are ideal switches: NMOS conducts when its gate is HIGH, PMOS when
its gate is LOW, and a conducting path passes the full rail level.  A net
reached from the supply is HIGH, from ground LOW, from neither FLOAT.
"""

from __future__ import annotations

import enum
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .netlist import Cell, ChipDesign, InputPattern, Rect, all_patterns, as_design

DEFAULT_VDD = 2.5


class Level(str, enum.Enum):
    HIGH = "HIGH"
    LOW = "LOW"
    FLOAT = "FLOAT"


class JunctionKind(str, enum.Enum):
    NDIFF_PSUB = "NDIFF_PSUB"
    PDIFF_NWELL = "PDIFF_NWELL"
    NWELL_PSUB = "NWELL_PSUB"


class EvaluationError(ValueError):
    pass


class ShortCircuit(EvaluationError):
    pass


class UnresolvedGate(EvaluationError):
    pass


class PatternError(EvaluationError):
    pass


@dataclass(frozen=True)
class NodeAssignment:
    levels: Mapping[str, Level]
    vdd: float = DEFAULT_VDD

    def __getitem__(self, net: str) -> Level:
        return self.levels[net]

    @property
    def has_float(self) -> bool:
        return any(lv is Level.FLOAT for lv in self.levels.values())


@dataclass(frozen=True)
class JunctionSite:
    kind: JunctionKind
    rect: Rect
    attached_net: str | None
    owner: str


@dataclass(frozen=True)
class BiasEntry:
    site: JunctionSite
    reverse_biased: bool
    bias_magnitude: float


@dataclass(frozen=True)
class BiasReport:
    entries: tuple[BiasEntry, ...]
    float_warning: bool = False

    def biased(self, kind: JunctionKind | None = None) -> list[JunctionSite]:
        return [
            e.site for e in self.entries
            if e.reverse_biased and (kind is None or e.site.kind is kind)
        ]

    def to_dict(self) -> dict:
        return {
            "float_warning": self.float_warning,
            "entries": [
                {
                    "kind": e.site.kind.value,
                    "owner": e.site.owner,
                    "net": e.site.attached_net,
                    "rect": [e.site.rect.x, e.site.rect.y, e.site.rect.w, e.site.rect.h],
                    "reverse_biased": e.reverse_biased,
                    "bias_V": e.bias_magnitude,
                }
                for e in self.entries
            ],
        }


@dataclass
class _Flat:
    rails: dict[str, Level]
    inputs: list[str]
    ties: dict[str, int]
    nets: list[str]
    # (kind, gate, source, drain)
    switches: list[tuple[str, str, str, str]] = field(default_factory=list)


def _flatten(design: ChipDesign) -> _Flat:
    rails: dict[str, Level] = {}
    nets: dict[str, None] = {}
    switches = []
    for pl in design.placements:
        for n in pl.cell.nets:
            g = pl.global_net(n.id)
            nets.setdefault(g)
            if n.kind == "supply":
                if rails.get(g) is Level.LOW:
                    raise ShortCircuit(f"net {g} is both supply and ground")
                rails[g] = Level.HIGH
            elif n.kind == "ground":
                if rails.get(g) is Level.HIGH:
                    raise ShortCircuit(f"net {g} is both supply and ground")
                rails[g] = Level.LOW
        for t in pl.cell.transistors:
            switches.append(
                (t.kind, pl.global_net(t.gate), pl.global_net(t.source), pl.global_net(t.drain))
            )
    return _Flat(rails, design.primary_inputs, design.tie_map(), list(nets), switches)


def _reach(starts: Iterable[str], adj: Mapping[str, list[str]]) -> set[str]:
    seen = set(starts)
    queue = deque(seen)
    while queue:
        n = queue.popleft()
        for m in adj.get(n, ()):
            if m not in seen:
                seen.add(m)
                queue.append(m)
    return seen


def evaluate_static(
    obj: Cell | ChipDesign, pattern: InputPattern | str, vdd: float = DEFAULT_VDD
) -> NodeAssignment:
    """Static logic level of every net under ``pattern``.

    Conduction closure is iterated to a fixpoint so that gates driven by other
    cells' outputs resolve in chain order.  Raises :class:`ShortCircuit` when a
    net connects to both rails and :class:`UnresolvedGate` when a gate sits on
    a FLOAT net.
    """
    design = as_design(obj)
    pattern = InputPattern.coerce(pattern)
    flat = _flatten(design)
    if len(pattern) != len(flat.inputs):
        raise PatternError(
            f"pattern {pattern} has {len(pattern)} digits; design {design.name} "
            f"has {len(flat.inputs)} primary inputs {flat.inputs}"
        )

    fixed: dict[str, Level] = dict(flat.rails)
    for net, lvl in pattern.assign(flat.inputs).items():
        if net in flat.ties and flat.ties[net] != lvl:
            raise PatternError(f"pattern sets {net}={lvl} but it is tied to {flat.ties[net]}")
        fixed[net] = Level.HIGH if lvl else Level.LOW
    for net, lvl in flat.ties.items():
        fixed.setdefault(net, Level.HIGH if lvl else Level.LOW)

    high_src = [n for n, lv in fixed.items() if lv is Level.HIGH]
    low_src = [n for n, lv in fixed.items() if lv is Level.LOW]
    levels: dict[str, Level] = dict(fixed)

    while True:
        adj: dict[str, list[str]] = defaultdict(list)
        for kind, gate, src, drn in flat.switches:
            g = levels.get(gate)
            if (kind == "NMOS" and g is Level.HIGH) or (kind == "PMOS" and g is Level.LOW):
                if src in fixed and drn in fixed and fixed[src] is not fixed[drn]:
                    raise ShortCircuit(f"conducting switch joins {src} and {drn}")
                # fixed nets are sources, never pass-through
                if src not in fixed:
                    adj[drn].append(src)
                if drn not in fixed:
                    adj[src].append(drn)
        hi = _reach(high_src, adj)
        lo = _reach(low_src, adj)
        both = sorted((hi & lo) - set(fixed))
        if both:
            raise ShortCircuit(f"nets {both} reachable from both rails")
        changed = False
        for n in flat.nets:
            if n in fixed:
                continue
            new = Level.HIGH if n in hi else Level.LOW if n in lo else None
            if new is not None and levels.get(n) is not new:
                levels[n] = new
                changed = True
        if not changed:
            break

    for n in flat.nets:
        levels.setdefault(n, Level.FLOAT)
    for kind, gate, _, _ in flat.switches:
        if levels[gate] is Level.FLOAT:
            raise UnresolvedGate(f"gate net {gate} is floating")
    return NodeAssignment({n: levels[n] for n in flat.nets}, vdd)


def junction_sites(obj: Cell | ChipDesign) -> list[JunctionSite]:
    """Diffusion/substrate and well/substrate junctions in chip coordinates.

    Diffusions shared by two transistors (same rectangle, same net) count once.
    """
    design = as_design(obj)
    sites: dict[tuple, JunctionSite] = {}
    for pl in design.placements:
        dx, dy = pl.origin
        for t in pl.cell.transistors:
            kind = JunctionKind.NDIFF_PSUB if t.kind == "NMOS" else JunctionKind.PDIFF_NWELL
            for net, r in ((t.source, t.source_diff), (t.drain, t.drain_diff)):
                site = JunctionSite(kind, r.translate(dx, dy), pl.global_net(net), pl.instance)
                sites.setdefault((kind, site.rect, site.attached_net, pl.instance), site)
        well = JunctionSite(JunctionKind.NWELL_PSUB, pl.cell.well.translate(dx, dy), None, pl.instance)
        sites.setdefault((well.kind, well.rect, None, pl.instance), well)
    return list(sites.values())


def reverse_biased_junctions(obj: Cell | ChipDesign, assign: NodeAssignment) -> BiasReport:
    """Bias state of every junction site given a static node assignment.

    n+ diffusion is reverse-biased when its net is HIGH, p+ diffusion when its
    net is LOW, and the well/substrate junction always.  FLOAT nets bias
    nothing and set ``float_warning``.
    """
    entries = []
    warn = False
    for site in junction_sites(obj):
        if site.kind is JunctionKind.NWELL_PSUB:
            on = True
        else:
            lv = assign[site.attached_net]
            if lv is Level.FLOAT:
                warn = True
            on = lv is (Level.HIGH if site.kind is JunctionKind.NDIFF_PSUB else Level.LOW)
        entries.append(BiasEntry(site, on, assign.vdd if on else 0.0))
    return BiasReport(tuple(entries), warn)


def bias_report(obj: Cell | ChipDesign, pattern: InputPattern | str, vdd: float = DEFAULT_VDD) -> BiasReport:
    return reverse_biased_junctions(obj, evaluate_static(obj, pattern, vdd))


def truth_table(cell: Cell) -> dict[str, Level]:
    if len(cell.outputs) != 1:
        raise EvaluationError(f"cell {cell.name} must have exactly one output")
    out = cell.outputs[0]
    return {
        p.digits: evaluate_static(cell, p)[out] for p in all_patterns(len(cell.inputs))
    }
