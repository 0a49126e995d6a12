"""Transistor-level cell model with layout geometry, plus the textual netlist format.

A library file holds ``cell`` blocks (nets, transistors with their diffusion
rectangles, the n-well and the bounding box) and ``chip`` blocks that place
cells and wire their pins onto global nets.  All coordinates are in µm.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Mapping, Sequence

NET_KINDS = ("supply", "ground", "input", "output", "internal")
LEVEL_DIGITS = ("0", "1")


class NetlistError(ValueError):
    """Base class for netlist problems; ``line`` is 1-based or None."""

    def __init__(self, reason: str, line: int | None = None):
        self.reason = reason
        self.line = line
        super().__init__(f"line {line}: {reason}" if line is not None else reason)


class NetlistSyntaxError(NetlistError):
    pass


class DuplicateId(NetlistError):
    pass


class DanglingNetReference(NetlistError):
    pass


class EmptyInput(NetlistError):
    pass


class ChainError(ValueError):
    pass


class ZeroLength(ChainError):
    pass


class NoFreeInput(ChainError):
    pass


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    w: float
    h: float

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def x1(self) -> float:
        return self.x + self.w

    @property
    def y1(self) -> float:
        return self.y + self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2, self.y + self.h / 2)

    def translate(self, dx: float, dy: float) -> "Rect":
        return Rect(self.x + dx, self.y + dy, self.w, self.h)

    def contains(self, other: "Rect", eps: float = 1e-9) -> bool:
        return (
            other.x >= self.x - eps
            and other.y >= self.y - eps
            and other.x1 <= self.x1 + eps
            and other.y1 <= self.y1 + eps
        )

    def overlaps(self, other: "Rect") -> bool:
        """Positive-area intersection; touching edges do not count."""
        return (
            min(self.x1, other.x1) > max(self.x, other.x)
            and min(self.y1, other.y1) > max(self.y, other.y)
        )


@dataclass(frozen=True)
class Net:
    id: str
    kind: str


@dataclass(frozen=True)
class Transistor:
    id: str
    kind: str  # "NMOS" or "PMOS"
    gate: str
    source: str
    drain: str
    source_diff: Rect
    drain_diff: Rect


@dataclass(frozen=True)
class Cell:
    name: str
    nets: tuple[Net, ...]
    transistors: tuple[Transistor, ...]
    well: Rect
    bbox: Rect

    def net(self, net_id: str) -> Net:
        for n in self.nets:
            if n.id == net_id:
                return n
        raise KeyError(net_id)

    def nets_of_kind(self, kind: str) -> list[str]:
        return [n.id for n in self.nets if n.kind == kind]

    @property
    def inputs(self) -> list[str]:
        return self.nets_of_kind("input")

    @property
    def outputs(self) -> list[str]:
        return self.nets_of_kind("output")


@dataclass(frozen=True)
class Placement:
    cell: Cell
    instance: str
    origin: tuple[float, float]
    pin_map: tuple[tuple[str, str], ...] = ()

    def global_net(self, pin: str) -> str:
        """Chip-level net for a cell pin; unmapped pins stay local to the instance."""
        for p, n in self.pin_map:
            if p == pin:
                return n
        return f"{self.instance}.{pin}"


@dataclass(frozen=True)
class ChipDesign:
    name: str
    placements: tuple[Placement, ...]
    ties: tuple[tuple[str, int], ...] = ()

    @property
    def global_nets(self) -> list[str]:
        seen: dict[str, None] = {}
        for pl in self.placements:
            for n in pl.cell.nets:
                seen.setdefault(pl.global_net(n.id))
        return list(seen)

    def tie_map(self) -> dict[str, int]:
        return dict(self.ties)

    def driven_nets(self) -> set[str]:
        return {
            pl.global_net(pin) for pl in self.placements for pin in pl.cell.outputs
        }

    @property
    def primary_inputs(self) -> list[str]:
        """Global nets fed by input pins and driven by no instance output.

        Ordered by first appearance (placement order, then the cell's input
        order).  Tied nets are included; an input pattern must agree with them.
        """
        driven = self.driven_nets()
        seen: dict[str, None] = {}
        for pl in self.placements:
            for pin in pl.cell.inputs:
                g = pl.global_net(pin)
                if g not in driven:
                    seen.setdefault(g)
        return list(seen)

    def instance(self, inst: str) -> Placement:
        for pl in self.placements:
            if pl.instance == inst:
                return pl
        raise KeyError(inst)


@dataclass(frozen=True)
class CellLibrary:
    cells: tuple[Cell, ...] = ()
    chips: tuple[ChipDesign, ...] = ()

    def cell(self, name: str) -> Cell:
        for c in self.cells:
            if c.name == name:
                return c
        raise KeyError(name)

    def chip(self, name: str) -> ChipDesign:
        for c in self.chips:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def cell_names(self) -> list[str]:
        return [c.name for c in self.cells]


@dataclass(frozen=True)
class InputPattern:
    """Logic levels for an ordered list of input nets, written as a digit string.

    ``'01'`` means the first input is 0 and the second is 1.
    """

    digits: str

    def __post_init__(self):
        if not self.digits or any(d not in LEVEL_DIGITS for d in self.digits):
            raise ValueError(f"input pattern must be a non-empty 0/1 string, got {self.digits!r}")

    def __str__(self) -> str:
        return self.digits

    def __len__(self) -> int:
        return len(self.digits)

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(int(d) for d in self.digits)

    def assign(self, nets: Sequence[str]) -> dict[str, int]:
        if len(nets) != len(self.digits):
            raise ValueError(
                f"pattern {self.digits!r} has {len(self.digits)} digits, expected {len(nets)}"
            )
        return dict(zip(nets, self.levels))

    @classmethod
    def coerce(cls, value: "InputPattern | str") -> "InputPattern":
        return value if isinstance(value, cls) else cls(str(value))


def all_patterns(n: int) -> list[InputPattern]:
    return [InputPattern(format(i, f"0{n}b")) for i in range(2**n)]


@dataclass(frozen=True)
class Violation:
    cell: str
    element: str
    rule: str
    detail: str = ""


# --------------------------------------------------------------------------
# parsing

_ID = r"[A-Za-z_][A-Za-z0-9_]*"
_NUM = r"-?\d+(?:\.\d+)?"
_RECT = rf"\(({_NUM}),({_NUM}),({_NUM}),({_NUM})\)"
_POINT = rf"\(({_NUM}),({_NUM})\)"

_RE_CELL = re.compile(rf"cell ({_ID})")
_RE_CHIP = re.compile(rf"chip ({_ID})")
_RE_NET = re.compile(rf"net ({_ID}) ({'|'.join(NET_KINDS)})")
_RE_MOS = re.compile(
    rf"(pmos|nmos) ({_ID}) gate=({_ID}) source=({_ID}) drain=({_ID}) sdiff={_RECT} ddiff={_RECT}"
)
_RE_WELL = re.compile(rf"well {_RECT}")
_RE_BBOX = re.compile(rf"bbox {_RECT}")
_RE_USE = re.compile(rf"use ({_ID}) as ({_ID}) at {_POINT}((?: map(?: {_ID}={_ID})+)?)")
_RE_TIE = re.compile(rf"tie ({_ID}) ([01])")


def _rect(groups: Sequence[str]) -> Rect:
    return Rect(*(float(g) for g in groups))


def _fmt(x: float) -> str:
    s = format(Decimal(repr(float(x))), "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _fmt_rect(r: Rect) -> str:
    return f"({_fmt(r.x)},{_fmt(r.y)},{_fmt(r.w)},{_fmt(r.h)})"


class _CellBuilder:
    def __init__(self, name: str, line: int):
        self.name = name
        self.line = line
        self.nets: list[Net] = []
        self.net_lines: dict[str, int] = {}
        self.transistors: list[tuple[Transistor, int]] = []
        self.well: Rect | None = None
        self.bbox: Rect | None = None

    def build(self, end_line: int) -> Cell:
        if self.well is None:
            raise NetlistSyntaxError(f"cell {self.name} has no well line", end_line)
        if self.bbox is None:
            raise NetlistSyntaxError(f"cell {self.name} has no bbox line", end_line)
        ids: set[str] = set()
        for t, ln in self.transistors:
            if t.id in ids or t.id in self.net_lines:
                raise DuplicateId(f"duplicate id {t.id} in cell {self.name}", ln)
            ids.add(t.id)
            for term in (t.gate, t.source, t.drain):
                if term not in self.net_lines:
                    raise DanglingNetReference(
                        f"transistor {t.id} references undeclared net {term}", ln
                    )
        return Cell(
            self.name,
            tuple(self.nets),
            tuple(t for t, _ in self.transistors),
            self.well,
            self.bbox,
        )


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_cell_library(text: str, base: CellLibrary | None = None) -> CellLibrary:
    """Parse netlist text into a :class:`CellLibrary`.

    Chips may reference cells defined earlier in the same text or in ``base``.
    Raises :class:`NetlistSyntaxError` (with the offending line) on grammar
    errors, :class:`DuplicateId`, :class:`DanglingNetReference`, or
    :class:`EmptyInput` when the text holds no blocks.
    """
    cells: dict[str, Cell] = {}
    chips: dict[str, ChipDesign] = {}
    known = {c.name: c for c in base.cells} if base is not None else {}

    cur_cell: _CellBuilder | None = None
    cur_chip: dict | None = None
    last_line = 0

    for lineno, raw in enumerate(text.split("\n"), start=1):
        last_line = lineno
        line = _strip(raw)
        if not line:
            continue
        line = " ".join(line.split())

        if cur_cell is None and cur_chip is None:
            if m := _RE_CELL.fullmatch(line):
                name = m.group(1)
                if name in cells or name in chips:
                    raise DuplicateId(f"duplicate block name {name}", lineno)
                cur_cell = _CellBuilder(name, lineno)
            elif m := _RE_CHIP.fullmatch(line):
                name = m.group(1)
                if name in cells or name in chips:
                    raise DuplicateId(f"duplicate block name {name}", lineno)
                cur_chip = {"name": name, "placements": [], "ties": [], "line": lineno}
            else:
                raise NetlistSyntaxError(f"expected 'cell' or 'chip' block, got {line!r}", lineno)
            continue

        if line == "end":
            if cur_cell is not None:
                cell = cur_cell.build(lineno)
                cells[cell.name] = cell
                known[cell.name] = cell
                cur_cell = None
            else:
                chips[cur_chip["name"]] = ChipDesign(
                    cur_chip["name"], tuple(cur_chip["placements"]), tuple(cur_chip["ties"])
                )
                cur_chip = None
            continue

        if cur_cell is not None:
            _parse_cell_line(cur_cell, line, lineno)
        else:
            _parse_chip_line(cur_chip, line, lineno, known)

    if cur_cell is not None or cur_chip is not None:
        raise NetlistSyntaxError("unterminated block (missing 'end')", last_line)
    if not cells and not chips:
        raise EmptyInput("netlist contains no cell or chip blocks")
    return CellLibrary(tuple(cells.values()), tuple(chips.values()))


def _parse_cell_line(b: _CellBuilder, line: str, lineno: int) -> None:
    if m := _RE_NET.fullmatch(line):
        nid, kind = m.groups()
        if nid in b.net_lines:
            raise DuplicateId(f"duplicate net {nid} in cell {b.name}", lineno)
        b.nets.append(Net(nid, kind))
        b.net_lines[nid] = lineno
    elif m := _RE_MOS.fullmatch(line):
        g = m.groups()
        b.transistors.append(
            (Transistor(g[1], g[0].upper(), g[2], g[3], g[4], _rect(g[5:9]), _rect(g[9:13])), lineno)
        )
    elif m := _RE_WELL.fullmatch(line):
        if b.well is not None:
            raise NetlistSyntaxError("second well line", lineno)
        b.well = _rect(m.groups())
    elif m := _RE_BBOX.fullmatch(line):
        if b.bbox is not None:
            raise NetlistSyntaxError("second bbox line", lineno)
        b.bbox = _rect(m.groups())
    else:
        raise NetlistSyntaxError(f"unrecognised cell statement {line!r}", lineno)


def _parse_chip_line(chip: dict, line: str, lineno: int, known: Mapping[str, Cell]) -> None:
    if m := _RE_USE.fullmatch(line):
        cell_name, inst, x, y, maps = m.groups()
        if cell_name not in known:
            raise DanglingNetReference(f"unknown cell {cell_name}", lineno)
        if any(p.instance == inst for p in chip["placements"]):
            raise DuplicateId(f"duplicate instance {inst}", lineno)
        cell = known[cell_name]
        pins = {n.id for n in cell.nets}
        pin_map = []
        for tok in maps.split()[1:]:
            pin, net = tok.split("=")
            if pin not in pins:
                raise DanglingNetReference(f"cell {cell_name} has no pin {pin}", lineno)
            if any(p == pin for p, _ in pin_map):
                raise DuplicateId(f"pin {pin} mapped twice", lineno)
            pin_map.append((pin, net))
        chip["placements"].append(Placement(cell, inst, (float(x), float(y)), tuple(pin_map)))
    elif m := _RE_TIE.fullmatch(line):
        net, level = m.groups()
        if any(n == net for n, _ in chip["ties"]):
            raise DuplicateId(f"net {net} tied twice", lineno)
        chip["ties"].append((net, int(level)))
    else:
        raise NetlistSyntaxError(f"unrecognised chip statement {line!r}", lineno)


# --------------------------------------------------------------------------
# serialization

HEADER = "# obicsim netlist v1 (units: um)\n"


def serialize_cell(cell: Cell) -> str:
    out = [f"cell {cell.name}"]
    out += [f"  net {n.id} {n.kind}" for n in cell.nets]
    for t in cell.transistors:
        out.append(
            f"  {t.kind.lower()} {t.id} gate={t.gate} source={t.source} drain={t.drain} "
            f"sdiff={_fmt_rect(t.source_diff)} ddiff={_fmt_rect(t.drain_diff)}"
        )
    out.append(f"  well {_fmt_rect(cell.well)}")
    out.append(f"  bbox {_fmt_rect(cell.bbox)}")
    out.append("end")
    return "\n".join(out) + "\n"


def serialize_chip(chip: ChipDesign) -> str:
    out = [f"chip {chip.name}"]
    for pl in chip.placements:
        s = f"  use {pl.cell.name} as {pl.instance} at ({_fmt(pl.origin[0])},{_fmt(pl.origin[1])})"
        if pl.pin_map:
            s += " map " + " ".join(f"{p}={n}" for p, n in pl.pin_map)
        out.append(s)
    out += [f"  tie {n} {lvl}" for n, lvl in chip.ties]
    out.append("end")
    return "\n".join(out) + "\n"


def serialize_cell_library(lib: CellLibrary) -> str:
    """Cells alphabetically, then chips alphabetically; members in declaration order."""
    blocks = [serialize_cell(c) for c in sorted(lib.cells, key=lambda c: c.name)]
    blocks += [serialize_chip(c) for c in sorted(lib.chips, key=lambda c: c.name)]
    return HEADER + "".join("\n" + b for b in blocks)


# --------------------------------------------------------------------------
# validation


def validate_cell(cell: Cell) -> list[Violation]:
    v: list[Violation] = []
    ids = [n.id for n in cell.nets]
    for nid in sorted({i for i in ids if ids.count(i) > 1}):
        v.append(Violation(cell.name, nid, "UniqueNetId"))
    for kind, rule in (("supply", "SupplyCount"), ("ground", "GroundCount")):
        count = len(cell.nets_of_kind(kind))
        if count != 1:
            v.append(Violation(cell.name, kind, rule, f"{count} {kind} nets"))
    net_ids = set(ids)
    for t in cell.transistors:
        if t.kind not in ("NMOS", "PMOS"):
            v.append(Violation(cell.name, t.id, "TransistorKind", t.kind))
        for term in (t.gate, t.source, t.drain):
            if term not in net_ids:
                v.append(Violation(cell.name, t.id, "DanglingNet", term))
        for label, r in (("source_diff", t.source_diff), ("drain_diff", t.drain_diff)):
            if r.w < 0 or r.h < 0:
                v.append(Violation(cell.name, f"{t.id}.{label}", "NegativeSize"))
            if not cell.bbox.contains(r):
                v.append(Violation(cell.name, f"{t.id}.{label}", "BBoxContainment"))
            if t.kind == "PMOS" and not cell.well.contains(r):
                v.append(Violation(cell.name, f"{t.id}.{label}", "WellContainment"))
            if t.kind == "NMOS" and cell.well.overlaps(r):
                v.append(Violation(cell.name, f"{t.id}.{label}", "WellContainment"))
    if cell.well.area <= 0:
        v.append(Violation(cell.name, "well", "WellArea"))
    if not cell.bbox.contains(cell.well):
        v.append(Violation(cell.name, "well", "BBoxContainment"))
    return v


def validate_chip(chip: ChipDesign) -> list[Violation]:
    v: list[Violation] = []
    insts = [p.instance for p in chip.placements]
    for inst in sorted({i for i in insts if insts.count(i) > 1}):
        v.append(Violation(chip.name, inst, "UniqueInstance"))
    for pl in chip.placements:
        pins = {n.id for n in pl.cell.nets}
        for pin, _ in pl.pin_map:
            if pin not in pins:
                v.append(Violation(chip.name, f"{pl.instance}.{pin}", "UnknownPin"))
    nets = set(chip.global_nets)
    for net, lvl in chip.ties:
        if net not in nets:
            v.append(Violation(chip.name, net, "TieUnknownNet"))
        if lvl not in (0, 1):
            v.append(Violation(chip.name, net, "TieLevel", str(lvl)))
    if _has_cycle(chip):
        v.append(Violation(chip.name, "placements", "CyclicChain"))
    return v


def _has_cycle(chip: ChipDesign) -> bool:
    drivers: dict[str, str] = {}
    for pl in chip.placements:
        for pin in pl.cell.outputs:
            drivers[pl.global_net(pin)] = pl.instance
    succ: dict[str, set[str]] = {pl.instance: set() for pl in chip.placements}
    for pl in chip.placements:
        for pin in pl.cell.inputs:
            src = drivers.get(pl.global_net(pin))
            if src is not None:
                succ[src].add(pl.instance)
    state: dict[str, int] = {}

    def visit(n: str) -> bool:
        state[n] = 1
        for m in succ[n]:
            if state.get(m) == 1 or (m not in state and visit(m)):
                return True
        state[n] = 2
        return False

    return any(n not in state and visit(n) for n in succ)


def validate(lib: CellLibrary) -> list[Violation]:
    """All invariant violations in the library; an empty list means valid."""
    v: list[Violation] = []
    for c in lib.cells:
        v += validate_cell(c)
    for ch in lib.chips:
        v += validate_chip(ch)
    return v


# --------------------------------------------------------------------------
# built-in fixtures
#
# Only the NAND2X1 footprint (5 x 7 = 35 um2) is a measured value; every
# internal rectangle below is invented at a plausible 250 nm scale.

FIXTURE_PROVENANCE = {
    "NAND2X1": {"bbox_area_um2": 35.0, "bbox": "measured", "internal_geometry": "invented"},
    "NOR2X1": {"bbox": "invented", "internal_geometry": "invented"},
    "INVX1": {"bbox": "invented", "internal_geometry": "invented"},
}

_NY, _NH = 0.8, 1.8  # NMOS diffusion band
_PY, _PH = 4.2, 2.2  # PMOS diffusion band, inside the well
_WELL_Y = 3.4


def _nand2() -> Cell:
    gnd, m, out_n = Rect(0.6, _NY, 1.0, _NH), Rect(1.85, _NY, 0.6, _NH), Rect(2.7, _NY, 1.0, _NH)
    vdd_l, out_p, vdd_r = Rect(0.6, _PY, 1.0, _PH), Rect(1.85, _PY, 1.0, _PH), Rect(3.1, _PY, 1.0, _PH)
    nets = (
        Net("VDD", "supply"), Net("GND", "ground"), Net("A", "input"),
        Net("B", "input"), Net("OUT", "output"), Net("M", "internal"),
    )
    ts = (
        Transistor("P1", "PMOS", "A", "VDD", "OUT", vdd_l, out_p),
        Transistor("P2", "PMOS", "B", "VDD", "OUT", vdd_r, out_p),
        Transistor("N1", "NMOS", "A", "M", "OUT", m, out_n),
        Transistor("N2", "NMOS", "B", "GND", "M", gnd, m),
    )
    return Cell("NAND2X1", nets, ts, Rect(0, _WELL_Y, 5, 7 - _WELL_Y), Rect(0, 0, 5, 7))


def _nor2() -> Cell:
    gnd_l, out_n, gnd_r = Rect(0.6, _NY, 1.0, _NH), Rect(1.85, _NY, 1.0, _NH), Rect(3.1, _NY, 1.0, _NH)
    vdd, m, out_p = Rect(0.6, _PY, 1.0, _PH), Rect(1.85, _PY, 0.6, _PH), Rect(2.7, _PY, 1.0, _PH)
    nets = (
        Net("VDD", "supply"), Net("GND", "ground"), Net("A", "input"),
        Net("B", "input"), Net("OUT", "output"), Net("M", "internal"),
    )
    ts = (
        Transistor("P1", "PMOS", "A", "VDD", "M", vdd, m),
        Transistor("P2", "PMOS", "B", "M", "OUT", m, out_p),
        Transistor("N1", "NMOS", "A", "GND", "OUT", gnd_l, out_n),
        Transistor("N2", "NMOS", "B", "GND", "OUT", gnd_r, out_n),
    )
    return Cell("NOR2X1", nets, ts, Rect(0, _WELL_Y, 5, 7 - _WELL_Y), Rect(0, 0, 5, 7))


def _inv() -> Cell:
    nets = (Net("VDD", "supply"), Net("GND", "ground"), Net("A", "input"), Net("OUT", "output"))
    ts = (
        Transistor("P1", "PMOS", "A", "VDD", "OUT", Rect(0.5, _PY, 0.8, _PH), Rect(1.55, _PY, 0.9, _PH)),
        Transistor("N1", "NMOS", "A", "GND", "OUT", Rect(0.5, _NY, 0.8, _NH), Rect(1.55, _NY, 0.9, _NH)),
    )
    return Cell("INVX1", nets, ts, Rect(0, _WELL_Y, 3, 7 - _WELL_Y), Rect(0, 0, 3, 7))


def builtin_fixtures() -> CellLibrary:
    """NAND2X1, NOR2X1 and INVX1 cells (alphabetical)."""
    return CellLibrary(tuple(sorted((_inv(), _nand2(), _nor2()), key=lambda c: c.name)))


def build_chain(
    cell: Cell,
    n: int,
    tie: Mapping[str, int] | None = None,
    name: str | None = None,
    chained_input: str | None = None,
) -> ChipDesign:
    """Place ``n`` copies of ``cell`` in a row, output of each feeding the next.

    Tied inputs of every instance share one global net ``<PIN>_TIE`` fixed at
    the given level.  The output drives ``chained_input`` (default: the first
    untied input) of the following instance.  The first instance's chained
    input is the global net ``IN``; the last output is ``OUT``.
    """
    tie = dict(tie or {})
    if n < 1:
        raise ZeroLength("chain length must be at least 1")
    if len(cell.outputs) != 1:
        raise ChainError(f"cell {cell.name} must have exactly one output")
    for pin, lvl in tie.items():
        if pin not in cell.inputs:
            raise ChainError(f"{pin} is not an input of {cell.name}")
        if lvl not in (0, 1):
            raise ChainError(f"tie level for {pin} must be 0 or 1")
    free = [p for p in cell.inputs if p not in tie]
    if not free:
        raise NoFreeInput(f"all inputs of {cell.name} are tied")
    chained = chained_input or free[0]
    if chained not in free:
        raise ChainError(f"{chained} is not a free input of {cell.name}")
    out_pin = cell.outputs[0]
    supply = cell.nets_of_kind("supply")
    ground = cell.nets_of_kind("ground")

    placements = []
    width = cell.bbox.w
    for i in range(n):
        inst = f"u{i}"
        pin_map = [(p, p) for p in supply + ground]
        for pin in cell.inputs:
            if pin in tie:
                net = f"{pin}_TIE"
            elif pin == chained:
                net = "IN" if i == 0 else f"n{i}"
            else:
                net = f"{pin}_{inst}"
            pin_map.append((pin, net))
        pin_map.append((out_pin, "OUT" if i == n - 1 else f"n{i + 1}"))
        origin = (i * width - cell.bbox.x, -cell.bbox.y)
        placements.append(Placement(cell, inst, origin, tuple(pin_map)))
    ties = tuple((f"{pin}_TIE", lvl) for pin, lvl in sorted(tie.items()))
    return ChipDesign(name or f"{cell.name}_chain{n}", tuple(placements), ties)


def single_instance(cell: Cell) -> ChipDesign:
    """Wrap one cell as a chip whose global nets carry the cell's own pin names."""
    pin_map = tuple((n.id, n.id) for n in cell.nets)
    return ChipDesign(cell.name, (Placement(cell, "u0", (0.0, 0.0), pin_map),))


def libval_nand_chain(n: int = 4, tied_input: str = "B") -> ChipDesign:
    """NAND2X1 chain with one input of every cell held at constant '1'."""
    nand = builtin_fixtures().cell("NAND2X1")
    return build_chain(nand, n, tie={tied_input: 1}, name="LIBVAL_NAND_CHAIN")


def as_design(obj: "Cell | ChipDesign") -> ChipDesign:
    return obj if isinstance(obj, ChipDesign) else single_instance(obj)
