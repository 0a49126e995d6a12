"""Gaussian laser spot and the junction photocurrent model.

Each reverse-biased junction contributes

    i_sat * response(power) * kappa[kind] * area(rect) * overlap(spot, rect)

where ``overlap`` is the fraction of beam power landing on the rectangle and
``response`` is a thresholded saturating exponential of laser power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .logic import (
    DEFAULT_VDD,
    JunctionKind,
    JunctionSite,
    bias_report,
    junction_sites,
)
from .netlist import Cell, ChipDesign, InputPattern, Rect, as_design

KAPPA_KEYS = {
    JunctionKind.NDIFF_PSUB: "ndiff",
    JunctionKind.PDIFF_NWELL: "pdiff",
    JunctionKind.NWELL_PSUB: "nwell",
}


@dataclass(frozen=True)
class LaserSpot:
    cx: float
    cy: float
    diameter_1e2: float = 2.6
    power_pct: float = 0.0
    pulse_start: float = 66.0
    pulse_duration: float = 100.0

    def __post_init__(self):
        if not self.diameter_1e2 > 0:
            raise ValueError("spot diameter must be positive")
        if not 0 <= self.power_pct <= 100:
            raise ValueError("laser power must lie in [0, 100] %")
        if not self.pulse_duration > 0:
            raise ValueError("pulse duration must be positive")

    @property
    def radius_1e2(self) -> float:
        return self.diameter_1e2 / 2

    @property
    def center(self) -> tuple[float, float]:
        return (self.cx, self.cy)

    def moved(self, cx: float, cy: float) -> "LaserSpot":
        return replace(self, cx=cx, cy=cy)

    def with_power(self, power_pct: float) -> "LaserSpot":
        return replace(self, power_pct=power_pct)


@dataclass(frozen=True)
class ObicParams:
    p_th: float
    p_k: float
    i_sat: float
    kappa: Mapping[str, float] = field(
        default_factory=lambda: {"ndiff": 1.0, "pdiff": 1.0, "nwell": 1.0}
    )

    def __post_init__(self):
        if self.p_th < 0:
            raise ValueError("p_th must be >= 0")
        if not self.p_k > 0:
            raise ValueError("p_k must be > 0")
        if not self.i_sat > 0:
            raise ValueError("i_sat must be > 0")
        missing = set(KAPPA_KEYS.values()) - set(self.kappa)
        if missing:
            raise ValueError(f"kappa missing {sorted(missing)}")
        if any(v < 0 for v in self.kappa.values()):
            raise ValueError("kappa values must be >= 0")

    def kappa_for(self, kind: JunctionKind) -> float:
        return float(self.kappa[KAPPA_KEYS[kind]])

    def to_dict(self) -> dict:
        return {
            "p_th": self.p_th,
            "p_k": self.p_k,
            "i_sat": self.i_sat,
            "kappa": {k: float(self.kappa[k]) for k in ("ndiff", "pdiff", "nwell")},
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ObicParams":
        return cls(
            float(d["p_th"]),
            float(d["p_k"]),
            float(d["i_sat"]),
            {k: float(d["kappa"][k]) for k in ("ndiff", "pdiff", "nwell")},
        )


@dataclass(frozen=True)
class CurrentBreakdown:
    per_junction: tuple[tuple[JunctionSite, float], ...]
    total: float


def spot_intensity(spot: LaserSpot, p: tuple[float, float]) -> float:
    """Relative intensity at ``p``: 1 at the centre, e^-2 on the 1/e^2 radius."""
    w = spot.radius_1e2
    r2 = (p[0] - spot.cx) ** 2 + (p[1] - spot.cy) ** 2
    return math.exp(-2.0 * r2 / (w * w))


def _interval_fraction(a: float, b: float) -> float:
    # standardized bounds; erfc on the far side keeps tails accurate
    if a >= 0:
        return 0.5 * (math.erfc(a) - math.erfc(b))
    if b <= 0:
        return 0.5 * (math.erfc(-b) - math.erfc(-a))
    return 0.5 * (math.erf(b) - math.erf(a))


def overlap_fraction(spot: LaserSpot, rect: Rect) -> float:
    """Fraction of total beam power falling inside ``rect`` (closed form).

    The 2-D Gaussian separates, so this is the product of two 1-D normal
    interval probabilities with sigma = w/2.
    """
    if rect.w <= 0 or rect.h <= 0:
        return 0.0
    s = math.sqrt(2.0) / spot.radius_1e2
    fx = _interval_fraction((rect.x - spot.cx) * s, (rect.x1 - spot.cx) * s)
    fy = _interval_fraction((rect.y - spot.cy) * s, (rect.y1 - spot.cy) * s)
    return max(0.0, fx) * max(0.0, fy)


def obic_response(params: ObicParams, power_pct: float) -> float:
    if power_pct <= params.p_th:
        return 0.0
    return -math.expm1(-(power_pct - params.p_th) / params.p_k)


def junction_weight(site: JunctionSite, spot: LaserSpot) -> float:
    """Geometric factor area * overlap for one junction."""
    return site.rect.area * overlap_fraction(spot, site.rect)


def induced_current(
    design: Cell | ChipDesign,
    pattern: InputPattern | str,
    spot: LaserSpot,
    params: ObicParams,
    vdd: float = DEFAULT_VDD,
) -> CurrentBreakdown:
    """Per-junction and total photocurrent (µA) for one static input pattern."""
    report = bias_report(design, pattern, vdd)
    scale = params.i_sat * obic_response(params, spot.power_pct)
    per = []
    for e in report.entries:
        i = 0.0
        if e.reverse_biased and scale > 0:
            i = scale * params.kappa_for(e.site.kind) * junction_weight(e.site, spot)
        per.append((e.site, i))
    return CurrentBreakdown(tuple(per), math.fsum(i for _, i in per))


def geometry_weights(
    design: Cell | ChipDesign, pattern: InputPattern | str, spot: LaserSpot, vdd: float = DEFAULT_VDD
) -> dict[str, float]:
    """Sum of area * overlap over reverse-biased junctions, per kappa key.

    ``induced_current(...).total == i_sat * response * sum(kappa[k] * w[k])``.
    """
    w = {k: 0.0 for k in KAPPA_KEYS.values()}
    for site in bias_report(design, pattern, vdd).biased():
        w[KAPPA_KEYS[site.kind]] += junction_weight(site, spot)
    return w


def illuminated_area(design: Cell | ChipDesign, spot: LaserSpot, step: float = 0.005) -> float:
    """Area (µm²) of junction regions inside the 1/e² disc, on a sampling grid.

    Overlapping regions (p+ diffusion inside the well) count once.
    """
    r = spot.radius_1e2
    n = int(math.ceil(2 * r / step))
    xs = spot.cx - r + (np.arange(n) + 0.5) * (2 * r / n)
    ys = spot.cy - r + (np.arange(n) + 0.5) * (2 * r / n)
    X, Y = np.meshgrid(xs, ys)
    inside = (X - spot.cx) ** 2 + (Y - spot.cy) ** 2 <= r * r
    covered = np.zeros_like(inside)
    for site in junction_sites(design):
        q = site.rect
        covered |= (X >= q.x) & (X <= q.x1) & (Y >= q.y) & (Y <= q.y1)
    return float(np.count_nonzero(inside & covered)) * (2 * r / n) ** 2


def nmos_center(design: Cell | ChipDesign, instance: str = "u0") -> tuple[float, float]:
    """Centre of the bounding box of an instance's n+ diffusions."""
    rects = [
        s.rect for s in junction_sites(as_design(design))
        if s.owner == instance and s.kind is JunctionKind.NDIFF_PSUB
    ]
    if not rects:
        raise ValueError(f"instance {instance} has no NMOS diffusions")
    x0 = min(r.x for r in rects)
    x1 = max(r.x1 for r in rects)
    y0 = min(r.y for r in rects)
    y1 = max(r.y1 for r in rects)
    return ((x0 + x1) / 2, (y0 + y1) / 2)


def scan_totals(
    design: Cell | ChipDesign,
    patterns: list[str],
    xs: np.ndarray,
    ys: np.ndarray,
    spot: LaserSpot,
    params: ObicParams,
    vdd: float = DEFAULT_VDD,
) -> list[tuple[float, float, str, float]]:
    """Total current for every (y, x, pattern) on a spot-centre grid.

    Bias states are evaluated once per pattern; the per-point sum matches
    :func:`induced_current` with the spot moved there.
    """
    scale = params.i_sat * obic_response(params, spot.power_pct)
    biased = {p: bias_report(design, p, vdd).biased() for p in patterns}
    rows = []
    for y in ys:
        for x in xs:
            s = spot.moved(float(x), float(y))
            for p in patterns:
                total = math.fsum(
                    scale * params.kappa_for(site.kind) * junction_weight(site, s)
                    for site in biased[p]
                ) if scale > 0 else 0.0
                rows.append((float(x), float(y), p, total))
    return rows
