"""Ammeter trace synthesis following the laser-on/laser-off measurement protocol.

A trace is ``n_samples`` current readings at jittered intervals; the laser
pulse adds the modelled photocurrent to every sample inside its window, and
baseline noise is added everywhere.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .netlist import (
    ChipDesign,
    InputPattern,
    builtin_fixtures,
    libval_nand_chain,
    parse_cell_library,
    single_instance,
)
from .photo import LaserSpot, ObicParams, induced_current

CSV_HEADER = ["trace_index", "sample_index", "time_us", "current_uA"]
LIBVAL_CHAIN = "LIBVAL_NAND_CHAIN"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "uniform"
    amplitude: float = 0.1

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("noise amplitude must be >= 0")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "uniform":
            return self.amplitude * rng.uniform(-1.0, 1.0, n)
        return self.amplitude * rng.standard_normal(n)


def resolve_design(ref: str, base_dir: Path | None = None) -> ChipDesign:
    """Turn a scenario ``design`` string into a chip.

    Accepts a built-in cell name, ``LIBVAL_NAND_CHAIN`` (4 NAND2X1 cells, B
    tied to 1), or ``path/to/file.net[:CHIP]`` resolved against ``base_dir``.
    """
    lib = builtin_fixtures()
    if ref in lib.cell_names:
        return single_instance(lib.cell(ref))
    if ref == LIBVAL_CHAIN:
        return libval_nand_chain()
    path_s, _, chip = ref.partition(":")
    path = Path(path_s)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    if not path.is_file():
        raise ScenarioError(f"design {ref!r} is neither a built-in nor a netlist file")
    parsed = parse_cell_library(path.read_text(encoding="utf-8"), base=lib)
    if chip:
        try:
            return parsed.chip(chip)
        except KeyError:
            raise ScenarioError(f"no chip {chip!r} in {path}") from None
    if parsed.chips:
        return parsed.chips[0]
    if len(parsed.cells) == 1:
        return single_instance(parsed.cells[0])
    raise ScenarioError(f"{path} holds no chip; name one with ':CHIP'")


@dataclass(frozen=True)
class Scenario:
    design: ChipDesign
    pattern: InputPattern
    spot: LaserSpot
    params: ObicParams
    noise: NoiseModel = NoiseModel()
    n_samples: int = 25
    jitter: tuple[float, float] = (11.0, 12.0)
    seed: int = 0
    design_ref: str = ""

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if not self.jitter[0] <= self.jitter[1]:
            raise ValueError("jitter min must not exceed max")
        if self.jitter[0] <= 0:
            raise ValueError("sample intervals must be positive")

    @cached_property
    def expected_total(self) -> float:
        """Noise-free in-pulse current (µA)."""
        return induced_current(self.design, self.pattern, self.spot, self.params).total

    def with_(self, **kw) -> "Scenario":
        return replace(self, **kw)

    def to_dict(self) -> dict:
        s = self.spot
        return {
            "design": self.design_ref or self.design.name,
            "pattern": self.pattern.digits,
            "spot": {
                "cx": s.cx,
                "cy": s.cy,
                "diameter_1e2": s.diameter_1e2,
                "power_pct": s.power_pct,
                "pulse_start_us": s.pulse_start,
                "pulse_duration_us": s.pulse_duration,
            },
            "params": self.params.to_dict(),
            "noise": {"kind": self.noise.kind, "amplitude": self.noise.amplitude},
            "n_samples": self.n_samples,
            "jitter_us": [self.jitter[0], self.jitter[1]],
            "seed": self.seed,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


PLACEHOLDER_PARAMS = {"p_th": 0.0, "p_k": 1.0, "i_sat": 1.0, "kappa": {"ndiff": 1.0, "pdiff": 1.0, "nwell": 1.0}}


def _merge(base: Mapping, over: Mapping) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def scenario_from_dict(
    d: Mapping[str, Any], base_dir: Path | None = None, require_params: bool = True
) -> Scenario:
    """Build a scenario from its JSON form.

    ``params`` may be an inline object or a path to a calibration report whose
    ``params`` member is used.  Templates (``require_params=False``) may omit
    it.
    """
    try:
        ref = str(d["design"])
        sp = d["spot"]
        params = d["params"] if require_params else d.get("params", PLACEHOLDER_PARAMS)
        if isinstance(params, str):
            ppath = Path(params)
            if base_dir is not None and not ppath.is_absolute():
                ppath = base_dir / ppath
            params = json.loads(ppath.read_text(encoding="utf-8"))["params"]
        noise = d.get("noise", {})
        jitter = d.get("jitter_us", [11.0, 12.0])
        if len(jitter) != 2:
            raise ScenarioError("jitter_us must be [min, max]")
        return Scenario(
            design=resolve_design(ref, base_dir),
            pattern=InputPattern(str(d["pattern"])),
            spot=LaserSpot(
                cx=float(sp["cx"]),
                cy=float(sp["cy"]),
                diameter_1e2=float(sp.get("diameter_1e2", 2.6)),
                power_pct=float(sp.get("power_pct", 0.0)),
                pulse_start=float(sp.get("pulse_start_us", 66.0)),
                pulse_duration=float(sp.get("pulse_duration_us", 100.0)),
            ),
            params=ObicParams.from_dict(params),
            noise=NoiseModel(str(noise.get("kind", "uniform")), float(noise.get("amplitude", 0.1))),
            n_samples=int(d.get("n_samples", 25)),
            jitter=(float(jitter[0]), float(jitter[1])),
            seed=int(d.get("seed", 0)),
            design_ref=ref,
        )
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError, OSError) as exc:
        raise ScenarioError(f"bad scenario: {exc!r}") from exc


def read_scenario_json(path: str | Path, _depth: int = 0) -> dict:
    """Scenario JSON with ``extends`` chains resolved (child keys win, nested merge)."""
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from exc
    if not isinstance(d, dict):
        raise ScenarioError(f"{path}: line 1: top level must be an object")
    parent = d.pop("extends", None)
    if parent is not None:
        if _depth > 8:
            raise ScenarioError(f"{path}: 'extends' nested too deeply")
        ppath = Path(parent)
        if not ppath.is_absolute():
            ppath = path.parent / ppath
        base = read_scenario_json(ppath, _depth + 1)
        # relative references in the parent stay relative to the parent
        for key in ("design", "params"):
            if key not in d and isinstance(base.get(key), str):
                cand = ppath.parent / base[key]
                if cand.exists():
                    base[key] = str(cand)
        d = _merge(base, d)
    return d


def load_scenario(path: str | Path, require_params: bool = True) -> Scenario:
    path = Path(path)
    return scenario_from_dict(read_scenario_json(path), path.parent, require_params)


@dataclass(frozen=True)
class Trace:
    times: np.ndarray
    currents: np.ndarray
    meta: Mapping[str, Any] = field(default_factory=dict)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.currents.tolist()))

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class TraceSet:
    scenario: Scenario
    traces: tuple[Trace, ...]
    campaign_seed: int

    def current_matrix(self) -> np.ndarray:
        return np.vstack([t.currents for t in self.traces])


def sample_schedule(rng: np.random.Generator, n: int, jitter: tuple[float, float]) -> np.ndarray:
    """Timestamps (µs) starting at 0 with i.i.d. uniform increments in ``jitter``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lo, hi = jitter
    if lo == hi:
        steps = np.full(n - 1, float(lo))
    else:
        steps = rng.uniform(lo, hi, n - 1)
    return np.concatenate(([0.0], np.cumsum(steps)))


def pulse_mask(times: np.ndarray, spot: LaserSpot) -> np.ndarray:
    return (times >= spot.pulse_start) & (times < spot.pulse_start + spot.pulse_duration)


def synthesize_trace(s: Scenario, rng: np.random.Generator, meta: Mapping | None = None) -> Trace:
    times = sample_schedule(rng, s.n_samples, s.jitter)
    currents = s.noise.sample(rng, s.n_samples)
    total = s.expected_total
    if total:
        currents = currents + np.where(pulse_mask(times, s.spot), total, 0.0)
    return Trace(times, currents, dict(meta or {}))


def trace_seed(campaign_seed: int, index: int) -> int:
    """Stable 64-bit seed for trace ``index`` of a campaign."""
    ss = np.random.SeedSequence([int(campaign_seed) & (2**64 - 1), index])
    return int(ss.generate_state(1, np.uint64)[0])


def synthesize_campaign(
    s: Scenario, n_traces: int, seed: int | None = None, workers: int = 1
) -> TraceSet:
    """``n_traces`` traces with per-trace seeds split from the campaign seed.

    Output does not depend on ``workers``.
    """
    if n_traces < 1:
        raise ValueError("n_traces must be >= 1")
    campaign = s.seed if seed is None else seed
    digest = s.digest()
    s.expected_total  # evaluate the model once, outside the workers

    def one(i: int) -> Trace:
        ts = trace_seed(campaign, i)
        return synthesize_trace(
            s, np.random.default_rng(ts), {"scenario": digest, "trace_seed": ts, "index": i}
        )

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            traces = tuple(pool.map(one, range(n_traces)))
    else:
        traces = tuple(one(i) for i in range(n_traces))
    return TraceSet(s, traces, campaign)


def export_csv(ts: TraceSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for ti, tr in enumerate(ts.traces):
        for si, (t, i) in enumerate(zip(tr.times, tr.currents)):
            w.writerow([ti, si, f"{t:.6f}", f"{i:.6f}"])
    return buf.getvalue()


def parse_trace_csv(text: str) -> list[Trace]:
    """Inverse of :func:`export_csv` (metadata is not carried by the CSV)."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER:
        raise ValueError("trace CSV header mismatch")
    by_trace: dict[int, list[tuple[int, float, float]]] = {}
    for r in rows[1:]:
        if not r:
            continue
        by_trace.setdefault(int(r[0]), []).append((int(r[1]), float(r[2]), float(r[3])))
    out = []
    for ti in sorted(by_trace):
        samples = sorted(by_trace[ti])
        out.append(
            Trace(np.array([s[1] for s in samples]), np.array([s[2] for s in samples]), {"index": ti})
        )
    return out
