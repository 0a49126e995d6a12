"""Simulation of laser-induced, data-dependent static current in CMOS cells."""

__version__ = "0.1.0"

from .netlist import (
    Cell,
    CellLibrary,
    ChipDesign,
    InputPattern,
    build_chain,
    builtin_fixtures,
    libval_nand_chain,
    parse_cell_library,
    serialize_cell_library,
    validate,
)
from .logic import Level, evaluate_static, reverse_biased_junctions, truth_table
from .photo import LaserSpot, ObicParams, induced_current, obic_response, overlap_fraction
from .traces import NoiseModel, Scenario, synthesize_campaign, synthesize_trace
from .analysis import classify_pattern, detect_pulse_window, traces_to_distinguish, welch_t
from .calibration import Anchor, FitResult, fit_params
