"""Behavioral simulator of a memristor-crossbar massive MIMO MMSE-SIC detector."""

from .crossbar import (
    DEFAULT_RANGE,
    ConductanceRange,
    CrossbarProgram,
    decode_output,
    encode_inputs,
    map_matrix,
    program_stage,
    quantize_conductance,
    solve_module,
)
from .detector import DetectorInstance, build_detector, detect
from .mimo import (
    ChannelRealization,
    Constellation,
    MimoConfig,
    build_constellation,
    demap_bits,
    generate_channel,
    modulate_bits,
    transmit,
)
from .sic import flop_count, mmse_stage, order_columns, realify_matrix, realify_vector, sic_detect
from .slicer import SlicerConfig, Structure, slicer_eval, truth_table

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_RANGE",
    "DetectorInstance",
    "build_detector",
    "detect",
    "ConductanceRange",
    "CrossbarProgram",
    "decode_output",
    "encode_inputs",
    "map_matrix",
    "program_stage",
    "quantize_conductance",
    "solve_module",
    "ChannelRealization",
    "Constellation",
    "MimoConfig",
    "build_constellation",
    "demap_bits",
    "generate_channel",
    "modulate_bits",
    "transmit",
    "flop_count",
    "mmse_stage",
    "order_columns",
    "realify_matrix",
    "realify_vector",
    "sic_detect",
    "SlicerConfig",
    "Structure",
    "slicer_eval",
    "truth_table",
]
