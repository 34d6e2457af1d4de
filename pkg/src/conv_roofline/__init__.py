"""Roofline planner and reference numerics for Winograd, Regular-FFT and Gauss-FFT convolution."""

from .fft import conjugate_symmetric_pack, conjugate_symmetric_unpack, dft_2d, fft_conv_valid_2d, gauss_multiply
from .layer import (
    AccuracyRow,
    LayerTensors,
    accuracy_report,
    layer_forward,
    layer_forward_direct,
    oracle_equivalence,
    relative_error,
)
from .model import LayerShape, MachineSpec, Method, find_machine, machine_catalog, tile_geometry
from .networks import LayerCatalogEntry, find_layer, layer_catalog
from .planner import (
    MethodPlan,
    best_tile,
    blocking_solve,
    model_fitness,
    speedup,
    stage_costs,
    sweep,
    total_runtime,
)
from .tables import CostTables, Stage, default_tables, transform_cost
from .winograd import WinogradMatrices, winograd_conv_2d, winograd_matrices

__version__ = "0.1.0"
