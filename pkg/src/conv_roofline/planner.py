"""Roofline cost model for Winograd, Regular-FFT and Gauss-FFT convolution layers.

Each method runs in four stages (input transform, kernel transform,
element-wise products, output transform). For every stage the model counts
floating point operations (FPO) and bytes moved between the core-private
cache and main memory (DM); the roofline then bounds its running time by
either peak FLOPS or memory bandwidth.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

from .model import BYTES_PER_REAL, LayerShape, MachineSpec, Method, PLANNED_METHODS, tile_geometry
from .tables import CostTables, Stage, default_tables, tile_search_space, transform_cost


class CostStage(str, enum.Enum):
    INPUT_TRANSFORM = "InputTransform"
    KERNEL_TRANSFORM = "KernelTransform"
    ELEMENT_WISE = "ElementWise"
    OUTPUT_TRANSFORM = "OutputTransform"


class InfeasibleBlockingError(ValueError):
    pass


@dataclass(frozen=True)
class BlockingSolution:
    c: int
    c_out_block: int
    alpha: int
    beta: int
    dm_per_flop_objective: float


def divisors(n: int) -> list[int]:
    small, large = [], []
    for d in range(1, math.isqrt(n) + 1):
        if n % d == 0:
            small.append(d)
            if d != n // d:
                large.append(n // d)
    return small + large[::-1]


@functools.lru_cache(maxsize=4096)
def blocking_solve(C: int, C_out: int, cache_bytes: int, beta: int) -> BlockingSolution:
    """Cache blocking of the per-location C x C' matrix product.

    Picks divisors c | C and c' | C' minimising (c + alpha c') / (c c') while a
    c x c' block of the kernel matrix (4 beta bytes per entry) fits in half
    the cache. alpha is 1 when c == C (no partial-sum traffic) and 2 otherwise.
    Ties go to the larger c, then the larger c'.
    """
    if C < 1 or C_out < 1:
        raise ValueError(f"channel counts must be >= 1, got C={C}, C'={C_out}")
    if beta not in (1, 2):
        raise ValueError(f"beta must be 1 (real) or 2 (complex), got {beta}")
    # 4 * beta * c * c' <= cache / 2
    budget = cache_bytes // (8 * beta)
    if budget < 1:
        raise InfeasibleBlockingError(
            f"cache of {cache_bytes} bytes cannot hold a single "
            f"{'complex' if beta == 2 else 'real'} 1x1 block in half its capacity"
        )
    out_divs = divisors(C_out)
    best: tuple[float, int, int, int] | None = None
    for c in divisors(C):
        cap = budget // c
        if cap < 1:
            break
        # objective 1/c' + alpha/c falls as c' grows: take the largest that fits
        c2 = max(d for d in out_divs if d <= cap)
        alpha = 1 if c == C else 2
        objective = (c + alpha * c2) / (c * c2)
        if best is None or objective <= best[0]:
            best = (objective, c, c2, alpha)
    assert best is not None
    objective, c, c2, alpha = best
    return BlockingSolution(c=c, c_out_block=c2, alpha=alpha, beta=beta, dm_per_flop_objective=objective)


def elementwise_ai(sol: BlockingSolution, method: Method | str) -> float:
    method = Method.parse(method)
    denom = sol.c + sol.alpha * sol.c_out_block
    if method is Method.REGULAR_FFT:
        return sol.c * sol.c_out_block / denom
    return sol.c * sol.c_out_block / (2 * denom)


@dataclass(frozen=True)
class StageCost:
    stage: CostStage
    fpo: int
    dm: int

    def __post_init__(self) -> None:
        if self.fpo <= 0 or self.dm <= 0:
            raise ValueError(f"{self.stage.value}: FPO and DM must be positive")

    @property
    def ai(self) -> float:
        return self.fpo / self.dm


def _tile_bytes(method: Method, t: int, n_cplx: int) -> int:
    """Bytes of one transformed t x t tile as stored in main memory."""
    if method is Method.WINOGRAD:
        return BYTES_PER_REAL * t * t
    reals_per_complex = 2 if method is Method.REGULAR_FFT else 3
    return BYTES_PER_REAL * reals_per_complex * n_cplx


def _elementwise_flops_per_product(method: Method, t: int, n_cplx: int) -> int:
    if method is Method.WINOGRAD:
        return 2 * t * t
    if method is Method.REGULAR_FFT:
        return 8 * n_cplx
    return 6 * n_cplx


def stage_costs(
    layer: LayerShape,
    method: Method | str,
    m: int,
    cache_bytes: int,
    tables: CostTables | None = None,
) -> tuple[StageCost, StageCost, StageCost, StageCost]:
    method = Method.parse(method)
    if method not in PLANNED_METHODS:
        raise ValueError(f"{method.value} has no staged cost model")
    tables = tables or default_tables()
    geo = tile_geometry(layer, m)
    B, C, Cp = layer.batch, layer.in_channels, layer.out_channels
    x, r, t, N = layer.image_size, layer.kernel_size, geo.t, geo.n_tiles
    f_in = transform_cost(method, m, r, Stage.INPUT, tables).flops
    f_ker = transform_cost(method, m, r, Stage.KERNEL, tables).flops
    f_out = transform_cost(method, m, r, Stage.OUTPUT, tables).flops
    tile_bytes = _tile_bytes(method, t, geo.n_cplx)

    sol = blocking_solve(C, Cp, cache_bytes, 2 if method is Method.REGULAR_FFT else 1)
    blocks = (C // sol.c) * (Cp // sol.c_out_block)

    return (
        StageCost(
            CostStage.INPUT_TRANSFORM,
            fpo=B * C * N * f_in,
            dm=BYTES_PER_REAL * B * C * x * x + B * C * N * tile_bytes,
        ),
        StageCost(
            CostStage.KERNEL_TRANSFORM,
            fpo=C * Cp * f_ker,
            dm=C * Cp * (BYTES_PER_REAL * r * r + tile_bytes),
        ),
        StageCost(
            CostStage.ELEMENT_WISE,
            fpo=_elementwise_flops_per_product(method, t, geo.n_cplx) * B * N * C * Cp,
            dm=tile_bytes * B * N * (sol.c + sol.alpha * sol.c_out_block) * blocks,
        ),
        StageCost(
            CostStage.OUTPUT_TRANSFORM,
            fpo=B * Cp * N * f_out,
            dm=B * Cp * N * (tile_bytes + BYTES_PER_REAL * m * m),
        ),
    )


def is_memory_bound(cost: StageCost, machine: MachineSpec) -> bool:
    return machine.cmr > cost.ai


def stage_runtime(cost: StageCost, machine: MachineSpec) -> float:
    """Seconds for one stage: FPO / peak when compute bound, DM / MB otherwise."""
    if is_memory_bound(cost, machine):
        return cost.dm / machine.mem_bandwidth
    return cost.fpo / machine.peak_flops


@dataclass(frozen=True)
class MethodPlan:
    method: Method
    m: int
    t: int
    stage_costs: tuple[StageCost, ...]
    stage_runtimes: tuple[float, ...]
    bound_per_stage: tuple[str, ...]
    total_runtime: float = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "total_runtime", math.fsum(self.stage_runtimes))

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method.value,
            "m": self.m,
            "t": self.t,
            "total_runtime": self.total_runtime,
            "stages": [
                {
                    "stage": cost.stage.value,
                    "fpo": cost.fpo,
                    "dm": cost.dm,
                    "ai": cost.ai,
                    "runtime": runtime,
                    "bound": bound,
                }
                for cost, runtime, bound in zip(self.stage_costs, self.stage_runtimes, self.bound_per_stage)
            ],
        }


def total_runtime(
    layer: LayerShape,
    method: Method | str,
    m: int,
    machine: MachineSpec,
    tables: CostTables | None = None,
) -> MethodPlan:
    method = Method.parse(method)
    costs = stage_costs(layer, method, m, machine.cache_bytes, tables)
    return MethodPlan(
        method=method,
        m=m,
        t=m + layer.kernel_size - 1,
        stage_costs=costs,
        stage_runtimes=tuple(stage_runtime(c, machine) for c in costs),
        bound_per_stage=tuple("memory" if is_memory_bound(c, machine) else "compute" for c in costs),
    )


def best_tile(
    layer: LayerShape,
    method: Method | str,
    machine: MachineSpec,
    max_winograd_tile: int = 6,
    tables: CostTables | None = None,
) -> MethodPlan:
    """The plan with the lowest predicted runtime; ties keep the smaller m."""
    method = Method.parse(method)
    space = tile_search_space(method, layer.kernel_size, max_winograd_tile, tables)
    if not space:
        raise ValueError(
            f"no {method.value} tile sizes available for r={layer.kernel_size} "
            f"(max Winograd tile {max_winograd_tile})"
        )
    best = None
    for m in space:
        plan = total_runtime(layer, method, m, machine, tables)
        if best is None or plan.total_runtime < best.total_runtime:
            best = plan
    return best


def speedup(
    layer: LayerShape,
    method_a: Method | str,
    method_b: Method | str,
    machine: MachineSpec,
    max_winograd_tile: int = 6,
    tables: CostTables | None = None,
) -> float:
    """Runtime of ``method_b`` over runtime of ``method_a``; > 1 means a is faster."""
    a = best_tile(layer, method_a, machine, max_winograd_tile, tables)
    b = best_tile(layer, method_b, machine, max_winograd_tile, tables)
    return b.total_runtime / a.total_runtime


SWEEP_PARAMETERS = ("cache", "channels", "x", "r", "cmr")
SWEEP_HEADER = ("param_value", "speedup_rfft_wino", "speedup_gfft_wino", "speedup_rfft_gfft")


@dataclass(frozen=True)
class SweepRow:
    param_value: float
    speedup_rfft_wino: float
    speedup_gfft_wino: float
    speedup_rfft_gfft: float

    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in SWEEP_HEADER}


def _vary(layer: LayerShape, machine: MachineSpec, parameter: str, value: float):
    if parameter == "cache":
        return layer, machine.with_cache(int(value))
    if parameter == "cmr":
        return layer, machine.with_cmr(float(value))
    if parameter == "channels":
        return layer.replace(in_channels=int(value), out_channels=int(value)), machine
    if parameter == "x":
        return layer.replace(image_size=int(value)), machine
    if parameter == "r":
        return layer.replace(kernel_size=int(value)), machine
    raise ValueError(f"unknown sweep parameter {parameter!r}; expected one of {SWEEP_PARAMETERS}")


def sweep(
    base_layer: LayerShape,
    machine: MachineSpec,
    parameter: str,
    values: Sequence[float],
    max_winograd_tile: int = 6,
    tables: CostTables | None = None,
) -> list[SweepRow]:
    """Speedups of the FFT methods over Winograd (and of Regular over Gauss) as one
    parameter varies. ``cache`` values are bytes; ``channels`` sets C = C'."""
    if not values:
        raise ValueError("sweep needs at least one value")
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"unknown sweep parameter {parameter!r}; expected one of {SWEEP_PARAMETERS}")
    rows = []
    for value in values:
        layer, mc = _vary(base_layer, machine, parameter, value)
        wino, rfft, gfft = (
            best_tile(layer, meth, mc, max_winograd_tile, tables).total_runtime
            for meth in PLANNED_METHODS
        )
        rows.append(
            SweepRow(
                param_value=value,
                speedup_rfft_wino=wino / rfft,
                speedup_gfft_wino=wino / gfft,
                speedup_rfft_gfft=gfft / rfft,
            )
        )
    return rows


def model_fitness(predicted: Sequence[float], measured: Sequence[float]) -> tuple[float, float]:
    """Relative RMSE of predictions and the derived fitness score 100 / (1 + rRMSE)."""
    if len(predicted) != len(measured):
        raise ValueError(f"length mismatch: {len(predicted)} predictions, {len(measured)} measurements")
    if not measured:
        raise ValueError("need at least one measurement")
    if any(v == 0 for v in measured):
        raise ValueError("measured values must be non-zero")
    rrmse = math.sqrt(math.fsum(((p - q) / q) ** 2 for p, q in zip(predicted, measured)) / len(measured))
    return rrmse, 100.0 / (1.0 + rrmse)
