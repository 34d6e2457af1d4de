"""Full convolutional-layer forward pass by direct, Winograd, Regular-FFT and Gauss-FFT.

The fast paths follow the four-stage structure the cost model assumes:
transform every input tile and every kernel, multiply per frequency
location as a (B*N x C) @ (C x C') matrix product, then inverse-transform
the B*C'*N output tiles and stitch them back together.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .fft import (
    conjugate_symmetric_pack,
    conjugate_symmetric_unpack,
    dft_2d,
    gauss_multiply,
    reversed_kernel_padded,
)
from .model import LayerShape, Method, half_spectrum_width
from .winograd import MAX_TILE, winograd_matrices

MAX_FFT_TILE = 32


@dataclass(frozen=True)
class LayerTensors:
    input: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.input.ndim != 4 or self.weights.ndim != 4:
            raise ValueError("input must be B x C x x x x and weights C' x C x r x r")
        _, c, h, w = self.input.shape
        _, wc, kh, kw = self.weights.shape
        if h != w or kh != kw:
            raise ValueError("only square images and kernels are supported")
        if wc != c:
            raise ValueError(f"weights expect {wc} input channels, input has {c}")
        if kh > h:
            raise ValueError(f"kernel {kh} is larger than image {h}")

    @property
    def shape(self) -> LayerShape:
        b, c, x, _ = self.input.shape
        cp, _, r, _ = self.weights.shape
        return LayerShape(b, c, cp, x, r)

    @classmethod
    def random(cls, layer: LayerShape, rng: np.random.Generator) -> "LayerTensors":
        """Inputs and weights drawn uniformly from [-1, 1] in double precision."""
        b, c, cp, x, r = (
            layer.batch,
            layer.in_channels,
            layer.out_channels,
            layer.image_size,
            layer.kernel_size,
        )
        return cls(
            input=rng.uniform(-1.0, 1.0, size=(b, c, x, x)),
            weights=rng.uniform(-1.0, 1.0, size=(cp, c, r, r)),
        )


def tile_decompose(image: np.ndarray, m: int, r: int) -> np.ndarray:
    """Split the trailing x x x axes into overlapping t x t tiles at stride m.

    Reads past the image edge are zero. Returns shape (..., N, t, t) with tiles
    in row-major order, tile n producing output block n.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    x = image.shape[-1]
    if image.shape[-2] != x or x < r:
        raise ValueError(f"image of shape {image.shape} cannot hold an {r}x{r} kernel")
    t = m + r - 1
    per_side = -(-(x - r + 1) // m)
    padded_size = (per_side - 1) * m + t
    padded = np.zeros(image.shape[:-2] + (padded_size, padded_size), dtype=image.dtype)
    padded[..., :x, :x] = image
    tiles = np.empty(image.shape[:-2] + (per_side * per_side, t, t), dtype=image.dtype)
    for i in range(per_side):
        for j in range(per_side):
            tiles[..., i * per_side + j, :, :] = padded[..., i * m : i * m + t, j * m : j * m + t]
    return tiles


def tile_assemble(blocks: np.ndarray, out_size: int) -> np.ndarray:
    """Inverse of the tiling on the output side: (..., N, m, m) -> (..., out, out)."""
    n, m = blocks.shape[-3], blocks.shape[-1]
    per_side = int(round(n**0.5))
    if per_side * per_side != n:
        raise ValueError(f"{n} blocks do not form a square grid")
    grid = blocks.reshape(blocks.shape[:-3] + (per_side, per_side, m, m))
    full = np.swapaxes(grid, -3, -2).reshape(blocks.shape[:-3] + (per_side * m, per_side * m))
    return full[..., :out_size, :out_size]


def layer_forward_direct(tensors: LayerTensors) -> np.ndarray:
    """Direct valid cross-correlation accumulated over input channels, in float64."""
    return _direct(tensors.input.astype(np.float64), tensors.weights.astype(np.float64))


def _direct(inp: np.ndarray, weights: np.ndarray) -> np.ndarray:
    r = weights.shape[-1]
    windows = np.lib.stride_tricks.sliding_window_view(inp, (r, r), axis=(2, 3))
    return np.einsum("bcijkl,dckl->bdij", windows, weights, optimize=True)


@dataclass(frozen=True)
class ForwardTrace:
    """How many transforms and per-location products a forward pass executed."""

    input_transforms: int
    kernel_transforms: int
    output_transforms: int
    locations: int
    matmul_shape: tuple[int, int, int]


def supported_tiles(method: Method | str, r: int, max_winograd_tile: int = MAX_TILE) -> list[int]:
    method = Method.parse(method)
    if method is Method.WINOGRAD:
        return list(range(2, min(max_winograd_tile, MAX_TILE) - r + 2))
    if method.is_fft:
        return list(range(1, MAX_FFT_TILE - r + 2))
    raise ValueError(f"{method.value} is not a tiled method")


def _dtypes(precision: str):
    if precision == "single":
        return np.float32, np.complex64
    if precision == "double":
        return np.float64, np.complex128
    raise ValueError(f"precision must be 'single' or 'double', got {precision!r}")


def layer_forward_traced(
    tensors: LayerTensors,
    method: Method | str,
    m: int,
    precision: str = "single",
    points: Sequence | None = None,
) -> tuple[np.ndarray, ForwardTrace]:
    """Forward pass by a tiled method; ``points`` overrides the Winograd interpolation nodes."""
    method = Method.parse(method)
    layer = tensors.shape
    r = layer.kernel_size
    if method is Method.DIRECT:
        raise ValueError("use layer_forward_direct for the direct method")
    if m not in supported_tiles(method, r):
        raise ValueError(f"{method.value} does not support m={m} with r={r}")
    real_t, cplx_t = _dtypes(precision)
    B, C, Cp = layer.batch, layer.in_channels, layer.out_channels
    t = m + r - 1

    tiles = tile_decompose(tensors.input.astype(real_t), m, r)  # B, C, N, t, t
    N = tiles.shape[2]
    weights = tensors.weights.astype(real_t)

    if method is Method.WINOGRAD:
        mats = winograd_matrices(m, r, points)
        a_t, b_t, g = (x.astype(real_t) for x in (mats.A_t, mats.B_t, mats.G))
        u = b_t @ tiles @ b_t.T  # B, C, N, t, t
        v = g @ weights @ g.T  # C', C, t, t
        # per location e: (B*N x C) @ (C x C')
        u_e = u.transpose(3, 4, 0, 2, 1).reshape(t, t, B * N, C)
        v_e = v.transpose(2, 3, 1, 0)
        x_e = u_e @ v_e  # t, t, B*N, C'
        pre = x_e.reshape(t, t, B, N, Cp).transpose(2, 4, 3, 0, 1)
        out_tiles = a_t @ pre @ a_t.T
        locations = t * t
    else:
        width = half_spectrum_width(t)
        u = conjugate_symmetric_pack(dft_2d(tiles, dtype=cplx_t))  # B, C, N, t, w
        v = conjugate_symmetric_pack(dft_2d(reversed_kernel_padded(weights, t), dtype=cplx_t))
        u_e = u.transpose(3, 4, 0, 2, 1).reshape(t, width, B * N, C)
        v_e = v.transpose(2, 3, 1, 0)  # t, w, C, C'
        if method is Method.REGULAR_FFT:
            x_e = u_e @ v_e
        else:
            x_e = _gauss_matmul(u_e, v_e)
        pre = x_e.reshape(t, width, B, N, Cp).transpose(2, 4, 3, 0, 1)
        full = conjugate_symmetric_unpack(pre, t)
        circ = dft_2d(full, inverse=True, dtype=cplx_t).real
        out_tiles = circ[..., r - 1 :, r - 1 :]
        locations = t * width

    output = tile_assemble(out_tiles, layer.output_size)
    trace = ForwardTrace(
        input_transforms=int(np.prod(u.shape[:3])),
        kernel_transforms=int(np.prod(v.shape[:2])),
        output_transforms=int(np.prod(out_tiles.shape[:3])),
        locations=locations,
        matmul_shape=(u_e.shape[-2], u_e.shape[-1], v_e.shape[-1]),
    )
    return output, trace


def _gauss_matmul(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Complex matrix product as three real products (Gauss' trick).

    The tile side keeps U_r, U_i and U_r + U_i; the kernel side V_r, V_i - V_r
    and V_r + V_i, matching what the transforms would store.
    """
    ur, ui = u.real, u.imag
    vr, vi = v.real, v.imag
    u_sum = ur + ui
    v_diff = vi - vr
    v_sum = vr + vi
    tmp1 = u_sum @ vr
    tmp2 = ur @ v_diff
    tmp3 = ui @ v_sum
    out = np.empty(tmp1.shape, dtype=u.dtype)
    out.real = tmp1 - tmp3
    out.imag = tmp1 + tmp2
    return out


def layer_forward(
    tensors: LayerTensors,
    method: Method | str,
    m: int,
    precision: str = "single",
    points: Sequence | None = None,
) -> np.ndarray:
    return layer_forward_traced(tensors, method, m, precision, points)[0]


def relative_error(approx: np.ndarray, exact: np.ndarray) -> float:
    """L2 relative error ||approx - exact|| / ||exact||."""
    exact = np.asarray(exact, dtype=np.float64)
    diff = np.asarray(approx, dtype=np.float64) - exact
    norm = np.linalg.norm(exact)
    if norm == 0:
        return float(np.linalg.norm(diff))
    return float(np.linalg.norm(diff) / norm)


ACCURACY_HEADER = ("method", "m", "t", "r", "rel_error", "trials", "seed")


@dataclass(frozen=True)
class AccuracyRow:
    method: Method
    m: int
    t: int
    r: int
    rel_error: float
    trials: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "m": self.m,
            "t": self.t,
            "r": self.r,
            "rel_error": self.rel_error,
            "trials": self.trials,
            "seed": self.seed,
        }


def default_accuracy_configs(r: int) -> list[tuple[Method, int]]:
    configs: list[tuple[Method, int]] = [(Method.DIRECT, 1)]
    configs += [(Method.WINOGRAD, m) for m in supported_tiles(Method.WINOGRAD, r)]
    for method in (Method.REGULAR_FFT, Method.GAUSS_FFT):
        configs += [(method, t - r + 1) for t in (8, 16, 24, 32) if t - r + 1 >= 1]
    return configs


def accuracy_report(
    layer: LayerShape,
    configs: Iterable[tuple[Method | str, int]] | None = None,
    trials: int = 100,
    seed: int = 0,
    points: Sequence | None = None,
) -> list[AccuracyRow]:
    """Mean single-precision error of each (method, m) against the float64 oracle.

    Every trial draws a fresh layer from its own spawned RNG stream, so the
    result depends only on ``seed``. The ``Direct`` row runs the direct
    algorithm in float32 and serves as a baseline.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    r = layer.kernel_size
    configs = [(Method.parse(meth), m) for meth, m in (configs or default_accuracy_configs(r))]
    totals = np.zeros(len(configs))
    for stream in np.random.SeedSequence(seed).spawn(trials):
        tensors = LayerTensors.random(layer, np.random.default_rng(stream))
        exact = layer_forward_direct(tensors)
        for i, (method, m) in enumerate(configs):
            if method is Method.DIRECT:
                approx = _direct(tensors.input.astype(np.float32), tensors.weights.astype(np.float32))
            else:
                approx = layer_forward(tensors, method, m, "single", points)
            totals[i] += relative_error(approx, exact)
    return [
        AccuracyRow(
            method=method,
            m=m,
            t=m + r - 1 if method is not Method.DIRECT else r,
            r=r,
            rel_error=float(total / trials),
            trials=trials,
            seed=seed,
        )
        for (method, m), total in zip(configs, totals)
    ]


def parse_configs(items: Sequence[str]) -> list[tuple[Method, int]]:
    """Parse ``"Winograd:4"``-style method/tile pairs."""
    out = []
    for item in items:
        name, _, m = item.partition(":")
        if not m:
            raise ValueError(f"expected METHOD:M, got {item!r}")
        out.append((Method.parse(name), int(m)))
    return out


TOLERANCE = {"single": 1e-4, "double": 1e-9}
VERIFY_HEADER = ("layer", "method", "m", "precision", "rel_error", "tolerance", "ok")


@dataclass(frozen=True)
class OracleCheck:
    layer: LayerShape
    method: Method
    m: int
    precision: str
    rel_error: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.rel_error <= self.tolerance

    def to_dict(self) -> dict:
        shape = self.layer
        return {
            "layer": f"{shape.batch}x{shape.in_channels}x{shape.out_channels}x{shape.image_size}x{shape.kernel_size}",
            "method": self.method.value,
            "m": self.m,
            "precision": self.precision,
            "rel_error": self.rel_error,
            "tolerance": self.tolerance,
            "ok": self.ok,
        }


def random_small_layer(rng: np.random.Generator) -> LayerShape:
    """B <= 2, C, C' <= 4, x <= 12, r in {2, 3, 5}."""
    r = int(rng.choice([2, 3, 5]))
    return LayerShape(
        batch=int(rng.integers(1, 3)),
        in_channels=int(rng.integers(1, 5)),
        out_channels=int(rng.integers(1, 5)),
        image_size=int(rng.integers(r, 13)),
        kernel_size=r,
    )


def oracle_equivalence(n_layers: int = 50, seed: int = 0) -> list[OracleCheck]:
    """Run every supported (method, m) on random small layers, in both precisions,
    against the float64 direct result."""
    checks = []
    for stream in np.random.SeedSequence(seed).spawn(n_layers):
        rng = np.random.default_rng(stream)
        layer = random_small_layer(rng)
        tensors = LayerTensors.random(layer, rng)
        exact = layer_forward_direct(tensors)
        for method in (Method.WINOGRAD, Method.REGULAR_FFT, Method.GAUSS_FFT):
            if method is Method.WINOGRAD and layer.kernel_size + 1 > MAX_TILE:
                continue
            for m in supported_tiles(method, layer.kernel_size):
                for precision, tol in TOLERANCE.items():
                    approx = layer_forward(tensors, method, m, precision)
                    checks.append(
                        OracleCheck(layer, method, m, precision, relative_error(approx, exact), tol)
                    )
    return checks
