"""Shared domain types: layer shapes, machines, tile geometry and the machine catalog."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable

BYTES_PER_REAL = 4

KB = 1024
GIGA = 1e9


class Method(str, enum.Enum):
    WINOGRAD = "Winograd"
    REGULAR_FFT = "RegularFFT"
    GAUSS_FFT = "GaussFFT"
    DIRECT = "Direct"

    @classmethod
    def parse(cls, value: "str | Method") -> "Method":
        if isinstance(value, Method):
            return value
        key = value.replace("-", "").replace("_", "").lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        aliases = {"wino": cls.WINOGRAD, "rfft": cls.REGULAR_FFT, "gfft": cls.GAUSS_FFT}
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown method {value!r}")

    @property
    def is_fft(self) -> bool:
        return self in (Method.REGULAR_FFT, Method.GAUSS_FFT)


# Direct is the oracle only; it never enters the planner.
PLANNED_METHODS = (Method.WINOGRAD, Method.REGULAR_FFT, Method.GAUSS_FFT)


@dataclass(frozen=True)
class LayerShape:
    """A square-image, square-kernel convolutional layer."""

    batch: int
    in_channels: int
    out_channels: int
    image_size: int
    kernel_size: int

    def __post_init__(self) -> None:
        for name in ("batch", "in_channels", "out_channels", "image_size", "kernel_size"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.image_size < self.kernel_size:
            raise ValueError(
                f"image_size {self.image_size} is smaller than kernel_size {self.kernel_size}"
            )

    @property
    def output_size(self) -> int:
        return self.image_size - self.kernel_size + 1

    def replace(self, **changes: int) -> "LayerShape":
        fields = dict(
            batch=self.batch,
            in_channels=self.in_channels,
            out_channels=self.out_channels,
            image_size=self.image_size,
            kernel_size=self.kernel_size,
        )
        fields.update(changes)
        return LayerShape(**fields)

    @classmethod
    def from_dict(cls, record: dict[str, Any]) -> "LayerShape":
        keys = {
            "batch": ("batch", "B"),
            "in_channels": ("in_channels", "C"),
            "out_channels": ("out_channels", "C_out", "Cp"),
            "image_size": ("image_size", "x"),
            "kernel_size": ("kernel_size", "r"),
        }
        values = {}
        for field, names in keys.items():
            for name in names:
                if name in record:
                    values[field] = int(record[name])
                    break
            else:
                raise ValueError(f"layer record is missing {field!r}")
        return cls(**values)

    def to_dict(self) -> dict[str, int]:
        return {
            "batch": self.batch,
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "image_size": self.image_size,
            "kernel_size": self.kernel_size,
        }


@dataclass(frozen=True)
class MachineSpec:
    name: str
    peak_flops: float
    mem_bandwidth: float
    cache_bytes: int
    cmr: float

    def __post_init__(self) -> None:
        if self.peak_flops <= 0 or self.mem_bandwidth <= 0 or self.cache_bytes <= 0:
            raise ValueError(f"machine {self.name!r}: all rates and sizes must be positive")
        ratio = self.peak_flops / self.mem_bandwidth
        if abs(ratio - self.cmr) > 0.01 * self.cmr:
            raise ValueError(
                f"machine {self.name!r}: cmr {self.cmr} disagrees with "
                f"peak_flops/mem_bandwidth = {ratio:.4g}"
            )

    @classmethod
    def from_rates(cls, name: str, gflops: float, gbps: float, cache_kb: float) -> "MachineSpec":
        """Build a machine from GFLOPS, GB/s and KB of per-core cache; CMR is derived."""
        return cls(
            name=name,
            peak_flops=gflops * GIGA,
            mem_bandwidth=gbps * GIGA,
            cache_bytes=int(round(cache_kb * KB)),
            cmr=gflops / gbps,
        )

    def with_cmr(self, cmr: float) -> "MachineSpec":
        """Same bandwidth and cache, peak FLOPS rescaled to hit ``cmr``."""
        return MachineSpec(
            name=f"{self.name}[cmr={cmr:g}]",
            peak_flops=cmr * self.mem_bandwidth,
            mem_bandwidth=self.mem_bandwidth,
            cache_bytes=self.cache_bytes,
            cmr=cmr,
        )

    def with_cache(self, cache_bytes: int) -> "MachineSpec":
        return MachineSpec(
            name=f"{self.name}[cache={cache_bytes // KB}KB]",
            peak_flops=self.peak_flops,
            mem_bandwidth=self.mem_bandwidth,
            cache_bytes=int(cache_bytes),
            cmr=self.cmr,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "gflops": round(self.peak_flops / GIGA, 6),
            "gbps": round(self.mem_bandwidth / GIGA, 6),
            "cache_kb": self.cache_bytes / KB,
            "cmr": self.cmr,
        }


@dataclass(frozen=True)
class TilePlan:
    m: int
    t: int
    n_tiles: int
    n_cplx: int
    padding: int

    @property
    def tiles_per_side(self) -> int:
        return math.isqrt(self.n_tiles)


def half_spectrum_width(t: int) -> int:
    """ceil((t + 1) / 2): stored columns of a real t x t tile's spectrum."""
    return (t + 2) // 2


def tile_geometry(layer: LayerShape, m: int) -> TilePlan:
    if m < 1:
        raise ValueError(f"output tile size m must be >= 1, got {m}")
    r = layer.kernel_size
    t = m + r - 1
    per_side = -(-layer.output_size // m)
    return TilePlan(
        m=m,
        t=t,
        n_tiles=per_side * per_side,
        n_cplx=t * half_spectrum_width(t),
        padding=per_side * m - layer.output_size,
    )


# (cpu, cores, GFLOPS, cache KB, GB/s, printed CMR)
_TABLE1 = (
    ("Xeon Phi 7210", 64, 4506.0, 512, 409.6, "11"),
    ("i7-6950X", 10, 960.0, 1024, 68.3, "14.06"),
    ("i9-7900X", 10, 2122.0, 1024, 96.0, "22"),
    ("Xeon Gold 6148", 20, 3072.0, 1024, 128.0, "24"),
    ("E7-8890v3", 18, 1440.0, 256, 51.2, "28.13"),
    ("Xeon Platinum 8124M", 18, 3456.0, 1024, 115.2, "30"),
    ("i9-7900X", 10, 2122.0, 1024, 68.3, "31"),
    ("Xeon Phi 7210", 48, 4506.0, 512, 102.4, "33"),
    ("Xeon Phi 7210", 64, 4506.0, 512, 102.4, "39.11"),
    ("i9-7900X", 10, 2122.0, 1024, 51.2, "41.25"),
)


def machine_catalog() -> tuple[MachineSpec, ...]:
    """The ten benchmark systems, named ``"<cpu>@<cmr>"``.

    Two Xeon Phi rows list the full-chip 4506 GFLOPS next to a CMR that only
    holds for the reduced configuration actually run; for those the peak is
    taken as CMR x bandwidth so the record stays self-consistent.
    """
    machines = []
    for cpu, _cores, gflops, cache_kb, gbps, cmr_label in _TABLE1:
        cmr = float(cmr_label)
        if abs(gflops / gbps - cmr) > 0.01 * cmr:
            gflops = cmr * gbps
        machines.append(
            MachineSpec(
                name=f"{cpu}@{cmr_label}",
                peak_flops=gflops * GIGA,
                mem_bandwidth=gbps * GIGA,
                cache_bytes=cache_kb * KB,
                cmr=cmr,
            )
        )
    return tuple(machines)


def find_machine(name: str, machines: Iterable[MachineSpec] | None = None) -> MachineSpec:
    """Look a machine up by full name, or by CPU name when that is unambiguous."""
    pool = tuple(machine_catalog() if machines is None else machines)
    for machine in pool:
        if machine.name.lower() == name.lower():
            return machine
    hits = [mc for mc in pool if mc.name.split("@")[0].lower() == name.lower()]
    if len(hits) == 1:
        return hits[0]
    known = ", ".join(mc.name for mc in pool)
    if hits:
        raise KeyError(f"machine {name!r} is ambiguous; use one of: {known}")
    raise KeyError(f"unknown machine {name!r}; known machines: {known}")


def machine_from_record(record: dict[str, Any]) -> MachineSpec:
    try:
        return MachineSpec.from_rates(
            name=str(record["name"]),
            gflops=float(record["gflops"]),
            gbps=float(record["gbps"]),
            cache_kb=float(record["cache_kb"]),
        )
    except KeyError as exc:
        raise ValueError(f"machine record is missing field {exc.args[0]!r}") from None


def load_machines(path: str | Path) -> list[MachineSpec]:
    """Read one machine record, or a list of them, from a JSON file."""
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: malformed JSON ({exc})") from None
    records = data if isinstance(data, list) else [data]
    if not all(isinstance(rec, dict) for rec in records):
        raise ValueError(f"{path}: expected a JSON object or a list of objects")
    return [machine_from_record(rec) for rec in records]
