"""One test per acceptance criterion, each at its stated tolerance and time limit."""

import time

import numpy as np
import pytest
from oracles import exhaustive_blocking, smooth_numbers
from test_tables import SAMPLED_CELLS

from conv_roofline.cli import main
from conv_roofline.layer import accuracy_report, oracle_equivalence
from conv_roofline.model import LayerShape, Method, find_machine, machine_catalog
from conv_roofline.networks import layer_catalog
from conv_roofline.planner import best_tile, blocking_solve, model_fitness, speedup
from conv_roofline.tables import default_tables, gauss_table_consistency, transform_cost

VGG32 = LayerShape(64, 256, 256, 58, 3)
KB = 1024


class Timer:
    def __init__(self, limit):
        self.limit = limit

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.limit, f"took {self.elapsed:.2f} s, limit {self.limit} s"


@pytest.mark.criterion(1, "table fidelity: 60 sampled cells round-trip exactly")
def test_table_fidelity():
    default_tables()  # loading is a one-off; the limit covers lookups
    with Timer(1.0):
        assert len(SAMPLED_CELLS) == 60
        mismatches = [
            cell
            for cell in SAMPLED_CELLS
            if getattr(transform_cost(cell[0], cell[1], cell[2], cell[3]), cell[4]) != cell[5]
        ]
        assert mismatches == []
        assert transform_cost("Winograd", 2, 3, "Input").flops == 32
        assert transform_cost("RegularFFT", 2, 3, "Kernel").flops == 48
        assert transform_cost("GaussFFT", 4, 2, "Output").flops == 274


@pytest.mark.criterion(2, "Gauss minus Regular FLOPs equal (t^2, 2t^2, 2t^2)")
def test_gauss_regular_relation():
    with Timer(1.0):
        report = gauss_table_consistency()
        assert len(report) == 3 * 165
        deviations = [(d.m, d.r, d.stage.value, d.delta, d.expected) for d in report if not d.ok]
        assert deviations == []


@pytest.mark.criterion(3, "Winograd AI maximum is 2.38")
def test_winograd_ai_maximum():
    assert max(e.ai for e in default_tables() if e.method is Method.WINOGRAD) == 2.38


@pytest.mark.criterion(4, "blocking optimizer equals exhaustive divisor-pair search")
def test_blocking_exhaustive():
    sizes = smooth_numbers(256)
    with Timer(30.0):
        checked = 0
        for cache in (64 * KB, 256 * KB, 1024 * KB):
            for beta in (1, 2):
                for C in sizes:
                    for Cp in sizes:
                        objective, c, cp = exhaustive_blocking(C, Cp, cache, beta)
                        sol = blocking_solve(C, Cp, cache, beta)
                        assert sol.dm_per_flop_objective == objective, (C, Cp, cache, beta)
                        assert (sol.c, sol.c_out_block) == (c, cp)
                        checked += 1
        assert checked == 6 * len(sizes) ** 2


@pytest.mark.criterion(5, "fitness of rRMSE 0.079 is 92.68")
def test_fitness():
    _, fit = model_fitness([1.079], [1.0])
    assert fit == pytest.approx(92.68, abs=0.01)


@pytest.mark.criterion(6, "oracle equivalence on 50 random small layers")
def test_oracle_equivalence():
    with Timer(60.0):
        checks = oracle_equivalence(n_layers=50, seed=0)
    methods = {c.method for c in checks}
    assert methods == {Method.WINOGRAD, Method.REGULAR_FFT, Method.GAUSS_FFT}
    failures = [c.to_dict() for c in checks if not c.ok]
    assert failures == []


@pytest.mark.criterion(7, "accuracy ordering: Winograd t=8 >= 10x t=6; FFT below Winograd t=8 and flat")
def test_accuracy_ordering():
    layer = LayerShape(1, 4, 4, 32, 3)
    configs = [(Method.WINOGRAD, 4), (Method.WINOGRAD, 6)]
    configs += [(Method.REGULAR_FFT, t - 2) for t in (8, 16, 24, 32)]
    with Timer(300.0):
        rows = accuracy_report(layer, configs, trials=100, seed=0)
    err = {(r.method, r.t): r.rel_error for r in rows}
    wino6, wino8 = err[(Method.WINOGRAD, 6)], err[(Method.WINOGRAD, 8)]
    fft = [err[(Method.REGULAR_FFT, t)] for t in (8, 16, 24, 32)]
    summary = (
        f"Winograd t=6 {wino6:.3e}, t=8 {wino8:.3e} (ratio {wino8 / wino6:.2f}); "
        f"Regular-FFT t=8/16/24/32 " + "/".join(f"{e:.3e}" for e in fft)
    )
    print(summary)
    failed = []
    if not wino8 >= 10 * wino6:
        failed.append("Winograd t=8 error is not >= 10x the t=6 error")
    if not all(e <= wino8 for e in fft):
        failed.append("a Regular-FFT error exceeds Winograd t=8")
    if not max(fft) <= 10 * min(fft):
        failed.append("Regular-FFT error is not flat within 10x")
    assert not failed, "; ".join(failed) + " -- " + summary


@pytest.mark.criterion(8, "model trends on VGG 3.2 (CMR, kernel size, cache)")
def test_model_trends():
    base = find_machine("i9-7900X@22").with_cache(256 * KB)
    with Timer(10.0):
        by_cmr = [speedup(VGG32, "RegularFFT", "Winograd", base.with_cmr(c)) for c in (11, 22, 30, 40)]
        assert all(a <= b for a, b in zip(by_cmr, by_cmr[1:])), by_cmr
        for fft in ("RegularFFT", "GaussFFT"):
            r3 = speedup(VGG32, fft, "Winograd", base)
            r5 = speedup(VGG32.replace(kernel_size=5), fft, "Winograd", base)
            assert r5 > r3, (fft, r3, r5)
        big = speedup(VGG32, "RegularFFT", "Winograd", base.with_cache(1024 * KB))
        small = speedup(VGG32, "RegularFFT", "Winograd", base.with_cache(64 * KB))
        assert small > big, (big, small)


@pytest.mark.criterion(9, "Regular-FFT optimum is not always a power of two")
def test_non_power_of_two_tile():
    with Timer(10.0):
        found = []
        for entry in layer_catalog():
            for machine in machine_catalog():
                t = best_tile(entry.shape, "RegularFFT", machine).t
                if t & (t - 1):
                    found.append((entry.key, machine.name, t))
    assert found
    assert ("vgg1.2", "i9-7900X@22", 27) in found


@pytest.mark.criterion(10, "no result depends on measured wall-clock times")
def test_no_wall_clock_dependency(capsys):
    # every prediction is a pure function of its inputs: repeated runs agree exactly
    import io

    outs = []
    for _ in range(2):
        buf = io.StringIO()
        assert main(["predict", "--layer", "alexnet2", "--machine", "i9-7900X@41.25"], buf) == 0
        outs.append(buf.getvalue())
    assert outs[0] == outs[1]
    assert np.isfinite(float(outs[0].splitlines()[1].split(",")[-1]))
