import pytest

from conv_roofline.model import Method
from conv_roofline.tables import (
    CostTables,
    MissingEntryError,
    Stage,
    default_tables,
    gauss_table_consistency,
    tile_search_space,
    transform_cost,
)

# (method, m, r, stage, column, printed value), sampled with a fixed seed from
# the six printed tables and checked cell by cell against the source.
SAMPLED_CELLS = [
    ("Winograd", 2, 4, "Kernel", "flops", 198),
    ("Winograd", 3, 5, "Output", "flops", 460),
    ("Winograd", 3, 4, "Output", "flops", 153),
    ("Winograd", 3, 6, "Input", "flops", 704),
    ("Winograd", 5, 3, "Output", "flops", 312),
    ("Winograd", 2, 7, "Kernel", "flops", 645),
    ("Winograd", 4, 3, "Kernel", "flops", 135),
    ("Winograd", 6, 2, "Input", "flops", 742),
    ("Winograd", 2, 7, "Input", "flops", 704),
    ("Winograd", 3, 5, "Input", "flops", 742),
    ("Winograd", 3, 2, "Output", "ai", 0.28),
    ("Winograd", 2, 6, "Input", "ai", 1.89),
    ("Winograd", 3, 5, "Input", "ai", 1.89),
    ("Winograd", 4, 2, "Kernel", "ai", 0.6),
    ("Winograd", 3, 4, "Input", "ai", 0.83),
    ("Winograd", 6, 2, "Input", "ai", 1.89),
    ("Winograd", 2, 3, "Kernel", "ai", 0.49),
    ("Winograd", 3, 3, "Kernel", "ai", 0.94),
    ("Winograd", 3, 4, "Output", "ai", 0.85),
    ("Winograd", 3, 2, "Input", "ai", 0.25),
    ("RegularFFT", 25, 4, "Output", "flops", 13440),
    ("RegularFFT", 26, 3, "Output", "flops", 13786),
    ("RegularFFT", 18, 3, "Input", "flops", 5440),
    ("RegularFFT", 16, 5, "Input", "flops", 5440),
    ("RegularFFT", 11, 5, "Kernel", "flops", 1865),
    ("RegularFFT", 3, 4, "Kernel", "flops", 192),
    ("RegularFFT", 5, 5, "Output", "flops", 850),
    ("RegularFFT", 20, 4, "Input", "flops", 26954),
    ("RegularFFT", 27, 2, "Kernel", "flops", 2356),
    ("RegularFFT", 22, 2, "Kernel", "flops", 8396),
    ("RegularFFT", 18, 6, "Input", "ai", 6.23),
    ("RegularFFT", 9, 2, "Output", "ai", 1.46),
    ("RegularFFT", 5, 5, "Kernel", "ai", 1.75),
    ("RegularFFT", 27, 5, "Output", "ai", 5.27),
    ("RegularFFT", 29, 4, "Output", "ai", 1.98),
    ("RegularFFT", 16, 5, "Output", "ai", 1.75),
    ("RegularFFT", 10, 6, "Output", "ai", 1.92),
    ("RegularFFT", 21, 5, "Kernel", "ai", 2.14),
    ("RegularFFT", 17, 6, "Kernel", "ai", 2.18),
    ("RegularFFT", 4, 2, "Output", "ai", 1.22),
    ("GaussFFT", 26, 7, "Output", "flops", 16400),
    ("GaussFFT", 20, 5, "Kernel", "flops", 4256),
    ("GaussFFT", 20, 5, "Input", "flops", 8100),
    ("GaussFFT", 12, 5, "Input", "flops", 3160),
    ("GaussFFT", 9, 4, "Kernel", "flops", 960),
    ("GaussFFT", 3, 3, "Output", "flops", 236),
    ("GaussFFT", 13, 6, "Kernel", "flops", 3938),
    ("GaussFFT", 18, 5, "Input", "flops", 12336),
    ("GaussFFT", 18, 2, "Input", "flops", 14779),
    ("GaussFFT", 26, 5, "Input", "flops", 16380),
    ("GaussFFT", 7, 7, "Output", "ai", 2.32),
    ("GaussFFT", 15, 2, "Output", "ai", 1.33),
    ("GaussFFT", 3, 4, "Kernel", "ai", 0.75),
    ("GaussFFT", 18, 5, "Output", "ai", 2.6),
    ("GaussFFT", 25, 5, "Kernel", "ai", 3.58),
    ("GaussFFT", 15, 5, "Input", "ai", 3.97),
    ("GaussFFT", 9, 4, "Output", "ai", 1.16),
    ("GaussFFT", 10, 6, "Input", "ai", 1.55),
    ("GaussFFT", 7, 6, "Output", "ai", 1.19),
    ("GaussFFT", 4, 4, "Output", "ai", 1.5),
]


@pytest.mark.parametrize("method, m, r, stage, column, value", SAMPLED_CELLS)
def test_sampled_cells(method, m, r, stage, column, value):
    assert getattr(transform_cost(method, m, r, stage), column) == value


@pytest.mark.parametrize(
    "method, m, r, stage, flops",
    [("Winograd", 2, 3, "Input", 32), ("RegularFFT", 2, 3, "Kernel", 48), ("GaussFFT", 4, 2, "Output", 274)],
)
def test_documented_flops(method, m, r, stage, flops):
    assert transform_cost(method, m, r, stage).flops == flops


def test_table_sizes():
    tables = default_tables()
    counts = {meth: sum(1 for e in tables if e.method is meth) for meth in Method if meth is not Method.DIRECT}
    assert counts == {Method.WINOGRAD: 63, Method.REGULAR_FFT: 495, Method.GAUSS_FFT: 495}


def test_winograd_ai_maximum():
    tables = default_tables()
    assert max(e.ai for e in tables if e.method is Method.WINOGRAD) == 2.38
    assert transform_cost("Winograd", 2, 6, "Output").ai == 2.38


def test_fft_ai_maximum_exceeds_quoted_value():
    # the text quotes 5.55 as the largest FFT transform AI, the table prints more
    tables = default_tables()
    assert max(e.ai for e in tables if e.method is Method.REGULAR_FFT) == 6.90


def test_missing_entry_names_range():
    with pytest.raises(MissingEntryError, match=r"m in \[2, 6\]"):
        transform_cost("Winograd", 7, 3, "Input")
    with pytest.raises(MissingEntryError, match=r"r in \[2, 7\]"):
        transform_cost("RegularFFT", 2, 9, "Input")


def test_input_transform_depends_only_on_tile_size():
    for method in (Method.WINOGRAD, Method.REGULAR_FFT, Method.GAUSS_FFT):
        by_t: dict[int, set[int]] = {}
        for e in default_tables():
            if e.method is method and e.stage is Stage.INPUT:
                by_t.setdefault(e.t, set()).add(e.flops)
        assert all(len(v) == 1 for v in by_t.values()), method


@pytest.mark.parametrize(
    "m, r, stage, delta, t",
    [(3, 3, Stage.INPUT, 25, 5), (16, 3, Stage.KERNEL, 648, 18), (2, 2, Stage.OUTPUT, 18, 3)],
)
def test_gauss_delta_examples(m, r, stage, delta, t):
    (row,) = [d for d in gauss_table_consistency() if (d.m, d.r, d.stage) == (m, r, stage)]
    assert (row.delta, row.t, row.ok) == (delta, t, True)


def test_gauss_deltas_flag_deviation():
    tables = default_tables()
    entries = list(tables)
    tampered = [
        e if (e.method, e.m, e.r, e.stage) != (Method.GAUSS_FFT, 3, 3, Stage.INPUT)
        else type(e)(e.method, e.m, e.r, e.stage, e.flops + 1, e.ai)
        for e in entries
    ]
    bad = [d for d in gauss_table_consistency(CostTables(tampered)) if not d.ok]
    assert [(d.m, d.r, d.stage) for d in bad] == [(3, 3, Stage.INPUT)]


def test_search_space():
    assert tile_search_space("Winograd", 3, 6) == [2, 3, 4]
    assert tile_search_space("Winograd", 3, 8) == [2, 3, 4, 5, 6]
    assert tile_search_space("RegularFFT", 3) == list(range(2, 31))
    assert tile_search_space("GaussFFT", 2) == list(range(2, 32))
    with pytest.raises(ValueError):
        tile_search_space("Winograd", 3, 7)
    with pytest.raises(ValueError):
        tile_search_space("Winograd", 1)
    assert tile_search_space("Winograd", 9) == []


def test_csv_round_trip(tmp_path, monkeypatch):
    tables = default_tables()
    text = tables.to_csv()
    again = CostTables.from_csv(text)
    assert again.to_csv() == text
    assert len(again) == len(tables) == 1053
    path = tmp_path / "t.csv"
    path.write_text("method,m,r,stage,flops,ai\nWinograd,2,3,Input,99,1.5\n")
    monkeypatch.setenv("CONV_ROOFLINE_TABLES", str(path))
    assert default_tables().get(Method.WINOGRAD, 2, 3, Stage.INPUT).flops == 99


@pytest.mark.parametrize(
    "text",
    [
        "method,m,r\nWinograd,2,3\n",
        "method,m,r,stage,flops,ai\nWinograd,2,3,Input,0,1.0\n",
        "method,m,r,stage,flops,ai\nWinograd,2,3,Input,5,1.0\nWinograd,2,3,Input,5,1.0\n",
        "method,m,r,stage,flops,ai\nWinograd,two,3,Input,5,1.0\n",
        "method,m,r,stage,flops,ai\nDirect,2,3,Input,5,1.0\n",
    ],
)
def test_malformed_tables_rejected(text):
    with pytest.raises(ValueError):
        CostTables.from_csv(text)
