"""Time-series store: appends, range queries, downsampling, CSV round-trips."""

import io
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbsim.building import KIND_UNITS, Reading
from sbsim.errors import BadHeader, BadRow, NonFinite, OutOfOrder
from sbsim.store import (CSV_HEADER, RangeQuery, Series, TimeSeriesStore,
                         downsample, fmt_value)

T0 = 1488362400000  # 2017-03-01T10:00:00Z


def r(ts, node="tag-1", kind="temperature", value=21.5):
    return Reading(None, ts, node, kind, value, KIND_UNITS[kind])


def test_first_append_offset_zero():
    store = TimeSeriesStore()
    assert store.append(r(T0)) == 0
    assert store.append(r(T0 + 1000)) == 1


def test_out_of_order_same_key_rejected():
    store = TimeSeriesStore()
    store.append(r(T0))
    with pytest.raises(OutOfOrder):
        store.append(r(T0 - 1))
    # other keys have independent clocks
    store.append(r(T0 - 5000, node="tag-2"))


def test_nan_rejected():
    store = TimeSeriesStore()
    with pytest.raises(NonFinite):
        store.append(r(T0, value=float("nan")))
    with pytest.raises(NonFinite):
        store.append(r(T0, value=math.inf))


def test_query_empty_store():
    assert TimeSeriesStore().query_range(RangeQuery(0, 10)) == []


def test_query_half_open_interval():
    store = TimeSeriesStore()
    for i in (1, 2, 3):
        store.append(r(T0 + i))
    assert store.query_range(RangeQuery(T0 + 1, T0 + 1)) == []
    hits = store.query_range(RangeQuery(T0 + 1, T0 + 3))
    assert [h.ts_ms - T0 for h in hits] == [1, 2]


def test_query_order_and_filters():
    store = TimeSeriesStore()
    store.append(r(T0, node="b", kind="humidity", value=40))
    store.append(r(T0, node="a"))
    store.append(r(T0 - 10, node="c", kind="luminance", value=5))
    hits = store.query_range(RangeQuery(T0 - 100, T0 + 100))
    assert [(h.ts_ms, h.node_id) for h in hits] == [(T0 - 10, "c"), (T0, "a"), (T0, "b")]
    only = store.query_range(RangeQuery(T0 - 100, T0 + 100, node_filter=frozenset({"a"})))
    assert len(only) == 1 and only[0].node_id == "a"


def test_downsample_mean_single_window():
    s = Series(("n", "temperature"), [(0, 1.0), (10, 2.0), (20, 3.0)])
    out = downsample(s, 60_000, "mean")
    assert out.points == [(0, 2.0)]


def test_downsample_empty():
    assert downsample(Series(("n", "temperature"), []), 1000, "mean").points == []


def test_downsample_matches_naive_oracle():
    rng = random.Random(13)
    pts = sorted((rng.randrange(0, 500_000), rng.uniform(-5, 35)) for _ in range(400))
    window = 7_000
    for agg in ("mean", "min", "max", "last"):
        got = downsample(Series(("n", "temperature"), pts), window, agg).points
        # oracle: naive O(n*w) grouping by window start
        starts = sorted({ts - ts % window for ts, _ in pts})
        expect = []
        for start in starts:
            vals = [v for ts, v in pts if start <= ts < start + window]
            if not vals:
                continue
            agg_v = {"mean": sum(vals) / len(vals), "min": min(vals),
                     "max": max(vals), "last": vals[-1]}[agg]
            expect.append((start, agg_v))
        assert got == expect


def test_downsample_mean_conserves_sums():
    rng = random.Random(4)
    pts = sorted((rng.randrange(0, 100_000), rng.uniform(0, 50)) for _ in range(300))
    window = 9_000
    out = downsample(Series(("n", "temperature"), pts), window, "mean").points
    for start, mean in out:
        vals = [v for ts, v in pts if start <= ts < start + window]
        assert math.isclose(mean * len(vals), sum(vals), rel_tol=1e-9)


def test_export_exact_format():
    store = TimeSeriesStore()
    store.append(r(T0))
    sink = io.StringIO()
    assert store.export_csv(store.full_range(), sink) == 1
    assert sink.getvalue() == (CSV_HEADER + "\n"
                               "2017-03-01T10:00:00.000Z,tag-1,temperature,21.5,celsius\n")


def test_export_empty_is_header_only():
    sink = io.StringIO()
    assert TimeSeriesStore().export_csv(RangeQuery(0, 10), sink) == 0
    assert sink.getvalue() == CSV_HEADER + "\n"


def test_import_counts_rows():
    text = CSV_HEADER + "\n" + "\n".join(
        f"2017-03-01T10:00:{i:02d}.000Z,tag-1,temperature,2{i},celsius"
        for i in range(10)) + "\n"
    store = TimeSeriesStore()
    assert store.import_csv(io.StringIO(text)) == 10


def test_import_bad_header():
    with pytest.raises(BadHeader):
        TimeSeriesStore().import_csv(io.StringIO("time,who,what\n"))


def test_import_bad_row_reports_line():
    text = (CSV_HEADER + "\n"
            "2017-03-01T10:00:00.000Z,tag-1,temperature,21.5,celsius\n"
            "2017-03-01T10:00:01.000Z,tag-1,temperature\n")
    with pytest.raises(BadRow) as err:
        TimeSeriesStore().import_csv(io.StringIO(text))
    assert err.value.line_no == 3


def test_import_unit_mismatch_rejected():
    text = CSV_HEADER + "\n2017-03-01T10:00:00.000Z,tag-1,temperature,21.5,lux\n"
    with pytest.raises(BadRow):
        TimeSeriesStore().import_csv(io.StringIO(text))


def test_fmt_value_rules():
    assert fmt_value(21.5) == "21.5"
    assert fmt_value(21.0) == "21"
    assert fmt_value(-60.0) == "-60"
    assert fmt_value(0.1234567) == "0.123457"
    assert fmt_value(1.000001) == "1.000001"
    assert fmt_value(-0.0000001) == "0"


KINDS = sorted(KIND_UNITS)


@settings(max_examples=40, deadline=None)
@given(st.lists(
    st.tuples(st.integers(0, 5), st.sampled_from(KINDS), st.integers(0, 10**7),
              st.floats(-1000, 1000, allow_nan=False)),
    min_size=0, max_size=80))
def test_export_import_export_roundtrip(rows):
    store = TimeSeriesStore()
    last = {}
    for node_i, kind, ts, value in rows:
        node = f"n{node_i}"
        key = (node, kind)
        ts = max(ts, last.get(key, 0))  # keep per-key order valid
        last[key] = ts
        store.append(Reading(None, ts, node, kind, value, KIND_UNITS[kind]))
    first = io.StringIO()
    store.export_csv(store.full_range(), first)

    reloaded = TimeSeriesStore()
    reloaded.import_csv(io.StringIO(first.getvalue()))
    second = io.StringIO()
    reloaded.export_csv(reloaded.full_range(), second)
    assert first.getvalue() == second.getvalue()


def test_offsets_dense():
    store = TimeSeriesStore()
    offsets = [store.append(r(T0 + i)) for i in range(100)]
    assert offsets == list(range(100))


def test_query_completeness():
    store = TimeSeriesStore()
    rows = [r(T0 + i, node=f"n{i % 3}", kind="temperature", value=i) for i in range(50)]
    for row in rows:
        store.append(row)
    got = store.query_range(store.full_range())
    assert sorted((g.ts_ms, g.node_id, g.value) for g in got) == \
        sorted((x.ts_ms, x.node_id, x.value) for x in rows)
