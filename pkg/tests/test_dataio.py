import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydberg_n2n import container
from rydberg_n2n.dataio import (
    Axis,
    DatasetSplit,
    StandardizationRecord,
    Trace,
    TraceSet,
    batch_indices,
    batch_iter,
    destandardize,
    export_csv,
    import_csv,
    load_traceset,
    save_traceset,
    split_442,
    standardize,
)
from rydberg_n2n.errors import (
    ChecksumError,
    ConfigurationError,
    DataError,
    DegenerateTraceError,
    DimensionError,
    MalformedHeaderError,
    TruncatedPayloadError,
)


def labelled(n, points=3):
    # row i is filled with the value i, so partitions can be traced back to their source rows
    return TraceSet(np.repeat(np.arange(n, dtype=np.float64)[:, None], points, axis=1))


@pytest.mark.parametrize("n, sizes", [(10, (4, 4, 2)), (10_000, (4000, 4000, 2000))])
def test_split_sizes(n, sizes):
    d = split_442(labelled(n, 1), seed=3)
    assert (d.train_x.n_sets, d.train_y.n_sets, d.test_x.n_sets) == sizes


def test_split_deterministic_and_seed_dependent():
    a, b, c = split_442(labelled(50), 1), split_442(labelled(50), 1), split_442(labelled(50), 2)
    assert np.array_equal(a.train_x.data, b.train_x.data)
    assert not np.array_equal(a.train_x.data, c.train_x.data)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.integers(0, 1000))
def test_split_partitions_disjoint_and_exhaustive(tens, seed):
    n = 10 * tens
    d = split_442(labelled(n, 1), seed)
    ids = np.concatenate([d.train_x.data[:, 0], d.train_y.data[:, 0], d.test_x.data[:, 0]])
    assert sorted(ids.tolist()) == list(range(n))
    assert 2 * d.test_x.n_sets == d.train_x.n_sets == d.train_y.n_sets


def test_split_rejects_indivisible_with_padding_hint():
    with pytest.raises(DimensionError, match="add 3"):
        split_442(labelled(17))


def test_standardize_examples():
    t, rec = standardize(Trace(np.array([0.0, 2.0])))
    np.testing.assert_array_equal(t.values, [-1.0, 1.0])
    assert (rec.mu, rec.sigma) == (1.0, 1.0)
    again, _ = standardize(t)
    np.testing.assert_allclose(again.values, t.values, atol=1e-10)
    with pytest.raises(DegenerateTraceError):
        standardize(Trace(np.full(5, 3.0)))
    with pytest.raises(DegenerateTraceError):
        standardize(TraceSet(np.array([[1.0, 2.0], [4.0, 4.0]])))


def test_destandardize_examples(rng):
    x = Trace(rng.standard_normal(20))
    np.testing.assert_array_equal(destandardize(x, StandardizationRecord(0.0, 1.0)).values, x.values)
    out = destandardize(Trace(np.array([-1.0, 1.0])), StandardizationRecord(5.0, 2.0))
    np.testing.assert_array_equal(out.values, [3.0, 7.0])


def test_standardize_round_trip_ten_thousand_traces(rng):
    data = rng.normal(rng.uniform(-50, 50, (10_000, 1)), rng.uniform(0.01, 20, (10_000, 1)), (10_000, 64))
    z, rec = standardize(TraceSet(data))
    assert np.max(np.abs(z.data.mean(axis=1))) < 1e-10
    assert np.max(np.abs(z.data.std(axis=1) - 1)) < 1e-10
    back = destandardize(z, rec).data
    assert np.max(np.abs(back - data) / np.abs(data)) < 1e-10


def test_batching_examples():
    ts = labelled(7)
    batches = list(batch_iter(ts, 7, 0))
    assert len(batches) == 1 and sorted(batches[0][:, 0]) == list(range(7))
    assert [len(b) for b in batch_indices(10, 4, 0)] == [4, 4, 2]
    a = np.concatenate(batch_indices(100, 8, [0, 1]))
    b = np.concatenate(batch_indices(100, 8, [0, 2]))
    assert sorted(a.tolist()) == list(range(100))
    assert not np.array_equal(a, b)
    with pytest.raises(ConfigurationError):
        batch_indices(5, 0, 0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 200), st.integers(1, 64), st.integers(0, 10**6))
def test_epoch_visits_every_index_once(n, bs, seed):
    idx = np.concatenate(batch_indices(n, bs, seed))
    assert sorted(idx.tolist()) == list(range(n))


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_traceset_round_trip_bit_exact(tmp_path, rng, dtype):
    ts = TraceSet(rng.standard_normal((5, 33)).astype(dtype), Axis("frequency", 49_000.0, 5.0, "Hz"))
    back = load_traceset(save_traceset(ts, tmp_path / "t.rdt"))
    assert back.data.dtype == dtype and back.data.tobytes() == ts.data.tobytes()
    assert back.axis == ts.axis


def test_traceset_format_layout(tmp_path, rng):
    ts = TraceSet(rng.standard_normal((2, 4)))
    blob = save_traceset(ts, tmp_path / "t.rdt").read_bytes()
    first = blob.split(b"\n", 1)[0].decode()
    assert first.startswith("RDTRACE 1 {")
    assert len(blob) == len(first) + 1 + 2 * 4 * 8 + 32
    assert blob[len(first) + 1 : -32] == ts.data.astype("<f8").tobytes()


def test_traceset_load_errors_are_distinct(tmp_path, rng):
    path = save_traceset(TraceSet(rng.standard_normal((3, 10))), tmp_path / "t.rdt")
    blob = path.read_bytes()
    cases = {
        ChecksumError: blob[:-1] + bytes([blob[-1] ^ 0xFF]),
        TruncatedPayloadError: blob[:-50],
        MalformedHeaderError: b"RDTRACE 1 {not json\n" + blob.split(b"\n", 1)[1],
    }
    for err, data in cases.items():
        bad = tmp_path / f"{err.__name__}.rdt"
        bad.write_bytes(data)
        with pytest.raises(err):
            load_traceset(bad)
    flipped = bytearray(blob)
    flipped[-40] ^= 0x10  # payload byte
    (tmp_path / "payload.rdt").write_bytes(bytes(flipped))
    with pytest.raises(ChecksumError):
        load_traceset(tmp_path / "payload.rdt")
    with pytest.raises(MalformedHeaderError):
        container.decode(blob, "RDCKPT", 1)
    with pytest.raises(DataError):
        load_traceset(tmp_path / "missing.rdt")


def test_csv_import_export(tmp_path, rng):
    p = tmp_path / "t.csv"
    p.write_text("a,b,c\n1,2,3\n4,5,6\n")
    ts = import_csv(p)
    assert (ts.n_sets, ts.n_points) == (2, 3)
    data = TraceSet(rng.standard_normal((3, 6)))
    assert np.array_equal(import_csv(export_csv(data, tmp_path / "x.csv")).data, data.data)
    (tmp_path / "ragged.csv").write_text("1,2\n3\n")
    with pytest.raises(DimensionError):
        import_csv(tmp_path / "ragged.csv")
    (tmp_path / "bad.csv").write_text("1,2\n3,x\n")
    with pytest.raises(DataError):
        import_csv(tmp_path / "bad.csv")


def test_containers_validate_shapes():
    with pytest.raises(DimensionError):
        TraceSet(np.zeros((2, 3, 4)))
    with pytest.raises(DimensionError):
        DatasetSplit(TraceSet(np.zeros((2, 3))), TraceSet(np.zeros((3, 3))), TraceSet(np.zeros((1, 3))))
    with pytest.raises(DimensionError):
        TraceSet.from_traces([Trace(np.zeros(3)), Trace(np.zeros(4))])
    with pytest.raises(ConfigurationError):
        Axis(step=0.0)


def test_head_keeps_test_partition():
    d = DatasetSplit(labelled(10), labelled(10), labelled(4))
    h = d.head(3)
    assert h.train_x.n_sets == 3 and h.test_x is d.test_x
