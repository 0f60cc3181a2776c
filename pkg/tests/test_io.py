import numpy as np
import pytest

from nlindex.io import IngestError, fmt, read_embedding, read_json, read_samples, write_json, write_samples
from nlindex.problems import ConfigError
from nlindex.sampler import Sample, SampleSet


def small_set():
    rng = np.random.default_rng(0)
    samples = [Sample(g, it, rng.uniform(1e-6, 1, 4), float(rng.uniform(1, 100)), 0.0,
                      is_start=(it == 0), reference_group=False)
               for g in range(2) for it in (0, 20)]
    samples.append(Sample(2, 20, np.full(4, 0.5), 1.5, 1.5, reference_group=True))
    for s in samples:
        s.clipped_J = s.raw_J
    return SampleSet(samples, np.inf)


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 1e-300, 2.5e17, -0.0):
        assert float(fmt(x)) == x
    assert fmt(float("nan")) == "nan" and fmt(float("inf")) == "inf"


def test_samples_round_trip(tmp_path):
    ss = small_set()
    write_samples(ss, tmp_path / "s.csv")
    back = read_samples(tmp_path / "s.csv", n_expected=4)
    for a, b in zip(ss.samples, back.samples):
        assert np.array_equal(a.design, b.design) and a.raw_J == b.raw_J
        assert (a.group_id, a.iteration, a.reference_group, a.is_start) == \
               (b.group_id, b.iteration, b.reference_group, b.is_start)
    assert back.clamped == 0
    write_samples(back, tmp_path / "t.csv")
    assert (tmp_path / "s.csv").read_bytes() == (tmp_path / "t.csv").read_bytes()


def test_reference_column_optional(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("groupId,iteration,J,rho_0,rho_1,rho_2\n0,0,5,1,0.5,0.5\n0,20,4,0.5,0.5,0.5\n")
    ss = read_samples(p)
    assert len(ss) == 2 and ss.samples[0].is_start and not ss.samples[1].is_start


def test_ragged_row_names_line(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("groupId,iteration,J,rho_0,rho_1\n0,0,5,1,0.5\n0,20,4,0.5\n")
    with pytest.raises(IngestError, match="row 3"):
        read_samples(p)


def test_non_numeric_and_header(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("groupId,iteration,J,rho_0\n0,0,abc,1\n")
    with pytest.raises(IngestError, match="non-numeric"):
        read_samples(p)
    p.write_text("group,iteration,J,rho_0\n0,0,1,1\n")
    with pytest.raises(IngestError, match="header"):
        read_samples(p)
    p.write_text("")
    with pytest.raises(IngestError, match="empty"):
        read_samples(p)


def test_density_out_of_range_clamped_and_counted(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("groupId,iteration,J,rho_0,rho_1\n0,0,5,1.2,0.5\n0,20,4,0.5,0.5\n")
    with pytest.warns(RuntimeWarning, match="1 density"):
        ss = read_samples(p)
    assert ss.clamped == 1 and ss.samples[0].design[0] == 1.0


def test_element_count_mismatch(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("groupId,iteration,J,rho_0,rho_1\n0,0,5,1,0.5\n")
    with pytest.raises(ConfigError, match="2 density columns"):
        read_samples(p, n_expected=1800)


def test_clip_bound_applied_on_read(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("groupId,iteration,J,rho_0\n0,0,500,1\n0,20,4,0.5\n")
    ss = read_samples(p, clip_bound=50)
    assert list(ss.clipped) == [50, 4] and list(ss.raw) == [500, 4]


def test_json_is_canonical(tmp_path):
    obj = {"b": np.float64(1.5), "a": [np.int64(2), np.bool_(True)], "c": np.arange(3), "d": float("inf")}
    write_json(obj, tmp_path / "x.json")
    text = (tmp_path / "x.json").read_text()
    assert text.index('"a"') < text.index('"b"')
    assert read_json(tmp_path / "x.json") == {"a": [2, True], "b": 1.5, "c": [0, 1, 2], "d": "inf"}


def test_bad_embedding_file(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("groupId,x\n0,1\n")
    with pytest.raises(IngestError, match="malformed"):
        read_embedding(p)
