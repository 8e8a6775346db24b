import numpy as np
import pytest

from objpert.core import Dataset, dataset_loss
from objpert.data import IngestError, IngestSpec, ingest_csv, read_written_csv, synth_halfspace, write_csv


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text(
        "age,color,label\n"
        "30,red,yes\n"
        "41,green,no\n"
        "25,blue,no\n"
        "52,red,yes\n"
    )
    return path


def test_one_hot_dimension_and_names(toy_csv):
    res = ingest_csv(IngestSpec(toy_csv, "label", "yes", categorical=["color"], numeric=["age"]))
    assert res.dim == 4
    assert res.feature_names == ["age", "color=blue", "color=green", "color=red"]
    np.testing.assert_array_equal(res.dataset.X[0], [30, 0, 0, 1])
    assert res.dataset.y.tolist() == [1, -1, -1, 1]


def test_feature_subset(toy_csv):
    res = ingest_csv(IngestSpec(toy_csv, "label", "yes", categorical=["color"], numeric=["age"],
                                features=["color"]))
    assert res.feature_names == ["color=blue", "color=green", "color=red"]


def test_balance_keeps_twice_the_minority(tmp_path):
    path = tmp_path / "imb.csv"
    rows = ["x,y"] + [f"{i},1" for i in range(3)] + [f"{i},0" for i in range(3, 10)]
    path.write_text("\n".join(rows) + "\n")
    spec = IngestSpec(path, "y", "1", numeric=["x"], balance=True, seed=4)
    res = ingest_csv(spec)
    assert res.dataset.n == 6
    assert (res.dataset.y == 1).sum() == 3
    assert res.source_rows == sorted(res.source_rows)
    assert ingest_csv(spec).dataset == res.dataset


def test_ingest_errors(tmp_path, toy_csv):
    with pytest.raises(IngestError, match="missing"):
        ingest_csv(IngestSpec(toy_csv, "label", "yes", numeric=["height"]))
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n1,1\noops,0\n")
    with pytest.raises(IngestError, match="row 1"):
        ingest_csv(IngestSpec(bad, "y", "1", numeric=["x"]))
    one_class = tmp_path / "one.csv"
    one_class.write_text("x,y\n1,1\n2,1\n")
    with pytest.raises(IngestError, match="both classes"):
        ingest_csv(IngestSpec(one_class, "y", "1"))
    with pytest.raises(IngestError):
        ingest_csv(IngestSpec(tmp_path / "absent.csv", "y", "1"))


def test_write_then_ingest_round_trip(tmp_path):
    s = synth_halfspace(25, 3, seed=2, label_noise_rate=0.2)
    back = read_written_csv(write_csv(s.dataset, tmp_path / "s.csv"))
    assert back == s.dataset


def test_synth_noise_free_is_realizable():
    s = synth_halfspace(300, 3, seed=1)
    assert s.planted_loss == 0
    assert dataset_loss(s.dataset, s.w_star) == 0
    norms = np.linalg.norm(s.dataset.X, axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)


def test_synth_noise_rate_matches_binomial_count():
    s = synth_halfspace(1000, 4, label_noise_rate=0.1, seed=3)
    assert abs(s.planted_loss - 100) <= 30


def test_synth_margin_filter():
    s = synth_halfspace(200, 2, margin=0.3, seed=5)
    direction = s.w_star / np.linalg.norm(s.w_star)
    assert np.abs(s.dataset.X @ direction).min() >= 0.3


def test_synth_is_seeded():
    a, b = synth_halfspace(50, 2, seed=9), synth_halfspace(50, 2, seed=9)
    assert a.dataset == b.dataset and np.array_equal(a.w_star, b.w_star)
    assert synth_halfspace(50, 2, seed=10).dataset != a.dataset


def test_synth_rejects_impossible_margin():
    with pytest.raises(ValueError, match="margin"):
        synth_halfspace(10, 2, margin=1.5, seed=0, max_attempts=5000)
    with pytest.raises(ValueError):
        synth_halfspace(10, 2, label_noise_rate=0.5)


def test_written_csv_is_plain(tmp_path):
    path = write_csv(Dataset([[0.1, -2.0]], [-1]), tmp_path / "p.csv")
    assert path.read_text() == "x0,x1,y\n0.1,-2.0,-1\n"
