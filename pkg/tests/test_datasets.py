import numpy as np
import pytest
import scipy.sparse as sp

from experiments.datasets import (SparseDataset, load_sparse_dataset, logistic_oracle,
                                  synthetic_classification, write_sparse_dataset)
from lcpg.errors import DatasetParseError


def _write(tmp_path, text, name="data.txt"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_example_lines(tmp_path):
    data = load_sparse_dataset(_write(tmp_path, "1 3:2.5 7:-1\n-1\n"))
    assert (data.n, data.d) == (2, 7)
    np.testing.assert_array_equal(data.y, [1.0, -1.0])
    dense = data.X.toarray()
    assert dense[0, 2] == 2.5 and dense[0, 6] == -1.0
    assert dense[1].sum() == 0.0
    assert data.X.nnz == 2


def test_comments_blank_lines_and_width(tmp_path):
    data = load_sparse_dataset(_write(tmp_path, "# header\n\n+1 1:1 # trailing\n-1 2:4\n"),
                               n_features=5)
    assert data.X.shape == (2, 5)
    with pytest.raises(DatasetParseError):
        load_sparse_dataset(_write(tmp_path, "1 4:1\n", "wide.txt"), n_features=2)


def test_label_mapping(tmp_path):
    binary = load_sparse_dataset(_write(tmp_path, "0 1:1\n1 1:2\n", "binary.txt"))
    np.testing.assert_array_equal(binary.y, [-1.0, 1.0])
    multi = load_sparse_dataset(_write(tmp_path, "1 1:1\n3 1:2\n7 1:3\n", "multi.txt"))
    np.testing.assert_array_equal(multi.y, [-1.0, 1.0, -1.0])
    chosen = load_sparse_dataset(_write(tmp_path, "1 1:1\n3 1:2\n7 1:3\n", "multi2.txt"),
                                 positive_class="7")
    np.testing.assert_array_equal(chosen.y, [-1.0, -1.0, 1.0])


@pytest.mark.parametrize("text, line", [
    ("1 1:1\n1 2:0.5 2:1\n", 2),
    ("1 3:1 1:2\n", 1),
    ("1 1:1\n-1 0:1\n", 2),
    ("1 1:1\n-1 2=1\n", 2),
    ("1 1:1\n\nabc 1:1\n", 3),
    ("1 a:1\n", 1),
])
def test_parse_errors_name_the_line(tmp_path, text, line):
    with pytest.raises(DatasetParseError) as info:
        load_sparse_dataset(_write(tmp_path, text))
    assert info.value.line_number == line
    assert str(info.value).startswith(f"line {line}: ")


def test_empty_file_is_an_error(tmp_path):
    with pytest.raises(DatasetParseError):
        load_sparse_dataset(_write(tmp_path, "# only a comment\n"))


def test_write_then_load(tmp_path):
    original = synthetic_classification(30, 6, seed=2)
    path = tmp_path / "synthetic.svm"
    write_sparse_dataset(original, path)
    loaded = load_sparse_dataset(path, n_features=6)
    np.testing.assert_allclose(loaded.X.toarray(), original.X.toarray(), rtol=1e-12)
    np.testing.assert_array_equal(loaded.y, original.y)


def test_logistic_at_origin():
    data = synthetic_classification(40, 5, seed=0)
    oracle = logistic_oracle(data)
    value, grad = oracle.eval(np.zeros(5))
    assert value == pytest.approx(np.log(2.0))
    expected = -np.asarray(data.X.T @ data.y).reshape(-1) / (2.0 * data.n)
    np.testing.assert_allclose(grad, expected, atol=1e-12)


def test_logistic_gradient_matches_finite_differences(rng):
    data = synthetic_classification(60, 8, seed=1)
    oracle = logistic_oracle(data)
    x = rng.normal(size=8) * 0.3
    _, grad = oracle.eval(x)
    h = 1e-6
    fd = np.array([(oracle.value(x + h * e) - oracle.value(x - h * e)) / (2 * h) for e in np.eye(8)])
    assert np.max(np.abs(fd - grad)) <= 1e-6


def test_logistic_large_margins_stay_finite():
    X = sp.csr_matrix(np.array([[1.0], [1.0]]))
    oracle = logistic_oracle(SparseDataset(X, np.array([1.0, -1.0])))
    value, grad = oracle.eval(np.array([40.0]))
    assert np.isfinite(value) and np.all(np.isfinite(grad))
    assert value == pytest.approx(20.0, rel=1e-12)
    assert oracle.smoothness == pytest.approx(0.25)


def test_logistic_minibatch_and_components_agree():
    data = synthetic_classification(20, 4, seed=3)
    oracle = logistic_oracle(data)
    x = np.linspace(-1.0, 1.0, 4)
    components = np.array([oracle.component_eval(i, x)[1] for i in range(20)])
    np.testing.assert_allclose(oracle.batch_gradient(np.arange(20), x), components.mean(axis=0),
                               atol=1e-12)
    np.testing.assert_allclose(oracle.grad(x), components.mean(axis=0), atol=1e-12)
