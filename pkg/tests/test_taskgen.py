import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mtl import taskgen as T
from mtl.errors import GeneratorError


# clusters ---------------------------------------------------------------------

def test_single_cluster_is_linearly_separable():
    ds = T.gen_clusters(1, 10, 500, seed=3)
    A = np.hstack([ds.X, np.ones((ds.n, 1))])
    w, *_ = np.linalg.lstsq(A, 2 * ds.y - 1, rcond=None)
    assert np.mean((A @ w > 0) == (ds.y == 1)) >= 0.99


def test_clusters_shapes_labels_and_separation():
    ds = T.gen_clusters(4, 50, 100, "teacher", teacher_width=10, seed=1)
    assert ds.X.shape == (400, 50) and set(np.unique(ds.y)) <= {0.0, 1.0}
    C = np.asarray(ds.meta["centers"])
    D = np.linalg.norm(C[:, None] - C[None], axis=2)[np.triu_indices(4, 1)]
    assert D.min() >= ds.meta["separation"] * ds.meta["sigma"] * math.sqrt(50)


def test_clusters_are_deterministic():
    a = T.gen_clusters(3, 8, 50, seed=5)
    b = T.gen_clusters(3, 8, 50, seed=5)
    assert a.X.tobytes() == b.X.tobytes() and a.y.tobytes() == b.y.tobytes()


def test_cluster_separation_can_fail():
    with pytest.raises(GeneratorError):
        T.gen_clusters(50, 2, 10, sigma=0.3, max_tries=20)


# decision trees -------------------------------------------------------------------

def test_tree_margin_rule():
    assert T.tree_route([0.7], [0.5]) == 1
    assert T.tree_route([0.3], [0.5]) == 0
    assert not T.margin_ok([0.55], [0.5], 0.2)
    assert T.margin_ok([0.7], [0.5], 0.2)


def test_tree_leaves_are_balanced():
    ds = T.gen_tree_task(3, 0.2, 4, 4, 50, seed=2)
    counts = np.bincount(ds.meta["leaf"], minlength=8)
    assert counts.tolist() == [50] * 8
    routed = [T.tree_route(x, ds.meta["thresholds"]) for x in ds.X]
    assert np.array_equal(routed, ds.meta["leaf"])


def test_tree_labels_are_leaf_polynomials():
    ds = T.gen_tree_task(2, 0.1, 2, 3, 20, seed=4)
    exps = T.homogeneous_monomials(2, 3)
    assert len(exps) == 4
    for x, y, leaf in zip(ds.X, ds.y, ds.meta["leaf"]):
        c = ds.meta["leaf_coeffs"][leaf]
        z = x[2:]
        assert y == pytest.approx(sum(ci * z[0] ** e[0] * z[1] ** e[1] for ci, e in zip(c, exps)))


def test_tree_rejects_thresholds_without_room_for_margin():
    with pytest.raises(GeneratorError):
        T.gen_tree_task(1, 0.4, 2, 2, 10, thresholds=[0.1])
    with pytest.raises(GeneratorError):
        T.gen_tree_task(0, 0.1, 2, 2, 10)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 4), st.floats(0.0, 0.6), st.integers(0, 10_000))
def test_tree_samples_respect_margin(h, gamma, seed):
    ds = T.gen_tree_task(h, gamma, 2, 2, 15, seed=seed)
    t = ds.meta["thresholds"]
    assert np.all(np.abs(ds.X[:, :h] - t) >= gamma / 2 * (1 - 1e-12))


# SQL ----------------------------------------------------------------------------

TOY = T.DataTable(["c0", "pl_x"], [[0.0, 1.0], [1.0, 2.0], [2.0, 3.0]])


def test_sql_toy_examples():
    mask = T.sql_match(TOY, [0], [1.0])
    assert T.sql_aggregate(TOY.values[mask, 1], "sum") == 5
    assert T.sql_aggregate(TOY.values[mask, 1], "min") == 2
    assert T.sql_aggregate(TOY.values[mask, 1], "max") == 3


def test_sql_labels_match_naive_row_scan():
    table = T.synthetic_table(300, 5, seed=2)
    ds = T.gen_sql_task(table, 2, n=200, seed=9)
    tgt = table.col("pl_x")
    for q, y in zip(ds.meta["queries"], ds.y):
        vals = [row[tgt] for row in table.values
                if all(row[c] >= t for c, t in zip(q["cols"], q["thresholds"]))]
        want = {"sum": sum, "max": max, "min": min}[q["agg"]](vals)
        assert y == want if q["agg"] != "sum" else y == pytest.approx(want, rel=1e-12)
    assert np.all(ds.meta["match_count"] >= 1)


def test_sql_features_encode_the_query():
    table = T.synthetic_table(100, 4, seed=0)
    ds = T.gen_sql_task(table, 2, n=20, seed=1)
    nc = table.n_cols
    for x, q in zip(ds.X, ds.meta["queries"]):
        assert np.flatnonzero(x[:nc]).tolist() == q["cols"]
        assert x[2 * nc:].sum() == 1 and T.AGGREGATORS[int(np.argmax(x[2 * nc:]))] == q["agg"]


def test_sql_needs_enough_columns():
    with pytest.raises(GeneratorError):
        T.gen_sql_task(TOY, 2)


def test_synthetic_table_defaults():
    t = T.synthetic_table()
    assert t.n_rows == 11830 and t.columns[-1] == "pl_x" and np.all(t.values > 0)


def test_load_table_drops_text_columns(tmp_path, caplog):
    p = tmp_path / "t.csv"
    p.write_text("country,a,b\nx,1,2\ny,3,4\nz,,5\n")
    t = T.load_table(p)
    assert t.columns == ["a", "b"] and t.values.tolist() == [[1, 2], [3, 4]]
    assert "country" in caplog.text
    with pytest.raises(GeneratorError):
        T.load_table(tmp_path / "missing.csv")


# gravity ------------------------------------------------------------------------

def test_gravity_force_examples():
    pos = np.array([[0, 0, 0], [0.5, 0, 0]], float)
    assert T.gravity_force_x(pos, np.array([1.0, 1.0])) == pytest.approx(4.0)
    sym = np.array([[0.5, 0.5, 0.5], [0.2, 0.5, 0.5], [0.8, 0.5, 0.5]])
    assert T.gravity_force_x(sym, np.ones(3)) == pytest.approx(0.0, abs=1e-12)


def test_gravity_dataset_invariants():
    ds = T.gen_gravity(5, 300, seed=2)
    assert ds.d == 24
    pos, mass = T.gravity_unpack(ds.X)
    for p, m, y in zip(pos, mass, ds.y):
        f = 0.0
        for j in range(1, 6):
            diff = p[j] - p[0]
            r = math.sqrt(diff @ diff)
            assert r >= 0.1
            f += m[0] * m[j] * diff[0] / r**3
        assert y == pytest.approx(f, rel=1e-12, abs=1e-12)
    assert np.all((mass >= 0) & (mass <= 10)) and np.all((pos >= 0) & (pos <= 1))


# parity -------------------------------------------------------------------------

def test_parity_without_noise_is_exact():
    ds = T.gen_parity_noise(12, 4, 500, seed=1, flip=0.0)
    a = ds.meta["support"]
    assert np.array_equal(ds.y, ds.X[:, a].sum(axis=1) % 2)


def test_parity_flip_rate():
    ds = T.gen_parity_noise(10, 3, 100_000, seed=2)
    clean = ds.X[:, ds.meta["support"]].sum(axis=1) % 2
    assert abs(np.mean(clean != ds.y) - 0.1) <= 0.01


def test_single_coordinate_parity_is_linearly_learnable():
    ds = T.gen_parity_noise(20, 1, 4000, seed=3).with_split(0.25, seed=0)
    Xtr, ytr = ds.train()
    Xte, yte = ds.test()
    A = np.hstack([Xtr, np.ones((len(Xtr), 1))])
    w, *_ = np.linalg.lstsq(A, ytr, rcond=None)
    pred = np.hstack([Xte, np.ones((len(Xte), 1))]) @ w > 0.5
    assert np.mean(pred == yte) >= 0.85


# normalization, splits and files -----------------------------------------------------

def test_normalize_without_constant():
    ds = T.normalize(T.LabeledDataset([[3.0, 4.0]], [0.0]), append_constant=False, prescale=False)
    assert ds.X.tolist() == [[0.6, 0.8]]


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(1, 6), st.integers(0, 1000))
def test_normalize_unit_rows_and_idempotent(n, d, seed):
    X = np.random.default_rng(seed).normal(size=(n, d)) * 5
    ds = T.normalize(T.LabeledDataset(X, np.zeros(n)))
    assert np.allclose(np.linalg.norm(ds.X, axis=1), 1, atol=1e-9)
    assert T.normalize(ds) is ds


def test_normalize_rejects_zero_rows():
    with pytest.raises(GeneratorError):
        T.normalize(T.LabeledDataset([[0.0, 0.0]], [1.0]), append_constant=False)


def test_split_is_disjoint_cover():
    ds = T.gen_parity_noise(5, 2, 101, seed=0).with_split(0.3, seed=4)
    tr, te = set(ds.train_idx), set(ds.test_idx)
    assert not tr & te and tr | te == set(range(101))


def test_csv_round_trip(tmp_path):
    ds = T.gen_tree_task(2, 0.1, 2, 2, 5, seed=1).with_split(0.2, seed=0)
    path = tmp_path / "tree.csv"
    ds.to_csv(path)
    assert path.read_text().splitlines()[0] == "f0,f1,f2,f3,y"
    back = T.LabeledDataset.from_csv(path)
    assert np.array_equal(back.X, ds.X) and np.array_equal(back.y, ds.y)
    assert np.array_equal(back.test_idx, ds.test_idx) and back.meta["generator"] == "tree"
