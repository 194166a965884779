import numpy as np
import pytest

from spillsim.weights import (
    ExplicitDenseWeights,
    GaussianWeightParams,
    gen_clustered,
    gen_dense_gaussian,
    gen_influencer,
    read_explicit_csv,
    weights_from_descriptor,
    write_explicit_csv,
)


def test_degenerate_gaussian_is_constant():
    params = GaussianWeightParams(mu=2.0, sigma2=0.0, mu_t=1.0, sigma2_t=0.0)
    ws = gen_dense_gaussian(4, params, n_rounds=2, seed=3)
    dense = ws.dense(1)
    assert np.allclose(dense, 2.0 / 4 + 1.0 / 4, atol=0, rtol=0)
    assert ws.effective_weight(0, 3, 2) == pytest.approx(0.75)


def test_gaussian_mean_concentrates():
    # Mean of n^2 iid Normal(mu/n, sigma2/n) entries has sd sigma/n^1.5;
    # four of those is the tolerance.
    n, mu, sigma2 = 1000, 1.0, 1.0
    ws = gen_dense_gaussian(n, GaussianWeightParams(mu, sigma2), n_rounds=1, seed=11)
    bound = 4.0 * np.sqrt(sigma2) / n**1.5
    assert abs(ws.static.mean() - mu / n) < bound


def test_gaussian_determinism():
    params = GaussianWeightParams(mu=0.5, sigma2=2.0, mu_t=0.1, sigma2_t=0.3)
    a = gen_dense_gaussian(50, params, n_rounds=3, seed=9)
    b = gen_dense_gaussian(50, params, n_rounds=3, seed=9)
    for t in (1, 2, 3):
        assert np.array_equal(a.dense(t), b.dense(t))
    c = gen_dense_gaussian(50, params, n_rounds=3, seed=10)
    assert not np.array_equal(a.dense(1), c.dense(1))


def test_gaussian_rejects_bad_params():
    with pytest.raises(ValueError):
        GaussianWeightParams(mu=0.0, sigma2=-1.0)
    with pytest.raises(ValueError):
        gen_dense_gaussian(0, GaussianWeightParams(1.0, 1.0), 1, 0)


def test_gaussian_round_range():
    ws = gen_dense_gaussian(5, GaussianWeightParams(1.0, 1.0, 0.5, 0.5), n_rounds=2, seed=0)
    with pytest.raises(IndexError):
        ws.effective_weight(0, 0, 3)


def test_clustered_hand_values():
    # Four units in two blocks: {0, 1} and {2, 3}.
    ws = gen_clustered(4, 2, w_in=1.0, w_out=0.0)
    assert ws.effective_weight(0, 1, 1) == 0.25
    assert ws.effective_weight(0, 2, 1) == 0.0


def test_clustered_uniform_when_in_equals_out():
    ws = gen_clustered(6, 3, w_in=0.7, w_out=0.7)
    dense = _materialize(ws, t=1)
    assert np.allclose(dense, 0.7 / 6, atol=0, rtol=0)


def test_clustered_single_cluster():
    ws = gen_clustered(5, 1, w_in=2.0, w_out=-1.0)
    dense = _materialize(ws, t=1)
    assert np.allclose(dense, 2.0 / 5, atol=0, rtol=0)


def test_clustered_remainder_absorbed_by_last():
    ws = gen_clustered(7, 3, w_in=1.0, w_out=0.0)
    # blocks of size 2 with the final cluster absorbing the extra unit
    assert list(ws.membership) == [0, 0, 1, 1, 2, 2, 2]


def test_clustered_rejects_bad_counts():
    with pytest.raises(ValueError):
        gen_clustered(3, 0, 1.0, 0.0)
    with pytest.raises(ValueError):
        gen_clustered(3, 4, 1.0, 0.0)


def test_influencer_hand_values():
    ws = gen_influencer(3, influencers=[0], w_inf=1.0, w_base=0.0)
    assert ws.effective_weight(1, 0, 1) == 1.0
    assert ws.effective_weight(1, 2, 1) == 0.0
    # the influencer's own column contributes only the base rate to itself
    assert ws.effective_weight(0, 0, 1) == 0.0


def test_influencer_all_but_one():
    n = 5
    ws = gen_influencer(n, influencers=list(range(n - 1)), w_inf=1.0, w_base=0.0)
    for i in range(n):
        for j in range(n - 1):
            if i != j:
                assert ws.effective_weight(i, j, 1) == pytest.approx(1.0 / (n - 1))


def test_influencer_zero_boost_matches_uniform_base_off_columns():
    ws = gen_influencer(6, influencers=[2, 4], w_inf=0.0, w_base=1.2)
    dense = _materialize(ws, t=1)
    for i in range(6):
        for j in range(6):
            if j in (2, 4) and j != i:
                assert dense[i, j] == 0.0
            else:
                assert dense[i, j] == 1.2 / 6


def test_influencer_rejects_bad_ids():
    with pytest.raises(ValueError):
        gen_influencer(3, [], 1.0, 0.0)
    with pytest.raises(ValueError):
        gen_influencer(3, [3], 1.0, 0.0)
    with pytest.raises(ValueError):
        gen_influencer(3, [0, 1, 2], 1.0, 0.0)


def test_explicit_dense_readback():
    ws = ExplicitDenseWeights(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert ws.effective_weight(0, 1, 1) == 1.0
    assert ws.effective_weight(0, 0, 7) == 0.0


def test_all_zero_weights_zero_exposure():
    ws = ExplicitDenseWeights(np.zeros((3, 3)))
    assert np.array_equal(ws.apply(np.ones(3), 1), np.zeros(3))


def _materialize(ws, t):
    n = ws.n_units
    return np.array([[ws.effective_weight(i, j, t) for j in range(n)] for i in range(n)])


@pytest.mark.parametrize(
    "ws",
    [
        gen_clustered(11, 3, w_in=1.3, w_out=-0.2),
        gen_clustered(50, 7, w_in=0.8, w_out=0.1),
        gen_influencer(13, [1, 5, 6], w_inf=0.9, w_base=0.4),
        gen_influencer(50, [0, 24, 49], w_inf=1.1, w_base=-0.3),
        gen_dense_gaussian(9, GaussianWeightParams(1.0, 0.5, 0.2, 0.1), n_rounds=2, seed=21),
        gen_dense_gaussian(50, GaussianWeightParams(0.7, 1.0, 0.1, 0.4), n_rounds=2, seed=22),
    ],
)
def test_apply_agrees_with_materialized_matrix(ws):
    # brute-force equivalence of the lazy row sums with an explicit matrix
    rng = np.random.default_rng(5)
    for t in (1, 2):
        dense = _materialize(ws, t)
        gv = rng.normal(size=ws.n_units)
        assert np.allclose(ws.apply(gv, t), dense @ gv, rtol=1e-12, atol=1e-12)
        stacked = rng.normal(size=(ws.n_units, 3))
        assert np.allclose(ws.apply(stacked, t), dense @ stacked, rtol=1e-12, atol=1e-12)


def test_descriptor_roundtrip():
    for ws in (
        gen_clustered(8, 2, 1.0, 0.1),
        gen_influencer(8, [0, 7], 1.0, 0.2),
        gen_dense_gaussian(8, GaussianWeightParams(1.0, 1.0, 0.0, 0.5), n_rounds=2, seed=4),
    ):
        again = weights_from_descriptor(ws.to_descriptor())
        assert _materialize(again, 1).tolist() == _materialize(ws, 1).tolist()


def test_explicit_csv_roundtrip(tmp_path):
    ws = ExplicitDenseWeights(np.array([[0.5, -1.0], [2.0, 0.0]]))
    path = tmp_path / "weights.csv"
    write_explicit_csv(path, ws)
    again = read_explicit_csv(path)
    assert np.array_equal(again.matrix, ws.matrix)


def test_out_of_range_lookup():
    ws = gen_clustered(4, 2, 1.0, 0.0)
    with pytest.raises(IndexError):
        ws.effective_weight(4, 0, 1)
    with pytest.raises(IndexError):
        ws.effective_weight(0, -1, 1)
