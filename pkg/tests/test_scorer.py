import numpy as np
import pytest

from tagrank.core import ValidationError, label_vector_from
from tagrank.losses import (WarpConfig, estimate_rank, pairwise_rank_loss, softmax_kl_loss,
                            warp_term)
from tagrank.scorer import (ScorerParams, backward, forward, init_params, load_params,
                            save_params)

from conftest import rel_err


def test_init_bounds_and_zero_bias():
    p = init_params([4, 3], seed=11)
    W, b = p.layers[0]
    assert W.shape == (3, 4)
    assert np.all(np.abs(W) <= 0.5)
    assert not b.any()


def test_init_deterministic():
    assert init_params([5, 7, 2], 0.3, seed=9) == init_params([5, 7, 2], 0.3, seed=9)
    assert init_params([5, 7, 2], 0.3, seed=9) != init_params([5, 7, 2], 0.3, seed=10)


@pytest.mark.parametrize("arch", [[4], [], [4, 0, 2]])
def test_init_rejects_bad_architecture(arch):
    with pytest.raises(ValidationError):
        init_params(arch)


def test_linear_forward_hand_case():
    p = ScorerParams((([[1.0, 2.0], [0.0, -1.0]], [0.5, 0.0]),), (2, 2))
    s, _ = forward(p, [3.0, 4.0])
    np.testing.assert_array_equal(s, [11.5, -4.0])


def test_rectifier():
    eye = np.eye(2)
    p = ScorerParams(((eye, np.zeros(2)), (eye, np.zeros(2))), (2, 2, 2))
    s, trace = forward(p, [1.0, -1.0])
    np.testing.assert_array_equal(trace.post[0][0], [1.0, 0.0])
    np.testing.assert_array_equal(s, [1.0, 0.0])


def test_eval_ignores_dropout():
    p = init_params([6, 5, 3], 0.0, seed=1)
    q = ScorerParams(p.layers, p.architecture, 0.6)
    x = np.arange(6.0)
    assert np.array_equal(forward(p, x)[0], forward(q, x)[0])
    assert forward(q, x)[1].masks is None


def test_train_mode_records_masks():
    p = init_params([6, 5, 4, 3], 0.5, seed=1)
    _, trace = forward(p, np.ones((2, 6)), "train", np.random.default_rng(0))
    assert len(trace.masks) == 2
    assert set(np.unique(trace.masks[0])) <= {0.0, 2.0}


def test_dimension_mismatch():
    with pytest.raises(ValidationError):
        forward(init_params([3, 2]), np.ones(4))


def test_zero_grad_gives_zero_param_grads():
    p = init_params([3, 4, 2], seed=0)
    _, trace = forward(p, np.ones(3))
    assert all(not a.any() for pair in backward(p, trace, np.zeros(2)) for a in pair)


def test_backward_rejects_mismatched_trace():
    p = init_params([3, 4, 2], seed=0)
    _, trace = forward(init_params([3, 5, 2], seed=0), np.ones(3))
    with pytest.raises(ValidationError):
        backward(p, trace, np.zeros(2))


def _fixed_mask_forward(p, x, masks):
    h = x
    for i, (W, b) in enumerate(p.layers):
        z = W @ h + b
        h = z if i == len(p.layers) - 1 else np.maximum(z, 0) * masks[i]
    return h


def _param_fd(p, f, h=1e-4):
    out = []
    flat = p.flat()
    for a_idx, a in enumerate(flat):
        g = np.zeros_like(a)
        for i in range(a.size):
            arrs = [x.copy() for x in flat]
            arrs[a_idx].flat[i] += h
            up = f(p.with_arrays(arrs))
            arrs[a_idx].flat[i] -= 2 * h
            down = f(p.with_arrays(arrs))
            g.flat[i] = (up - down) / (2 * h)
        out.append(g)
    return out


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(5)
    p = init_params([3, 4, 2], 0.5, seed=3)
    x = rng.normal(size=3)
    _, trace = forward(p, x, "train", rng)
    masks = [m[0] for m in trace.masks]
    v = rng.normal(size=2)
    grads = backward(p, trace, v)
    fd = _param_fd(p, lambda q: v @ _fixed_mask_forward(q, x, masks))
    for a, b in zip([a for pair in grads for a in pair], fd):
        assert rel_err(a, b) < 1e-4


def test_dead_unit_gets_no_incoming_gradient():
    W1 = np.array([[1.0, 0.0], [-1.0, 0.0]])
    p = ScorerParams(((W1, np.zeros(2)), (np.ones((1, 2)), np.zeros(1))), (2, 2, 1))
    _, trace = forward(p, [1.0, 1.0])
    (dW1, db1), _ = backward(p, trace, [1.0])
    assert not dW1[1].any() and db1[1] == 0.0
    assert dW1[0].any()


def test_batch_backward_sums_rows():
    rng = np.random.default_rng(0)
    p = init_params([4, 5, 3], seed=1)
    X = rng.normal(size=(3, 4))
    G = rng.normal(size=(3, 3))
    _, tb = forward(p, X)
    batch = backward(p, tb, G)
    rows = [backward(p, forward(p, X[i])[1], G[i]) for i in range(3)]
    for li in range(2):
        for ai in range(2):
            np.testing.assert_allclose(batch[li][ai], sum(r[li][ai] for r in rows), atol=1e-12)


@pytest.mark.parametrize("kind", ["softmax", "pairwise", "warp"])
def test_end_to_end_gradient(kind):
    for seed in range(20):
        rng = np.random.default_rng(seed)
        c = 5
        p = init_params([4, 8, c], 0.5, seed=seed)
        x = rng.normal(size=4)
        y = label_vector_from(rng.choice(c, 2, replace=False).tolist(), c)
        s, trace = forward(p, x, "train", rng)
        masks = [m[0] for m in trace.masks]
        if kind == "softmax":
            f = lambda v: softmax_kl_loss(v, y)
        elif kind == "pairwise":
            f = lambda v: pairwise_rank_loss(v, y)
        else:
            j = int(y.positives[0])
            est = estimate_rank(s, j, y, WarpConfig(max_trials=20), rng)
            f = lambda v: warp_term(v, j, est)
        grads = backward(p, trace, f(s).grad)
        fd = _param_fd(p, lambda q: f(_fixed_mask_forward(q, x, masks)).value)
        for a, b in zip([a for pair in grads for a in pair], fd):
            assert rel_err(a, b) < 1e-4, (kind, seed)


def test_inverted_dropout_expectation():
    p = init_params([5, 6, 3], 0.6, seed=2)
    x = np.random.default_rng(1).normal(size=5)
    _, trace = forward(p, x)
    rng = np.random.default_rng(9)
    X = np.repeat(x[None], 10_000, axis=0)
    _, tt = forward(p, X, "train", rng)
    mean = tt.post[0].mean(axis=0)
    ref = trace.post[0][0]
    assert ref.any()
    assert np.linalg.norm(mean - ref) <= 0.02 * np.linalg.norm(ref)


def test_checkpoint_round_trip(tmp_path):
    p = init_params([7, 5, 4], 0.6, seed=4)
    path = tmp_path / "ckpt.jsonl"
    save_params(p, path)
    q = load_params(path)
    assert q == p
    save_params(q, tmp_path / "again.jsonl")
    assert path.read_bytes() == (tmp_path / "again.jsonl").read_bytes()
