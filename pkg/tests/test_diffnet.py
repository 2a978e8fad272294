import math

import numpy as np
import pytest

from trajdet import diffnet
from trajdet.diffnet import MLP, AdamW, binary_ce, sigmoid, smooth_l1


def finite_diff(f, params, h=1e-6):
    grads = []
    for p in params:
        g = np.zeros_like(p)
        flat = p.ravel()
        gf = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = f()
            flat[i] = orig - h
            lm = f()
            flat[i] = orig
            gf[i] = (lp - lm) / (2 * h)
        grads.append(g)
    return grads


def test_identity_forward():
    mlp = MLP([3, 3], ["linear"], rng=None)
    mlp.layers[0].W = np.eye(3)
    x = np.array([[1.0, -2.0, 3.0]])
    assert np.allclose(mlp.forward(x), x)


def test_zero_weights_give_bias():
    mlp = MLP([3, 2], ["linear"], rng=None)
    mlp.layers[0].b = np.array([0.5, -0.5])
    out = mlp.forward(np.array([[1.0, 2.0, 3.0]]))
    assert np.allclose(out, [[0.5, -0.5]])


def test_forward_matches_reference_arithmetic(rng=np.random.default_rng(2)):
    mlp = MLP([3, 4, 2], ["tanh", "linear"], rng)
    x = rng.normal(size=(5, 3))
    l0, l1 = mlp.layers
    expected = np.tanh(x @ l0.W.T + l0.b) @ l1.W.T + l1.b
    assert np.allclose(mlp.forward(x), expected, atol=1e-12)


def test_scalar_gradient():
    mlp = MLP([1, 1], ["linear"], rng=None)
    mlp.layers[0].W = np.array([[2.0]])
    out = mlp.forward(np.array([[3.0]]))
    assert out[0, 0] == 6.0
    mlp.zero_grad()
    mlp.backward(np.array([[1.0]]))
    assert mlp.layers[0].dW[0, 0] == 3.0


def test_zero_loss_gradient():
    mlp = MLP([2, 3, 1], ["relu", "linear"], np.random.default_rng(0))
    mlp.forward(np.ones((4, 2)))
    mlp.zero_grad()
    mlp.backward(np.zeros((4, 1)))
    assert all(np.all(g == 0) for g in mlp.gradients())


def test_backward_before_forward_raises():
    mlp = MLP([2, 2], ["linear"], rng=None)
    with pytest.raises(RuntimeError):
        mlp.backward(np.zeros((1, 2)))


@pytest.mark.parametrize("acts", [["relu", "linear"], ["tanh", "linear"], ["relu", "tanh", "linear"]])
def test_gradients_match_finite_differences(acts):
    rng = np.random.default_rng(42)
    dims = [3] + [4] * (len(acts) - 1) + [2]
    mlp = MLP(dims, acts, rng)
    x = rng.normal(size=(6, 3))
    target = rng.normal(size=(6, 2))

    def loss():
        return smooth_l1(mlp.forward(x), target)[0]

    mlp.zero_grad()
    _, dpred = smooth_l1(mlp.forward(x), target)
    mlp.backward(dpred)
    analytic = [g.copy() for g in mlp.gradients()]
    numeric = finite_diff(loss, mlp.parameters(), h=1e-5)
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
        assert np.max(np.abs(a - n) / denom) < 1e-4


def test_smooth_l1_values():
    zero, _ = smooth_l1(np.array([1.0, 2.0]), np.array([1.0, 2.0]))
    assert zero == 0.0
    inner, _ = smooth_l1(np.array([0.5]), np.array([0.0]))
    assert inner == pytest.approx(0.125)
    outer, _ = smooth_l1(np.array([2.0]), np.array([0.0]))
    assert outer == pytest.approx(1.5)


def test_binary_ce_values():
    loss, grad = binary_ce(0.0, 1)
    assert loss == pytest.approx(math.log(2))
    assert grad == pytest.approx(-0.5)
    loss, _ = binary_ce(50.0, 1)
    assert loss == pytest.approx(0.0, abs=1e-12)
    loss, _ = binary_ce(1.2, 0)
    assert loss == pytest.approx(math.log(1 + math.exp(1.2)))


def test_binary_ce_stable_for_extreme_logits():
    for z in (-1e4, 1e4):
        for y in (0, 1):
            loss, grad = binary_ce(z, y)
            assert math.isfinite(loss) and math.isfinite(grad)


def test_optimizer_zero_grad_no_wd_keeps_params():
    p = np.array([1.0, 2.0])
    opt = AdamW([p], lr=0.1, weight_decay=0.0)
    opt.step([np.zeros(2)])
    assert np.allclose(p, [1.0, 2.0])


def test_optimizer_first_step_magnitude():
    # bias-corrected first step with constant gradient moves by ~lr
    p = np.array([0.0])
    opt = AdamW([p], lr=0.1, weight_decay=0.0)
    opt.step([np.array([1.0])])
    assert p[0] == pytest.approx(-0.1, rel=1e-6)


def test_optimizer_weight_decay_only_shrinks():
    p = np.array([2.0])
    opt = AdamW([p], lr=0.1, weight_decay=0.5)
    opt.step([np.array([0.0])])
    assert p[0] == pytest.approx(2.0 * (1 - 0.1 * 0.5))


def test_optimizer_rejects_non_finite_gradient():
    p = np.array([1.0])
    opt = AdamW([p], lr=0.1)
    with pytest.raises(FloatingPointError):
        opt.step([np.array([np.nan])])
    assert p[0] == 1.0  # step skipped


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(9)
    mlp = MLP([3, 5, 2], ["relu", "linear"], rng)
    path = tmp_path / "ck.json"
    diffnet.save_checkpoint(diffnet.mlp_to_json(mlp), path)
    mlp2 = diffnet.mlp_from_json(diffnet.load_checkpoint(path))
    x = rng.normal(size=(4, 3))
    assert np.array_equal(mlp.forward(x), mlp2.forward(x))  # bit-compatible


def test_sigmoid_stable():
    assert sigmoid(1000.0) == 1.0
    assert sigmoid(-1000.0) == 0.0
    assert sigmoid(0.0) == 0.5


def test_determinism_same_seed():
    def run():
        rng = np.random.default_rng(7)
        mlp = MLP([2, 4, 1], ["relu", "linear"], rng)
        opt = AdamW(mlp.parameters(), lr=1e-2)
        x = np.arange(10, dtype=np.float64).reshape(5, 2)
        y = np.ones((5, 1))
        for _ in range(20):
            mlp.zero_grad()
            loss, d = smooth_l1(mlp.forward(x), y)
            mlp.backward(d)
            opt.step(mlp.gradients())
        return [p.copy() for p in mlp.parameters()]

    a, b = run(), run()
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
