import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import central_difference, rel_error
from synthguard import _kernels_py, kernels
from synthguard.errors import ConfigError, NumericsError, ShapeError
from synthguard.numerics import autograd as ag
from synthguard.numerics import (
    MLP,
    Adam,
    LSTMCell,
    OptimizerState,
    Tensor,
    adam_step,
    backward,
    clip_by_global_norm,
    clip_weights_elementwise,
    global_norm,
    lstm_step,
)
from synthguard.numerics.layers import bce_with_logits, mse


def test_square_derivative():
    x = Tensor(3.0, requires_grad=True)
    (g,) = ag.grad(x * x, [x])
    assert g.item() == 6.0


def test_constant_has_zero_gradient():
    x = Tensor(2.0, requires_grad=True)
    c = Tensor(5.0)
    (g,) = ag.grad(c * 1.0, [x])
    assert g.item() == 0.0


def test_non_scalar_loss_rejected():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        ag.grad(x * 2.0, [x])


def test_two_layer_net_matches_finite_differences(rng):
    net = MLP([4, 6, 3], rng, hidden="tanh", output="linear")
    x = Tensor(rng.normal(size=(5, 4)))
    y = rng.normal(size=(5, 3))
    params = net.parameters()

    def loss_value():
        with ag.no_grad():
            return mse(net(x), y).item()

    grads = backward(mse(net(x), y), params)
    numeric = central_difference(loss_value, [p.data for p in params.values()])
    for (name, g), n in zip(grads.items(), numeric):
        assert rel_error(g, n) < 1e-4, name


def test_backward_is_repeatable(rng):
    net = MLP([3, 4, 1], rng)
    x = Tensor(rng.normal(size=(6, 3)))
    loss = ag.mean(net(x))
    before = loss.data.copy()
    g1 = backward(loss, net.parameters())
    g2 = backward(loss, net.parameters())
    for k in g1:
        np.testing.assert_array_equal(g1[k], g2[k])
    np.testing.assert_array_equal(loss.data, before)


@pytest.mark.parametrize(
    "op",
    [
        lambda a, b: ag.tanh(a * b),
        lambda a, b: ag.sigmoid(a - b),
        lambda a, b: ag.relu(a + 0.3) * b,
        lambda a, b: ag.softplus(a) / (ag.exp(b) + 1.0),
        lambda a, b: ag.log(ag.exp(a) + 1.0) + ag.sqrt(b * b + 1.0),
        lambda a, b: ag.power(a * a + 1.0, 1.5) - b,
        lambda a, b: ag.concat([a, b], axis=1)[:, 1:4],
        lambda a, b: ag.matmul(a, ag.transpose(b)),
        lambda a, b: ag.mean(a, axis=0, keepdims=True) * b,
        lambda a, b: a.reshape(-1)[2:7] * b.reshape(-1)[:5],
    ],
)
def test_elementwise_ops_match_finite_differences(op, rng):
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    w = rng.normal(size=op(a, b).shape)

    def f():
        with ag.no_grad():
            return float(np.sum(op(a, b).data * w))

    ga, gb = ag.grad(ag.tsum(op(a, b) * w), [a, b])
    na, nb = central_difference(f, [a.data, b.data])
    assert rel_error(ga.data, na) < 1e-4
    assert rel_error(gb.data, nb) < 1e-4


def test_bce_with_logits_gradient(rng):
    z = Tensor(rng.normal(size=(8, 1)), requires_grad=True)
    t = (rng.random((8, 1)) > 0.5).astype(float)

    def f():
        with ag.no_grad():
            return bce_with_logits(z, t).item()

    (g,) = ag.grad(bce_with_logits(z, t), [z])
    (n,) = central_difference(f, [z.data])
    assert rel_error(g.data, n) < 1e-4


def test_double_backprop_matches_finite_differences(rng):
    """d/dW of ||d out / dx||^2 through a tanh MLP."""
    net = MLP([3, 5, 1], rng, hidden="tanh")
    x = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
    params = net.parameters()

    def penalty(create_graph):
        (gx,) = ag.grad(ag.tsum(net(x)), [x], create_graph=create_graph)
        return ag.tsum(gx * gx)

    def f():
        return penalty(False).item()

    grads = backward(penalty(True), params)
    numeric = central_difference(f, [p.data for p in params.values()])
    for (name, g), n in zip(grads.items(), numeric):
        assert rel_error(g, n) < 1e-4, name


# -- LSTM -----------------------------------------------------------------


def test_lstm_zero_params_give_zero_state(rng):
    cell = LSTMCell(3, 4, rng)
    for p in cell.parameters().values():
        p.data = np.zeros_like(p.data)
    h, c = cell(Tensor(rng.normal(size=(2, 3))), *cell.zero_state(2))
    np.testing.assert_array_equal(h.data, 0.0)
    np.testing.assert_array_equal(c.data, 0.0)


def test_lstm_shapes(rng):
    cell = LSTMCell(5, 7, rng)
    h0 = Tensor(rng.normal(size=(3, 7)))
    c0 = Tensor(rng.normal(size=(3, 7)))
    h, c = cell(Tensor(rng.normal(size=(3, 5))), h0, c0)
    assert h.shape == h0.shape and c.shape == c0.shape


def test_lstm_dimension_mismatch(rng):
    cell = LSTMCell(5, 7, rng)
    with pytest.raises(ShapeError):
        cell(Tensor(np.zeros((3, 4))), *cell.zero_state(3))
    with pytest.raises(ShapeError):
        cell(Tensor(np.zeros((3, 5))), Tensor(np.zeros((3, 6))), Tensor(np.zeros((3, 7))))


def test_lstm_gradient_matches_finite_differences(rng):
    cell = LSTMCell(3, 4, rng)
    cell.params.b.data = rng.normal(size=16)
    x = Tensor(rng.normal(size=(2, 3)))
    h0 = Tensor(rng.normal(size=(2, 4)))
    c0 = Tensor(rng.normal(size=(2, 4)))
    params = cell.parameters()

    def f():
        with ag.no_grad():
            return float(lstm_step(x, h0, c0, cell.params)[0].data.sum())

    h, _ = lstm_step(x, h0, c0, cell.params)
    grads = backward(ag.tsum(h), params)
    numeric = central_difference(f, [p.data for p in params.values()])
    for (name, g), n in zip(grads.items(), numeric):
        assert rel_error(g, n) < 1e-4, name


def test_lstm_gates_graph_vjp_matches_numpy_vjp(rng):
    z = Tensor(rng.normal(size=(3, 8)), requires_grad=True)
    c = Tensor(rng.normal(size=(3, 2)), requires_grad=True)
    w = rng.normal(size=(3, 4))
    fast = ag.grad(ag.tsum(ag.lstm_gates(z, c) * w), [z, c])
    slow = ag.grad(ag.tsum(ag.lstm_gates(z, c) * w), [z, c], create_graph=True)
    for a, b in zip(fast, slow):
        np.testing.assert_allclose(a.data, b.data, rtol=1e-12, atol=1e-14)


def test_compiled_kernels_agree_with_fallback(rng):
    z = rng.normal(size=(5, 12))
    c = rng.normal(size=(5, 3))
    out_k = kernels.lstm_gates_forward(z, c)
    out_p = _kernels_py.lstm_gates_forward(z, c)
    for a, b in zip(out_k, out_p):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)
    dh, dc = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
    back_k = kernels.lstm_gates_backward(dh, dc, out_p[2], c, out_p[3])
    back_p = _kernels_py.lstm_gates_backward(dh, dc, out_p[2], c, out_p[3])
    for a, b in zip(back_k, back_p):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)
    m, n = rng.normal(size=40).round(1), rng.normal(size=30).round(1)
    assert kernels.auc_raw(m, n) == pytest.approx(_kernels_py.auc_raw(m, n), abs=1e-12)
    assert kernels.max_tpr_fpr_gap(m, n) == pytest.approx(_kernels_py.max_tpr_fpr_gap(m, n), abs=1e-12)
    x = rng.normal(size=50)
    np.testing.assert_allclose(kernels.acf(x, 10), _kernels_py.acf(x, 10), rtol=1e-12)


# -- Adam -----------------------------------------------------------------


def _params(rng):
    return {"w": Tensor(rng.normal(size=(3, 2)), requires_grad=True), "b": Tensor(rng.normal(size=2), requires_grad=True)}


def test_adam_zero_gradient_is_fixed_point(rng):
    params = _params(rng)
    before = {k: v.data.copy() for k, v in params.items()}
    opt = Adam(params, lr=0.1)
    for _ in range(5):
        opt.step({k: np.zeros_like(v.data) for k, v in params.items()})
    for k in params:
        np.testing.assert_array_equal(params[k].data, before[k])
    assert opt.state.step == 5


@pytest.mark.parametrize("g", [0.3, -2.0, 1e-3])
def test_adam_first_step_magnitude(g):
    p = {"x": Tensor(1.0, requires_grad=True)}
    state = OptimizerState(lr=0.01)
    adam_step(p, {"x": np.array(g)}, state)
    expected = 0.01 * abs(g) / (abs(g) + state.eps)
    assert abs(1.0 - p["x"].data) == pytest.approx(expected, rel=1e-12)


def test_adam_deterministic(rng):
    grads_seq = [{"w": rng.normal(size=(3, 2)), "b": rng.normal(size=2)} for _ in range(10)]
    results = []
    for _ in range(2):
        params = _params(np.random.default_rng(5))
        opt = Adam(params, lr=0.05)
        for g in grads_seq:
            opt.step(g)
        results.append({k: v.data.copy() for k, v in params.items()})
    for k in results[0]:
        assert np.array_equal(results[0][k], results[1][k])


def test_adam_rejects_non_finite(rng):
    params = _params(rng)
    opt = Adam(params)
    with pytest.raises(NumericsError):
        opt.step({"w": np.full((3, 2), np.nan), "b": np.zeros(2)})


# -- clipping -------------------------------------------------------------


def test_clip_under_bound_is_identity():
    g = {"a": np.array([0.3, 0.4])}
    out = clip_by_global_norm(g, 1.0)
    np.testing.assert_array_equal(out["a"], g["a"])


def test_clip_three_four():
    out = clip_by_global_norm({"a": np.array([3.0, 4.0])}, 2.5)
    np.testing.assert_allclose(out["a"], [1.5, 2.0], rtol=1e-15)


def test_clip_rejects_nonpositive():
    with pytest.raises(ConfigError):
        clip_by_global_norm({"a": np.ones(2)}, 0.0)
    with pytest.raises(ConfigError):
        clip_weights_elementwise({"a": Tensor(np.ones(2))}, -1.0)


@settings(max_examples=200, deadline=None)
@given(
    arrays(np.float64, st.integers(1, 12), elements=st.floats(-1e3, 1e3)),
    arrays(np.float64, st.integers(1, 5), elements=st.floats(-1e3, 1e3)),
    st.floats(1e-3, 1e3),
)
def test_clip_bound_and_direction(a, b, c):
    grads = {"a": a, "b": b}
    out = clip_by_global_norm(grads, c)
    before, after = global_norm(grads), global_norm(out)
    assert after <= c + 1e-9
    assert after <= before + 1e-12
    if before > c and after > 0:
        flat_in = np.concatenate([a, b])
        flat_out = np.concatenate([out["a"], out["b"]])
        cos = flat_in @ flat_out / (np.linalg.norm(flat_in) * np.linalg.norm(flat_out))
        assert cos == pytest.approx(1.0, abs=1e-12)


def test_weight_clip_examples(rng):
    p = {"w": Tensor(np.array([0.005, -0.002, 0.7, -3.0]))}
    clip_weights_elementwise(p, 0.01)
    np.testing.assert_array_equal(p["w"].data, [0.005, -0.002, 0.01, -0.01])
    again = p["w"].data.copy()
    clip_weights_elementwise(p, 0.01)
    np.testing.assert_array_equal(p["w"].data, again)
