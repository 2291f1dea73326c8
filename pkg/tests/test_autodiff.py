import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ctdelab.autodiff import (GRUCell, HyperLinear, MLP, Optimizer, RecurrentAgentNet, Tensor, adam_step, dumps,
                              gradcheck, load, loads, no_grad, one_hot, param, save, sgd_step)
from ctdelab.autodiff import ops as T
from ctdelab.autodiff.tensor import grad_enabled
from ctdelab.errors import DimensionError, NumericError

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def _grad(fn, x):
    x = param(x)
    fn(x).backward()
    return x.grad


# --- primitive gradients ------------------------------------------------------------

def test_sum_gradient_is_ones(rng):
    g = _grad(lambda x: T.tsum(x), rng.normal(size=(3, 4)))
    np.testing.assert_array_equal(g, np.ones((3, 4)))


@given(arrays(np.float64, (3, 5), elements=finite), arrays(np.float64, (3, 5), elements=finite))
def test_softmax_gradient_rows_sum_to_zero(x, w):
    g = _grad(lambda t: T.tsum(T.softmax(t) * w), x)
    np.testing.assert_allclose(g.sum(axis=-1), 0.0, atol=1e-12)


def test_clip_gradient_gating():
    g = _grad(lambda t: T.tsum(T.clip(t, 0.8, 1.2)), np.array([0.5, 0.9, 1.1, 1.5]))
    np.testing.assert_array_equal(g, [0.0, 1.0, 1.0, 0.0])


def test_max_uses_lowest_index_at_ties():
    g = _grad(lambda t: T.tsum(T.tmax(t, axis=-1)), np.array([[1.0, 3.0, 3.0], [2.0, 2.0, 0.0]]))
    np.testing.assert_array_equal(g, [[0, 1, 0], [1, 0, 0]])


def test_min_max_of_two_tensors():
    a, b = param([1.0, 5.0]), param([2.0, 4.0])
    T.tsum(T.minimum(a, b) + 2.0 * T.maximum(a, b)).backward()
    np.testing.assert_array_equal(a.grad, [1.0, 2.0])
    np.testing.assert_array_equal(b.grad, [2.0, 1.0])


def test_gather_gradient():
    g = _grad(lambda t: T.tsum(T.gather(t, np.array([2, 0]))), np.arange(6.0).reshape(2, 3))
    np.testing.assert_array_equal(g, [[0, 0, 1], [1, 0, 0]])


def test_broadcast_add_unbroadcasts():
    b = param(np.zeros(3))
    T.tsum(Tensor(np.ones((4, 3))) + b).backward()
    np.testing.assert_array_equal(b.grad, [4.0, 4.0, 4.0])


def test_numpy_left_operand_dispatches_to_tensor():
    x = param([1.0, 2.0])
    y = np.array([3.0, 4.0]) * x
    assert isinstance(y, Tensor)
    T.tsum(y).backward()
    np.testing.assert_array_equal(x.grad, [3.0, 4.0])


def test_non_finite_raises_with_op_name():
    with np.errstate(all="ignore"), pytest.raises(NumericError) as exc:
        T.log(param([-1.0]))
    assert exc.value.op == "log"


def test_shape_mismatch():
    with pytest.raises(DimensionError):
        T.matmul(param(np.ones((2, 3))), param(np.ones((2, 3))))


def test_no_grad_builds_no_graph():
    x = param([1.0])
    with no_grad():
        y = x * 2.0
    assert not y.requires_grad


def test_no_grad_is_per_thread():
    seen = {}
    inside, release = threading.Event(), threading.Event()

    def worker():
        with no_grad():
            inside.set()
            release.wait(5)

    t = threading.Thread(target=worker)
    t.start()
    inside.wait(5)
    seen["main"] = grad_enabled()
    release.set()
    t.join()
    assert seen["main"] is True


# --- gradcheck ----------------------------------------------------------------------------

def test_gradcheck_quadratic(rng):
    x = param(rng.normal(size=5))
    A = rng.normal(size=(5, 5))
    err = gradcheck(lambda: T.tsum(T.matmul(T.reshape(x, (1, 5)), A) * x), [x])
    assert err <= 1e-9


def test_gradcheck_mlp(rng):
    net = MLP([4, 8, 8, 3], rng)
    x = rng.normal(size=(6, 4))
    w = rng.normal(size=(6, 3))
    assert gradcheck(lambda: T.tsum(net(Tensor(x)) * w), net.parameters(), rng=rng) <= 1e-5


def test_gradcheck_relu_mlp(rng):
    net = MLP([3, 6, 2], rng, activation="relu")
    x = rng.normal(size=(5, 3))
    assert gradcheck(lambda: T.tsum(T.square(net(Tensor(x)))), net.parameters(), rng=rng) <= 1e-5


def test_gradcheck_gru_ten_steps(rng):
    cell = GRUCell(3, 5, rng)
    xs = rng.normal(size=(10, 2, 3))
    w = rng.normal(size=(2, 5))

    def fn():
        h = cell.initial(2)
        for x in xs:
            h = cell(Tensor(x), h)
        return T.tsum(h * w)
    assert gradcheck(fn, cell.parameters(), rng=rng) <= 1e-5


@pytest.mark.parametrize("nonneg", ["abs", "softplus"])
def test_gradcheck_hyperlinear(rng, nonneg):
    hyper = HyperLinear(4, 3, 2, rng, hidden=6, nonneg=nonneg)
    cond = rng.normal(size=(5, 4))
    x = param(rng.normal(size=(5, 3)))
    params = hyper.parameters() + [x]
    assert gradcheck(lambda: T.tsum(T.tanh(hyper(x, Tensor(cond)))), params, rng=rng) <= 1e-5


def test_gradcheck_recurrent_agent_net(rng):
    net = RecurrentAgentNet(4, 3, rng, embed=6, hidden=5)
    inputs = one_hot(rng.integers(0, 4, size=(2, 4)), 4)
    w = rng.normal(size=(2, 3))

    def fn():
        outs, _ = net.unroll(inputs)
        return sum((T.tsum(o * w) for o in outs), Tensor(0.0))
    assert gradcheck(fn, net.parameters(), rng=rng) <= 1e-5


def test_gradcheck_rejects_non_scalar(rng):
    x = param(rng.normal(size=3))
    with pytest.raises(NumericError):
        gradcheck(lambda: x * 1.0, [x])


@pytest.mark.parametrize("nonneg", ["abs", "softplus"])
def test_hyperlinear_weights_nonnegative(rng, nonneg):
    hyper = HyperLinear(6, 4, 3, rng, hidden=8, nonneg=nonneg)
    cond = rng.normal(scale=3.0, size=(1000, 6))
    assert (hyper.weights(Tensor(cond)).data >= 0).all()


# --- optimizers ---------------------------------------------------------------------

def test_sgd_step():
    new, _ = sgd_step([np.array([0.0])], [np.array([1.0])], lr=0.1)
    assert new[0][0] == pytest.approx(-0.1)


@given(st.floats(-100, 100).filter(lambda g: abs(g) > 1e-3))
def test_adam_first_step_is_sign(g):
    new, _ = adam_step([np.array([0.5])], [np.array([g])], lr=0.01)
    assert new[0][0] == pytest.approx(0.5 - 0.01 * np.sign(g), abs=1e-7)


def test_adam_zero_gradient_after_warm_start(rng):
    params = [rng.normal(size=4)]
    _, opt = adam_step(params, [rng.normal(size=4)], lr=0.01)
    before = opt.params[0].data.copy()
    m_hat = opt.m[0] * opt.beta1 / (1 - opt.beta1 ** 2)
    v_hat = opt.v[0] * opt.beta2 / (1 - opt.beta2 ** 2)
    new, _ = adam_step([before], [np.zeros(4)], optimizer=opt)
    bound = 0.01 * np.abs(m_hat) / (np.sqrt(v_hat) + opt.eps)
    assert (np.abs(new[0] - before) <= bound + 1e-15).all()


def test_sgd_zero_gradient_is_noop(rng):
    p = rng.normal(size=3)
    new, _ = sgd_step([p], [np.zeros(3)])
    np.testing.assert_array_equal(new[0], p)


def test_optimizer_shape_mismatch():
    with pytest.raises(DimensionError):
        Optimizer([param(np.zeros(3))]).step([np.zeros(2)])


def test_grad_norm_clipping():
    p = param(np.zeros(2))
    Optimizer([p], kind="sgd", lr=1.0, max_grad_norm=1.0).step([np.array([3.0, 4.0])])
    np.testing.assert_allclose(p.data, [-0.6, -0.8])


def _train(seed):
    rng = np.random.default_rng(seed)
    net = MLP([3, 8, 1], rng)
    opt = Optimizer(net.parameters(), lr=1e-2)
    x, y = rng.normal(size=(16, 3)), rng.normal(size=(16, 1))
    for _ in range(1000):
        opt.zero_grad()
        T.mean(T.square(net(Tensor(x)) - y)).backward()
        opt.step()
    return net.state_dict()


def test_training_is_bit_reproducible():
    a, b = _train(5), _train(5)
    for k in a:
        assert a[k].tobytes() == b[k].tobytes()


# --- checkpoints -------------------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path, rng):
    net = MLP([3, 4, 2], rng)
    save(tmp_path / "net.ctdl", net.state_dict())
    back = load(tmp_path / "net.ctdl")
    assert list(back) == list(net.state_dict())
    for k, v in net.state_dict().items():
        assert back[k].tobytes() == v.tobytes()
    other = MLP([3, 4, 2], np.random.default_rng(99))
    other.load_state_dict(back)
    x = Tensor(rng.normal(size=(2, 3)))
    assert other(x).data.tobytes() == net(x).data.tobytes()


def test_checkpoint_scalar_and_empty():
    back = loads(dumps({"s": np.float64(2.5), "e": np.zeros((0, 3))}))
    assert back["s"].shape == () and back["s"] == 2.5
    assert back["e"].shape == (0, 3)


def test_checkpoint_rejects_corruption():
    blob = dumps({"w": np.ones(2)})
    with pytest.raises(DimensionError):
        loads(b"XXXX" + blob[4:])
    with pytest.raises(DimensionError):
        loads(blob + b"\0")


def test_load_state_dict_checks_shapes(rng):
    net = MLP([3, 2], rng)
    bad = {k: np.zeros(v.shape + (1,)) for k, v in net.state_dict().items()}
    with pytest.raises(DimensionError):
        net.load_state_dict(bad)
    with pytest.raises(DimensionError):
        net.load_state_dict({})
