"""Tensor core: forward oracles, gradient fidelity, optimizer traces."""

import math

import numpy as np
import pytest

from rallycast import tensor as T
from rallycast.errors import ConfigurationError, ContractError, DimensionError, StateError
from rallycast.rng import substream


# ---------------------------------------------------------------- oracles

def matmul_oracle(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Triple-loop reference product, independent of numpy's @."""
    a2 = a if a.ndim == 2 else a.reshape(1, -1)
    b2 = b if b.ndim == 2 else b.reshape(-1, 1)
    m, k = a2.shape
    k2, n = b2.shape
    assert k == k2
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            for p in range(k):
                out[i, j] += a2[i, p] * b2[p, j]
    if a.ndim == 1 and b.ndim == 1:
        return out.reshape(())
    if a.ndim == 1:
        return out.reshape(-1)
    if b.ndim == 1:
        return out.reshape(-1)
    return out


def conv_same_oracle(seq: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Direct sliding-window convolution with explicit zero padding."""
    t, c_in = seq.shape
    c_out, _, k = w.shape
    half = k // 2
    out = np.zeros((t, c_out))
    for i in range(t):
        for co in range(c_out):
            acc = b[co]
            for o in range(-half, half + 1):
                j = i + o
                if 0 <= j < t:
                    for ci in range(c_in):
                        acc += w[co, ci, o + half] * seq[j, ci]
            out[i, co] = acc
    return out


def lstm_scalar_oracle(x, h, c, w_i, u_i, b_i, w_f, u_f, b_f, w_g, u_g, b_g, w_o, u_o, b_o):
    """Plain-float LSTM step for the 1-unit case."""
    sig = lambda v: 1.0 / (1.0 + math.exp(-v))
    i = sig(w_i * x + u_i * h + b_i)
    f = sig(w_f * x + u_f * h + b_f)
    g = math.tanh(w_g * x + u_g * h + b_g)
    o = sig(w_o * x + u_o * h + b_o)
    c2 = f * c + i * g
    h2 = o * math.tanh(c2)
    return h2, c2


def adam_scalar_oracle(p0, grads, lr=0.001, b1=0.9, b2=0.999, eps=1e-8):
    """Plain-float Adam trajectory for a single scalar parameter."""
    p, m, v = p0, 0.0, 0.0
    for t, g in enumerate(grads, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p -= lr * m_hat / (math.sqrt(v_hat) + eps)
    return p


# ---------------------------------------------------------------- forward

def test_matmul_matches_triple_loop_oracle():
    rng = substream(11, "test", "matmul")
    for _ in range(20):
        m, k, n = rng.integers(1, 5, size=3)
        a = rng.normal(size=(m, k))
        b = rng.normal(size=(k, n))
        got = T.matmul(T.constant(a), T.constant(b)).data
        np.testing.assert_allclose(got, matmul_oracle(a, b), atol=1e-12)


def test_matmul_identity_and_zero():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(T.matmul(T.constant(a), T.constant(np.eye(2))).data, a)
    np.testing.assert_array_equal(
        T.matmul(T.constant(a), T.constant(np.zeros((2, 2)))).data, np.zeros((2, 2))
    )


def test_matmul_small_example():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([[5.0, 6.0], [7.0, 8.0]])
    np.testing.assert_array_equal(
        T.matmul(T.constant(a), T.constant(b)).data, np.array([[19.0, 22.0], [43.0, 50.0]])
    )


def test_matmul_vector_cases():
    rng = substream(11, "test", "matvec")
    a = rng.normal(size=(3, 4))
    v = rng.normal(size=4)
    np.testing.assert_allclose(
        T.matmul(T.constant(a), T.constant(v)).data, matmul_oracle(a, v), atol=1e-12
    )
    u = rng.normal(size=3)
    np.testing.assert_allclose(
        T.matmul(T.constant(u), T.constant(a)).data, matmul_oracle(u, a), atol=1e-12
    )
    w = rng.normal(size=3)
    assert T.matmul(T.constant(u), T.constant(w)).item() == pytest.approx(float(u @ w), abs=1e-12)


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError) as exc:
        T.matmul(T.constant(np.zeros((2, 3))), T.constant(np.zeros((4, 2))))
    assert "(2, 3)" in str(exc.value) and "(4, 2)" in str(exc.value)


def test_elementwise_values():
    assert T.sigmoid(T.constant(0.0)).item() == pytest.approx(0.5)
    assert T.tanh(T.constant(0.0)).item() == 0.0
    assert T.relu(T.constant(-3.0)).item() == 0.0
    assert T.relu(T.constant(3.0)).item() == 3.0
    out = T.concat([T.constant(np.array([1.0])), T.constant(np.array([2.0, 3.0]))])
    np.testing.assert_array_equal(out.data, [1.0, 2.0, 3.0])


def test_add_mul_shape_errors():
    with pytest.raises(DimensionError):
        T.add(T.constant(np.zeros(3)), T.constant(np.zeros(4)))
    with pytest.raises(DimensionError):
        T.mul(T.constant(np.zeros((2, 2))), T.constant(np.zeros(2)))


def test_softmax_uniform_and_pinned_values():
    out = T.softmax(T.constant(np.zeros(10)))
    np.testing.assert_allclose(out.data, np.full(10, 0.1), atol=1e-15)
    out = T.softmax(T.constant(np.array([math.log(2.0), 0.0])))
    np.testing.assert_allclose(out.data, [2.0 / 3.0, 1.0 / 3.0], atol=1e-12)


def test_softmax_overflow_guard_and_shift_invariance():
    out = T.softmax(T.constant(np.array([1000.0, 0.0])))
    assert np.isfinite(out.data).all()
    assert out.data.sum() == pytest.approx(1.0, abs=1e-12)
    rng = substream(11, "test", "softmax")
    for _ in range(50):
        x = rng.normal(size=7) * 10
        shift = float(rng.normal()) * 100
        a = T.softmax(T.constant(x)).data
        b = T.softmax(T.constant(x + shift)).data
        np.testing.assert_allclose(a, b, atol=1e-12)
        assert a.sum() == pytest.approx(1.0, abs=1e-12)


def test_conv1d_same_oracles():
    # One channel, summing kernel: [1,2,3] -> [3,6,5].
    seq = np.array([[1.0], [2.0], [3.0]])
    w = np.ones((1, 1, 3))
    b = np.zeros(1)
    out = T.conv1d_same(T.constant(seq), T.constant(w), T.constant(b)).data
    np.testing.assert_array_equal(out.reshape(-1), [3.0, 6.0, 5.0])

    # Identity kernel (k=1) reproduces the input.
    rng = substream(11, "test", "conv")
    s = rng.normal(size=(5, 2))
    w_id = np.zeros((2, 2, 1))
    w_id[0, 0, 0] = 1.0
    w_id[1, 1, 0] = 1.0
    out = T.conv1d_same(T.constant(s), T.constant(w_id), T.constant(np.zeros(2))).data
    np.testing.assert_allclose(out, s, atol=1e-12)

    # Random cases against the sliding-window oracle.
    for _ in range(20):
        t = int(rng.integers(1, 7))
        c_in = int(rng.integers(1, 4))
        c_out = int(rng.integers(1, 4))
        k = int(rng.choice([x for x in (1, 3, 5) if x <= 2 * t + 1]))
        s = rng.normal(size=(t, c_in))
        w = rng.normal(size=(c_out, c_in, k))
        bias = rng.normal(size=c_out)
        got = T.conv1d_same(T.constant(s), T.constant(w), T.constant(bias)).data
        np.testing.assert_allclose(got, conv_same_oracle(s, w, bias), atol=1e-10)


def test_conv1d_same_preserves_length_for_all_small_t():
    rng = substream(11, "test", "convlen")
    for t in range(1, 9):
        for k in (1, 3, 5, 7):
            if k > 2 * t + 1:
                continue
            s = rng.normal(size=(t, 2))
            w = rng.normal(size=(3, 2, k))
            out = T.conv1d_same(T.constant(s), T.constant(w), T.constant(np.zeros(3)))
            assert out.data.shape == (t, 3)


def test_conv1d_same_bad_kernel():
    s = T.constant(np.zeros((3, 1)))
    with pytest.raises(ConfigurationError):
        T.conv1d_same(s, T.constant(np.zeros((1, 1, 2))), T.constant(np.zeros(1)))
    with pytest.raises(ConfigurationError):
        T.conv1d_same(
            T.constant(np.zeros((1, 1))), T.constant(np.zeros((1, 1, 5))), T.constant(np.zeros(1))
        )


def test_lstm_step_zero_weights_zero_state():
    d = 3
    zeros = lambda *s: T.constant(np.zeros(s))
    h2, c2 = T.lstm_step(
        zeros(d), zeros(d), T.constant(np.ones(d)),
        zeros(4 * d, d), zeros(4 * d, d), zeros(4 * d),
    )
    np.testing.assert_array_equal(h2.data, np.zeros(d))
    np.testing.assert_array_equal(c2.data, np.zeros(d))


def test_lstm_step_scalar_hand_trace():
    # d=1, all weights and biases 1, x=1, h=c=0, traced with plain floats.
    ones = np.ones((4, 1))
    h2, c2 = T.lstm_step(
        T.constant(np.zeros(1)), T.constant(np.zeros(1)), T.constant(np.ones(1)),
        T.constant(ones), T.constant(ones), T.constant(np.ones(4)),
    )
    want_h, want_c = lstm_scalar_oracle(
        1.0, 0.0, 0.0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1
    )
    assert h2.item() == pytest.approx(want_h, abs=1e-12)
    assert c2.item() == pytest.approx(want_c, abs=1e-12)


def test_lstm_step_shape_error():
    z = T.constant(np.zeros(2))
    with pytest.raises(DimensionError):
        T.lstm_step(z, z, z, T.constant(np.zeros((8, 3))), T.constant(np.zeros((8, 2))),
                    T.constant(np.zeros(8)))


def test_finite_guard_raises_on_overflow():
    with pytest.raises(FloatingPointError):
        T.exp(T.constant(1000.0))
    with pytest.raises(FloatingPointError):
        T.log(T.constant(0.0))


# --------------------------------------------------------------- backward

def test_sigmoid_gradient_at_zero():
    x = T.parameter(np.zeros(()), name="x")
    with T.Tape() as tape:
        y = T.sigmoid(x)
    grads = tape.backward(y)
    assert grads[x] == pytest.approx(0.25, abs=1e-12)


def test_matmul_sum_gradient_matches_numeric():
    rng = substream(11, "test", "backmm")
    a = T.parameter(rng.normal(size=(3, 4)), name="a")
    b = T.parameter(rng.normal(size=(4, 2)), name="b")

    def f():
        return T.sum_all(T.matmul(a, b))

    assert T.grad_check(f, [a, b]) < 1e-7


def test_unused_parameter_gets_zero_gradient():
    x = T.parameter(np.array(2.0), name="x")
    unused = T.parameter(np.ones(3), name="unused")
    with T.Tape() as tape:
        y = T.mul(x, x)
        _ = T.sum_all(T.mul(unused, T.constant(np.ones(3))))  # on tape, not in loss
    grads = tape.backward(y)
    np.testing.assert_array_equal(grads[unused], np.zeros(3))
    assert grads[x] == pytest.approx(4.0)


def test_diamond_reuse_accumulates():
    # loss = (2x) * (3x) -> d/dx = 12x.
    x = T.parameter(np.array(1.5), name="x")
    with T.Tape() as tape:
        u = T.mul(x, T.constant(2.0))
        v = T.mul(x, T.constant(3.0))
        loss = T.mul(u, v)
    grads = tape.backward(loss)
    assert grads[x] == pytest.approx(12 * 1.5, abs=1e-10)


def test_tape_reuse_and_nonscalar_loss_rejected():
    x = T.parameter(np.array(1.0), name="x")
    tape = T.Tape()
    with tape:
        y = T.mul(x, x)
    tape.backward(y)
    with pytest.raises(StateError):
        tape.backward(y)
    with pytest.raises(StateError):
        with tape:
            pass
    with T.Tape() as t2:
        v = T.mul(T.constant(np.ones(3)), T.constant(np.ones(3)))
    with pytest.raises(ContractError):
        t2.backward(v)


def test_nested_tapes_rejected():
    with T.Tape():
        with pytest.raises(StateError):
            with T.Tape():
                pass


def _random_case(rng, op_name):
    """Build (f, params) for one operation with random small tensors."""
    if op_name == "add":
        a = T.parameter(rng.normal(size=(2, 3)), name="a")
        b = T.parameter(rng.normal(size=(2, 3)), name="b")
        return lambda: T.sum_all(T.add(a, b)), [a, b]
    if op_name == "scalar_broadcast":
        a = T.parameter(rng.normal(size=(2, 3)), name="a")
        s = T.parameter(rng.normal(size=()), name="s")
        return lambda: T.sum_all(T.mul(T.add(a, s), s)), [a, s]
    if op_name == "mul":
        a = T.parameter(rng.normal(size=4), name="a")
        b = T.parameter(rng.normal(size=4), name="b")
        return lambda: T.sum_all(T.mul(a, b)), [a, b]
    if op_name == "div":
        a = T.parameter(rng.normal(size=4), name="a")
        b = T.parameter(rng.uniform(0.5, 2.0, size=4), name="b")
        return lambda: T.sum_all(T.div(a, b)), [a, b]
    if op_name == "matmul":
        a = T.parameter(rng.normal(size=(2, 3)), name="a")
        b = T.parameter(rng.normal(size=(3, 2)), name="b")
        return lambda: T.sum_all(T.tanh(T.matmul(a, b))), [a, b]
    if op_name == "matvec":
        a = T.parameter(rng.normal(size=(3, 3)), name="a")
        v = T.parameter(rng.normal(size=3), name="v")
        return lambda: T.sum_all(T.sigmoid(T.matmul(a, v))), [a, v]
    if op_name == "relu":
        a = T.parameter(rng.normal(size=5) + 0.3, name="a")  # keep clear of the kink
        return lambda: T.sum_all(T.relu(a)), [a]
    if op_name == "exp_log":
        a = T.parameter(rng.uniform(0.5, 2.0, size=4), name="a")
        return lambda: T.sum_all(T.log(T.exp(a))), [a]
    if op_name == "softmax":
        a = T.parameter(rng.normal(size=6), name="a")
        w = T.constant(rng.normal(size=6))
        return lambda: T.matmul(T.softmax(a), w), [a]
    if op_name == "log_softmax":
        a = T.parameter(rng.normal(size=6), name="a")
        return lambda: T.neg(T.element(T.log_softmax(a), 2)), [a]
    if op_name == "concat_stack":
        a = T.parameter(rng.normal(size=3), name="a")
        b = T.parameter(rng.normal(size=2), name="b")
        return lambda: T.sum_all(T.tanh(T.concat([a, b]))), [a, b]
    if op_name == "rows_cols":
        a = T.parameter(rng.normal(size=(4, 3)), name="a")
        return lambda: T.add(T.sum_all(T.row(a, 1)), T.sum_all(T.column(a, 2))), [a]
    if op_name == "take_rows":
        a = T.parameter(rng.normal(size=(4, 3)), name="a")
        return lambda: T.sum_all(T.tanh(T.take_rows(a, [0, 2, 2]))), [a]
    if op_name == "segment_reshape":
        a = T.parameter(rng.normal(size=6), name="a")
        return lambda: T.sum_all(T.sigmoid(T.reshape(T.segment(a, 1, 5), (2, 2)))), [a]
    if op_name == "transpose":
        a = T.parameter(rng.normal(size=(2, 4)), name="a")
        b = T.constant(rng.normal(size=(2, 4)))
        return lambda: T.sum_all(T.matmul(T.transpose(a), b)), [a]
    if op_name == "conv":
        s = T.parameter(rng.normal(size=(4, 2)), name="s")
        w = T.parameter(rng.normal(size=(3, 2, 3)), name="w")
        b = T.parameter(rng.normal(size=3), name="b")
        return lambda: T.sum_all(T.tanh(T.conv1d_same(s, w, b))), [s, w, b]
    if op_name == "lstm":
        d = 2
        h = T.parameter(rng.normal(size=d), name="h")
        c = T.parameter(rng.normal(size=d), name="c")
        x = T.parameter(rng.normal(size=d), name="x")
        w_ih = T.parameter(rng.normal(size=(4 * d, d)), name="w_ih")
        w_hh = T.parameter(rng.normal(size=(4 * d, d)), name="w_hh")
        b = T.parameter(rng.normal(size=4 * d), name="b")

        def f():
            h2, c2 = T.lstm_step(h, c, x, w_ih, w_hh, b)
            return T.add(T.sum_all(h2), T.sum_all(c2))

        return f, [h, c, x, w_ih, w_hh, b]
    if op_name == "clamp":
        a = T.parameter(rng.normal(size=5) * 3, name="a")
        return lambda: T.sum_all(T.tanh(T.clamp(a, -1.0, 1.0))), [a]
    raise AssertionError(op_name)


_OPS = [
    "add", "scalar_broadcast", "mul", "div", "matmul", "matvec", "relu", "exp_log",
    "softmax", "log_softmax", "concat_stack", "rows_cols", "take_rows",
    "segment_reshape", "transpose", "conv", "lstm", "clamp",
]


@pytest.mark.parametrize("op_name", _OPS)
def test_gradients_match_finite_differences(op_name):
    # 100+ random trials across the operation set, each checked to 1e-6.
    rng = substream(13, "test", "fd", op_name)
    trials = 6
    for _ in range(trials):
        f, params = _random_case(rng, op_name)
        assert T.grad_check(f, params) < 1e-6


def test_grad_check_exact_cases():
    w = T.parameter(np.array([1.0, -2.0, 3.0]), name="w")
    x = T.constant(np.array([0.5, 0.25, -1.0]))

    def linear():
        return T.matmul(w, x)

    assert T.grad_check(linear, [w]) < 1e-9

    def constant_loss():
        return T.constant(7.0)

    assert T.grad_check(constant_loss, [w]) == 0.0


# ------------------------------------------------------------------- adam

def test_adam_first_step_magnitude():
    p = T.parameter(np.array([5.0]), name="p")
    opt = T.Adam([p], lr=0.001)
    p.grad = np.array([3.7])
    opt.step()
    assert abs(5.0 - p.data[0]) == pytest.approx(0.001, rel=1e-5)
    assert opt.step_count == 1
    assert opt.moment1[0].shape == p.data.shape
    assert opt.moment2[0].shape == p.data.shape


def test_adam_zero_gradient_leaves_parameter():
    p = T.parameter(np.array([1.0, 2.0]), name="p")
    opt = T.Adam([p])
    opt.zero_grad()
    opt.step()
    np.testing.assert_allclose(p.data, [1.0, 2.0], atol=1e-6)


def test_adam_two_step_trace_matches_scalar_oracle():
    p = T.parameter(np.array(0.7), name="p")
    opt = T.Adam([p], lr=0.01)
    for g in (1.0, 1.0):
        p.grad = np.array(g)
        opt.step()
    want = adam_scalar_oracle(0.7, [1.0, 1.0], lr=0.01)
    assert float(p.data) == pytest.approx(want, abs=1e-14)


def test_adam_varied_gradient_trace():
    grads = [0.3, -1.2, 0.05, 2.0]
    p = T.parameter(np.array(-0.25), name="p")
    opt = T.Adam([p], lr=0.005)
    for g in grads:
        p.grad = np.array(g)
        opt.step()
    want = adam_scalar_oracle(-0.25, grads, lr=0.005)
    assert float(p.data) == pytest.approx(want, abs=1e-14)


def test_adam_rejects_bad_settings():
    p = T.parameter(np.zeros(1), name="p")
    with pytest.raises(ConfigurationError):
        T.Adam([p], lr=-1.0)
    with pytest.raises(ConfigurationError):
        T.Adam([])
    with pytest.raises(ContractError):
        T.Adam([T.constant(np.zeros(1))])


# -------------------------------------------------------------- utilities

def test_glorot_bounds_and_determinism():
    a = T.glorot(substream(3, "init", "w"), (8, 4))
    b = T.glorot(substream(3, "init", "w"), (8, 4))
    np.testing.assert_array_equal(a, b)
    bound = math.sqrt(6.0 / 12.0)
    assert np.abs(a).max() <= bound


def test_substreams_are_independent_and_stable():
    a = substream(42, "shuffle", 0).random(4)
    b = substream(42, "shuffle", 1).random(4)
    a2 = substream(42, "shuffle", 0).random(4)
    assert not np.array_equal(a, b)
    np.testing.assert_array_equal(a, a2)


def test_dropout_inverted_scaling():
    rng = substream(5, "drop")
    x = T.constant(np.ones(10000))
    out = T.dropout(x, 0.1, rng).data
    kept = out != 0.0
    assert abs(kept.mean() - 0.9) < 0.02
    np.testing.assert_allclose(out[kept], 1.0 / 0.9, atol=1e-12)
    same = T.dropout(x, 0.0, rng)
    assert same is x


def test_scalar_gradient_accumulates_across_records():
    """A scalar feeding two separate consumers must sum both contributions.

    Scalar intermediates decay to numpy scalars inside rule outputs, which
    are immutable; accumulation must not rely on in-place addition.
    """
    w = T.parameter(np.array(0.4), name="w")
    with T.Tape() as tape:
        sigma = T.exp(w)
        zx = T.div(T.constant(0.7), sigma)
        loss = T.add(T.log(sigma), T.mul(zx, zx))
    tape.backward(loss)
    s = math.exp(0.4)
    want = (1.0 / s) * s + (-2 * 0.7 * 0.7 / s ** 3) * s
    assert w.grad == pytest.approx(want, rel=1e-12)


def test_passthrough_gradient_not_aliased():
    """add passes gout through; accumulating later must not corrupt the
    sibling branch that holds the same array object."""
    a = T.parameter(np.array([1.0, 2.0]), name="a")
    b = T.parameter(np.array([3.0, 4.0]), name="b")
    with T.Tape() as tape:
        s = T.add(a, b)
        loss = T.add(T.sum_all(s), T.sum_all(T.mul(a, a)))
    tape.backward(loss)
    np.testing.assert_allclose(a.grad, 1.0 + 2.0 * a.data, atol=1e-12)
    np.testing.assert_allclose(b.grad, [1.0, 1.0], atol=1e-12)
