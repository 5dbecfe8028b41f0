import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gendistill.numerics import (
    ParamStore,
    Rng,
    ShapeError,
    adam_step,
    cross_entropy_loss,
    grad_check,
    kl_loss,
    layers as L,
    load_checkpoint,
    read_checkpoint,
    save_checkpoint,
    softmax,
)
from gendistill.numerics import kernels


def _layer_objective(store, fwd, bwd, proj):
    """sum(out * proj) with analytic grads routed into ``store``."""

    def objective(compute_grad):
        out, cache, extra = fwd()
        loss = float((out * proj).sum())
        if compute_grad:
            bwd(proj.copy(), cache, extra)
        return loss

    return objective


def _random_store(rng, **shapes):
    p = ParamStore()
    for name, shape in shapes.items():
        p.add(name, rng.normal(size=shape))
    return p


class TestLayerGradients:
    tol = 1e-4

    def test_affine(self):
        rng = Rng(1)
        p = _random_store(rng, x=(5, 7), W=(7, 3), b=(3,))
        proj = rng.normal(size=(5, 3))

        def fwd():
            y, c = L.affine_fwd(p.value("x"), p.value("W"), p.value("b"))
            return y, c, None

        def bwd(dy, c, _):
            dx, dW, db = L.affine_bwd(dy, c)
            p.accumulate("x", dx)
            p.accumulate("W", dW)
            p.accumulate("b", db)

        assert grad_check(_layer_objective(p, fwd, bwd, proj), p) < self.tol

    def test_conv1d(self):
        rng = Rng(2)
        p = _random_store(rng, x=(5, 7, 4), W=(3, 4, 6), b=(6,))
        proj = rng.normal(size=(5, 5, 6))

        def fwd():
            y, c = L.conv1d_fwd(p.value("x"), p.value("W"), p.value("b"))
            return y, c, None

        def bwd(dy, c, _):
            dx, dW, db = L.conv1d_bwd(dy, c)
            p.accumulate("x", dx)
            p.accumulate("W", dW)
            p.accumulate("b", db)

        assert grad_check(_layer_objective(p, fwd, bwd, proj), p) < self.tol

    def test_maxpool_time(self):
        rng = Rng(3)
        p = _random_store(rng, y=(5, 7, 4))
        n_valid = np.array([7, 3, 1, 5, 6])
        proj = rng.normal(size=(5, 4))

        def fwd():
            out, c = L.maxpool_time_fwd(p.value("y"), n_valid)
            return out, c, None

        def bwd(d, c, _):
            p.accumulate("y", L.maxpool_time_bwd(d, c))

        assert grad_check(_layer_objective(p, fwd, bwd, proj), p) < self.tol

    def test_relu(self):
        rng = Rng(4)
        p = _random_store(rng, x=(5, 7))
        proj = rng.normal(size=(5, 7))

        def fwd():
            y, mask = L.relu_fwd(p.value("x"))
            return y, mask, None

        def bwd(dy, mask, _):
            p.accumulate("x", L.relu_bwd(dy, mask))

        assert grad_check(_layer_objective(p, fwd, bwd, proj), p) < self.tol

    def test_embedding(self):
        rng = Rng(5)
        p = _random_store(rng, table=(11, 7))
        ids = rng.integers(0, 11, size=(5, 7))
        proj = rng.normal(size=(5, 7, 7))

        def fwd():
            out, c = L.embedding_fwd(p.value("table"), ids)
            return out, c, None

        def bwd(d, c, _):
            p.accumulate("table", L.embedding_bwd(d, c))

        assert grad_check(_layer_objective(p, fwd, bwd, proj), p) < self.tol

    def test_mean_time(self):
        rng = Rng(6)
        p = _random_store(rng, x=(5, 7, 3))
        n_valid = np.array([1, 7, 4, 2, 5])
        proj = rng.normal(size=(5, 3))

        def fwd():
            out, c = L.mean_time_fwd(p.value("x"), n_valid)
            return out, c, None

        def bwd(d, c, _):
            p.accumulate("x", L.mean_time_bwd(d, c))

        assert grad_check(_layer_objective(p, fwd, bwd, proj), p) < self.tol

    def test_dropout_fixed_mask(self):
        rng = Rng(7)
        p = _random_store(rng, x=(5, 7))
        proj = rng.normal(size=(5, 7))

        def fwd():
            # same stream every call so the mask is fixed across probes
            y, mask = L.dropout_fwd(p.value("x"), 0.5, Rng(99), train=True)
            return y, mask, None

        def bwd(dy, mask, _):
            p.accumulate("x", L.dropout_bwd(dy, mask))

        assert grad_check(_layer_objective(p, fwd, bwd, proj), p) < self.tol


def test_relu_subgradient_at_zero_is_zero():
    y, mask = L.relu_fwd(np.array([[-1.0, 0.0, 2.0]]))
    assert L.relu_bwd(np.ones((1, 3)), mask).tolist() == [[0.0, 0.0, 1.0]]


def test_conv1d_zero_input_gives_bias():
    b = np.array([0.5, -1.0, 2.0])
    y, _ = L.conv1d_fwd(np.zeros((2, 6, 4)), Rng(0).normal(size=(3, 4, 3)), b)
    assert y.shape == (2, 4, 3)
    assert np.all(y == b)


def test_conv1d_matches_direct_sum():
    rng = Rng(8)
    x = rng.normal(size=(2, 6, 3))
    W = rng.normal(size=(2, 3, 4))
    b = rng.normal(size=4)
    y, _ = L.conv1d_fwd(x, W, b)
    for bi in range(2):
        for t in range(5):
            for f in range(4):
                direct = b[f] + sum(x[bi, t + j, e] * W[j, e, f] for j in range(2) for e in range(3))
                assert y[bi, t, f] == pytest.approx(direct, abs=1e-12)


def test_shape_errors_name_the_operation():
    with pytest.raises(ShapeError, match="affine_fwd"):
        L.affine_fwd(np.zeros((2, 3)), np.zeros((4, 5)), np.zeros(5))
    with pytest.raises(ShapeError, match="conv1d_fwd"):
        L.conv1d_fwd(np.zeros((1, 2, 3)), np.zeros((3, 3, 4)), np.zeros(4))


def test_dropout_eval_is_identity_and_train_scales():
    x = np.ones((200, 50))
    y, mask = L.dropout_fwd(x, 0.5, train=False)
    assert y is x and mask is None
    y, mask = L.dropout_fwd(x, 0.5, Rng(0), train=True)
    assert set(np.unique(y)) <= {0.0, 2.0}
    assert abs(y.mean() - 1.0) < 0.05


@pytest.mark.parametrize("name", ["im2col", "col2im", "masked_max_time", "max_time_bwd",
                                  "embedding_scatter"])
def test_numba_and_numpy_kernels_agree(name):
    if not kernels.HAVE_NUMBA:
        pytest.skip("numba not installed")
    rng = Rng(9)
    x = rng.normal(size=(4, 9, 5))
    n_valid = np.array([9, 1, 4, 7])
    ids = rng.integers(0, 6, size=(4, 9))
    args = {
        "im2col": (x, 3),
        "col2im": (rng.normal(size=(4, 7, 15)), 3, 9),
        "masked_max_time": (x, n_valid),
        "max_time_bwd": (rng.normal(size=(4, 5)), rng.integers(0, 9, size=(4, 5)), 9),
        "embedding_scatter": (None, ids, x),
    }[name]
    outs = []
    for backend in ("numpy", "numba"):
        a = list(args)
        if name == "embedding_scatter":
            a[0] = np.zeros((6, 5))
        outs.append(kernels.get_impl(name, backend)(*a))
    if isinstance(outs[0], tuple):
        for u, v in zip(*outs):
            np.testing.assert_array_equal(u, v)
    else:
        np.testing.assert_array_equal(outs[0], outs[1])


class TestSoftmax:
    def test_closed_form_with_temperature(self):
        e = math.e
        np.testing.assert_allclose(softmax(np.array([[2.0, 0.0]]), 2.0)[0],
                                   [e / (e + 1), 1 / (e + 1)], rtol=0, atol=1e-15)

    def test_uniform(self):
        np.testing.assert_array_equal(softmax(np.zeros((1, 4)))[0], [0.25] * 4)
        np.testing.assert_allclose(softmax(np.full((3, 5), 7.3)), 0.2, atol=1e-15)

    def test_rejects_nonpositive_temperature(self):
        with pytest.raises(ValueError):
            softmax(np.zeros((1, 2)), 0.0)

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, (4, 6), elements=st.floats(-50, 50)),
           st.floats(0.05, 20.0))
    def test_rows_sum_to_one(self, z, T):
        s = softmax(z, T)
        assert np.all(np.abs(s.sum(axis=1) - 1.0) <= 1e-12)
        assert np.all(s >= 0) and np.all(s <= 1)

    @settings(max_examples=100, deadline=None)
    @given(arrays(np.float64, (3, 4), elements=st.floats(-10, 10)))
    def test_entries_strictly_inside_unit_interval_for_moderate_logits(self, z):
        s = softmax(z)
        assert np.all(s > 0) and np.all(s < 1)


class TestKL:
    def test_zero_at_equality(self):
        z = Rng(0).normal(size=(6, 4))
        loss, grad = kl_loss(softmax(z), z)
        assert abs(loss) <= 1e-12
        assert np.max(np.abs(grad)) <= 1e-12

    def test_extended_precision_oracle(self):
        # t = [.5, .5]; logits [0, ln 3] give s = [.25, .75]
        mpmath.mp.dps = 50
        t = [mpmath.mpf(1) / 2, mpmath.mpf(1) / 2]
        s = [mpmath.mpf(1) / 4, mpmath.mpf(3) / 4]
        exact = float(sum(ti * mpmath.log(ti / si) for ti, si in zip(t, s)))
        loss, _ = kl_loss(np.array([[0.5, 0.5]]), np.array([[0.0, math.log(3.0)]]))
        assert loss == pytest.approx(exact, abs=1e-15)
        assert loss == pytest.approx(0.1438, abs=5e-5)

    def test_gradient_finite_differences(self):
        rng = Rng(1)
        t = softmax(rng.normal(size=(3, 5)))
        t[0, 2] = 0.0
        t[0] /= t[0].sum()
        z = rng.normal(size=(3, 5))
        _, g = kl_loss(t, z)
        h = 1e-5
        for i in range(3):
            for j in range(5):
                zp, zm = z.copy(), z.copy()
                zp[i, j] += h
                zm[i, j] -= h
                num = (kl_loss(t, zp)[0] - kl_loss(t, zm)[0]) / (2 * h)
                assert abs(num - g[i, j]) < 1e-6

    def test_temperature_gradient_finite_differences(self):
        rng = Rng(2)
        t = softmax(rng.normal(size=(2, 4)))
        z = rng.normal(size=(2, 4))
        _, g = kl_loss(t, z, temperature=3.0)
        h = 1e-5
        for i in range(2):
            for j in range(4):
                zp, zm = z.copy(), z.copy()
                zp[i, j] += h
                zm[i, j] -= h
                num = (kl_loss(t, zp, 3.0)[0] - kl_loss(t, zm, 3.0)[0]) / (2 * h)
                assert abs(num - g[i, j]) < 1e-6

    def test_rejects_negative_teacher(self):
        with pytest.raises(ValueError):
            kl_loss(np.array([[1.2, -0.2]]), np.zeros((1, 2)))

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, (3, 4), elements=st.floats(-20, 20)),
           arrays(np.float64, (3, 4), elements=st.floats(-20, 20)))
    def test_nonnegative(self, a, b):
        loss, _ = kl_loss(softmax(a), b)
        assert loss >= -1e-12


class TestCrossEntropy:
    def test_uniform_is_log_c(self):
        loss, _ = cross_entropy_loss(np.array([2, 0]), np.zeros((2, 4)))
        assert loss == pytest.approx(math.log(4), abs=1e-15)

    def test_confident_correct_goes_to_zero(self):
        loss, _ = cross_entropy_loss(np.array([1]), np.array([[0.0, 60.0, 0.0]]))
        assert loss < 1e-25

    def test_gradient_finite_differences(self):
        rng = Rng(3)
        y = np.array([0, 3, 1])
        z = rng.normal(size=(3, 4))
        _, g = cross_entropy_loss(y, z)
        h = 1e-5
        for i in range(3):
            for j in range(4):
                zp, zm = z.copy(), z.copy()
                zp[i, j] += h
                zm[i, j] -= h
                num = (cross_entropy_loss(y, zp)[0] - cross_entropy_loss(y, zm)[0]) / (2 * h)
                assert abs(num - g[i, j]) < 1e-6

    def test_label_out_of_range(self):
        with pytest.raises(ValueError):
            cross_entropy_loss(np.array([4]), np.zeros((1, 4)))

    def test_matches_kl_on_one_hot(self):
        z = Rng(4).normal(size=(5, 3))
        y = np.array([0, 2, 1, 1, 0])
        ce, gce = cross_entropy_loss(y, z)
        kl, gkl = kl_loss(np.eye(3)[y], z)
        assert abs(ce - kl) < 1e-14
        np.testing.assert_allclose(gce, gkl, atol=1e-15)


class TestAdam:
    def test_zero_grad_leaves_params(self):
        p = ParamStore()
        p.add("w", np.array([1.0, -2.0]))
        adam_step(p, lr=1e-3)
        np.testing.assert_array_equal(p.value("w"), [1.0, -2.0])

    def test_first_step_hand_executed(self):
        # m = 0.1, v = 0.001 -> m_hat = 1, v_hat = 1 -> step = lr / (1 + eps)
        p = ParamStore()
        p.add("w", np.array([0.0]))
        p.accumulate("w", np.array([1.0]))
        adam_step(p, lr=1e-3)
        assert p.value("w")[0] == pytest.approx(-1e-3 / (1 + 1e-8), rel=1e-12)
        assert p["w"].grad[0] == 0.0
        assert p["w"].step == 1

    def test_constant_gradient_moves_lr_per_step(self):
        p = ParamStore()
        p.add("w", np.array([0.0]))
        for _ in range(10):
            p.accumulate("w", np.array([1.0]))
            adam_step(p, lr=1e-3)
        assert p.value("w")[0] == pytest.approx(-1e-2, rel=1e-6)

    def test_deterministic(self):
        a, b = ParamStore(), ParamStore()
        for s in (a, b):
            s.add("w", np.arange(4.0))
            s.accumulate("w", np.array([0.3, -1.0, 2.0, 0.0]))
            adam_step(s, lr=1e-2)
        np.testing.assert_array_equal(a.value("w"), b.value("w"))

    def test_frozen_rows_do_not_move(self):
        p = ParamStore()
        p.add("e", np.zeros((3, 2)), frozen_rows=(0,))
        p.accumulate("e", np.ones((3, 2)))
        adam_step(p, lr=0.1)
        np.testing.assert_array_equal(p.value("e")[0], [0.0, 0.0])
        assert np.all(p.value("e")[1:] < 0)

    def test_decoupled_weight_decay(self):
        p = ParamStore()
        p.add("w", np.array([2.0]))
        adam_step(p, lr=0.1, weight_decay=0.5)
        assert p.value("w")[0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)


class TestGradCheck:
    def test_linear_model_tight(self):
        rng = Rng(10)
        X = rng.normal(size=(8, 5))
        y = rng.integers(0, 3, size=8)
        p = ParamStore()
        p.add("W", rng.normal(size=(5, 3)))
        p.add("b", rng.normal(size=3))

        def objective(compute_grad):
            z, c = L.affine_fwd(X, p.value("W"), p.value("b"))
            loss, dz = cross_entropy_loss(y, z)
            if compute_grad:
                _, dW, db = L.affine_bwd(dz, c)
                p.accumulate("W", dW)
                p.accumulate("b", db)
            return loss

        assert grad_check(objective, p) < 1e-7

    def test_detects_corrupted_backward(self):
        rng = Rng(11)
        X = rng.normal(size=(8, 5))
        y = rng.integers(0, 3, size=8)
        p = ParamStore()
        p.add("W", rng.normal(size=(5, 3)))
        p.add("b", rng.normal(size=3))

        def objective(compute_grad):
            z, c = L.affine_fwd(X, p.value("W"), p.value("b"))
            loss, dz = cross_entropy_loss(y, z)
            if compute_grad:
                _, dW, db = L.affine_bwd(dz, c)
                p.accumulate("W", 1.5 * dW)  # wrong on purpose
                p.accumulate("b", db)
            return loss

        assert grad_check(objective, p) > 1e-2

    def test_non_finite_objective_raises(self):
        p = ParamStore()
        p.add("w", np.zeros(2))
        with pytest.raises(FloatingPointError):
            grad_check(lambda g: float("nan"), p)

    def test_subsamples_large_parameters(self):
        p = ParamStore()
        p.add("w", np.zeros(1000))
        calls = []

        def objective(compute_grad):
            calls.append(compute_grad)
            return float(p.value("w").sum())

        def with_grad(compute_grad):
            v = objective(compute_grad)
            if compute_grad:
                p.accumulate("w", np.ones(1000))
            return v

        assert grad_check(with_grad, p, max_coords=50) < 1e-8
        assert calls.count(False) == 100


class TestRng:
    def test_same_seed_same_stream(self):
        np.testing.assert_array_equal(Rng(5, "a").random(10), Rng(5, "a").random(10))

    def test_children_independent_of_parent_consumption(self):
        a = Rng(5)
        a.random(100)
        np.testing.assert_array_equal(a.child("x").random(4), Rng(5).child("x").random(4))

    def test_distinct_paths_differ(self):
        assert not np.array_equal(Rng(5, 1).random(4), Rng(5, 2).random(4))


def test_checkpoint_roundtrip_is_byte_exact(tmp_path):
    p = ParamStore()
    p.add("a", Rng(0).normal(size=(3, 4)))
    p.add("b.bias", np.array([1e-300, -0.0, np.pi]))
    p["a"].step = 7
    f1, f2 = tmp_path / "one.ckpt", tmp_path / "two.ckpt"
    save_checkpoint(f1, p)
    q = ParamStore()
    q.add("a", np.zeros((3, 4)))
    q.add("b.bias", np.zeros(3))
    header = load_checkpoint(f1, q)
    assert header["names"] == ["a", "b.bias"]
    assert header["shapes"] == [[3, 4], [3]]
    assert header["step"] == 7
    save_checkpoint(f2, q)
    assert f1.read_bytes() == f2.read_bytes()
    _, vals = read_checkpoint(f2)
    np.testing.assert_array_equal(vals["a"], p.value("a"))


def test_checkpoint_payload_is_little_endian_float64(tmp_path):
    p = ParamStore()
    p.add("x", np.array([1.5, -2.0]))
    save_checkpoint(tmp_path / "c.ckpt", p)
    raw = (tmp_path / "c.ckpt").read_bytes()
    payload = raw[raw.index(b"\n") + 1:]
    assert payload == np.array([1.5, -2.0], dtype="<f8").tobytes()
