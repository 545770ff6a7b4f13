import numpy as np
import pytest

from emdt import numeric as nm
from emdt.denoiser import (
    DenoiserConfig,
    attention,
    init_params,
    load_checkpoint,
    loss_and_grads,
    param_shapes,
    predict_noise,
    predict_noise_batch,
    save_checkpoint,
    transformer_block,
    zero_params,
)
from emdt.embedding import EmbeddingConfig
from oracles import central_diff, max_rel_err


def cfg(D=8, norm="pre", **kw):
    return DenoiserConfig(EmbeddingConfig(D, kw.pop("s1", 10.0), kw.pop("s2", 1.0)), norm=norm, **kw)


def test_init_is_seeded_and_shaped():
    c = cfg(64)
    a, b = init_params(c, nm.Prng(3)), init_params(c, nm.Prng(3))
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)
    assert a["w_q0"].shape == (64, 32) and a["w_v1"].shape == (64, 32)
    assert a["w_o"].shape == (64, 64)
    assert np.all(a["b_1"] == 0) and np.all(a["ln1_gain"] == 1) and np.all(a["ln2_offset"] == 0)


def test_init_weight_scale():
    p = init_params(cfg(128), nm.Prng(0))
    assert abs(p["w_1"].std() * np.sqrt(128) - 1.0) < 0.1


def test_heads_must_divide_dim():
    with pytest.raises(ValueError):
        DenoiserConfig(EmbeddingConfig(6), heads=4)


def test_single_token_attention_returns_values(rng):
    c = cfg(8)
    p = init_params(c, nm.Prng(1))
    z = rng.standard_normal((1, 8))
    out, weights = attention(z, p, c, return_weights=True)
    heads = np.concatenate([z @ p["w_v0"], z @ p["w_v1"]], axis=1)
    np.testing.assert_allclose(out, heads @ p["w_o"], atol=1e-14)
    assert all(w.shape == (1, 1) and w[0, 0] == 1.0 for w in weights)


def test_zero_projections_give_zero_attention(rng):
    c = cfg(8)
    p = init_params(c, nm.Prng(1))
    for h in range(2):
        for w in "qkv":
            p[f"w_{w}{h}"] = np.zeros_like(p[f"w_{w}{h}"])
    assert np.all(attention(rng.standard_normal((5, 8)), p, c) == 0)


def test_attention_rows_sum_to_one(rng):
    c = cfg(16)
    _, weights = attention(rng.standard_normal((30, 16)) * 3, init_params(c, nm.Prng(2)), c, return_weights=True)
    for w in weights:
        assert np.max(np.abs(w.sum(axis=-1) - 1)) < 1e-12


@pytest.mark.parametrize("norm", ["pre", "none"])
def test_zero_sublayers_make_block_the_identity(norm, rng):
    c = cfg(8, norm=norm)
    z = rng.standard_normal((5, 8))
    out = transformer_block(z, zero_params(c), c)
    assert out.shape == z.shape
    np.testing.assert_array_equal(out, z)


@pytest.mark.parametrize("norm", ["pre", "post", "none"])
def test_block_gradient_matches_finite_differences(norm, rng):
    c = cfg(8, norm=norm)
    params = init_params(c, nm.Prng(4))
    z0 = rng.standard_normal((4, 8))
    target = rng.standard_normal((4, 8))

    def loss_of(z):
        tape = nm.Tape()
        from emdt.denoiser import _bind, _block
        out = _block(tape.parameter("z", z), _bind(tape, params, False), c)
        loss = nm.mse_loss(out, tape.constant(target))
        return tape, loss

    tape, loss = loss_of(z0)
    g = tape.backward(loss)["z"]
    fd = central_diff(lambda z: float(loss_of(z)[1].value), z0)
    assert max_rel_err(g, fd) < 1e-4


def test_predict_noise_shape_and_zero_model(rng):
    c = cfg(16)
    x = rng.standard_normal(29)
    assert predict_noise(x, 10, init_params(c, nm.Prng(0)), c).shape == (29,)
    np.testing.assert_array_equal(predict_noise(x, 10, zero_params(c), c), np.zeros(29))


def test_prediction_is_position_sensitive(rng):
    c = cfg(16, norm="none")
    p = init_params(c, nm.Prng(0))
    p["w_p"] = rng.standard_normal(p["w_p"].shape) / 4
    x = rng.standard_normal(5)
    y = x.copy()
    y[[0, 3]] = y[[3, 0]]
    a, b = predict_noise(x, 50, p, c), predict_noise(y, 50, p, c)
    assert not np.allclose(a[[3, 0]], b[[0, 3]])


def test_prediction_is_deterministic(rng):
    c = cfg(8)
    p = init_params(c, nm.Prng(5))
    x = rng.standard_normal(4)
    assert predict_noise(x, 7, p, c).tobytes() == predict_noise(x, 7, p, c).tobytes()


@pytest.mark.parametrize("norm", ["pre", "post", "none"])
def test_end_to_end_parameter_gradients(norm, rng):
    c = cfg(8, norm=norm, n_steps=1000)
    params = init_params(c, nm.Prng(11))
    # random (nonzero) readout so every upstream parameter receives signal
    params["w_p"] = rng.standard_normal(params["w_p"].shape) * 0.3
    params["b_1"] = rng.standard_normal(params["b_1"].shape) * 0.1
    x = rng.standard_normal((3, 4))
    t = np.array([1, 250, 999])
    target = rng.standard_normal((3, 4))
    _, grads = loss_and_grads(x, t, target, params, c)
    for name in param_shapes(c):
        def f(v, name=name):
            q = dict(params)
            q[name] = v
            return loss_and_grads(x, t, target, q, c)[0]
        fd = central_diff(f, params[name])
        assert max_rel_err(grads[name], fd) < 1e-4, name


def test_checkpoint_round_trip_is_bit_exact(tmp_path):
    c = cfg(8, norm="none", ff_dim=12, seed=3)
    p = init_params(c, nm.Prng(3))
    save_checkpoint(tmp_path / "m.npz", p, c, cluster=2)
    q, c2, meta = load_checkpoint(tmp_path / "m.npz")
    assert c2 == c and meta == {"cluster": 2}
    assert set(q) == set(p)
    assert all(q[k].tobytes() == p[k].tobytes() for k in p)


def test_batch_and_single_predictions_agree(rng):
    c = cfg(8)
    p = init_params(c, nm.Prng(0))
    p["w_p"] += 0.1
    X = rng.standard_normal((3, 5))
    t = np.array([3, 30, 300])
    batch = predict_noise_batch(X, t, p, c)
    for i in range(3):
        np.testing.assert_allclose(batch[i], predict_noise(X[i], int(t[i]), p, c), atol=1e-13)
