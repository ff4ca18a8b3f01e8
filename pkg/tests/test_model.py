"""Model geometry, initialization, forward pass, and error metric."""

import numpy as np
import pytest

from ecids.model import (
    ModelConfig,
    backward_batch,
    forward,
    forward_batch,
    init,
    param_count,
    reconstruction_error,
    reconstruction_errors,
)


# ── Geometry / parameter count ────────────────────────────────────────────


def test_default_model_has_256270_parameters():
    assert param_count(ModelConfig()) == 256_270


@pytest.mark.parametrize(
    "units",
    [(4, 3), (8, 4), (5, 2), (16, 8), (3, 3)],
)
def test_param_count_matches_tensor_enumeration(units):
    config = ModelConfig(d=6, T=4, encoder_units=units, decoder_units=tuple(reversed(units)))
    params = init(config, seed=0)
    assert param_count(config) == params.scalar_count()
    assert params.scalar_count() == sum(t.size for _, t in params.named_tensors())


def test_param_count_independent_of_window_length():
    a = ModelConfig(T=10)
    b = ModelConfig(T=20)
    assert param_count(a) == param_count(b)


def test_config_requires_mirrored_decoder():
    with pytest.raises(ValueError, match="mirror"):
        ModelConfig(encoder_units=(128, 64), decoder_units=(128, 64))


def test_config_rejects_nonlinear_readout():
    with pytest.raises(ValueError):
        ModelConfig(output_activation="relu")


def test_layer_dims_chain():
    config = ModelConfig()
    assert config.layer_dims() == [(14, 128), (128, 64), (64, 64), (64, 128)]


# ── Initialization ────────────────────────────────────────────────────────


def test_init_is_deterministic(tiny_model_config):
    a = init(tiny_model_config, seed=9)
    b = init(tiny_model_config, seed=9)
    for (name_a, ta), (name_b, tb) in zip(a.named_tensors(), b.named_tensors()):
        assert name_a == name_b
        assert np.array_equal(ta, tb)


def test_init_seeds_differ(tiny_model_config):
    a = init(tiny_model_config, seed=1)
    b = init(tiny_model_config, seed=2)
    assert any(
        not np.array_equal(ta, tb)
        for (_, ta), (_, tb) in zip(a.named_tensors(), b.named_tensors())
    )


def test_init_kernels_within_glorot_bounds():
    config = ModelConfig()
    params = init(config, seed=4)
    for (d_in, h), layer in zip(config.layer_dims(), params.layers):
        assert np.abs(layer.input_kernel).max() <= np.sqrt(6.0 / (d_in + h))
        assert np.abs(layer.recurrent_kernel).max() <= np.sqrt(6.0 / (h + h))
    h_last = config.decoder_units[-1]
    assert np.abs(params.output_kernel).max() <= np.sqrt(6.0 / (h_last + config.d))


def test_init_forget_gate_bias_is_one():
    params = init(ModelConfig(), seed=4)
    for layer in params.layers:
        h = layer.recurrent_kernel.shape[1]
        assert np.all(layer.bias[h : 2 * h] == 1.0)
        assert np.all(layer.bias[:h] == 0.0)
        assert np.all(layer.bias[2 * h :] == 0.0)
    assert np.all(params.output_bias == 0.0)


def test_named_tensor_shapes_follow_layout():
    params = init(ModelConfig(), seed=0)
    shapes = dict((name, t.shape) for name, t in params.named_tensors())
    assert shapes["encoder_1.input_kernel"] == (512, 14)
    assert shapes["encoder_1.recurrent_kernel"] == (512, 128)
    assert shapes["encoder_1.bias"] == (512,)
    assert shapes["decoder_2.input_kernel"] == (512, 64)
    assert shapes["output.kernel"] == (128, 14)
    assert shapes["output.bias"] == (14,)


# ── Forward ───────────────────────────────────────────────────────────────


def test_forward_preserves_window_shape(tiny_params):
    window = np.random.default_rng(0).standard_normal((3, 2))
    out = forward(tiny_params, window)
    assert out.shape == (3, 2)


def test_forward_default_shape():
    params = init(ModelConfig(), seed=0, dtype=np.float32)
    out = forward(params, np.zeros((10, 14), dtype=np.float32))
    assert out.shape == (10, 14)


def test_forward_batch_shape(tiny_params):
    x = np.random.default_rng(0).standard_normal((7, 3, 2))
    assert forward_batch(tiny_params, x).shape == (7, 3, 2)


def test_forward_rejects_wrong_shapes(tiny_params):
    with pytest.raises(ValueError):
        forward(tiny_params, np.zeros((4, 2)))
    with pytest.raises(ValueError):
        forward_batch(tiny_params, np.zeros((5, 3, 9)))


def test_all_zero_parameters_give_zero_output(tiny_params):
    params = tiny_params
    for name, tensor in params.named_tensors():
        params.set_tensor(name, np.zeros_like(tensor))
    out = forward(params, np.random.default_rng(0).standard_normal((3, 2)))
    assert np.all(out == 0.0)


def test_forward_is_deterministic(tiny_params):
    x = np.random.default_rng(0).standard_normal((4, 3, 2))
    assert np.array_equal(forward_batch(tiny_params, x), forward_batch(tiny_params, x))


def test_gradients_match_finite_differences_spot_check(tiny_params):
    # Full-tensor check lives in the acceptance suite; here a fast spot
    # check on a few entries of two tensors guards refactors.
    params = tiny_params
    x = np.random.default_rng(5).standard_normal((4, 3, 2))
    recon, cache = forward_batch(params, x, with_cache=True)
    diff = recon - x
    grads = backward_batch(params, cache, (2.0 / diff.size) * diff)

    def loss():
        d = forward_batch(params, x) - x
        return float(np.mean(d * d))

    h = 1e-6
    rng = np.random.default_rng(0)
    for name in ("encoder_1.recurrent_kernel", "output.kernel"):
        tensor = dict(params.named_tensors())[name]
        for _ in range(4):
            idx = tuple(rng.integers(0, s) for s in tensor.shape)
            orig = tensor[idx]
            tensor[idx] = orig + h
            up = loss()
            tensor[idx] = orig - h
            down = loss()
            tensor[idx] = orig
            numeric = (up - down) / (2 * h)
            assert grads[name][idx] == pytest.approx(numeric, rel=1e-4, abs=1e-10)


# ── Reconstruction error ──────────────────────────────────────────────────


def test_error_zero_for_identity():
    x = np.random.default_rng(0).standard_normal((10, 14))
    assert reconstruction_error(x, x) == 0.0


def test_error_hand_computed_case():
    x = np.array([[1.0, 3.0]])
    x_hat = np.array([[2.0, 1.0]])
    assert reconstruction_error(x, x_hat) == pytest.approx(1.5)


def test_error_scales_with_absolute_homogeneity():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((10, 14))
    x_hat = rng.standard_normal((10, 14))
    base = reconstruction_error(x, x_hat)
    for c in (-3.0, 0.5, 7.0):
        assert reconstruction_error(c * x, c * x_hat) == pytest.approx(abs(c) * base, rel=1e-12)


def test_error_rejects_shape_mismatch():
    with pytest.raises(ValueError):
        reconstruction_error(np.zeros((10, 14)), np.zeros((10, 13)))


def test_batched_errors_match_scalar_path(tiny_params):
    x = np.random.default_rng(2).standard_normal((9, 3, 2))
    batched = reconstruction_errors(tiny_params, x, batch_size=4)
    single = [reconstruction_error(w, forward(tiny_params, w)) for w in x]
    assert batched == pytest.approx(single, rel=1e-12)
