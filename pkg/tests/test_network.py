"""Forward evaluation, inequality checks, and serialization of dense ReLU nets."""

import json
import math

import numpy as np
import pytest

from relulab.network import (
    Architecture,
    Parameters,
    ShapeError,
    contraction_check,
    flat_slices,
    forward,
    forward_flat,
    layer_lipschitz_check,
    layer_norm_check,
    layer_output,
    operator_norm,
    pack,
    param_count,
    relu,
    unpack,
)


def _abs_net(output_activation="linear"):
    """(1,2,1) network computing |x| through two opposite-sign units."""
    arch = Architecture((1, 2, 1), output_activation)
    params = Parameters(
        (np.array([[1.0], [-1.0]]), np.array([[1.0, 1.0]])),
        (np.array([0.0, 0.0]), np.array([0.0])),
    )
    return arch, params


def test_relu_examples():
    assert np.array_equal(relu(np.array([3.0])), np.array([3.0]))
    assert np.array_equal(relu(np.array([-2.0])), np.array([0.0]))
    assert np.array_equal(
        relu(np.array([1.5, -0.5, 0.0])), np.array([1.5, 0.0, 0.0])
    )


def test_forward_abs_network():
    arch, params = _abs_net()
    assert forward(arch, params, np.array([-3.0])) == pytest.approx([3.0], abs=0)


def test_forward_abs_network_relu_output():
    arch, params = _abs_net("relu")
    assert forward(arch, params, np.array([2.0])) == pytest.approx([2.0], abs=0)


def test_forward_zero_network():
    arch = Architecture((2, 3, 2))
    params = Parameters.zeros(arch)
    out = forward(arch, params, np.array([0.7, -1.1]))
    assert np.array_equal(out, np.zeros(2))


def test_forward_batched_matches_single():
    rng = np.random.default_rng(0)
    arch = Architecture((3, 4, 2), "linear")
    params = Parameters(
        tuple(rng.standard_normal((arch.width(k), arch.width(k - 1))) for k in (2, 3)),
        tuple(rng.standard_normal(arch.width(k)) for k in (2, 3)),
    )
    x = rng.standard_normal((5, 3))
    batched = forward(arch, params, x)
    for i in range(5):
        assert batched[i] == pytest.approx(forward(arch, params, x[i]), abs=1e-12)


def test_layer_output_identity_and_hidden():
    arch, params = _abs_net()
    assert np.array_equal(layer_output(arch, params, np.array([0.7]), 1).values, [0.7])
    hidden = layer_output(arch, params, np.array([-3.0]), 2)
    assert np.array_equal(hidden.values, [0.0, 3.0])
    assert hidden.layer_index == 2


def test_layer_output_final_equals_forward():
    rng = np.random.default_rng(1)
    arch = Architecture((2, 3, 3, 2))
    params = Parameters(
        tuple(rng.standard_normal((arch.width(k), arch.width(k - 1))) for k in (2, 3, 4)),
        tuple(rng.standard_normal(arch.width(k)) for k in (2, 3, 4)),
    )
    for _ in range(100):
        x = rng.standard_normal(2)
        assert np.array_equal(
            layer_output(arch, params, x, 4).values, forward(arch, params, x)
        )


def test_layer_output_range_check():
    arch, params = _abs_net()
    with pytest.raises(ValueError):
        layer_output(arch, params, np.array([1.0]), 0)
    with pytest.raises(ValueError):
        layer_output(arch, params, np.array([1.0]), 4)


def test_contraction_examples():
    lhs, rhs = contraction_check(np.array([1.0, -1.0]), np.array([-1.0, 1.0]))
    assert lhs == pytest.approx(math.sqrt(2.0))
    assert rhs == pytest.approx(2.0 * math.sqrt(2.0))
    assert contraction_check(np.array([5.0, -5.0]), np.array([5.0, -5.0])) == (0.0, 0.0)
    assert contraction_check(np.array([2.0]), np.array([1.0])) == (1.0, 1.0)


def test_contraction_length_mismatch():
    with pytest.raises(ValueError):
        contraction_check(np.array([1.0]), np.array([1.0, 2.0]))


def test_layer_lipschitz_identical_params():
    arch, params = _abs_net()
    lhs, rhs = layer_lipschitz_check(arch, params, params, np.array([1.3]), 3)
    assert lhs == 0.0
    assert rhs == 0.0


def test_layer_lipschitz_zero_reference():
    # Against zero parameters at k=2 the bound reduces to ||w||_op ||x|| + ||b||.
    rng = np.random.default_rng(2)
    arch = Architecture((3, 4), "relu")
    params = Parameters(
        (rng.standard_normal((4, 3)),), (rng.standard_normal(4),)
    )
    zero = Parameters.zeros(arch)
    x = rng.standard_normal(3)
    lhs, rhs = layer_lipschitz_check(arch, params, zero, x, 2)
    expected = operator_norm(params.weight(2)) * float(np.linalg.norm(x)) + float(
        np.linalg.norm(params.bias(2))
    )
    assert rhs == pytest.approx(expected, rel=1e-12)
    assert lhs <= rhs


def test_layer_lipschitz_random_sweep():
    rng = np.random.default_rng(3)
    arch = Architecture((2, 3, 3, 2))
    for _ in range(50):
        pa = Parameters(
            tuple(rng.standard_normal((arch.width(k), arch.width(k - 1))) for k in (2, 3, 4)),
            tuple(rng.standard_normal(arch.width(k)) for k in (2, 3, 4)),
        )
        pb = Parameters(
            tuple(rng.standard_normal((arch.width(k), arch.width(k - 1))) for k in (2, 3, 4)),
            tuple(rng.standard_normal(arch.width(k)) for k in (2, 3, 4)),
        )
        x = rng.standard_normal(2)
        for k in (2, 3, 4):
            lhs, rhs = layer_lipschitz_check(arch, pa, pb, x, k)
            assert lhs <= rhs + 1e-9


def test_layer_norm_zero_weight():
    arch = Architecture((2, 3), "relu")
    params = Parameters((np.zeros((3, 2)),), (np.array([1.0, -2.0, 0.5]),))
    x = np.array([4.0, -1.0])
    lhs, rhs = layer_norm_check(arch, params, x, 2)
    assert lhs == pytest.approx(float(np.linalg.norm(relu(params.bias(2)))))
    assert lhs <= rhs
    assert rhs == pytest.approx(float(np.linalg.norm(params.bias(2))))


def test_layer_norm_zero_everything():
    arch = Architecture((2, 3, 2))
    params = Parameters.zeros(arch)
    lhs, rhs = layer_norm_check(arch, params, np.zeros(2), 3)
    assert (lhs, rhs) == (0.0, 0.0)


def test_layer_norm_random_sweep():
    rng = np.random.default_rng(4)
    arch = Architecture((3, 4, 4, 3))
    for _ in range(50):
        params = Parameters(
            tuple(rng.standard_normal((arch.width(k), arch.width(k - 1))) for k in (2, 3, 4)),
            tuple(rng.standard_normal(arch.width(k)) for k in (2, 3, 4)),
        )
        x = rng.standard_normal(3)
        for k in (2, 3, 4):
            lhs, rhs = layer_norm_check(arch, params, x, k)
            assert lhs <= rhs + 1e-9


def test_shape_error_names_offending_layer():
    arch = Architecture((1, 2, 1))
    bad = Parameters(
        (np.array([[1.0], [-1.0]]), np.array([[1.0, 1.0, 1.0]])),
        (np.zeros(2), np.zeros(1)),
    )
    with pytest.raises(ShapeError, match="layer 3"):
        bad.validate_for(arch)


def test_forward_rejects_wrong_input_length():
    arch, params = _abs_net()
    with pytest.raises(ShapeError):
        forward(arch, params, np.array([1.0, 2.0]))


def test_architecture_validation():
    with pytest.raises(ValueError):
        Architecture((1, 0, 1))
    with pytest.raises(ValueError):
        Architecture((3,))
    with pytest.raises(ValueError):
        Architecture((1, 2, 1), "tanh")


def test_architecture_json_round_trip():
    arch = Architecture((2, 5, 3), "linear")
    again = Architecture.from_json_dict(json.loads(json.dumps(arch.to_json_dict())))
    assert again == arch


def test_parameters_json_round_trip_exact():
    rng = np.random.default_rng(5)
    arch = Architecture((2, 3, 2))
    params = Parameters(
        tuple(rng.standard_normal((arch.width(k), arch.width(k - 1))) for k in (2, 3)),
        tuple(rng.standard_normal(arch.width(k)) for k in (2, 3)),
    )
    again = Parameters.from_json_dict(json.loads(json.dumps(params.to_json_dict())))
    for k in (2, 3):
        assert np.array_equal(again.weight(k), params.weight(k))
        assert np.array_equal(again.bias(k), params.bias(k))


def test_parameters_arrays_read_only():
    arch, params = _abs_net()
    with pytest.raises(ValueError):
        params.weight(2)[0, 0] = 9.0


def test_pack_unpack_round_trip():
    rng = np.random.default_rng(6)
    arch = Architecture((2, 3, 1), "linear")
    params = Parameters(
        tuple(rng.standard_normal((arch.width(k), arch.width(k - 1))) for k in (2, 3)),
        tuple(rng.standard_normal(arch.width(k)) for k in (2, 3)),
    )
    theta = pack(arch, params)
    assert theta.shape == (param_count(arch),)
    again = unpack(arch, theta)
    for k in (2, 3):
        assert np.array_equal(again.weight(k), params.weight(k))
        assert np.array_equal(again.bias(k), params.bias(k))


def test_flat_slices_cover_every_coordinate():
    arch = Architecture((2, 3, 1))
    covered = []
    for kind, layer, sl, shape in flat_slices(arch):
        assert kind in ("weight", "bias")
        assert 2 <= layer <= arch.depth
        assert sl.stop - sl.start == int(np.prod(shape))
        covered.extend(range(sl.start, sl.stop))
    assert covered == list(range(param_count(arch)))


def test_forward_flat_matches_forward():
    rng = np.random.default_rng(7)
    arch = Architecture((2, 3, 2), "relu")
    x = rng.standard_normal((6, 2))
    thetas = rng.standard_normal((4, param_count(arch)))
    flat_out = forward_flat(arch, thetas, x)
    assert flat_out.shape == (4, 6, 2)
    for i in range(4):
        direct = forward(arch, unpack(arch, thetas[i]), x)
        assert np.allclose(flat_out[i], direct, atol=1e-12)


def test_operator_norm_matches_svd():
    rng = np.random.default_rng(8)
    for _ in range(20):
        a = rng.standard_normal((4, 3))
        assert operator_norm(a) == pytest.approx(np.linalg.svd(a)[1][0], rel=1e-10)
    assert operator_norm(np.zeros((0, 3))) == 0.0


def test_param_count_examples():
    assert param_count(Architecture((1, 2, 1))) == 7
    assert param_count(Architecture((1, 3, 3, 1))) == 22
