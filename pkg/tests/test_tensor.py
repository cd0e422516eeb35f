"""Test spanparse.tensor."""

import numpy as np
import pytest

from spanparse.errors import (
    IndexOutOfRange,
    NonScalarLoss,
    ShapeMismatch,
    SpanParseError,
    VersionError,
)
from spanparse.tensor import (
    Parameters,
    Tape,
    add,
    as_matrix,
    check_gradients,
    concat_cols,
    concat_rows,
    cross_entropy,
    dump_params,
    layer_norm,
    load_params,
    matmul,
    relu,
    scale,
    slice_cols,
    softmax_rows,
    sub,
    take_rows,
    total,
    transpose,
    weighted_sum,
)


@pytest.fixture
def params():
    gen = np.random.default_rng(7)
    return Parameters(
        [
            ("x", gen.normal(size=(4, 3))),
            ("w", gen.normal(size=(3, 6))),
            ("b", gen.normal(size=(1, 6))),
            ("g", 1.0 + 0.1 * gen.normal(size=(1, 6))),
            ("beta", 0.1 * gen.normal(size=(1, 6))),
        ]
    )


WEIGHTS = np.random.default_rng(8).normal(size=(8, 12))
TARGETS = [0, 3, 11, 5, 5, 2, 7, 1]


def composite_loss(tape, p):
    """A loss touching every operation of the tape."""
    x = tape.param("x", p["x"])
    h = add(matmul(x, tape.param("w", p["w"])), tape.param("b", p["b"]))
    h = layer_norm(h, tape.param("g", p["g"]), tape.param("beta", p["beta"]))
    left, right = slice_cols(h, 0, 3), slice_cols(h, 3, 6)
    attention = softmax_rows(matmul(left, transpose(right)))
    mixed = matmul(attention, relu(h))
    rows = take_rows(mixed, [0, 2, 2, 3])
    stacked = concat_rows(rows, scale(sub(rows, take_rows(h, [1, 1, 0, 3])), 0.5))
    wide = concat_cols(stacked, stacked)
    return add(weighted_sum(wide, WEIGHTS), cross_entropy(wide, TARGETS))


def test_docstring_example():
    tape = Tape()
    a = tape.param("a", np.ones((2, 3)))
    b = tape.constant(np.arange(6.0).reshape(3, 2))
    grads = tape.backward(total(matmul(a, b)))
    assert grads["a"].tolist() == [[1.0, 5.0, 9.0], [1.0, 5.0, 9.0]]
    assert set(grads) == {"a"}


def test_gradients_match_finite_differences(params):
    errors = check_gradients(composite_loss, params)
    assert set(errors) == set(params)
    assert max(errors.values()) <= 1e-5


def test_check_gradients_restores_params(params):
    before = {name: value.copy() for name, value in params.items()}
    check_gradients(composite_loss, params, names=["w"])
    for name, value in params.items():
        assert np.array_equal(value, before[name])


def test_repeated_rows_accumulate():
    tape = Tape()
    a = tape.param("a", np.arange(6.0).reshape(3, 2))
    grads = tape.backward(total(take_rows(a, [2, 2, 0])))
    assert grads["a"].tolist() == [[1.0, 1.0], [0.0, 0.0], [2.0, 2.0]]


def test_shared_node_gradient_sums():
    tape = Tape()
    a = tape.param("a", np.array([[3.0]]))
    grads = tape.backward(add(a, a))
    assert grads["a"][0, 0] == 2.0


def test_param_node_per_name():
    tape = Tape()
    value = np.zeros((2, 2))
    assert tape.param("w", value) is tape.param("w", value)


def test_inference_tape_records_nothing():
    tape = Tape(record=False)
    a = tape.param("a", np.ones((2, 2)))
    loss = total(matmul(a, a))
    assert loss.item() == 8.0
    assert tape.nodes == []
    with pytest.raises(ValueError):
        tape.backward(loss)


def test_cross_entropy_value():
    logits = np.array([[1.0, 2.0, 0.5], [0.0, 0.0, 0.0]])
    tape = Tape()
    loss = cross_entropy(tape.constant(logits), [1, 2]).item()
    log_z = np.log(np.exp(logits).sum(axis=1))
    expected = ((log_z[0] - 2.0) + (log_z[1] - 0.0)) / 2
    assert loss == pytest.approx(expected)


def test_relu_gradient_is_masked_upstream():
    gen = np.random.default_rng(9)
    x = gen.normal(size=(4, 5))
    x[np.abs(x) < 0.1] = 0.5
    upstream = gen.normal(size=(4, 5))
    tape = Tape()
    grads = tape.backward(weighted_sum(relu(tape.param("x", x)), upstream))
    assert np.array_equal(grads["x"], (x > 0) * upstream)

    def loss_fn(tape, p):
        return weighted_sum(relu(tape.param("x", p["x"])), upstream)

    errors = check_gradients(loss_fn, Parameters([("x", x)]))
    assert errors["x"] <= 1e-6


def test_softmax_rows_sum_to_one():
    tape = Tape()
    out = softmax_rows(tape.constant(np.array([[1000.0, 1000.0], [-5.0, 3.0]])))
    assert np.allclose(out.value.sum(axis=1), 1.0)
    assert out.value[0].tolist() == [0.5, 0.5]


def test_layer_norm_normalizes():
    tape = Tape()
    x = tape.constant(np.array([[1.0, 2.0, 3.0, 4.0]]))
    out = layer_norm(x, tape.constant(np.ones((1, 4))), tape.constant(np.zeros((1, 4))))
    assert out.value.mean() == pytest.approx(0.0, abs=1e-12)
    assert out.value.std() == pytest.approx(1.0, rel=1e-5)


def test_operator_overloads():
    tape = Tape()
    a = tape.constant(np.eye(2))
    b = tape.constant(np.full((2, 2), 2.0))
    assert ((a + b) - b).value.tolist() == np.eye(2).tolist()
    assert (a @ b).value.tolist() == b.value.tolist()


class TestErrors:
    def test_matmul_shape(self):
        tape = Tape()
        with pytest.raises(ShapeMismatch):
            matmul(tape.constant(np.ones((2, 3))), tape.constant(np.ones((2, 3))))

    def test_add_shape(self):
        tape = Tape()
        with pytest.raises(ShapeMismatch):
            add(tape.constant(np.ones((2, 3))), tape.constant(np.ones((2, 2))))

    def test_non_scalar_loss(self):
        tape = Tape()
        a = tape.param("a", np.ones((2, 2)))
        with pytest.raises(NonScalarLoss):
            tape.backward(a)

    def test_take_rows_range(self):
        tape = Tape()
        with pytest.raises(IndexOutOfRange):
            take_rows(tape.constant(np.ones((2, 2))), [2])
        with pytest.raises(IndexError):
            take_rows(tape.constant(np.ones((2, 2))), [-1])

    def test_slice_cols_range(self):
        tape = Tape()
        with pytest.raises(ShapeMismatch):
            slice_cols(tape.constant(np.ones((2, 2))), 1, 3)

    def test_mixed_tapes(self):
        with pytest.raises(ValueError):
            add(Tape().constant(1.0), Tape().constant(1.0))

    def test_as_matrix(self):
        assert as_matrix(3).shape == (1, 1)
        with pytest.raises(ValueError):
            as_matrix([[np.nan]])
        with pytest.raises(ShapeMismatch):
            as_matrix(np.ones((2, 2, 2)))

    def test_hierarchy(self):
        assert issubclass(ShapeMismatch, SpanParseError)
        assert issubclass(ShapeMismatch, ValueError)


class TestParameterContainer:
    def test_round_trip_is_exact(self, params):
        loaded = load_params(dump_params(params))
        assert list(loaded) == list(params)
        for name in params:
            assert loaded[name].tobytes() == params[name].tobytes()

    def test_layout(self):
        data = dump_params(Parameters([("ab", np.array([[1.5, -2.0]]))]))
        assert data[:5] == b"CSPN1"
        assert data[5:9] == (2).to_bytes(4, "little")
        assert data[9:11] == b"ab"
        assert len(data) == 5 + 4 + 2 + 8 + 16

    def test_bad_magic(self, params):
        data = bytearray(dump_params(params))
        data[0:5] = b"XXXX1"
        with pytest.raises(VersionError):
            load_params(bytes(data))

    def test_truncated(self, params):
        data = dump_params(params)
        with pytest.raises(VersionError):
            load_params(data[:-3])

    def test_copy_is_independent(self, params):
        copy = params.copy()
        copy["x"][0, 0] += 1.0
        assert copy["x"][0, 0] != params["x"][0, 0]
        assert copy.size() == params.size() == 12 + 18 + 6 + 6 + 6
