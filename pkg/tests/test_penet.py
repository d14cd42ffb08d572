import numpy as np
import pytest

from petqst.errors import GraphNotBuilt, InvalidConfig, ShapeMismatch
from petqst.numerics import make_rng
from petqst.penet import (
    Adam,
    Dropout,
    GridEncode,
    GridReadout,
    Linear,
    MSELoss,
    PELinear,
    ReLU,
    Sequential,
    TrainHyper,
    adam_step,
    build_model,
    default_config,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from petqst.penet.checkpoint import checkpoint_bytes, read_header
from petqst.penet.models import ModelConfig
from petqst.errors import FormatError

from checks import equivariance_deviation, gradient_errors, pe_stack

TOL = 1e-4


def assert_gradients(module, x, seed=0):
    errors = gradient_errors(module, x, np.random.default_rng(seed))
    bad = {k: v for k, v in errors.items() if v >= TOL}
    assert not bad, bad


# -- gradients -----------------------------------------------------------------


def test_linear_gradients():
    rng = np.random.default_rng(0)
    assert_gradients(Linear(5, 3, make_rng(0)), rng.normal(size=(4, 5)))


@pytest.mark.parametrize("c, d, n", [(1, 1, 2), (2, 3, 4), (3, 2, 8)])
def test_pelinear_gradients(c, d, n):
    rng = np.random.default_rng(n)
    assert_gradients(PELinear(c, d, make_rng(c + d)), rng.normal(size=(2, n, n, c)))


def test_relu_and_readout_gradients():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(3, 6))
    x[np.abs(x) < 1e-3] = 0.5
    assert_gradients(ReLU(), x)
    assert_gradients(GridReadout(), rng.normal(size=(2, 4, 4, 2)))


def test_dropout_gradient_uses_mask():
    layer = Dropout(0.5, make_rng(0))
    x = np.ones((4, 10))
    y = layer.forward(x)
    assert np.array_equal(layer.backward(np.ones_like(x)), y)


@pytest.mark.parametrize("family, task", [("mlp", "tomography"), ("pemlp", "tomography"), ("pemlp", "purity")])
def test_model_gradients(family, task):
    model = build_model(ModelConfig(task, 1, family, hidden=(3, 3)), seed=2)
    x = np.random.default_rng(2).uniform(size=(3, 4))
    errors = gradient_errors(model.net, x, np.random.default_rng(3), check_input=False)
    assert max(errors.values()) < TOL, errors


def test_linear_mse_analytic_gradient():
    layer = Linear(3, 1, make_rng(0))
    x = np.array([[0.5, -1.0, 2.0]])
    t = np.array([[0.3]])
    loss = MSELoss()
    pred = layer.forward(x)
    loss(pred, t)
    layer.zero_grad()
    layer.backward(loss.backward())
    assert np.allclose(layer.weight.grad, 2 * (pred - t) * x)
    assert np.allclose(layer.bias.grad, 2 * (pred - t)[0])


def test_zero_loss_gives_zero_gradients():
    model = build_model(default_config("tomography", "mlp", 1), seed=0)
    x = np.random.default_rng(0).uniform(size=(2, 4))
    y = model.forward(x)
    loss = MSELoss()
    model.net.zero_grad()
    loss(model.forward(x), y)
    model.backward(loss.backward())
    assert all(np.all(p.grad == 0) for p in model.params())


def test_backward_before_forward():
    with pytest.raises(GraphNotBuilt):
        Linear(2, 2, make_rng(0)).backward(np.zeros((1, 2)))
    with pytest.raises(GraphNotBuilt):
        MSELoss().backward()


# -- equivariant layer --------------------------------------------------------


def test_identity_configuration():
    layer = PELinear(2, 2, make_rng(0))
    layer.weight.value[...] = 0
    layer.weight.value[0] = np.eye(2)
    layer.bias_all.value[...] = 0
    layer.bias_diag.value[...] = 0
    x = np.random.default_rng(0).normal(size=(3, 4, 4, 2))
    assert np.allclose(layer.forward(x), x)


def test_trace_term_broadcasts():
    layer = PELinear(1, 1, make_rng(0))
    layer.weight.value[...] = 0
    layer.weight.value[7] = 1.0
    layer.bias_all.value[...] = 0
    layer.bias_diag.value[...] = 0
    x = np.random.default_rng(1).normal(size=(1, 4, 4, 1))
    tau = np.trace(x[0, :, :, 0])
    assert np.allclose(layer.forward(x), tau)


def test_pelinear_against_elementwise_definition():
    """Compare the vectorised forward with a literal loop over (i, j)."""
    layer = PELinear(2, 3, make_rng(4))
    x = np.random.default_rng(4).normal(size=(1, 3, 3, 2))
    w = layer.weight.value
    X = x[0]
    n = 3
    row, col = X.sum(axis=1), X.sum(axis=0)
    total, trace = X.sum(axis=(0, 1)), sum(X[k, k] for k in range(n))
    ref = np.zeros((n, n, 3))
    for i in range(n):
        for j in range(n):
            v = (
                X[i, j] @ w[0] + X[j, i] @ w[1] + row[i] @ w[2] + col[i] @ w[3] + col[j] @ w[4]
                + row[j] @ w[5] + total @ w[6] + trace @ w[7] + X[i, i] @ w[8] + X[j, j] @ w[9]
                + layer.bias_all.value
            )
            if i == j:
                v = v + X[i, i] @ w[10] + trace @ w[11] + total @ w[12] + row[i] @ w[13] + col[i] @ w[14]
                v = v + layer.bias_diag.value
            ref[i, j] = v
    assert np.allclose(layer.forward(x)[0], ref, atol=1e-12)


@pytest.mark.parametrize("n_qubits", [1, 2, 4])
def test_equivariance(n_qubits):
    net = pe_stack([2, 4, 3, 2], seed=n_qubits)
    assert equivariance_deviation(net, 2**n_qubits, 2, trials=25, seed=n_qubits) < 1e-10


def test_pelinear_shape_check():
    with pytest.raises(ShapeMismatch):
        PELinear(2, 2, make_rng(0)).forward(np.zeros((1, 3, 4, 2)))


# -- dropout, optimiser --------------------------------------------------------


def test_dropout_keep_rate():
    p = 0.5
    layer = Dropout(p, make_rng(0))
    y = layer.forward(np.ones((100, 100)))
    kept = np.count_nonzero(y)
    n = y.size
    assert abs(kept - n * (1 - p)) < 4 * np.sqrt(n * p * (1 - p))
    assert np.all((y == 0) | (y == 2.0))
    layer.eval()
    x = np.ones((3, 3))
    assert np.array_equal(layer.forward(x), x)


def test_adam_zero_gradient():
    layer = Linear(2, 2, make_rng(0))
    before = [p.value.copy() for p in layer.params()]
    adam_step(layer.params(), lr=0.1)
    assert all(np.array_equal(a, p.value) for a, p in zip(before, layer.params()))


def test_adam_first_step_is_sign_scaled():
    layer = Linear(2, 2, make_rng(0))
    before = layer.weight.value.copy()
    g = np.array([[0.5, -2.0], [1e-3, -7.0]])
    layer.weight.grad[...] = g
    adam_step(layer.params(), lr=0.01)
    assert np.allclose(layer.weight.value - before, -0.01 * np.sign(g), rtol=1e-4)


def test_adam_second_moment_positive():
    layer = Linear(2, 2, make_rng(0))
    layer.weight.grad[...] = 0.3
    state = adam_step(layer.params(), lr=0.01)
    adam_step(layer.params(), state, lr=0.01)
    assert state.step_count == 2
    assert np.all(state.v[0] > 0)


def test_adam_matches_reference_recurrence():
    layer = Linear(1, 1, make_rng(0))
    opt = Adam(layer.params(), lr=0.1)
    w = layer.weight.value.item()
    m = v = 0.0
    for t, g in enumerate([0.3, -0.2, 0.5], start=1):
        layer.weight.grad[...] = g
        opt.step()
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        w -= 0.1 * (m / (1 - 0.9**t)) / (np.sqrt(v / (1 - 0.999**t)) + 1e-8)
    assert layer.weight.value.item() == pytest.approx(w, abs=1e-15)


# -- models --------------------------------------------------------------------


@pytest.mark.parametrize(
    "task, family, n, expected",
    [
        ("tomography", "mlp", 2, 2128),
        ("purity", "mlp", 2, 1633),
        ("tomography", "pemlp", 2, 3972),
        ("purity", "pemlp", 2, 3989),
        ("tomography", "combined", 4, 295_748),
        ("purity", "combined", 4, 164_933),
    ],
)
def test_parameter_counts(task, family, n, expected):
    assert build_model(default_config(task, family, n)).n_params() == expected


def test_config_validation():
    with pytest.raises(InvalidConfig):
        ModelConfig("tomography", 2, "mlp", hidden=()).validate()
    with pytest.raises(InvalidConfig):
        ModelConfig("denoise", 2, "mlp", hidden=(4,)).validate()
    with pytest.raises(InvalidConfig):
        ModelConfig("tomography", 2, "mlp", hidden=(4,), dense=(8,)).validate()
    with pytest.raises(InvalidConfig):
        default_config("tomography", "cnn", 2)


def test_untrained_output_is_pinned():
    x = np.linspace(0, 1, 16)[None]
    mlp = build_model(default_config("tomography", "mlp", 2), seed=3)
    pe = build_model(default_config("tomography", "pemlp", 2), seed=3)
    assert predict(mlp, x)[0, :4].tolist() == [
        0.09951132798214407, 0.2665388829667763, 0.011080867252292015, -0.03101539025392249,
    ]
    assert predict(pe, x)[0, :4].tolist() == [
        -4.132980379901143, -3.9938195759299457, -3.9025925496756644, -3.7833803105379182,
    ]


def test_predict_batches_preserve_order(small_dataset):
    model = build_model(default_config("tomography", "pemlp", 2), seed=0)
    x = small_dataset.inputs[:50]
    full = predict(model, x)
    assert np.allclose(predict(model, x, batch_size=7), full, atol=1e-13)
    assert np.allclose(predict(model, x[10]), full[10:11], atol=1e-13)
    grids = GridEncode().forward(x)
    assert np.allclose(predict(model, grids), full, atol=1e-13)
    with pytest.raises(ShapeMismatch):
        predict(model, np.zeros(15))


def test_overfit_single_sample(small_dataset):
    model = build_model(default_config("tomography", "mlp", 2), seed=0)
    x, y = small_dataset.inputs[:1], small_dataset.targets[:1]
    result = train(model, x, y, hyper=TrainHyper(epochs=200, batch_size=1, lr=1e-2, seed=0))
    assert result.train_loss[-1] < 1e-4


def test_training_reduces_loss(small_dataset):
    ds = small_dataset
    model = build_model(default_config("tomography", "pemlp", 2), seed=1)
    result = train(model, ds.inputs, ds.targets, ds.inputs[:20], ds.targets[:20], TrainHyper(epochs=5, lr=1e-3))
    assert result.train_loss[-1] < result.train_loss[0]
    assert np.isfinite(result.val_loss).all()


def test_training_is_deterministic(small_dataset):
    ds = small_dataset

    def run():
        model = build_model(default_config("purity", "mlp", 2), seed=5)
        train(model, ds.inputs, ds.purity, hyper=TrainHyper(epochs=2, seed=5))
        return checkpoint_bytes(model)

    assert run() == run()


def test_checkpoint_round_trip(tmp_path, small_dataset):
    model = build_model(default_config("purity", "pemlp", 2), seed=4)
    model.meta = {"split_seed": 3}
    path = save_checkpoint(model, tmp_path / "m.tqm")
    loaded = load_checkpoint(path)
    assert loaded.config == model.config
    assert loaded.meta == {"split_seed": 3}
    assert read_header(path)["n_params"] == 3989
    x = small_dataset.inputs[:8]
    assert np.array_equal(predict(loaded, x), predict(model, x))
    assert checkpoint_bytes(loaded) == path.read_bytes()


def test_checkpoint_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.tqm"
    bad.write_bytes(b"NOTAMODEL" + bytes(20))
    with pytest.raises(FormatError):
        load_checkpoint(bad)
    model = build_model(default_config("tomography", "mlp", 1))
    raw = checkpoint_bytes(model)
    bad.write_bytes(raw[:-8])
    with pytest.raises(FormatError):
        load_checkpoint(bad)
