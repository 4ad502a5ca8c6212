import numpy as np
import pytest
import torch

from textgan import (
    Adam,
    SequenceAutoencoder,
    ae_train_step,
    build_vocab,
    encode_corpus,
    init_ae_params,
    one_hot,
    reconstruction_accuracy,
    reconstruction_loss,
)
from textgan.errors import ShapeError
from textgan.training import named_params


def _model(vocab_size=3, hidden=4, seed=0, dtype=torch.float32):
    model = SequenceAutoencoder(vocab_size, hidden, pad_id=0, dtype=dtype)
    init_ae_params(model, np.random.Generator(np.random.PCG64(seed)))
    return model


def _random_batch(batch, steps, vocab_size, seed=0, dtype=torch.float32):
    rng = np.random.Generator(np.random.PCG64(seed))
    ids = rng.integers(0, vocab_size, size=(batch, steps))
    return torch.as_tensor(one_hot(ids, vocab_size), dtype=dtype)


def test_encode_code_dimension():
    model = _model(vocab_size=5, hidden=512)
    x = _random_batch(2, 6, 5)
    assert model.encode(x).shape == (2, 512)


def test_encode_shape_error():
    model = _model(vocab_size=3)
    with pytest.raises(ShapeError):
        model.encode(_random_batch(2, 6, 4))


def test_zero_params_give_input_insensitive_code():
    model = _model(vocab_size=3, hidden=4)
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    codes = [model.encode(_random_batch(1, 5, 3, seed=s)) for s in range(4)]
    for c in codes[1:]:
        assert torch.equal(c, codes[0])
    assert torch.isfinite(codes[0]).all()


def test_distinct_inputs_give_distinct_codes():
    model = _model(vocab_size=4, hidden=8, seed=3)
    rng = np.random.Generator(np.random.PCG64(7))
    distinct = 0
    for _ in range(100):
        a_ids = rng.integers(0, 4, size=(1, 6))
        b_ids = rng.integers(0, 4, size=(1, 6))
        if (a_ids == b_ids).all():
            distinct += 1  # identical inputs are allowed to collide
            continue
        a = torch.as_tensor(one_hot(a_ids, 4))
        b = torch.as_tensor(one_hot(b_ids, 4))
        if not torch.equal(model.encode(a), model.encode(b)):
            distinct += 1
    assert distinct == 100


def test_decode_rows_are_distributions():
    model = _model(vocab_size=6, hidden=8, seed=1)
    code = model.encode(_random_batch(3, 7, 6, seed=2))
    probs = model.decode(code, steps=7)
    assert probs.shape == (3, 7, 6)
    sums = probs.sum(dim=-1)
    assert (sums - 1.0).abs().max() < 1e-5
    assert (probs >= 0).all()


def test_decode_saturated_output_head():
    # zeroed recurrent output plus a fixed +10/-10 bias saturates every row
    model = _model(vocab_size=2, hidden=4)
    with torch.no_grad():
        model.output_proj.weight.zero_()
        model.output_proj.bias.copy_(torch.tensor([10.0, -10.0]))
    probs = model.decode(torch.zeros(1, 4), steps=3)
    assert (probs[..., 0] > 0.999).all()
    assert (probs[..., 1] < 0.001).all()


def test_decode_deterministic():
    model = _model(vocab_size=4, hidden=8, seed=5)
    code = model.encode(_random_batch(2, 5, 4, seed=6))
    first = model.decode(code, steps=5)
    second = model.decode(code, steps=5)
    assert torch.equal(first, second)


def test_reconstruction_loss_values():
    x = torch.tensor([[[1.0, 0.0]]])
    assert reconstruction_loss(x, x).item() == 0.0
    x_tilde = torch.tensor([[[0.75, 0.25]]])
    assert reconstruction_loss(x, x_tilde).item() == pytest.approx(0.125)
    # single-example (T, V) form is accepted too
    assert reconstruction_loss(x[0], x_tilde[0]).item() == pytest.approx(0.125)


def test_reconstruction_loss_nonnegative_and_shape_check():
    rng = np.random.Generator(np.random.PCG64(0))
    for _ in range(20):
        a = torch.as_tensor(rng.uniform(size=(2, 3, 4)))
        b = torch.as_tensor(rng.uniform(size=(2, 3, 4)))
        assert reconstruction_loss(a, b).item() >= 0.0
    with pytest.raises(ShapeError):
        reconstruction_loss(torch.zeros(1, 2, 3), torch.zeros(1, 2, 4))


def test_train_step_zero_lr_keeps_params():
    model = _model(vocab_size=3, hidden=4, seed=2)
    opt = Adam(named_params(model, "ae"), lr=0.0, beta1=0.9, beta2=0.9)
    before = {k: p.detach().clone() for k, p in opt.params.items()}
    ae_train_step(_random_batch(4, 5, 3, seed=8), model, opt)
    for k, p in opt.params.items():
        assert torch.equal(p, before[k])


def test_train_step_reduces_loss_on_tiny_corpus():
    lines = ["abcabc", "bcabca", "cabcab", "aabbcc", "ccbbaa",
             "abccba", "baccab", "cbaabc", "acbbca", "bacacb"]
    vocab = build_vocab(lines, 10)
    ids = encode_corpus(lines, vocab, 8)
    batch = torch.as_tensor(one_hot(ids, vocab.size))
    model = SequenceAutoencoder(vocab.size, 16, pad_id=vocab.pad_id)
    init_ae_params(model, np.random.Generator(np.random.PCG64(0)))
    opt = Adam(named_params(model, "ae"), lr=1e-3, beta1=0.9, beta2=0.9)
    first = ae_train_step(batch, model, opt)
    last = first
    for _ in range(499):
        last = ae_train_step(batch, model, opt)
    assert last < first


def test_gradients_match_finite_differences():
    torch.set_num_threads(1)
    model = _model(vocab_size=3, hidden=4, seed=4, dtype=torch.float64)
    x = _random_batch(2, 2, 3, seed=9, dtype=torch.float64)
    params = dict(model.named_parameters())

    loss = reconstruction_loss(x, model.reconstruct(x))
    analytic = torch.autograd.grad(loss, list(params.values()))

    eps = 1e-5
    for (name, p), grad in zip(params.items(), analytic):
        flat = p.data.view(-1)
        fd = torch.zeros_like(flat)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + eps
            hi = reconstruction_loss(x, model.reconstruct(x)).item()
            flat[i] = orig - eps
            lo = reconstruction_loss(x, model.reconstruct(x)).item()
            flat[i] = orig
            fd[i] = (hi - lo) / (2 * eps)
        diff = (grad.reshape(-1) - fd).abs()
        scale = torch.maximum(grad.reshape(-1).abs(), fd.abs())
        # differences below the 1e-8 absolute floor count as agreement
        rel = torch.where(diff <= 1e-8, torch.zeros_like(diff), diff / scale)
        assert float(rel.max()) < 1e-4, f"gradient mismatch in {name}"


def test_reconstruction_accuracy_range():
    model = _model(vocab_size=4, hidden=8, seed=11)
    x = _random_batch(3, 6, 4, seed=12)
    acc = reconstruction_accuracy(model, x)
    assert 0.0 <= acc <= 1.0
