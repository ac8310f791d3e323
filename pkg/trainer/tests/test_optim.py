import copy

import pytest
import torch

from fundus_trainer import EmptyBatch, accumulated_step


def mse_loss(model, batch):
    inputs, targets = batch
    return torch.nn.functional.mse_loss(model(inputs), targets)


def make_linear_problem(n, d, seed):
    torch.manual_seed(seed)
    model = torch.nn.Linear(d, 1)
    inputs = torch.randn(n, d)
    targets = torch.randn(n, 1)
    return model, inputs, targets


def gradients_of(model, micro_batches):
    model.zero_grad(set_to_none=True)
    scale = 1.0 / len(micro_batches)
    for batch in micro_batches:
        (mse_loss(model, batch) * scale).backward()
    return [p.grad.clone() for p in model.parameters()]


def relative_gap(got, want):
    return ((got - want).norm() / want.norm().clamp_min(1e-30)).item()


class TestAccumulatedGradients:
    @pytest.mark.parametrize("accumulation", [2, 15])
    def test_matches_full_batch_gradient(self, accumulation):
        model, inputs, targets = make_linear_problem(accumulation, 7, seed=1)
        singles = [(inputs[i:i + 1], targets[i:i + 1]) for i in range(accumulation)]
        accumulated = gradients_of(model, singles)
        full = gradients_of(model, [(inputs, targets)])
        for a, f in zip(accumulated, full):
            assert relative_gap(a, f) <= 1e-6

    def test_identical_micro_batches_equal_single(self):
        model, inputs, targets = make_linear_problem(4, 3, seed=2)
        batch = (inputs, targets)
        repeated = gradients_of(model, [batch] * 5)
        single = gradients_of(model, [batch])
        for a, b in zip(repeated, single):
            assert relative_gap(a, b) <= 1e-6


class TestAccumulatedStep:
    def test_single_window_is_plain_step(self):
        model_a, inputs, targets = make_linear_problem(6, 4, seed=3)
        model_b = copy.deepcopy(model_a)
        opt_a = torch.optim.Adam(model_a.parameters(), lr=1e-3)
        opt_b = torch.optim.Adam(model_b.parameters(), lr=1e-3)
        accumulated_step(model_a, [(inputs, targets)], opt_a, mse_loss)
        opt_b.zero_grad()
        mse_loss(model_b, (inputs, targets)).backward()
        opt_b.step()
        for a, b in zip(model_a.parameters(), model_b.parameters()):
            assert torch.equal(a, b)

    def test_returns_mean_loss(self):
        model, inputs, targets = make_linear_problem(10, 4, seed=4)
        with torch.no_grad():
            expected = mse_loss(model, (inputs, targets)).item()
        singles = [(inputs[i:i + 1], targets[i:i + 1]) for i in range(10)]
        optimizer = torch.optim.SGD(model.parameters(), lr=0.0)
        got = accumulated_step(model, singles, optimizer, mse_loss)
        assert got == pytest.approx(expected, rel=1e-5)

    def test_empty_window(self):
        model, _, _ = make_linear_problem(2, 2, seed=5)
        optimizer = torch.optim.Adam(model.parameters())
        with pytest.raises(EmptyBatch):
            accumulated_step(model, [], optimizer, mse_loss)
