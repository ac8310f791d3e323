import pytest

from fundus_trainer import RangeError, lr_at_epoch


class TestLrSchedule:
    def test_first_epoch_is_initial_rate(self):
        assert lr_at_epoch(0.001, 1) == 0.001

    def test_second_epoch(self):
        assert lr_at_epoch(0.001, 2) == 0.001 * 0.99

    def test_closed_form(self):
        assert lr_at_epoch(0.001, 11) == pytest.approx(9.04382e-4, rel=1e-5)

    def test_exact_to_float_rounding(self):
        for lr0 in (1e-4, 0.001, 0.3):
            for epoch in (1, 2, 11, 100, 5000, 10_000):
                assert lr_at_epoch(lr0, epoch) == lr0 * 0.99 ** (epoch - 1)

    def test_monotone_decreasing(self):
        values = [lr_at_epoch(0.01, t) for t in range(1, 200)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_range_errors(self):
        with pytest.raises(RangeError):
            lr_at_epoch(0.0, 1)
        with pytest.raises(RangeError):
            lr_at_epoch(0.001, 0)
