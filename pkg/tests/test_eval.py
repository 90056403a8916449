import math

import numpy as np
import pytest
from scipy import stats

from bbgamma.eval import (Z_CRITICAL, ContingencyPair, error_percent, mcnemar_z, pooled_mcnemar,
                          zero_one_total)


class TestErrors:
    def test_counts(self):
        assert zero_one_total([1, 0, 1, 1], [1, 1, 0, 1]) == 2
        assert error_percent([1, 0, 1, 1], [1, 1, 0, 1]) == 50.0

    def test_identity(self, rng):
        y = rng.integers(0, 2, 37)
        p = rng.integers(0, 2, 37)
        assert error_percent(p, y) == pytest.approx(100 * zero_one_total(p, y) / 37, rel=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            zero_one_total([1, 0], [1])

    def test_empty(self):
        with pytest.raises(ValueError):
            error_percent([], [])


class TestContingency:
    def test_from_predictions(self):
        y = np.array([1, 1, 0, 0, 1])
        a = np.array([0, 1, 0, 1, 0])  # wrong on 0, 3, 4
        b = np.array([1, 0, 0, 1, 1])  # wrong on 1, 3
        pair = ContingencyPair.from_predictions(a, b, y)
        assert (pair.n01, pair.n10) == (2, 1)

    def test_negative(self):
        with pytest.raises(ValueError):
            ContingencyPair(-1, 2)


class TestMcNemar:
    def test_worked_example(self):
        res = mcnemar_z(ContingencyPair(10, 2))
        assert res.z == pytest.approx(7 / math.sqrt(12), rel=1e-15)
        assert res.z == pytest.approx(2.0207, abs=1e-4)
        assert not res.significant

    def test_symmetric(self, rng):
        for n01, n10 in rng.integers(0, 40, size=(20, 2)):
            assert mcnemar_z(ContingencyPair(n01, n10)).z == mcnemar_z(ContingencyPair(n10, n01)).z

    def test_threshold(self):
        assert Z_CRITICAL == 2.32
        # (|n01 - n10| - 1) / sqrt(n01 + n10) = 2.32 exactly is not reachable, check either side
        assert mcnemar_z(ContingencyPair(20, 5)).significant  # 14/5 = 2.8
        assert not mcnemar_z(ContingencyPair(9, 2)).significant  # 6/sqrt(11) = 1.81

    def test_zero_discordance_flagged(self):
        res = mcnemar_z(ContingencyPair(0, 0))
        assert not res.defined and not res.significant and res.z == 0.0

    def test_matches_scipy_normal_tail(self):
        # the statistic is a continuity-corrected normal approximation to the sign test
        res = mcnemar_z(ContingencyPair(30, 12))
        p = stats.norm.sf(res.z)
        assert p == pytest.approx(stats.norm.sf((18 - 1) / math.sqrt(42)), rel=1e-14)


class TestPooled:
    def test_example(self):
        res = pooled_mcnemar([ContingencyPair(3, 1), ContingencyPair(7, 1)])
        assert res.z == mcnemar_z(ContingencyPair(10, 2)).z

    def test_is_sum_then_test(self, rng):
        pairs = [ContingencyPair(*map(int, rng.integers(0, 9, 2))) for _ in range(12)]
        total = ContingencyPair(sum(p.n01 for p in pairs), sum(p.n10 for p in pairs))
        assert pooled_mcnemar(pairs) == mcnemar_z(total)

    def test_empty(self):
        with pytest.raises(ValueError):
            pooled_mcnemar([])
