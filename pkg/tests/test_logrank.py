"""Log-rank tests: hand-computed O-E/V arithmetic and invariances."""

import numpy as np
import pytest

from conftest import C, E, rec
from phasetip.errors import DataError, EstimationError
from phasetip.records import Arm
from phasetip.survival import logrank_test


class TestLogRankHandExamples:
    def test_identical_groups_give_chi2_zero(self):
        outcomes = [(1.0, 1), (2.0, 0), (3.0, 1), (7.0, 1)]
        records = [rec(f"e{i}", E, t, d) for i, (t, d) in enumerate(outcomes)]
        records += [rec(f"c{i}", C, t, d) for i, (t, d) in enumerate(outcomes)]
        res = logrank_test(records)
        assert res.chi2 == pytest.approx(0.0, abs=1e-12)
        assert res.p_two_sided == 1.0
        assert res.observed[Arm.EXPERIMENTAL] == pytest.approx(res.expected[Arm.EXPERIMENTAL])

    def test_four_subject_hand_arithmetic(self):
        # A (=experimental): events at 1 and 3; B (=control): event at 2, censored at 4.
        # t=1: nA=2 nB=2 d=1 (A) -> O=1, E=0.5,  V=0.25
        # t=2: nA=1 nB=2 d=1 (B) -> O=0, E=1/3,  V=2/9
        # t=3: nA=1 nB=1 d=1 (A) -> O=1, E=0.5,  V=0.25
        # chi2 = (2 - 4/3)^2 / (13/18) = 8/13
        records = [
            rec("a1", E, 1, 1), rec("a2", E, 3, 1),
            rec("b1", C, 2, 1), rec("b2", C, 4, 0),
        ]
        res = logrank_test(records)
        assert res.observed[Arm.EXPERIMENTAL] == pytest.approx(2.0, abs=1e-10)
        assert res.expected[Arm.EXPERIMENTAL] == pytest.approx(4 / 3, abs=1e-10)
        assert res.chi2 == pytest.approx(8 / 13, abs=1e-10)
        assert 0.0 < res.p_two_sided < 1.0

    def test_stratified_symmetric_pairs(self):
        records = []
        for st in (0, 1):
            scale = 1.0 + st
            records += [
                rec(f"e{st}a", E, 1 * scale, 1, stratum=st),
                rec(f"e{st}b", E, 3 * scale, 0, stratum=st),
                rec(f"c{st}a", C, 1 * scale, 1, stratum=st),
                rec(f"c{st}b", C, 3 * scale, 0, stratum=st),
            ]
        res = logrank_test(records, stratified=True)
        assert res.chi2 == pytest.approx(0.0, abs=1e-12)

    def test_zero_events_error(self):
        records = [rec("e", E, 1, 0), rec("c", C, 2, 0)]
        with pytest.raises(EstimationError, match="event"):
            logrank_test(records)

    def test_single_group_error(self):
        with pytest.raises(DataError, match="both arms"):
            logrank_test([rec("e1", E, 1, 1), rec("e2", E, 2, 1)])


class TestLogRankInvariances:
    def _random_records(self, rng, n=40):
        times = rng.exponential(8, n) + 0.05
        deltas = rng.integers(0, 2, n)
        arms = [E if rng.random() < 0.5 else C for _ in range(n)]
        if deltas.sum() == 0:
            deltas[0] = 1
        arms[0], arms[1] = E, C
        return [rec(i, a, t, d) for i, (a, t, d) in enumerate(zip(arms, times, deltas))]

    def test_invariant_under_id_relabeling(self):
        rng = np.random.default_rng(11)
        records = self._random_records(rng)
        relabeled = [
            rec(f"x{i}", r.arm, r.s, r.delta) for i, r in enumerate(reversed(records))
        ]
        assert logrank_test(records).chi2 == pytest.approx(
            logrank_test(relabeled).chi2, abs=1e-12
        )

    def test_invariant_under_time_rescaling(self):
        rng = np.random.default_rng(13)
        records = self._random_records(rng)
        for c in (0.25, 3.0, 17.5):
            scaled = [
                rec(r.subject_id, r.arm, c * r.s, r.delta, cutoff=c * r.cutoff)
                for r in records
            ]
            assert logrank_test(scaled).chi2 == pytest.approx(
                logrank_test(records).chi2, abs=1e-10
            )
