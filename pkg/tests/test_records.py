import pytest

from conftest import C, E, rec
from phasetip.errors import DataError
from phasetip.records import Arm, CountingProcessRow


class TestSubjectRecord:
    def test_valid_record(self):
        r = rec("s1", E, 10.0, 1, cutoff=30.0, mono=6.0)
        assert r.trt == 1
        assert r.mono_duration == 4.0

    def test_mono_duration_without_transition(self):
        assert rec("s1", C, 8.0, 0).mono_duration == 0.0

    def test_delta_must_be_binary(self):
        with pytest.raises(DataError, match="delta"):
            rec("s1", E, 10.0, 2)

    def test_s_must_be_positive(self):
        with pytest.raises(DataError, match="positive"):
            rec("s1", E, 0.0, 1)

    def test_cutoff_before_s_rejected(self):
        with pytest.raises(DataError, match="cutoff"):
            rec("s1", E, 31.0, 1, cutoff=30.0)

    def test_mono_start_beyond_s_rejected(self):
        with pytest.raises(DataError, match="phase time exceeds follow-up"):
            rec("s1", E, 10.0, 1, mono=12.0)

    def test_mono_start_equal_s_allowed(self):
        r = rec("s1", E, 10.0, 1, mono=10.0)
        assert r.mono_start == 10.0

    def test_with_outcome_extends_cutoff(self):
        r = rec("s1", C, 10.0, 1, cutoff=12.0)
        out = r.with_outcome(15.0, 0)
        assert out.s == 15.0
        assert out.delta == 0
        assert out.cutoff == 15.0

    def test_with_outcome_keeps_cutoff_when_inside(self):
        r = rec("s1", C, 10.0, 1, cutoff=30.0)
        assert r.with_outcome(12.0, 1).cutoff == 30.0


class TestArm:
    def test_codes_round_trip(self):
        assert Arm.from_code("E") is E
        assert Arm.from_code("c") is C
        assert E.code == "E" and C.code == "C"

    def test_unknown_code(self):
        with pytest.raises(DataError, match="arm"):
            Arm.from_code("X")


class TestCountingProcessRow:
    def test_empty_interval_rejected(self):
        with pytest.raises(DataError, match="empty"):
            CountingProcessRow("s1", 5.0, 5.0, 1, 1, 0, 0)

    def test_interaction_consistency(self):
        with pytest.raises(DataError, match="trt_x_mono"):
            CountingProcessRow("s1", 0.0, 5.0, 1, 1, 1, 0)

    def test_covariate_lookup(self):
        row = CountingProcessRow("s1", 0.0, 5.0, 1, 1, 1, 1)
        assert row.covariate("trt") == 1
        assert row.covariate("trt_x_mono") == 1
