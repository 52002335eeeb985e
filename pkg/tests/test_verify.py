from udgnn.verify import (
    THEOREM1_TOL,
    THEOREM2_TOL,
    verify_theorem1,
    verify_theorem2,
)


class TestTheorem1:
    def test_passes_at_tolerance(self):
        result = verify_theorem1(trials=32, seed=0)
        assert result.trials == 32
        assert result.passed(THEOREM1_TOL)

    def test_corrupt_negative_control(self):
        # the injected offset must be caught, proving the check has teeth
        result = verify_theorem1(trials=8, seed=0, corrupt=True)
        assert not result.passed(THEOREM1_TOL)

    def test_deterministic(self):
        a = verify_theorem1(trials=8, seed=5)
        b = verify_theorem1(trials=8, seed=5)
        assert a.max_deviation == b.max_deviation
        assert a.worst_instance == b.worst_instance


class TestTheorem2:
    def test_passes_at_tolerance(self):
        result = verify_theorem2(trials=32, seed=0)
        assert result.passed(THEOREM2_TOL)

    def test_corrupt_negative_control(self):
        result = verify_theorem2(trials=8, seed=0, corrupt=True)
        assert not result.passed(THEOREM2_TOL)
