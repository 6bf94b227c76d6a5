from censored_lab.selftest import SUITE, run_suite


def test_every_oracle_passes():
    checks = run_suite()
    assert len(checks) == len(SUITE)
    failed = [c.name for c in checks if not c.passed]
    assert not failed


def test_selection():
    assert [c.name for c in run_suite(lambda n: n.startswith("torsion"))] == ["torsion n=1", "torsion n=2"]
