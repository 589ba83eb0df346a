"""Suite-wide configuration.

Tests in test_acceptance.py carry a ``criterion(num)`` marker; after the
run one PASSED/FAILED line per criterion is printed so the gate can be
read off the terminal directly.
"""

from hypothesis import HealthCheck, settings

settings.register_profile(
    "suite", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("suite")


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(num): numbered acceptance criterion covered by this test"
    )
    config._criterion_map = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            config._criterion_map[item.nodeid] = int(mark.args[0])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mapping = getattr(config, "_criterion_map", {})
    if not mapping:
        return
    verdicts = {}
    for category in ("passed", "failed", "error", "skipped"):
        for report in terminalreporter.stats.get(category, []):
            num = mapping.get(getattr(report, "nodeid", None))
            if num is None:
                continue
            ok = category == "passed" and verdicts.get(num, True)
            verdicts[num] = ok
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(verdicts):
        verdict = "PASSED" if verdicts[num] else "FAILED"
        terminalreporter.write_line(f"ACCEPTANCE criterion {num}: {verdict}")
