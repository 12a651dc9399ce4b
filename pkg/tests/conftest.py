import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE = {}


@pytest.fixture
def report():
    """Record one acceptance line: report(number, passed, detail)."""
    def _rec(number, passed, detail):
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}")
    return _rec


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'} | {detail}")


if os.environ.get("KERRCAVITY_NO_RECIPES"):
    # the property suites must not depend on any figure pipeline
    from kerrcavity import recipes

    def _blocked(cfg, ctx):
        raise RuntimeError("recipe execution is disabled for this session")

    recipes.run_recipe = _blocked


def pytest_collection_modifyitems(items):
    for item in items:
        fn = getattr(item, "obj", None)
        if getattr(fn, "is_hypothesis_test", False):
            item.add_marker(pytest.mark.property)
