import pytest
from flint import arb, ctx


@pytest.fixture
def ball_equals():
    """``ball_equals(ball, exact_arb, prec)`` checks that ``ball`` contains the exact value and is tight."""

    def check(ball, expected, tight=2.0**-200):
        assert ball.contains(expected) or ball.overlaps(expected), (ball, expected)
        with ctx.workprec(300):
            assert abs(float((ball - expected).mid())) <= tight * max(1.0, abs(float(expected.mid())))
        return True

    return check



ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        ok, title, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
