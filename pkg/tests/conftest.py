import pytest

from sonarcat import synth

ACCEPTANCE_LINES: list[str] = []


def report(criterion: str, ok: bool, detail: str, seconds: float):
    """Record one acceptance verdict; printed now and repeated in the terminal summary."""
    line = f"{criterion} {'PASS' if ok else 'FAIL'} ({seconds:.2f} s) {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


class SurveyCache:
    """Ten-target acceptance surveys, generated once per session."""

    def __init__(self, tmp_dir):
        self.tmp_dir = tmp_dir
        self._data = {}

    def __call__(self, seed):
        if seed not in self._data:
            sc = synth.acceptance_scenario(seed)
            pings, truth = synth.gen_survey(sc)
            self._data[seed] = (sc, pings, truth)
        return self._data[seed]

    def file(self, seed):
        path = self.tmp_dir / f"survey_{seed}.xtf"
        if not path.exists():
            sc, pings, truth = self(seed)
            synth.write_xtf(pings, path, sc, truth)
        return path


@pytest.fixture(scope="session")
def surveys(tmp_path_factory):
    return SurveyCache(tmp_path_factory.mktemp("acceptance"))
