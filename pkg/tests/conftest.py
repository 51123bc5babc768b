from __future__ import annotations
import pytest

from tunable_magnet.hysteresis import HysteresisModel

from .oracles import HysteronGrid

_ACCEPTANCE: list[tuple[str, str, str, str]] = []


@pytest.fixture(scope="session")
def model() -> HysteresisModel:
    return HysteresisModel.analytic()


@pytest.fixture(scope="session")
def table_model(model: HysteresisModel) -> HysteresisModel:
    return model.tabulate(101)


@pytest.fixture(scope="session")
def oracle(model: HysteresisModel) -> HysteronGrid:
    surface = model.surface
    return HysteronGrid(surface.density, model.h_sat, model.chi_rev, n_nodes=2001)


def pytest_runtest_logreport(report: pytest.TestReport) -> None:
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    outcome = "PASS" if report.passed else "FAIL"
    _ACCEPTANCE.append((props["criterion"], outcome, props.get("title", ""), props.get("detail", "")))


def pytest_terminal_summary(terminalreporter, exitstatus, config) -> None:  # type: ignore[no-untyped-def]
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, outcome, title, detail in sorted(_ACCEPTANCE, key=lambda r: int(r[0].split("-")[1])):
        terminalreporter.write_line(f"{cid} {outcome}: {title}" + (f" ({detail})" if detail else ""))
