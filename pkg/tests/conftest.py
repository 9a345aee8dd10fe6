"""Shared, session-cached runs.  The acceptance runs live in test_acceptance.py."""
from dataclasses import dataclass

import pytest

from rswshock.diagnostics import MonitorConfig, RunMonitor
from rswshock.pulsegen import (emit_initial_state, generation_report, predict_blowup, pulse_domain,
                               resolve_pulse, standard_pulse)
from rswshock.rswsolver import RunResult, SolverConfig, run


@dataclass
class PulseRun:
    spec: object
    data: object
    report: dict
    result: RunResult
    monitor: RunMonitor

    @property
    def T_pred(self):
        return predict_blowup(self.data, self.spec)


def pulse_run(n1=1024, n2=16, delta=0.05, record_every=20, **solver) -> PulseRun:
    spec = standard_pulse(delta)
    data = resolve_pulse(spec)
    g = pulse_domain(delta, n1, n2, comoving=True)
    s0 = emit_initial_state(data, spec, g)
    rep = generation_report(data, spec, s0)
    T = predict_blowup(data, spec)
    mon = RunMonitor(MonitorConfig(delta=delta, record_every=record_every, n_u=32, n_theta=8,
                                   particle_range=(1 - delta, 1 + T)))
    cfg = SolverConfig(t_end=1.5 * T, window="comoving", **solver)
    res = run(s0, cfg, monitor=mon, log=None)
    return PulseRun(spec, data, rep, res, mon)


@pytest.fixture(scope="session")
def small_pulse():
    return pulse_run()


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
