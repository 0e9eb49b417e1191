import math

import pytest

import injcert.cli
import injcert.mountainpass as mp

# every trace produced anywhere in the suite is checked against
# |quotient_k| <= g_k / sqrt(J_k)
KEY4_LOG = {"records": 0, "violations": []}


def key4_violations(trace):
    bad = []
    for r in trace:
        if r.J > mp.J_FLOOR and r.rayleigh is not None:
            KEY4_LOG["records"] += 1
            if abs(r.rayleigh) > r.g / math.sqrt(r.J) * (1 + 1e-9):
                bad.append((r.k, r.rayleigh, r.g, r.J))
    return bad


@pytest.fixture(autouse=True)
def _watch_traces(monkeypatch):
    original = mp.deform
    found = []

    def watched(*args, **kwargs):
        out = original(*args, **kwargs)
        found.extend(key4_violations(out.trace))
        return out

    monkeypatch.setattr(mp, "deform", watched)
    monkeypatch.setattr(injcert.cli, "deform", watched)
    yield
    KEY4_LOG["violations"].extend(found)
    assert not found, f"Cauchy-Schwarz bound violated on a trace: {found[:3]}"
