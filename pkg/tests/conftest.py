from dataclasses import replace

import pytest

from wormhole_dtn import DetectorParams, ScenarioConfig, run_simulation


def small_config(protocol="epidemic", seed=1, duration=1800.0, pairs=2, legit=20, **kw):
    """A shrunken arena that still exercises contacts, tunnels and audits in seconds."""
    params = DetectorParams(audit_window=300.0, warmup=600.0)
    cfg = ScenarioConfig(
        area_width=900.0, area_height=700.0, num_legit_nodes=legit, num_wormhole_pairs=pairs,
        sim_duration=duration, routing_protocol=protocol, rng_seed=seed,
        legit_radio_range=25.0, wormhole_radio_range=150.0, detector_params=params,
    )
    return replace(cfg, **kw).validate()


_cache = {}


def run_small(protocol="epidemic", seed=1, **kw):
    key = (protocol, seed, tuple(sorted(kw.items())))
    if key not in _cache:
        _cache[key] = run_simulation(small_config(protocol, seed, **kw))
    return _cache[key]


@pytest.fixture(params=["epidemic", "firstcontact", "sprayandwait", "prophet"])
def protocol(request):
    return request.param


# one line per acceptance criterion, echoed after the run whatever the capture mode
VERDICTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[k])
