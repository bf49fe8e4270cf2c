import dataclasses

import pytest

from rodcav.scenarios import ScenarioConfig


def tiny_config(**overrides) -> ScenarioConfig:
    """Small, fast scenario used by driver and CLI tests: one ring of rods,
    coarse grid, short run.  Physics quality is irrelevant here; these runs
    exercise plumbing, formats and caching."""
    base = dict(
        rings=1,
        resolution=8,
        substrate_clearance=0.5,
        height=1.0,
        monitor_height=1.0,
        monitor_area=4.0,
        monitor_samples=21,
        decay_db=30.0,
        max_steps=800,
        pwe_waves=61,
        pwe_bands=4,
        pwe_ksamples=4,
        cache=False,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


@pytest.fixture(scope="session")
def tiny_cavity_result(tmp_path_factory):
    from rodcav.scenarios import run_cavity_scenario

    outdir = tmp_path_factory.mktemp("tiny-cavity")
    cfg = tiny_config(cache=True, output_dir=str(outdir))
    return cfg, run_cavity_scenario(cfg)
