import json

import pytest

from gearwatch.simulate import SynthConfig


@pytest.fixture
def tiny_sim() -> SynthConfig:
    """Two turbines, two short years. Enough rows to cluster, fast to make."""
    return SynthConfig(n_turbines=2, years=(2021, 2022), weeks_per_year=8)


def write_config(path, **kwargs) -> str:
    """Dump a config dict as JSON and return the file path as str."""
    path.write_text(json.dumps(kwargs))
    return str(path)
