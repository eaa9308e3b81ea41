import pytest

from edgesched.catalog import load_catalog
from edgesched.topology import deploy_workers, load_topology


def unit_world(base_delay_ms=30.0, capacity_qps=1000.0, batch_size=1,
               jitter_ms=0.0, path_mean=5.0, path_std=0.0, accuracy=50.0,
               uplink=50_000_000.0, access_delay=(2.0, 2.0), n_workers=1):
    """One cluster, one variant, `n_workers` replicas; everything deterministic."""
    catalog = load_catalog({
        "tasks": [{"id": "object-detection"}],
        "models": [{"id": "m", "task": "object-detection", "accuracy": accuracy}],
        "variants": [{"id": "v", "model": "m", "batch_size": batch_size,
                      "resources": [1, 1, 0], "max_input_size": 200_000,
                      "base_delay_ms": base_delay_ms,
                      "base_capacity_qps": capacity_qps,
                      "delay_jitter_ms": jitter_ms}],
    })
    topology = load_topology({
        "clusters": [{"id": "c0", "layer": "isp_dc",
                      "capacity": [n_workers, n_workers, 0]}],
        "sites": [{"id": "site-0"}],
        "paths": {"site-0": {"c0": [path_mean, path_std]}},
        "access_delay_ms": list(access_delay),
        "uplink_rate_bytes_s": uplink,
    })
    workers = deploy_workers(topology, catalog)
    assert len(workers) == n_workers
    return topology, catalog, workers


@pytest.fixture
def world():
    return unit_world()
