import random
import statistics

import pytest

from edgesched.catalog import default_catalog, load_catalog
from edgesched.topology import (
    Layer,
    PathStats,
    build_preset,
    deploy_workers,
    pessimistic_rtt,
    sample_network_delay,
)


class TestPresets:
    def test_dc_cloud_has_no_edge_compute(self):
        topo = build_preset("dc-cloud", 1, 0)
        layers = {c.layer for c in topo.clusters.values()}
        assert layers == {Layer.ISP_DC, Layer.CLOUD}
        assert all(s.colocated_cluster is None for s in topo.sites)

    def test_full_edge_colocates_access_clusters(self):
        topo = build_preset("full-edge", 2, 0)
        assert len(topo.sites) == 2
        for site in topo.sites:
            assert site.colocated_cluster is not None
            assert topo.clusters[site.colocated_cluster].layer is Layer.ACCESS

    def test_co_dc_cloud_layers(self):
        topo = build_preset("co-dc-cloud", 1, 0)
        layers = {c.layer for c in topo.clusters.values()}
        assert layers == {Layer.CENTRAL_OFFICE, Layer.ISP_DC, Layer.CLOUD}

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            build_preset("mesh-42", 1)

    def test_deterministic(self):
        a = build_preset("full-edge", 3, 12)
        b = build_preset("full-edge", 3, 12)
        assert a.paths == b.paths
        assert list(a.clusters) == list(b.clusters)

    def test_latency_ordering(self):
        topo = build_preset("full-edge", 1, 5)
        site = topo.sites[0].id
        means = {c.layer: topo.path(site, c.id).mean_delay for c in topo.clusters.values()}
        assert means[Layer.ACCESS] < means[Layer.CENTRAL_OFFICE] < means[Layer.CLOUD]

    def test_path_matrix_complete(self):
        topo = build_preset("co-dc-cloud", 4, 3)
        for site in topo.sites:
            for cid in topo.clusters:
                assert topo.path(site.id, cid) is not None


class TestSampleNetworkDelay:
    def test_degenerate(self):
        rng = random.Random(0)
        p = PathStats(10.0, 0.0)
        assert all(sample_network_delay(p, rng) == 10.0 for _ in range(100))

    def test_zero_path(self):
        rng = random.Random(0)
        assert sample_network_delay(PathStats(0.0, 0.0), rng) == 0.0

    def test_sample_mean(self):
        rng = random.Random(1234)
        p = PathStats(10.0, 2.0)
        xs = [sample_network_delay(p, rng) for _ in range(100_000)]
        assert statistics.fmean(xs) == pytest.approx(10.0, rel=0.01)
        assert min(xs) >= 0.0


class TestPessimisticRtt:
    def test_direct_evaluation(self):
        # 2 * (2 + 5 + 2*1)
        assert pessimistic_rtt(PathStats(5.0, 1.0), 2.0) == 18.0

    def test_zero(self):
        assert pessimistic_rtt(PathStats(0.0, 0.0), 0.0) == 0.0

    def test_round_trip_doubling(self):
        assert pessimistic_rtt(PathStats(10.0, 0.0), 0.0) == 20.0


def single_variant_catalog(cpu=1.0, mem=1.0, accel=0.0):
    return load_catalog({
        "tasks": [{"id": "t"}],
        "models": [{"id": "m", "task": "t", "accuracy": 50}],
        "variants": [{"id": "v", "model": "m", "batch_size": 1,
                      "resources": [cpu, mem, accel], "max_input_size": 100,
                      "base_delay_ms": 10, "base_capacity_qps": 10}],
    })


def topo_with_capacity(cpu, mem=100.0, accel=100.0):
    doc = {
        "clusters": [{"id": "c0", "layer": "isp_dc", "capacity": [cpu, mem, accel]}],
        "sites": [{"id": "s0"}],
        "paths": {"s0": {"c0": [5.0, 1.0]}},
    }
    from edgesched.topology import load_topology
    return load_topology(doc)


class TestDeployWorkers:
    def test_exact_fit_single_worker(self):
        workers = deploy_workers(topo_with_capacity(1.0), single_variant_catalog(cpu=1.0))
        assert len(workers) == 1

    def test_floor_of_ratio(self):
        workers = deploy_workers(topo_with_capacity(2.5), single_variant_catalog(cpu=1.0))
        assert len(workers) == 2

    def test_zero_capacity(self):
        workers = deploy_workers(topo_with_capacity(0.0), single_variant_catalog(cpu=1.0))
        assert workers == []

    def test_resource_feasibility(self):
        topo = build_preset("full-edge", 2, 1)
        workers = deploy_workers(topo, default_catalog())
        per_cluster: dict[str, list] = {}
        for w in workers:
            per_cluster.setdefault(w.cluster.id, []).append(w)
        for cid, ws in per_cluster.items():
            cluster = topo.clusters[cid]
            if cluster.unlimited:
                continue
            totals = [0.0] * len(cluster.capacity)
            for w in ws:
                for i, r in enumerate(w.variant.resource_demand.components):
                    totals[i] += r
            for got, cap in zip(totals, cluster.capacity.components):
                assert got <= cap + 1e-9

    def test_deterministic(self):
        topo = build_preset("co-dc-cloud", 1, 2)
        cat = default_catalog()
        a = [(w.id, w.variant.id, w.cluster.id) for w in deploy_workers(topo, cat)]
        b = [(w.id, w.variant.id, w.cluster.id) for w in deploy_workers(topo, cat)]
        assert a == b
