"""Hierarchical edge-cloud infrastructure: clusters, network paths, workers.

Three bundled presets mirror the layer structure of a tiered operator
network (access -> central office -> operator DC -> remote cloud).  Real
operator sizes and latencies are confidential, so preset numbers are
order-of-magnitude synthetic analogues; at scale=1 they are deliberately
small so a full comparison experiment fits on a laptop.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field

from .catalog import Catalog, ResourceVector, VariantSpec

PRESET_NAMES = ("dc-cloud", "co-dc-cloud", "full-edge")

# Replica cap per variant on unlimited (cloud) clusters, to keep the worker
# set finite.
CLOUD_REPLICA_CAP = 32


class Layer(enum.Enum):
    ACCESS = "access"
    CENTRAL_OFFICE = "central_office"
    ISP_DC = "isp_dc"
    CLOUD = "cloud"


@dataclass(frozen=True)
class ClusterSpec:
    id: str
    layer: Layer
    capacity: ResourceVector
    unlimited: bool = False

    def __post_init__(self):
        if self.unlimited and self.layer is not Layer.CLOUD:
            raise ValueError(f"cluster {self.id}: only cloud clusters may be unlimited")


@dataclass(frozen=True)
class PathStats:
    """One-way network delay statistics (ms) between a scheduler site and a cluster."""

    mean_delay: float
    delay_std: float

    def __post_init__(self):
        if self.mean_delay < 0 or self.delay_std < 0:
            raise ValueError("path statistics must be nonnegative")


@dataclass(frozen=True)
class SchedulerSite:
    """A stream entry point; co-located with an access cluster when one exists."""

    id: str
    colocated_cluster: str | None = None


@dataclass
class Topology:
    clusters: dict[str, ClusterSpec]
    sites: list[SchedulerSite]
    paths: dict[tuple[str, str], PathStats]  # (site id, cluster id) -> stats
    access_delay_range: tuple[float, float] = (1.0, 5.0)  # ms, per-stream radio/last-hop delay
    uplink_rate: float = 25_000_000.0  # bytes/s available to each stream

    def __post_init__(self):
        for site in self.sites:
            row = {c: self.paths.get((site.id, c)) for c in self.clusters}
            missing = [c for c, p in row.items() if p is None]
            if missing:
                raise ValueError(f"path matrix incomplete: site {site.id} missing {missing}")
            if site.colocated_cluster is not None:
                own = row[site.colocated_cluster].mean_delay
                if any(p.mean_delay < own for p in row.values()):
                    raise ValueError(
                        f"site {site.id}: co-located cluster is not the closest in its row"
                    )

    def path(self, site_id: str, cluster_id: str) -> PathStats:
        return self.paths[(site_id, cluster_id)]


@dataclass(frozen=True)
class Worker:
    """A model variant instance running on a particular cluster."""

    id: str
    variant: VariantSpec
    cluster: ClusterSpec
    replica_index: int


def sample_network_delay(path: PathStats, rng: random.Random) -> float:
    """One-way delay draw (ms): normal around the path mean, truncated at zero."""
    return max(0.0, rng.gauss(path.mean_delay, path.delay_std))


def pessimistic_rtt(path: PathStats, access_delay: float) -> float:
    """Round-trip propagation bound (ms): twice (access + mean + two sigma)."""
    return 2.0 * (access_delay + path.mean_delay + 2.0 * path.delay_std)


# Per-layer desk-scale defaults: resource vector and one-way latency band
# (mean sampled uniformly in the band, std fraction of the mean).
_LAYER_RESOURCES = {
    Layer.ACCESS: (4.0, 4.0, 4.0),
    Layer.CENTRAL_OFFICE: (6.0, 6.0, 5.0),
    Layer.ISP_DC: (8.0, 8.0, 2.0),
    Layer.CLOUD: (12.0, 12.0, 3.0),
}
_LAYER_LATENCY_MS = {
    Layer.ACCESS: (1.0, 3.0, 0.4),
    Layer.CENTRAL_OFFICE: (8.0, 11.0, 1.0),
    Layer.ISP_DC: (11.0, 15.0, 1.5),
    Layer.CLOUD: (35.0, 50.0, 5.0),
}
# Sites that are not co-located with a cluster still reach remote layers
# through the access network; this extra hop is already inside the layer
# latency bands above.  Cross-site access paths get this penalty (ms).
_CROSS_SITE_PENALTY = 3.0


def _preset_layers(name: str) -> list[Layer]:
    if name == "dc-cloud":
        return [Layer.ISP_DC, Layer.CLOUD]
    if name == "co-dc-cloud":
        return [Layer.CENTRAL_OFFICE, Layer.ISP_DC, Layer.CLOUD]
    if name == "full-edge":
        return [Layer.ACCESS, Layer.CENTRAL_OFFICE, Layer.ISP_DC, Layer.CLOUD]
    raise ValueError(f"unknown topology preset {name!r}; expected one of {PRESET_NAMES}")


def build_preset(name: str, scale: int = 1, rng_seed: int = 0) -> Topology:
    """Build one of the bundled topologies, deterministic given (name, scale, seed).

    `scale` multiplies the number of scheduler sites (and with them access and
    central-office clusters); shared DC/cloud clusters are added one per four
    sites.  At scale=1 this is the desk-scale unit: one site, at most four
    clusters.
    """
    if scale < 1:
        raise ValueError("scale must be a positive integer")
    layers = _preset_layers(name)
    rng = random.Random(rng_seed)

    clusters: dict[str, ClusterSpec] = {}
    sites: list[SchedulerSite] = []
    per_site_clusters: dict[str, list[str]] = {}

    def add_cluster(layer: Layer, idx: int) -> str:
        cid = f"{layer.value}-{idx}"
        clusters[cid] = ClusterSpec(
            id=cid, layer=layer, capacity=ResourceVector(_LAYER_RESOURCES[layer])
        )
        return cid

    for s in range(scale):
        site_id = f"site-{s}"
        own: list[str] = []
        if Layer.ACCESS in layers:
            own.append(add_cluster(Layer.ACCESS, s))
        if Layer.CENTRAL_OFFICE in layers:
            own.append(add_cluster(Layer.CENTRAL_OFFICE, s))
        colocated = own[0] if (own and clusters[own[0]].layer is Layer.ACCESS) else None
        sites.append(SchedulerSite(id=site_id, colocated_cluster=colocated))
        per_site_clusters[site_id] = own

    n_shared = max(1, scale // 4)
    shared: list[str] = []
    if Layer.ISP_DC in layers:
        shared += [add_cluster(Layer.ISP_DC, i) for i in range(n_shared)]
    shared.append(add_cluster(Layer.CLOUD, 0))

    paths: dict[tuple[str, str], PathStats] = {}
    for site in sites:
        for cid, cluster in clusters.items():
            lo, hi, std = _LAYER_LATENCY_MS[cluster.layer]
            mean = rng.uniform(lo, hi)
            if cluster.layer in (Layer.ACCESS, Layer.CENTRAL_OFFICE):
                if cid not in per_site_clusters[site.id]:
                    mean += _CROSS_SITE_PENALTY
            paths[(site.id, cid)] = PathStats(mean_delay=round(mean, 3), delay_std=std)

    return Topology(clusters=clusters, sites=sites, paths=paths)


def load_topology(doc: dict) -> Topology:
    """Build a Topology from a parsed config document.

    Expected shape::

        {"clusters": [{"id": ..., "layer": "access|central_office|isp_dc|cloud",
                       "capacity": [cpu, mem_gb, accel_gb], "unlimited": false}],
         "sites":    [{"id": ..., "colocated_cluster": ... | null}],
         "paths":    {"<site>": {"<cluster>": [mean_ms, std_ms]}},
         "access_delay_ms": [lo, hi],
         "uplink_rate_bytes_s": ...}
    """
    clusters = {
        c["id"]: ClusterSpec(
            id=c["id"],
            layer=Layer(c["layer"]),
            capacity=ResourceVector(tuple(float(x) for x in c["capacity"])),
            unlimited=bool(c.get("unlimited", False)),
        )
        for c in doc["clusters"]
    }
    sites = [
        SchedulerSite(id=s["id"], colocated_cluster=s.get("colocated_cluster"))
        for s in doc["sites"]
    ]
    paths = {
        (sid, cid): PathStats(mean_delay=float(ms[0]), delay_std=float(ms[1]))
        for sid, row in doc["paths"].items()
        for cid, ms in row.items()
    }
    lo, hi = doc.get("access_delay_ms", (1.0, 5.0))
    return Topology(
        clusters=clusters,
        sites=sites,
        paths=paths,
        access_delay_range=(float(lo), float(hi)),
        uplink_rate=float(doc.get("uplink_rate_bytes_s", 25_000_000.0)),
    )


def deploy_workers(
    topology: Topology,
    catalog: Catalog,
    rng_seed: int = 0,
    cloud_replica_cap: int = CLOUD_REPLICA_CAP,
) -> list[Worker]:
    """Fill every cluster with variant replicas, round-robin, up to saturation.

    Variants are cycled in catalog order, adding one replica at a time, and a
    variant drops out of the cycle once one more replica would exceed any
    resource component of the cluster.  Unlimited clusters instead receive
    `cloud_replica_cap` replicas of each variant.  Deterministic; `rng_seed`
    is accepted for interface stability but unused by the greedy rule.
    """
    del rng_seed
    workers: list[Worker] = []
    variants = list(catalog.variants.values())
    widx = 0
    for cluster in topology.clusters.values():
        if cluster.unlimited:
            for v in variants:
                for r in range(cloud_replica_cap):
                    workers.append(Worker(f"w{widx:03d}", v, cluster, r))
                    widx += 1
            continue
        used = ResourceVector(tuple(0.0 for _ in cluster.capacity.components))
        replica_count = {v.id: 0 for v in variants}
        # Zero-demand variants would never saturate a finite cluster; skip them.
        active = [
            v for v in variants
            if len(v.resource_demand) == len(cluster.capacity)
            and sum(v.resource_demand.components) > 0
        ]
        while active:
            still = []
            for v in active:
                trial = used + v.resource_demand
                if trial.fits_within(cluster.capacity):
                    used = trial
                    workers.append(Worker(f"w{widx:03d}", v, cluster, replica_count[v.id]))
                    replica_count[v.id] += 1
                    widx += 1
                    still.append(v)
            active = still
    return workers
