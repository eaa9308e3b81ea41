"""Inference task / model / variant catalog and per-variant performance math.

Delay and capacity profiles are configuration inputs: the bundled default
catalog is synthetic (plausible object-detection numbers, not measurements).
All delays are milliseconds, sizes are bytes, capacities are queries/second.
"""

from __future__ import annotations

from dataclasses import dataclass, field

# Fraction of the full-size processing delay that remains for tiny inputs.
# Delay scales affinely between this floor and 1.0 as input size grows to
# the variant's maximum supported size.
DELAY_SIZE_FLOOR = 0.2


class CatalogError(ValueError):
    """Raised when a catalog document is inconsistent; carries every problem found."""

    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


@dataclass(frozen=True)
class TaskKind:
    id: str
    description: str = ""


@dataclass(frozen=True)
class ModelSpec:
    id: str
    task: TaskKind
    accuracy: float  # mAP points, 0-100


@dataclass(frozen=True)
class ResourceVector:
    """Ordered nonnegative resource amounts (cpu cores, memory GB, accelerator GB)."""

    components: tuple[float, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.components):
            raise ValueError(f"negative resource component: {self.components}")

    def __add__(self, other: "ResourceVector") -> "ResourceVector":
        return ResourceVector(tuple(a + b for a, b in zip(self.components, other.components, strict=True)))

    def fits_within(self, cap: "ResourceVector") -> bool:
        return all(a <= b + 1e-12 for a, b in zip(self.components, cap.components, strict=True))

    def __len__(self) -> int:
        return len(self.components)


@dataclass(frozen=True)
class VariantSpec:
    """A deployable configuration of a model with its own delay/capacity profile."""

    id: str
    model: ModelSpec
    batch_size: int
    resource_demand: ResourceVector
    max_input_size: float     # bytes
    base_delay: float         # ms to process one max-size batch
    base_capacity: float      # queries/s sustained at max input size
    delay_jitter: float = 0.0  # ms std-dev added to simulated batch service time


@dataclass
class Catalog:
    tasks: dict[str, TaskKind]
    models: dict[str, ModelSpec]
    variants: dict[str, VariantSpec]
    models_by_task: dict[str, list[ModelSpec]] = field(default_factory=dict)
    variants_by_model: dict[str, list[VariantSpec]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.models_by_task:
            for m in self.models.values():
                self.models_by_task.setdefault(m.task.id, []).append(m)
        if not self.variants_by_model:
            for v in self.variants.values():
                self.variants_by_model.setdefault(v.model.id, []).append(v)

    def variants_for_task(self, task_id: str) -> list[VariantSpec]:
        out = []
        for m in self.models_by_task.get(task_id, []):
            out.extend(self.variants_by_model.get(m.id, []))
        return out

    @property
    def n_models(self) -> int:
        return len(self.models)


def _check_size(variant: VariantSpec, input_size: float) -> None:
    if not (0 < input_size <= variant.max_input_size):
        raise ValueError(
            f"input size {input_size} outside (0, {variant.max_input_size}] for variant {variant.id}"
        )


def processing_delay(variant: VariantSpec, input_size: float) -> float:
    """Delay (ms) to process a query of `input_size` bytes on `variant`.

    Equals base_delay at the maximum supported size and shrinks affinely down
    to DELAY_SIZE_FLOOR * base_delay for vanishing inputs.
    """
    _check_size(variant, input_size)
    frac = input_size / variant.max_input_size
    return variant.base_delay * (DELAY_SIZE_FLOOR + (1.0 - DELAY_SIZE_FLOOR) * frac)


def effective_capacity(variant: VariantSpec, input_size: float) -> float:
    """Throughput (queries/s) of `variant` when all inputs have `input_size` bytes."""
    return variant.base_capacity * variant.base_delay / processing_delay(variant, input_size)


def fractional_load(variant: VariantSpec, stream_input_size: float) -> float:
    """Per-query load contribution of a stream, in max-size-query units (0, 1]."""
    _check_size(variant, stream_input_size)
    return stream_input_size / variant.max_input_size


def load_catalog(doc: dict) -> Catalog:
    """Build a validated Catalog from a parsed config document.

    Expected shape::

        {"tasks":    [{"id": ..., "description": ...}],
         "models":   [{"id": ..., "task": ..., "accuracy": ...}],
         "variants": [{"id": ..., "model": ..., "batch_size": ...,
                       "resources": [cpu, mem_gb, accel_gb],
                       "max_input_size": bytes, "base_delay_ms": ...,
                       "base_capacity_qps": ..., "delay_jitter_ms": ...}]}

    Raises CatalogError listing every violation found.
    """
    problems: list[str] = []
    tasks: dict[str, TaskKind] = {}
    for t in doc.get("tasks", []):
        if t["id"] in tasks:
            problems.append(f"duplicate task id {t['id']}")
        tasks[t["id"]] = TaskKind(id=t["id"], description=t.get("description", ""))

    models: dict[str, ModelSpec] = {}
    for m in doc.get("models", []):
        if m["id"] in models:
            problems.append(f"duplicate model id {m['id']}")
        task = tasks.get(m["task"])
        if task is None:
            problems.append(f"model {m['id']} references unknown task {m['task']}")
            continue
        if m["accuracy"] < 0:
            problems.append(f"model {m['id']} has negative accuracy")
        models[m["id"]] = ModelSpec(id=m["id"], task=task, accuracy=float(m["accuracy"]))

    dims = set()
    variants: dict[str, VariantSpec] = {}
    for v in doc.get("variants", []):
        if v["id"] in variants:
            problems.append(f"duplicate variant id {v['id']}")
        model = models.get(v["model"])
        if model is None:
            problems.append(f"variant {v['id']} references unknown model {v['model']}")
            continue
        if v["base_delay_ms"] <= 0:
            problems.append(f"variant {v['id']} has nonpositive base delay")
        if v["base_capacity_qps"] <= 0:
            problems.append(f"variant {v['id']} has nonpositive capacity")
        if v.get("batch_size", 1) < 1:
            problems.append(f"variant {v['id']} has batch size < 1")
        if v["max_input_size"] <= 0:
            problems.append(f"variant {v['id']} has nonpositive max input size")
        dims.add(len(v["resources"]))
        variants[v["id"]] = VariantSpec(
            id=v["id"],
            model=model,
            batch_size=int(v.get("batch_size", 1)),
            resource_demand=ResourceVector(tuple(float(x) for x in v["resources"])),
            max_input_size=float(v["max_input_size"]),
            base_delay=float(v["base_delay_ms"]),
            base_capacity=float(v["base_capacity_qps"]),
            delay_jitter=float(v.get("delay_jitter_ms", 0.0)),
        )
    if len(dims) > 1:
        problems.append(f"inconsistent resource vector dimensions: {sorted(dims)}")
    if problems:
        raise CatalogError(problems)
    return Catalog(tasks=tasks, models=models, variants=variants)


# Synthetic default profiles for the object-detection catalog, sized for
# desk-scale experiments.  Capacities are kept consistent with the service
# model (base_capacity * base_delay / batch_size slightly below 1), so a
# worker admitted up to its capacity runs near queue saturation.  Accelerator
# variants are listed first so that round-robin deployment places one on
# every cluster that can host it.
DEFAULT_CATALOG_DOC: dict = {
    "tasks": [
        {"id": "object-detection", "description": "single-frame object detection"},
    ],
    "models": [
        {"id": "yolo-v3", "task": "object-detection", "accuracy": 55.0},
        {"id": "mobilenet-ssd", "task": "object-detection", "accuracy": 32.0},
        {"id": "tinyyolo-v2", "task": "object-detection", "accuracy": 22.0},
    ],
    "variants": [
        {"id": "yolov3-gpu", "model": "yolo-v3", "batch_size": 2,
         "resources": [2, 2, 4], "max_input_size": 200_000,
         "base_delay_ms": 35.0, "base_capacity_qps": 53.0, "delay_jitter_ms": 2.0},
        {"id": "tinyyolo-gpu", "model": "tinyyolo-v2", "batch_size": 2,
         "resources": [1, 1, 1], "max_input_size": 200_000,
         "base_delay_ms": 64.0, "base_capacity_qps": 29.0, "delay_jitter_ms": 3.0},
        {"id": "mobilenet-gpu", "model": "mobilenet-ssd", "batch_size": 1,
         "resources": [1, 1, 1], "max_input_size": 200_000,
         "base_delay_ms": 38.0, "base_capacity_qps": 24.5, "delay_jitter_ms": 2.0},
        {"id": "tinyyolo-cpu", "model": "tinyyolo-v2", "batch_size": 1,
         "resources": [2, 1, 0], "max_input_size": 200_000,
         "base_delay_ms": 60.0, "base_capacity_qps": 15.5, "delay_jitter_ms": 3.0},
        {"id": "mobilenet-cpu", "model": "mobilenet-ssd", "batch_size": 1,
         "resources": [2, 1, 0], "max_input_size": 200_000,
         "base_delay_ms": 85.0, "base_capacity_qps": 11.0, "delay_jitter_ms": 4.0},
        {"id": "yolov3-cpu", "model": "yolo-v3", "batch_size": 1,
         "resources": [4, 4, 0], "max_input_size": 200_000,
         "base_delay_ms": 300.0, "base_capacity_qps": 3.1, "delay_jitter_ms": 15.0},
    ],
}


def default_catalog() -> Catalog:
    return load_catalog(DEFAULT_CATALOG_DOC)
