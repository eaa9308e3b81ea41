"""Offline figure regeneration for edgesched CSV artifacts."""

from .figures import (
    plot_app_success,
    plot_lambda_boxes,
    plot_latency_cdf,
    plot_learning_curves,
    plot_policy_timeline,
    plot_success_over_time,
    regenerate_all,
)
from .tables import (
    ArtifactSet,
    LearningCurve,
    RunTable,
    SchemaError,
    SwitchLog,
    scan_directory,
)

__version__ = "0.1.0"
