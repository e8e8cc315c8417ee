from .commands import (
    cmd_search_orders,
    cmd_sensitivity,
    cmd_train,
    load_experiment,
)

from .report import (
    cmd_report,
)

__all__ = (
    "cmd_report",
    "cmd_search_orders",
    "cmd_sensitivity",
    "cmd_train",
    "load_experiment",
)
