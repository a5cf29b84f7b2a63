"""Response time and information freshness in a two-class single-server queue.

Closed forms, truncated-CTMC solves and discrete-event simulation share one
C++ core; this package is a thin binding over it.
"""

from ._freshsched import (
    AggregateStats,
    CtmcDiagnostics,
    FreshschedError,
    JobClass,
    ModelParams,
    Policy,
    ReplicationMetrics,
    Result,
    SchedulerState,
    ServerPosition,
    SimConfig,
    SummaryStats,
    Trigger,
    aggregate,
    cli,
    config_csv,
    conservation_rhs,
    decide,
    fcfs_metrics,
    paoi_from_update_system_time,
    query1_metrics,
    query_k_metrics,
    run_config,
    run_replication,
    run_replications,
    simulate,
    stability_guard,
    update1_metrics,
    update_k_metrics,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"


def params(lambda_u, lambda_q, mu_u=1.0, mu_q=1.0):
    """ModelParams with unit service rates unless given."""
    return ModelParams(lambda_u, mu_u, lambda_q, mu_q)
