"""Deterministic simulation of virtual private environments on a computing grid,
with a static aeroelastic coupling application that runs in-process or as a
scheduled workflow."""

from .errors import (
    AeroelasticError,
    BindingError,
    CatalogError,
    GridVpeError,
    PlacementError,
    SimulationError,
    ValidationError,
    VpeError,
    WorkflowError,
)
from .infrastructure import (
    ComputeNode,
    InfrastructureCatalog,
    NetworkLink,
    load_catalog,
    load_testbed,
    node_speed,
    query_nodes,
    transfer_time,
)
from .vpe import (
    ServiceBinding,
    VirtualPrivateEnvironment,
    VpeRegistry,
    VpeSpec,
    create_vpe,
    load_vpe_spec,
    register_service,
    resolve_service,
    teardown_vpe,
)
from .workflow import BoundWorkflow, WorkflowGraph, bind, load_workflow, validate_dataflow
from .runtime import ExecutionTrace, FailureInjection, SimEvent, place_task, simulate, trace_metrics

__version__ = "0.1.0"
