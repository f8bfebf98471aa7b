"""Exception hierarchy shared by every layer of the package."""


class GridVpeError(Exception):
    """Base class for all errors raised by gridvpe."""


class ValidationError(GridVpeError, ValueError):
    """An input document or value violates a structural rule."""


class CatalogError(ValidationError):
    pass


class VpeError(ValidationError):
    pass


class WorkflowError(ValidationError):
    pass


class BindingError(ValidationError):
    pass


class SimulationError(GridVpeError, RuntimeError):
    """Raised when a simulation cannot proceed (placement, component crash)."""


class PlacementError(SimulationError):
    pass


class AeroelasticError(GridVpeError, ValueError):
    pass


def syntax_error(cls, exc, what):
    """Wrap a json.JSONDecodeError into ``cls`` with its position."""
    return cls(f"{what}: syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}")
