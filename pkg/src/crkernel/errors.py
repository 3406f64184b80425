"""Exception types shared across the kit."""


class CRKernelError(Exception):
    """Base class for all kit errors."""


class CompatibilityError(CRKernelError):
    """Jet arithmetic between incompatible jets (num_vars/order/base mismatch)."""


class CenteringError(CRKernelError):
    """Composition whose inner jets are not centered on the outer base point."""


class NumericalError(CRKernelError):
    """Internal numerical failure (branch tracking, Hessian inversion, fits)."""


class BranchError(NumericalError):
    """Constant term on or across a branch cut, or an ambiguous square root."""


class HessianError(NumericalError):
    """Phase Hessian is singular or otherwise unusable."""


class OrderShortfallError(CRKernelError):
    """A jet does not carry enough orders for the requested operation."""


class ChartError(CRKernelError):
    """Chart construction violated a model invariant or the curvature identity."""


class SymbolError(CRKernelError):
    """Invalid classical symbol data."""


class ConfigError(CRKernelError):
    """Scenario configuration failed to parse or validate."""


class OracleFitError(NumericalError):
    """Quadrature oracle could not fit the expansion to tolerance."""
