"""Exception hierarchy shared by all dodslab modules."""


class DodsLabError(Exception):
    """Base class for all errors raised by this package."""


# --- expression language ---

class ExprSyntaxError(DodsLabError):
    """Malformed expression source; carries the byte offset of the problem."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownIdentifier(DodsLabError):
    """Expression references a name that was not declared."""

    def __init__(self, name, offset=None):
        loc = f" (at offset {offset})" if offset is not None else ""
        super().__init__(f"unknown identifier {name!r}{loc}")
        self.name = name
        self.offset = offset


class UnboundVariable(DodsLabError):
    """Evaluation environment is missing a value for a declared variable."""


class DomainError(DodsLabError):
    """Evaluation left the real domain (log of non-positive, 0^negative, ...)."""


# --- systems and jets ---

class DelayOrderError(DodsLabError):
    """Delay relation placed the delayed point at or after the current point."""


class ManifoldError(DodsLabError):
    """Jet handed to an on-manifold operation does not satisfy E1 = E2 = 0."""


class ConfigError(DodsLabError):
    """Invalid run configuration (bad box, missing field, bad task, ...)."""


# --- solver ---

class CompatibilityError(DodsLabError):
    """Initial function does not satisfy x_{-1} = g(x0, phi(x0), phi(x_{-1}))."""


class CausalityError(DodsLabError):
    """Resolved delayed abscissa fell outside [x_{-1}, x)."""


class StiffnessError(DodsLabError):
    """Adaptive step size underflowed."""


class OutOfRange(DodsLabError):
    """Evaluation point lies outside the solution's covered interval."""


class BlowUpError(DodsLabError):
    """Group flow integration blew up before reaching the requested parameter."""


class NonGraphError(DodsLabError):
    """Transformed solution graph is no longer a function of x."""


# --- catalog / invariant solutions ---

class UnknownFamily(DodsLabError):
    """Requested catalog id does not exist."""


class ParamError(DodsLabError):
    """Family parameter outside its documented range."""


class DegenerateFamilyError(DodsLabError):
    """Parameter choice for which the catalog has no invariant DODS (A3,2 a=1)."""


class FamilyValidationError(DodsLabError):
    """Constructed family instance failed the defining DODS conditions."""


class NoRootFound(DodsLabError):
    """Constraint solving found no admissible constants; carries diagnostics."""

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class ConstraintViolated(DodsLabError):
    """Orbit extension broke a constraint that the constants must satisfy."""


class NumericOnlyAnsatz(DodsLabError):
    """Ansatz ships reduction invariants only; no closed form is available."""


# --- linear theory ---

class NotAParticularSolution(DodsLabError):
    """Proposed sigma does not solve the inhomogeneous system."""


class NonMonotoneTransform(DodsLabError):
    """Change of variables x -> xbar failed strict monotonicity."""
