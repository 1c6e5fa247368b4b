"""Exception types shared across the package."""


class PolyclfError(Exception):
    """Base class for all package errors."""


# -- polyhedral geometry ----------------------------------------------------

class GeometryError(PolyclfError):
    pass


class EmptyPolyhedron(GeometryError):
    pass


class NotPointed(GeometryError):
    """Recession cone contains a nonzero direction outside the vertical ray."""


class Unbounded(GeometryError):
    pass


class Infeasible(PolyclfError):
    pass


class NotSimple(GeometryError):
    """Some vertex has more active facets than the ambient dimension."""


class PerturbationFailed(GeometryError):
    pass


# -- templates and triplets -------------------------------------------------

class AssumptionViolated(PolyclfError):
    """Template matrix violates a structural requirement (which one is in args)."""


class DegenerateHull(PolyclfError):
    pass


# -- convex programming -----------------------------------------------------

class SolverFailure(PolyclfError):
    pass


# -- synthesis / evaluation -------------------------------------------------

class ModeMismatch(PolyclfError):
    pass


class NotStabilizable(PolyclfError):
    pass


class TreeTooLarge(PolyclfError):
    pass


class OutOfDomain(PolyclfError):
    pass


class DegenerateRegion(PolyclfError):
    pass


class StartOutOfDomain(PolyclfError):
    pass
