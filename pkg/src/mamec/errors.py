"""Exception types shared across the package."""


class MamecError(Exception):
    """Base class for all package errors."""


class GeometryError(MamecError, ValueError):
    """Path sets, array shapes, or antenna layouts are mutually inconsistent."""


class ConfigError(MamecError, ValueError):
    """A configuration document or parameter set is invalid."""


class InfeasibleRegionError(MamecError):
    """No antenna layout satisfying region and spacing constraints was found."""


class NumericFailure(MamecError):
    """A block update could not produce a valid KKT point.

    Carries the name of the offending sub-block so solver callers can report
    where the numerical breakdown happened.
    """

    def __init__(self, sub_block: str, detail: str = ""):
        self.sub_block = sub_block
        msg = f"numeric failure in sub-block '{sub_block}'"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
