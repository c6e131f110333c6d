"""Exception hierarchy shared by every module."""


class CosmosError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(CosmosError, ValueError):
    """A function was called with arguments outside its contract."""


class ConfigError(CosmosError):
    """Malformed or inconsistent exploration configuration."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field:
            where.append(f"field '{field}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class DeadlockError(CosmosError):
    """The marked graph has a cycle with no tokens, so throughput is zero."""

    def __init__(self, cycle: list[str]):
        self.cycle = list(cycle)
        super().__init__("token-free cycle: " + " -> ".join(self.cycle))


class TableLookupError(CosmosError, KeyError):
    """A replay table has no row for the requested knob setting."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "table lookup failed"


class CharacterizationError(CosmosError):
    """The backend could not produce a mandatory region corner."""


class PlanningError(CosmosError):
    """The throughput-constrained planning problem has no solution."""


class MappingError(CosmosError):
    """A planned latency cannot be translated to knob settings."""
