"""Exception types shared across the package.

The CLI maps these onto exit codes: ``UsageError`` -> 1, every other
``SneuronError`` -> 2, ``InvariantError`` -> 3.
"""


class SneuronError(Exception):
    pass


class UsageError(SneuronError):
    """Bad invocation: missing files, conflicting flags."""


class InputError(SneuronError, ValueError):
    pass


class CapacityError(SneuronError):
    """Sequence does not fit in the model's context window."""


class ConfigError(SneuronError, ValueError):
    pass


class FormatError(SneuronError):
    """Malformed weight container, atlas or config file."""


class ConstructionError(SneuronError, ValueError):
    """A planted-model spec that cannot be realised."""


class InvariantError(SneuronError):
    """An internal invariant was violated; indicates a bug."""
