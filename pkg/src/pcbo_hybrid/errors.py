"""Exception types shared across the package."""


class DataError(ValueError):
    """Malformed input data (bad cells, missing columns, inconsistent files)."""


class CapacityError(RuntimeError):
    """A problem exceeds a configured resource cap (qubits, brute-force size)."""
