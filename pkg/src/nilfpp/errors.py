"""Failure taxonomy shared across the package.

Each error class maps to a distinct process exit code so scripts can tell a
falsified construction check from an undersized budget.
"""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_REFUSAL = 2
EXIT_CERTIFICATION = 3
EXIT_RESOURCE = 4
EXIT_INTEGRITY = 5


class NilfppError(Exception):
    exit_code = EXIT_USAGE


class RefusalError(NilfppError):
    """Run refused: the target norm is not conjugation invariant for the group."""

    exit_code = EXIT_REFUSAL

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class CertificationError(NilfppError):
    """A path or constant certificate failed; constants were mis-estimated."""

    exit_code = EXIT_CERTIFICATION


class ResourceError(NilfppError):
    """A configured budget (vertices, memory, pair count) would be exceeded."""

    exit_code = EXIT_RESOURCE


class IntegrityError(NilfppError):
    """An internal invariant that should be unreachable was violated."""

    exit_code = EXIT_INTEGRITY
