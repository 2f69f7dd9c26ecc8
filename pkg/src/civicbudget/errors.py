"""Error taxonomy shared across the package.

DataError marks problems with user-supplied data (malformed files, ballots
referencing unknown areas, empty inputs). InfeasibleError marks constraint
systems with no solution, such as a repair that cannot reach balance without
crossing a spending floor. Programming-contract violations (mismatched
dimensions, bad argument combinations) raise ValueError as usual.

The command line maps these to exit codes: usage 1, DataError 2,
InfeasibleError 3.
"""


class DataError(Exception):
    """Input data is malformed, inconsistent, or empty."""


class InfeasibleError(Exception):
    """No solution satisfies the active constraints."""
