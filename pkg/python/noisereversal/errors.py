"""
exception hierarchy shared by every noisereversal module

everything raised on purpose derives from NoiseReversalError, and each leaf
also derives from the builtin a caller would naturally catch (ValueError for
bad input, ArithmeticError for blown-up numbers, RuntimeError for a solver
that gave up).
"""

__all__ = ["NoiseReversalError", "ContractViolation", "NumericOverflow",
        "InputError", "SolverError", "InvalidDocument"]


class NoiseReversalError(Exception):
    pass

class ContractViolation(NoiseReversalError, ValueError):
    "shapes or feasibility of arguments don't match what the operation needs"

class NumericOverflow(NoiseReversalError, ArithmeticError):
    "an energy or gradient came out non-finite"

class InputError(NoiseReversalError, ValueError):
    "user-supplied parameters are out of range"

class SolverError(NoiseReversalError, RuntimeError):
    "every restart of a solve aborted"

class InvalidDocument(NoiseReversalError, ValueError):
    """a JSON document failed schema validation

    `path` names the offending element, e.g. ``quadratic[3][1]``
    """
    def __init__(self, message, path=""):
        super().__init__(message if not path else "%s: %s" % (path, message))
        self.path = path
