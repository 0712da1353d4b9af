"""
Exception hierarchy shared by the crjet modules and the command line front end.

Every class derives from ValueError so that code written against plain
ValueError keeps working; the `exit_code` attribute is what scripts/crjet.py
returns to the shell.
"""

from typing import Optional

__all__ = ['CRJetError', 'ModelError', 'BudgetError', 'StageError', 'OutOfBoxError']


class CRJetError(ValueError):
    """
    Base class for all domain failures.
    """

    exit_code = 4

    def __init__(self, message: str, stage: Optional[str]=None):
        super().__init__(message)
        self.stage = stage

    def __str__(self):
        message = super().__str__()
        if self.stage is not None:
            message = f"[{self.stage}] {message}"
        return message


class ModelError(CRJetError):
    """
    Invalid model input: parse errors, non-generic or non-real defining
    functions.  Parse errors carry the line and column of the offending token.
    """

    exit_code = 2

    def __init__(self, message: str, line: Optional[int]=None, column: Optional[int]=None):
        if line is not None:
            message = f"line {line}, column {column}: {message}"
        super().__init__(message, stage='model')
        self.line = line
        self.column = column


class BudgetError(CRJetError):
    """
    The truncation order or the type/degeneracy budget is too small for the
    requested computation.
    """

    exit_code = 3


class StageError(CRJetError):
    """
    A mathematical stage of the pipeline failed (span deficiency, singular
    selection, failed integration, ...).
    """

    exit_code = 4


class OutOfBoxError(StageError):
    """
    Reconstruction left the validity box of a complete system.
    """

    pass
