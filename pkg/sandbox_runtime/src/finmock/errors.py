"""Structured exceptions with a stable, machine-checkable traceback format.

Every class reports as ``finmock.<Name>: <message>`` in stderr so the host
side can match failures without parsing Python internals.
"""


class FinmockError(Exception):
    """Base class for all mock-SDK failures."""


class UnknownToolError(FinmockError):
    """Raised as ``unknown tool: <name>``."""


class BadParamError(FinmockError):
    """Raised naming the offending parameter."""


class EmptyTableError(FinmockError):
    """Raised when an operation needs at least one row."""


for _cls in (FinmockError, UnknownToolError, BadParamError, EmptyTableError):
    _cls.__module__ = "finmock"
