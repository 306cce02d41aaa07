"""Exception hierarchy shared across the package."""


class AdvscopeError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(AdvscopeError):
    """A caller-supplied value violates a precondition (bad shape, range, enum)."""


class FormatError(AdvscopeError):
    """A file or blob does not match its declared on-disk format."""


class TrainingDivergedError(AdvscopeError):
    """Training produced a non-finite loss."""


class InsufficientMembersError(AdvscopeError):
    """A class band was requested for a class with fewer than two member images."""


class NotFoundError(AdvscopeError):
    """A referenced id (pair, neuron, dendrogram node) does not exist."""
