"""Exception hierarchy shared across the toolkit.

Errors are deliberately fine grained so callers (and the CLI exit-code
mapping) can tell an unusable input from a search that legitimately found
nothing from a misbehaving external model.
"""


class FreqsiftError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(FreqsiftError, ValueError):
    """A parameter is outside its documented domain (e.g. n_fft < 2)."""


class InvalidInputError(FreqsiftError, ValueError):
    """An input value violates a precondition (e.g. sample-rate mismatch)."""


class UnsupportedConfigurationError(FreqsiftError):
    """A requested configuration is recognized but not supported
    (e.g. a window/hop combination without perfect overlap-add)."""


class BackendError(FreqsiftError):
    """An external classifier backend failed (timeout, malformed reply).

    ``payload`` carries the raw wire-level data that triggered the failure,
    when available.
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class SearchNotFoundError(FreqsiftError):
    """No mask satisfying the requested constraints exists within budget."""


class UndefinedInverseError(FreqsiftError):
    """The complement of a complete mask is empty, so there is no
    left-over signal to reconstruct."""


class DegenerateInputError(FreqsiftError):
    """The input carries no usable statistical signal
    (zero-variance differences, identical samples, sub-noise confidence)."""


class IncompatibleModelsError(FreqsiftError):
    """Models in a transfer set do not share a label set."""


class TooShortError(FreqsiftError, ValueError):
    """A signal is shorter than one analysis segment of the metric."""


class UndefinedEntropyError(FreqsiftError):
    """Spectral entropy is undefined (zero-energy signal)."""
