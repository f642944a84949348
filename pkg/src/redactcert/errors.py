"""Typed errors. Operational failures raise; search failure is a value, not an error."""

from __future__ import annotations


class CertEngineError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(CertEngineError):
    """Input length does not match what the operation expects."""


class IndexOutOfRangeError(CertEngineError):
    """An index set refers to positions outside the input."""


class GeometryError(CertEngineError):
    """Grid geometry is missing, inconsistent, or degenerate."""


class EvaluationError(CertEngineError):
    """A model evaluator failed. For served models carries the transport detail."""

    def __init__(self, msg: str, detail: object = None):
        super().__init__(msg)
        self.detail = detail


class CertificateFormatError(CertEngineError):
    """A certificate payload is malformed or has an unknown schema version."""


class CertificateMismatchError(CertEngineError):
    """Certificate does not address this (model, input) pair: digest, model id,
    or pinned baseline prediction disagrees. Distinct from a semantic rejection."""


class LowConfidenceError(CertEngineError):
    """Baseline prediction below the configured cutoff; the pair is not analyzable."""


class BundleError(CertEngineError):
    """Case bundle is unreadable or fails its own digest/consistency checks."""


class FixtureError(CertEngineError):
    """Fixture generator could not meet its guarantee for this spec."""


class OracleSizeError(CertEngineError):
    """Segment count too large for exhaustive enumeration."""
