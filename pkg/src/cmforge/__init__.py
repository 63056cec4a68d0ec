"""CM construction of elliptic curves via genus-field divisors of class polynomials."""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    CMForgeError,
    InternalInvariantError,
    InvalidParameters,
    PrecisionEscalation,
    PrecisionExhausted,
    UnsupportedInvariant,
)
