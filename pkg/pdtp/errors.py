"""
Error Types Module
Exception hierarchy with machine-readable error records
"""
from typing import Any, Dict, Optional


class PdtpError(Exception):
    """Base class for every error raised by the library"""

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details

    def to_record(self) -> Dict[str, Any]:
        """
        Build the machine-readable error record emitted by the CLI

        Returns:
            Dict with status, error message, error type and details
        """
        record: Dict[str, Any] = {
            "status": "failed",
            "error": self.message,
            "error_type": type(self).__name__,
        }
        record.update(self.details)
        return record


class DomainError(PdtpError, ValueError):
    """Argument outside the mathematical domain of an operation"""


class BranchError(PdtpError):
    """Closed form requested where neither series branch applies"""

    def __init__(self, xi: float, band: tuple):
        super().__init__(
            f"xi={xi!r} lies in the ORACLE_ONLY band [{band[0]}, {band[1]}]; "
            "the closed-form branches are not evaluated there, use --route oracle",
            xi=xi,
            band=list(band),
            branch="ORACLE_ONLY",
            hint="--route oracle",
        )


class ConvergenceError(PdtpError, ArithmeticError):
    """Series evaluation stayed non-converged after every fallback"""

    def __init__(self, message: str, evaluation: Optional[Any] = None):
        details = {}
        if evaluation is not None:
            details = {
                "value": evaluation.value,
                "est_abs_error": evaluation.est_abs_error,
                "terms_used": evaluation.terms_used,
            }
        super().__init__(message, **details)
        self.evaluation = evaluation


class IntegrityError(PdtpError):
    """A normalization or cross-check identity was violated"""

    def __init__(self, message: str, residual: float, **details: Any):
        super().__init__(message, residual=residual, **details)
        self.residual = residual


class GraphError(PdtpError, ValueError):
    """Invalid graph input"""


class SamplerError(PdtpError):
    """Sampler table could not reach the requested tail accuracy"""

    def __init__(self, message: str, achieved: float, table_length: int):
        super().__init__(message, achieved=achieved, table_length=table_length)
        self.achieved = achieved
        self.table_length = table_length


class EmptyEnsembleError(PdtpError, ValueError):
    """Statistics requested on an empty ensemble"""
