from typing import Any, Dict, Optional


class QuditMemoryError(Exception):
    def __init__(
        self,
        detail: str,
        error_code: Optional[str] = None,
        metadata: Optional[Dict[str, Any]] = None
    ):
        super().__init__(detail)
        self.detail = detail
        self.error_code = error_code or "UNKNOWN_ERROR"
        self.metadata = metadata or {}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "message": self.detail,
            "error_code": self.error_code,
            "metadata": self.metadata
        }


class InvalidArgumentError(QuditMemoryError):
    def __init__(self, detail: str = "Invalid argument", **metadata: Any):
        super().__init__(detail, error_code="INVALID_ARGUMENT", metadata=metadata)


class LabelingError(QuditMemoryError):
    def __init__(self, eigen_index: int, overlap: float):
        super().__init__(
            f"Eigenstate {eigen_index} has no dominant product state (max overlap {overlap:.3f})",
            error_code="LABELING_FAILURE",
            metadata={"eigen_index": eigen_index, "overlap": overlap}
        )


class InvalidSequenceError(QuditMemoryError):
    def __init__(self, detail: str = "Invalid pulse sequence", **metadata: Any):
        super().__init__(detail, error_code="INVALID_SEQUENCE", metadata=metadata)


class UnsupportedEncodingError(QuditMemoryError):
    def __init__(self, detail: str = "Encoding requires double-quantum nuclear transitions"):
        super().__init__(detail, error_code="UNSUPPORTED_ENCODING")


class InvalidStateError(QuditMemoryError):
    def __init__(self, detail: str = "State is not physical", **metadata: Any):
        super().__init__(detail, error_code="INVALID_STATE", metadata=metadata)


class FitError(QuditMemoryError):
    def __init__(self, detail: str = "Fit cannot be performed", **metadata: Any):
        super().__init__(detail, error_code="FIT_FAILURE", metadata=metadata)


class ConfigError(QuditMemoryError):
    def __init__(self, detail: str, location: Optional[str] = None):
        super().__init__(
            detail,
            error_code="CONFIG_ERROR",
            metadata={"location": location} if location else {}
        )
