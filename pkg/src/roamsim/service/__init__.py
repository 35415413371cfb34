from .app import create_app, run_request
from .models import SimulateRequest, SimulateResponse, ValidateRequest, ValidateResponse

__all__ = [
    "create_app",
    "run_request",
    "SimulateRequest",
    "SimulateResponse",
    "ValidateRequest",
    "ValidateResponse",
]
