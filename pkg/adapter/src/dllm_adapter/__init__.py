"""Line-protocol model server for masked diffusion decoding engines."""

from .checker import CheckReport, check_transcript
from .model import CheckpointModel
from .protocol import (
    AdapterStartupError,
    ModelRequestError,
    Request,
    RequestError,
    encode,
    error_response,
    ok_response,
    parse_request,
    recover_id,
)
from .server import Transcript, handle_line, resolve_model, serve_stdio, serve_tcp
from .tables import MockModel, TableEntry

__all__ = [
    "AdapterStartupError",
    "CheckReport",
    "CheckpointModel",
    "MockModel",
    "ModelRequestError",
    "Request",
    "RequestError",
    "TableEntry",
    "Transcript",
    "check_transcript",
    "encode",
    "error_response",
    "handle_line",
    "ok_response",
    "parse_request",
    "recover_id",
    "resolve_model",
    "serve_stdio",
    "serve_tcp",
]
