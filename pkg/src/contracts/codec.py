import json
import logging
from typing import Any

from construct import Int32ub

from src.errors import RevertCode, RevertError
from utils.common_utils import canonical_json

# Configure logging
logger = logging.getLogger(__name__)


def encode_index(value: int) -> bytes:
    return Int32ub.build(value)


def decode_index(data: bytes) -> int:
    if len(data) != 4:
        _bad_args(f"Index must be 4 bytes, got {len(data)}")
    return Int32ub.parse(data)


def encode_json(value: Any) -> bytes:
    return canonical_json(value)


def decode_json(data: bytes) -> Any:
    try:
        return json.loads(data.decode("utf8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise RevertError(RevertCode.BAD_ARGS, f"Undecodable JSON argument: {e}") from e


def decode_text(data: bytes) -> str:
    try:
        return data.decode("utf8")
    except UnicodeDecodeError as e:
        raise RevertError(RevertCode.BAD_ARGS, f"Undecodable text argument: {e}") from e


def expect_args(method: str, args: tuple[bytes, ...], count: int):
    if len(args) != count:
        _bad_args(f"{method} takes {count} arguments, got {len(args)}")


def _bad_args(message: str):
    raise RevertError(RevertCode.BAD_ARGS, message)
