import logging
from typing import Iterable

from src.contracts.ballot_box import BallotBox
from src.contracts.conf_manager import ConfManager
from src.contracts.id_storage import IDStorage
from src.crypto.curve import EllipticCurve, curve_from_dict
from src.errors import ValidationError
from src.interfaces.contract import Contract
from utils.common_utils import from_hex

# Configure logging
logger = logging.getLogger(__name__)


def make_genesis(
    curve: EllipticCurve,
    organizer: bytes,
    identity_managers: Iterable[bytes],
    conf_managers: Iterable[bytes],
    roster: Iterable[tuple[bytes, bytes]] = (),
) -> dict:
    """Genesis configuration: the curve, the authorized accounts and an optional preloaded roster."""
    return {
        "curve": curve.params.to_dict(),
        "organizer": organizer.hex(),
        "identity_managers": [m.hex() for m in identity_managers],
        "conf_managers": [m.hex() for m in conf_managers],
        "roster": [{"pk": pk.hex(), "label": label.hex()} for pk, label in roster],
    }


def genesis_curve(genesis: dict) -> EllipticCurve:
    try:
        return curve_from_dict(genesis["curve"])
    except (KeyError, TypeError) as e:
        raise ValidationError(f"Genesis carries no usable curve: {e}") from e


def deploy_contracts(genesis: dict) -> dict[str, Contract]:
    """Contract factory handed to the ledger; the dict order is the block-hook order."""
    curve = genesis_curve(genesis)
    try:
        organizer = from_hex(genesis["organizer"])
        identity_managers = [from_hex(m) for m in genesis["identity_managers"]]
        conf_managers = [from_hex(m) for m in genesis["conf_managers"]]
        roster = [(from_hex(e["pk"]), from_hex(e["label"])) for e in genesis.get("roster", [])]
    except (KeyError, TypeError) as e:
        raise ValidationError(f"Malformed genesis configuration: {e}") from e
    if not identity_managers:
        raise ValidationError("At least one identity manager is required")

    contracts = [
        IDStorage(curve, identity_managers, roster),
        BallotBox(curve, organizer),
        ConfManager(curve, conf_managers),
    ]
    logger.debug(f"Deployed {', '.join(c.name for c in contracts)} on {curve.name}")
    return {c.name: c for c in contracts}
