import json
import logging
import threading
from pathlib import Path
from types import MappingProxyType
from typing import Any, Callable, Iterable, Mapping, Optional, Union

from src.errors import IntegrityError, RevertCode, RevertError, ValidationError
from src.interfaces.contract import Contract, ExecutionContext
from src.ledger.transaction import ANONYMOUS, ZERO_DIGEST, Block, ExecutionOutcome, Transaction
from utils.common_utils import canonical_json, digest

# Configure logging
logger = logging.getLogger(__name__)

# Builds the contract set for a genesis configuration; insertion order is the hook order
ContractFactory = Callable[[dict], Mapping[str, Contract]]
BlockListener = Callable[[Block], None]


class Ledger:
    """
    Single-sequencer, append-only ledger.

    Submissions may come from any thread and are queued in arrival order;
    block production drains the queue and executes it on the calling thread
    while holding the ledger lock, so reads never observe a half-built block.
    """

    def __init__(self, genesis: dict, contract_factory: ContractFactory):
        self._genesis = json.loads(canonical_json(genesis))
        self._factory = contract_factory
        self._contracts: dict[str, Contract] = dict(contract_factory(self._genesis))
        self._pool: list[Transaction] = []
        self._queued: set[bytes] = set()
        self._outcomes: dict[bytes, ExecutionOutcome] = {}
        self._nonces: dict[bytes, int] = {}
        self._blocks: list[Block] = []
        self._listeners: list[BlockListener] = []
        self._lock = threading.RLock()

        genesis_block = Block(
            height=0,
            parent_digest=ZERO_DIGEST,
            transactions=(),
            outcomes=(),
            events=(),
            state_digest=self._state_digest(),
            genesis=self._genesis,
        )
        self._blocks.append(genesis_block)
        logger.info(f"Ledger initialized at genesis {genesis_block.digest.hex()[:16]}")

    # Chain

    @property
    def genesis(self) -> dict:
        return self._genesis

    @property
    def height(self) -> int:
        with self._lock:
            return self._blocks[-1].height

    @property
    def head(self) -> Block:
        with self._lock:
            return self._blocks[-1]

    @property
    def blocks(self) -> tuple[Block, ...]:
        with self._lock:
            return tuple(self._blocks)

    @property
    def contracts(self) -> Mapping[str, Contract]:
        return MappingProxyType(self._contracts)

    @property
    def pending(self) -> int:
        with self._lock:
            return len(self._pool)

    def add_listener(self, listener: BlockListener):
        """Call ``listener(block)`` after every produced block, outside the ledger lock."""
        self._listeners.append(listener)

    # Submission

    def submit(self, tx: Union[Transaction, bytes]) -> bytes:
        """Queue a transaction (or its canonical encoding) and return its receipt.

        Raises:
            ValidationError: The encoding does not decode to a transaction
        """
        if isinstance(tx, (bytes, bytearray)):
            tx = Transaction.decode(bytes(tx))
        if not isinstance(tx, Transaction):
            raise ValidationError(f"Cannot submit {type(tx).__name__}")
        receipt = tx.receipt
        with self._lock:
            if receipt in self._queued or receipt in self._outcomes:
                logger.debug(f"Duplicate submission {receipt.hex()[:16]} ignored")
                return receipt
            self._pool.append(tx)
            self._queued.add(receipt)
            self._nonces[tx.sender] = max(self._nonces.get(tx.sender, 0), tx.nonce + 1)
        logger.debug(f"Queued {tx.target}.{tx.method} as {receipt.hex()[:16]}")
        return receipt

    def call(self, sender: bytes, target: str, method: str, args: Iterable[bytes] = ()) -> bytes:
        """Build a transaction with the sender's next nonce and queue it atomically."""
        with self._lock:
            nonce = self._nonces.get(sender, 0)
            return self.submit(Transaction(sender, target, method, tuple(args), nonce))

    def outcome(self, receipt: bytes) -> Optional[ExecutionOutcome]:
        with self._lock:
            return self._outcomes.get(receipt)

    # Execution

    def _context(self, height: int, sender: bytes) -> ExecutionContext:
        return ExecutionContext(height=height, sender=sender, contracts=self.contracts)

    def _state_digest(self) -> bytes:
        return digest(canonical_json({name: c.fingerprint().hex() for name, c in self._contracts.items()}))

    def _execute(self, height: int, tx: Transaction) -> ExecutionOutcome:
        receipt = tx.receipt
        try:
            contract = self._contracts.get(tx.target)
            if contract is None:
                raise RevertError(RevertCode.UNKNOWN_CONTRACT, f"No contract named {tx.target!r}")
            detail = contract.execute(self._context(height, tx.sender), tx.method, tx.args)
            return ExecutionOutcome(receipt, height, "OK", detail or "")
        except RevertError as e:
            logger.warning(f"{tx.target}.{tx.method} reverted at height {height}: {e}")
            return ExecutionOutcome(receipt, height, e.code, e.message)
        except Exception as e:
            logger.exception(f"{tx.target}.{tx.method} failed at height {height}")
            return ExecutionOutcome(receipt, height, RevertCode.EXECUTION_ERROR.value, str(e))

    def produce_block(self) -> Block:
        """Fire height events, then drain the pool in submission order into a new block."""
        with self._lock:
            height = self._blocks[-1].height + 1
            hook_ctx = self._context(height, ANONYMOUS)
            events: list[str] = []
            for name, contract in self._contracts.items():
                for event in contract.on_block(hook_ctx):
                    events.append(f"{name}:{event}")

            pending, self._pool = self._pool, []
            self._queued.clear()
            outcomes = []
            for tx in pending:
                result = self._execute(height, tx)
                self._outcomes[result.receipt] = result
                outcomes.append(result)

            block = Block(
                height=height,
                parent_digest=self._blocks[-1].digest,
                transactions=tuple(pending),
                outcomes=tuple(outcomes),
                events=tuple(events),
                state_digest=self._state_digest(),
            )
            self._blocks.append(block)

        if events:
            logger.info(f"Block {height}: events {', '.join(events)}")
        logger.debug(f"Produced block {height} with {len(pending)} transactions")
        for listener in list(self._listeners):
            listener(block)
        return block

    def produce_until(self, height: int) -> Block:
        while self.height < height:
            self.produce_block()
        return self.head

    # Reads

    def query(self, target: str, view: str, *args: Any) -> Any:
        """Call a read-only contract view against committed state."""
        with self._lock:
            contract = self._contracts.get(target)
            if contract is None:
                raise ValidationError(f"No contract named {target!r}")
            if view not in contract.VIEWS:
                raise ValidationError(f"{target}.{view} is not a view")
            return getattr(contract, view)(*args)

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "height": self.height,
                "head": self.head.digest.hex(),
                "contracts": {name: c.snapshot() for name, c in self._contracts.items()},
            }

    def save_snapshot(self, path: Path):
        Path(path).write_text(json.dumps(self.snapshot(), indent=2, sort_keys=True))
        logger.info(f"State snapshot written to {path}")

    def audit(self, start: int = 0, end: Optional[int] = None) -> list[dict]:
        """Every method invocation in blocks [start, end], decoded by its contract."""
        records = []
        with self._lock:
            last = self.height if end is None else min(end, self.height)
            for block in self._blocks[start:last + 1]:
                for position, (tx, result) in enumerate(zip(block.transactions, block.outcomes)):
                    contract = self._contracts.get(tx.target)
                    describe = type(contract).describe if contract is not None else Contract.describe
                    for entry in describe(tx.method, tx.args, result.status, result.detail):
                        records.append({
                            "height": block.height,
                            "position": position,
                            "receipt": result.receipt.hex(),
                            "sender": "ANONYMOUS" if tx.anonymous else tx.sender.hex(),
                            "target": tx.target,
                            **entry,
                        })
        return records

    # Export and replay

    def export_chain(self, path: Path):
        """JSON-lines, one block per line."""
        with open(path, "w") as f:
            for block in self.blocks:
                f.write(json.dumps(block.to_dict(), sort_keys=True) + "\n")
        logger.info(f"Exported {len(self._blocks)} blocks to {path}")

    def export_lines(self) -> str:
        return "".join(json.dumps(b.to_dict(), sort_keys=True) + "\n" for b in self.blocks)

    @staticmethod
    def load_chain(path: Path) -> list[Block]:
        blocks = []
        with open(path) as f:
            for number, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as e:
                    raise IntegrityError(f"Line {number} of {path} is not JSON: {e}") from e
                blocks.append(Block.from_dict(record))
        return blocks

    @classmethod
    def replay(cls, blocks: Iterable[Block], contract_factory: ContractFactory) -> "Ledger":
        """Re-execute a chain from its genesis and check every block digest.

        Raises:
            IntegrityError: Broken linkage, or a rebuilt block differs from the recorded one
        """
        blocks = list(blocks)
        if not blocks or blocks[0].height != 0 or blocks[0].genesis is None:
            raise IntegrityError("Chain does not start with a genesis block")
        if blocks[0].parent_digest != ZERO_DIGEST:
            raise IntegrityError("Genesis parent digest must be all zeros")
        ledger = cls(blocks[0].genesis, contract_factory)
        if ledger.head.digest != blocks[0].digest:
            raise IntegrityError("Genesis state does not match the recorded genesis block")

        for block in blocks[1:]:
            if block.height != ledger.height + 1:
                raise IntegrityError(f"Expected height {ledger.height + 1}, found {block.height}")
            if block.parent_digest != ledger.head.digest:
                raise IntegrityError(f"Block {block.height} does not link to its parent")
            for tx in block.transactions:
                ledger.submit(tx)
            rebuilt = ledger.produce_block()
            if rebuilt.digest != block.digest:
                raise IntegrityError(f"Replay diverged at height {block.height}")
        logger.info(f"Replayed {len(blocks)} blocks to height {ledger.height}")
        return ledger
