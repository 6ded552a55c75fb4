"""Block header acquisition, validation, and flat-file persistence.

Headers come either from a JSON-RPC node (``eth_getBlockByNumber`` with the
full-transaction flag off) or from CSV/JSONL files using the fixed column
layout ``timestamp,block_number,gas_limit,gas_used,base_fee``. All quantities
stay Python integers end to end; wei is never converted to float here.
"""

from __future__ import annotations

import csv
import json
import logging
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

log = logging.getLogger(__name__)

COLUMNS = ("timestamp", "block_number", "gas_limit", "gas_used", "base_fee")

RETRY_ATTEMPTS = 5
RETRY_BASE_DELAY = 0.5


class IngestError(Exception):
    """Base class for ingestion failures."""


class TransportError(IngestError):
    """Network-level failure; safe to retry."""


class BlockNotFoundError(IngestError):
    def __init__(self, number: int):
        super().__init__(f"block {number} not found")
        self.number = number


class DecodeError(IngestError):
    """Node response or file row could not be turned into a valid record."""


class PartialRangeError(IngestError):
    def __init__(self, first_missing: int, cause: Exception | None = None):
        super().__init__(f"range fetch aborted; first missing block is {first_missing}: {cause}")
        self.first_missing = first_missing
        self.cause = cause


class ImportValidationError(IngestError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class BlockRecord:
    timestamp: int
    block_number: int
    gas_limit: int
    gas_used: int
    base_fee: int

    def problems(self) -> list[str]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, int) or isinstance(v, bool):
                out.append(f"{f.name} must be an integer, got {v!r}")
        if out:
            return out
        if self.block_number < 0:
            out.append("block_number must be non-negative")
        if self.gas_limit <= 0:
            out.append("gas_limit must be positive")
        if self.gas_used < 0:
            out.append("gas_used must be non-negative")
        if self.gas_used > self.gas_limit:
            out.append(f"gas_used {self.gas_used} exceeds gas_limit {self.gas_limit}")
        if self.base_fee <= 0:
            out.append("base_fee must be positive")
        return out

    def as_row(self) -> dict[str, int]:
        return {c: getattr(self, c) for c in COLUMNS}


@dataclass(frozen=True)
class BlockSequence(Sequence[BlockRecord]):
    records: tuple[BlockRecord, ...] = ()

    def __init__(self, records: Iterable[BlockRecord] = ()):
        object.__setattr__(self, "records", tuple(records))

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return BlockSequence(self.records[i])
        return self.records[i]

    def __iter__(self) -> Iterator[BlockRecord]:
        return iter(self.records)


@dataclass(frozen=True)
class IngestSource:
    kind: str  # "rpc-endpoint" | "csv-file" | "jsonl-file"
    locator: str

    def __post_init__(self):
        if self.kind not in ("rpc-endpoint", "csv-file", "jsonl-file"):
            raise ValueError(f"unknown source kind {self.kind!r}")
        if not self.locator:
            raise ValueError("locator must be non-empty")

    @classmethod
    def from_path(cls, path: str | Path) -> "IngestSource":
        suffix = Path(path).suffix.lower()
        kind = "jsonl-file" if suffix in (".jsonl", ".ndjson") else "csv-file"
        return cls(kind, str(path))


@dataclass
class Finding:
    kind: str  # "gap" | "ordering" | "invariant"
    index: int
    detail: str


@dataclass
class ValidationReport:
    findings: list[Finding] = field(default_factory=list)

    def __bool__(self) -> bool:
        return bool(self.findings)

    def __len__(self) -> int:
        return len(self.findings)

    def of_kind(self, kind: str) -> list[Finding]:
        return [f for f in self.findings if f.kind == kind]


def validate_chain(seq: Iterable[BlockRecord]) -> ValidationReport:
    """Collect every gap, ordering violation, and record invariant breach.

    An empty report means the sequence is a valid ``BlockSequence``.
    """
    report = ValidationReport()
    prev = None
    for i, rec in enumerate(seq):
        for p in rec.problems():
            report.findings.append(Finding("invariant", i, f"block {rec.block_number}: {p}"))
        if prev is not None:
            if rec.block_number <= prev.block_number:
                report.findings.append(Finding(
                    "ordering", i,
                    f"block_number {rec.block_number} does not follow {prev.block_number}"))
            elif rec.block_number != prev.block_number + 1:
                report.findings.append(Finding(
                    "gap", i,
                    f"missing blocks {prev.block_number + 1}..{rec.block_number - 1}"))
            if rec.timestamp < prev.timestamp:
                report.findings.append(Finding(
                    "ordering", i,
                    f"timestamp {rec.timestamp} decreases from {prev.timestamp}"))
        prev = rec
    return report


# --------------------------------------------------------------------------
# JSON-RPC
# --------------------------------------------------------------------------

def decode_quantity(value, name: str = "quantity") -> int:
    """Decode a JSON-RPC hex quantity (``0x``-prefixed) to an int."""
    if not isinstance(value, str) or not value.startswith(("0x", "0X")) or len(value) < 3:
        raise DecodeError(f"{name}: expected 0x-prefixed hex string, got {value!r}")
    try:
        return int(value[2:], 16)
    except ValueError:
        raise DecodeError(f"{name}: invalid hex {value!r}") from None


def record_from_rpc(header: dict) -> BlockRecord:
    if not isinstance(header, dict):
        raise DecodeError(f"expected block object, got {type(header).__name__}")
    if header.get("baseFeePerGas") is None:
        raise DecodeError(f"block {header.get('number')} has no baseFeePerGas (pre-London block)")
    try:
        rec = BlockRecord(
            timestamp=decode_quantity(header["timestamp"], "timestamp"),
            block_number=decode_quantity(header["number"], "number"),
            gas_limit=decode_quantity(header["gasLimit"], "gasLimit"),
            gas_used=decode_quantity(header["gasUsed"], "gasUsed"),
            base_fee=decode_quantity(header["baseFeePerGas"], "baseFeePerGas"),
        )
    except KeyError as e:
        raise DecodeError(f"missing field {e.args[0]}") from None
    problems = rec.problems()
    if problems:
        raise DecodeError(f"block {rec.block_number}: " + "; ".join(problems))
    return rec


Transport = Callable[[object], object]


def http_transport(url: str, timeout: float = 30.0) -> Transport:
    """POST a JSON-RPC payload (single call or batch) and return the parsed reply."""

    def send(payload):
        body = json.dumps(payload).encode()
        req = urllib.request.Request(
            url, data=body, headers={"Content-Type": "application/json"}, method="POST")
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                raw = resp.read()
        except (urllib.error.URLError, OSError) as e:
            raise TransportError(f"{url}: {e}") from e
        try:
            return json.loads(raw)
        except json.JSONDecodeError as e:
            raise DecodeError(f"non-JSON response from {url}: {e}") from e

    return send


def _block_request(number: int, req_id: int) -> dict:
    return {"jsonrpc": "2.0", "id": req_id, "method": "eth_getBlockByNumber",
            "params": [hex(number), False]}


def _unwrap(reply, number: int) -> BlockRecord:
    if not isinstance(reply, dict):
        raise DecodeError(f"malformed JSON-RPC reply for block {number}")
    if "error" in reply and reply["error"] is not None:
        raise DecodeError(f"node error for block {number}: {reply['error']}")
    if "result" not in reply:
        raise DecodeError(f"reply for block {number} has no result")
    if reply["result"] is None:
        raise BlockNotFoundError(number)
    rec = record_from_rpc(reply["result"])
    if rec.block_number != number:
        raise DecodeError(f"asked for block {number}, node returned {rec.block_number}")
    return rec


def _as_transport(endpoint: str | Transport) -> Transport:
    return http_transport(endpoint) if isinstance(endpoint, str) else endpoint


def fetch_block(endpoint: str | Transport, number: int) -> BlockRecord:
    """Fetch one header. ``endpoint`` is a URL or a transport callable."""
    send = _as_transport(endpoint)
    return _unwrap(send(_block_request(number, 1)), number)


def _fetch_chunk(send: Transport, numbers: list[int]) -> list[BlockRecord]:
    if len(numbers) == 1:
        return [_unwrap(send(_block_request(numbers[0], 0)), numbers[0])]
    replies = send([_block_request(n, i) for i, n in enumerate(numbers)])
    if not isinstance(replies, list):
        raise DecodeError("batch request did not return a list")
    by_id = {r.get("id"): r for r in replies if isinstance(r, dict)}
    out = []
    for i, n in enumerate(numbers):
        if i not in by_id:
            raise DecodeError(f"batch reply missing block {n}")
        out.append(_unwrap(by_id[i], n))
    return out


def fetch_range(
    endpoint: str | Transport,
    start: int,
    end: int,
    *,
    width: int = 4,
    batch_size: int = 100,
    attempts: int = RETRY_ATTEMPTS,
    base_delay: float = RETRY_BASE_DELAY,
    sleep: Callable[[float], None] = time.sleep,
) -> BlockSequence:
    """Fetch the inclusive range ``[start, end]`` as a gap-free sequence.

    Blocks are requested in JSON-RPC batches of ``batch_size`` with up to
    ``width`` batches in flight. A failing batch is retried with exponential
    backoff (``base_delay * 2**i``); when attempts run out the whole call
    fails with ``PartialRangeError`` naming the first block not obtained.
    """
    if start > end:
        raise ValueError(f"start {start} > end {end}")
    if start < 0:
        raise ValueError("block numbers are non-negative")
    send = _as_transport(endpoint)
    numbers = list(range(start, end + 1))
    chunks = [numbers[i:i + batch_size] for i in range(0, len(numbers), batch_size)]

    def with_retry(chunk):
        for attempt in range(attempts):
            try:
                return _fetch_chunk(send, chunk)
            except (TransportError, DecodeError, BlockNotFoundError) as e:
                if attempt == attempts - 1:
                    return e
                delay = base_delay * 2 ** attempt
                log.warning("blocks %d..%d attempt %d failed (%s); retrying in %.2fs",
                            chunk[0], chunk[-1], attempt + 1, e, delay)
                sleep(delay)

    with ThreadPoolExecutor(max_workers=max(1, width)) as pool:
        results = list(pool.map(with_retry, chunks))

    records: list[BlockRecord] = []
    for chunk, res in zip(chunks, results):
        if isinstance(res, Exception):
            raise PartialRangeError(chunk[0], res)
        records.extend(res)
    return BlockSequence(records)


# --------------------------------------------------------------------------
# Flat files
# --------------------------------------------------------------------------

def _parse_int(raw, name: str, line: int) -> int:
    if isinstance(raw, bool):
        raise ImportValidationError(line, f"{name}: expected integer, got {raw!r}")
    if isinstance(raw, int):
        return raw
    try:
        return int(str(raw).strip(), 10)
    except ValueError:
        raise ImportValidationError(line, f"{name}: expected decimal integer, got {raw!r}") from None


def _rows(source: IngestSource) -> Iterator[tuple[int, dict]]:
    path = Path(source.locator)
    if source.kind == "csv-file":
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != COLUMNS:
                raise ImportValidationError(1, f"header {reader.fieldnames} does not match {list(COLUMNS)}")
            for row in reader:
                yield reader.line_num, row
    elif source.kind == "jsonl-file":
        with path.open() as fh:
            for lineno, text in enumerate(fh, 1):
                if not text.strip():
                    continue
                try:
                    obj = json.loads(text)
                except json.JSONDecodeError as e:
                    raise ImportValidationError(lineno, f"invalid JSON: {e}") from None
                if not isinstance(obj, dict) or set(obj) != set(COLUMNS):
                    raise ImportValidationError(lineno, f"keys must be exactly {list(COLUMNS)}")
                yield lineno, obj
    else:
        raise ValueError(f"{source.kind} is not a file source; use fetch_range")


def import_blocks(source: IngestSource | str | Path) -> BlockSequence:
    """Read and validate a block file; any invalid row aborts with its line number."""
    if not isinstance(source, IngestSource):
        source = IngestSource.from_path(source)
    records: list[BlockRecord] = []
    for line, row in _rows(source):
        rec = BlockRecord(**{c: _parse_int(row[c], c, line) for c in COLUMNS})
        problems = rec.problems()
        if problems:
            raise ImportValidationError(line, "; ".join(problems))
        if records:
            prev = records[-1]
            if rec.block_number == prev.block_number:
                raise ImportValidationError(line, f"duplicate block_number {rec.block_number}")
            if rec.block_number < prev.block_number:
                raise ImportValidationError(line, f"block_number {rec.block_number} out of order")
            if rec.block_number != prev.block_number + 1:
                raise ImportValidationError(
                    line, f"gap: block {prev.block_number + 1} missing before {rec.block_number}")
            if rec.timestamp < prev.timestamp:
                raise ImportValidationError(line, f"timestamp {rec.timestamp} decreases")
        records.append(rec)
    return BlockSequence(records)


def export_blocks(seq: Iterable[BlockRecord], path: str | Path, format: str = "csv") -> None:
    path = Path(path)
    if format == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=COLUMNS)
            writer.writeheader()
            for rec in seq:
                writer.writerow(rec.as_row())
    elif format == "jsonl":
        with path.open("w") as fh:
            for rec in seq:
                fh.write(json.dumps(rec.as_row()) + "\n")
    else:
        raise ValueError(f"unknown format {format!r}")
