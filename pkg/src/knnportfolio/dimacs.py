"""DIMACS CNF reading and writing.

Only the plain ``p cnf`` dialect is supported. Clauses are kept exactly as
written, duplicate literals and tautologies included, because every
downstream feature is an occurrence count.
"""

from __future__ import annotations

import bz2
import gzip
import io
import logging
import lzma
import os
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence, Union

import numpy as np

from .exceptions import (
    EmptyClause,
    LiteralOutOfRange,
    MalformedProblemLine,
    MissingProblemLine,
    NoClauses,
    NonIntegerToken,
)

logger = logging.getLogger(__name__)

Source = Union[bytes, bytearray, memoryview, str, IO[bytes], IO[str]]

_OPENERS = {".gz": gzip.open, ".bz2": bz2.open, ".xz": lzma.open, ".lzma": lzma.open}


@dataclass(frozen=True)
class CnfInstance:
    """An immutable clause set with its declared variable count.

    ``literals`` and ``clause_lengths`` are the flat int64 view of
    ``clauses`` used by feature extraction; they are derived, read-only and
    excluded from equality.
    """

    num_vars: int
    clauses: tuple
    source_path: str = field(default="", compare=False)
    literals: np.ndarray = field(init=False, repr=False, compare=False)
    clause_lengths: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        clauses = tuple(tuple(int(lit) for lit in clause) for clause in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        lengths = np.fromiter((len(c) for c in clauses), dtype=np.int64, count=len(clauses))
        lits = np.fromiter(
            (lit for c in clauses for lit in c), dtype=np.int64, count=int(lengths.sum())
        )
        self._set_flat(lits, lengths)

    def _set_flat(self, lits, lengths):
        if self.num_vars < 1:
            raise ValueError(f"num_vars must be >= 1, got {self.num_vars}")
        if lengths.size == 0:
            raise ValueError("a CNF instance needs at least one clause")
        if (lengths == 0).any():
            raise ValueError("empty clause in CNF instance")
        mags = np.abs(lits)
        if (mags == 0).any() or mags.max() > self.num_vars:
            raise ValueError(f"literal outside 1..{self.num_vars}")
        lits.setflags(write=False)
        lengths.setflags(write=False)
        object.__setattr__(self, "literals", lits)
        object.__setattr__(self, "clause_lengths", lengths)

    @classmethod
    def _from_flat(cls, num_vars, lits, lengths, source_path=""):
        flat = lits.tolist()
        ends = np.cumsum(lengths).tolist()
        starts = [0] + ends[:-1]
        clauses = tuple(tuple(flat[a:b]) for a, b in zip(starts, ends))
        self = object.__new__(cls)
        object.__setattr__(self, "num_vars", int(num_vars))
        object.__setattr__(self, "clauses", clauses)
        object.__setattr__(self, "source_path", source_path)
        self._set_flat(lits, lengths)
        return self

    @property
    def num_clauses(self) -> int:
        return len(self.clauses)


def _read_text(source: Source) -> str:
    data = source.read() if hasattr(source, "read") else source
    if isinstance(data, (bytes, bytearray, memoryview)):
        # latin-1 never fails; the format itself is ASCII
        return bytes(data).decode("latin-1")
    return data


def _parse_header(line: str, lineno: int, source_path: str):
    parts = line.split()
    if len(parts) != 4 or parts[0] != "p" or parts[1].lower() != "cnf":
        raise MalformedProblemLine(
            f"expected 'p cnf <vars> <clauses>', got {line.strip()!r}", lineno, source_path
        )
    try:
        num_vars, num_clauses = int(parts[2]), int(parts[3])
    except ValueError:
        raise MalformedProblemLine(
            f"non-integer count in problem line {line.strip()!r}", lineno, source_path
        ) from None
    if num_vars < 1 or num_clauses < 0:
        raise MalformedProblemLine(
            f"problem line declares {num_vars} variables, need at least 1", lineno, source_path
        )
    return num_vars, num_clauses


def _is_skipped(stripped: str) -> bool:
    return not stripped or stripped[0] == "c"


def _slow_scan(lines: Sequence[str], start: int, num_vars: int, source_path: str):
    """Line-by-line pass that raises the first error with its line number."""
    pending = False
    for idx in range(start, len(lines)):
        stripped = lines[idx].strip()
        if _is_skipped(stripped):
            continue
        if stripped[0] == "%":
            break
        for tok in stripped.split():
            try:
                lit = int(tok)
            except ValueError:
                raise NonIntegerToken(f"not an integer: {tok!r}", idx + 1, source_path) from None
            if lit == 0:
                if not pending:
                    raise EmptyClause("clause terminator with no literals", idx + 1, source_path)
                pending = False
            elif abs(lit) > num_vars:
                raise LiteralOutOfRange(
                    f"literal {lit} exceeds declared {num_vars} variables", idx + 1, source_path
                )
            else:
                pending = True
    raise NoClauses("no clauses after problem line", None, source_path)


def parse_dimacs(source: Source, source_path: str = "") -> CnfInstance:
    """Parse DIMACS CNF from bytes, text, or a readable stream.

    Comment lines may appear anywhere. A line starting with ``%`` ends the
    clause section (SATLIB convention). A final clause without its ``0``
    terminator is accepted.
    """
    if not source_path:
        source_path = str(getattr(source, "name", "") or "")
    lines = _read_text(source).split("\n")

    header = None
    body_start = len(lines)
    for idx, line in enumerate(lines):
        stripped = line.strip()
        if _is_skipped(stripped):
            continue
        if stripped[0] == "p":
            header = _parse_header(stripped, idx + 1, source_path)
            body_start = idx + 1
            break
        raise MissingProblemLine("clause data before problem line", idx + 1, source_path)
    if header is None:
        raise MissingProblemLine("no 'p cnf' problem line found", None, source_path)
    num_vars, declared_clauses = header

    kept = []
    for line in lines[body_start:]:
        stripped = line.lstrip()
        if stripped and stripped[0] in "c%":
            if stripped[0] == "%":
                break
            continue
        kept.append(line)

    tokens = " ".join(kept).split()
    try:
        values = np.array(tokens, dtype=np.int64)
    except (ValueError, OverflowError):
        _slow_scan(lines, body_start, num_vars, source_path)
        raise  # pragma: no cover - _slow_scan always raises here
    if values.size == 0:
        raise NoClauses("no clauses after problem line", None, source_path)

    zero_pos = np.flatnonzero(values == 0)
    ends = zero_pos
    if values[-1] != 0:
        ends = np.append(zero_pos, values.size)
    starts = np.concatenate(([0], zero_pos + 1))[: ends.size]
    lengths = ends - starts
    if (lengths == 0).any() or np.abs(values).max() > num_vars:
        _slow_scan(lines, body_start, num_vars, source_path)
    lits = values[values != 0]

    if lengths.size != declared_clauses:
        logger.warning(
            "%s: problem line declares %d clauses, found %d",
            source_path or "<input>", declared_clauses, lengths.size,
        )
    return CnfInstance._from_flat(num_vars, lits, lengths.astype(np.int64), source_path)


def parse_file(path: Union[str, os.PathLike]) -> CnfInstance:
    """Parse a DIMACS file, transparently decompressing .gz/.bz2/.xz."""
    path = os.fspath(path)
    opener = _OPENERS.get(os.path.splitext(path)[1].lower(), open)
    with opener(path, "rb") as fh:
        return parse_dimacs(fh.read(), source_path=path)


def to_dimacs(instance: CnfInstance, comments: Iterable[str] = ()) -> str:
    out = io.StringIO()
    for comment in comments:
        out.write(f"c {comment}\n")
    out.write(f"p cnf {instance.num_vars} {instance.num_clauses}\n")
    for clause in instance.clauses:
        out.write(" ".join(map(str, clause)))
        out.write(" 0\n")
    return out.getvalue()


def write_dimacs(instance: CnfInstance, path: Union[str, os.PathLike]) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(to_dimacs(instance))
