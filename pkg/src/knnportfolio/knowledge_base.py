"""The training set: features, per-solver runtime outcomes and categories.

A knowledge base (KB) is persisted as a versioned CSV file::

    #knnportfolio-kb v1 cutoff=1500.0
    instance,category,f01,...,f29,<solver1>,...,<solverN>
    <rows>
    #sha256=<hex digest of every preceding byte>

Outcome cells hold the solving time in seconds, ``T`` for a timeout or ``F``
for a failed run. Floats are written with ``repr`` so a save/load round
trip is bit-exact. Solver command lines live in a sidecar manifest,
``<kb path>.solvers.tsv``, one ``solver-id<TAB>argv template`` per line.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import io
import logging
import math
import os
import re
import shlex
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .dimacs import parse_file
from .exceptions import (
    ChecksumMismatch,
    EmptyKnowledgeBase,
    FormatVersionMismatch,
    KTooLarge,
    MalformedRow,
    MissingCnfAndFeatures,
    SchemaError,
)
from .features import FEATURE_COLUMNS, N_FEATURES, check_feature_vector, extract_features
from .metrics import DistanceKind, DistanceVariant, RuntimeOutcome, Status, par10

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MAGIC = "#knnportfolio-kb"
CHECKSUM_PREFIX = "#sha256="
EXTERNAL = "EXTERNAL"
RESERVED_COLUMNS = ("instance", "category") + FEATURE_COLUMNS
CNF_SUFFIXES = ("", ".cnf", ".cnf.gz", ".cnf.bz2", ".cnf.xz", ".gz", ".bz2", ".xz")

_HEADER_RE = re.compile(r"^#knnportfolio-kb v(\d+) cutoff=(\S+)$")


class Category(enum.Enum):
    RANDOM = "random"
    CRAFTED = "crafted"
    INDUSTRIAL = "industrial"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, text) -> "Category":
        if isinstance(text, cls):
            return text
        key = (text or "").strip().lower()
        aliases = {
            "": cls.UNKNOWN, "unknown": cls.UNKNOWN,
            "random": cls.RANDOM, "rnd": cls.RANDOM, "rand": cls.RANDOM,
            "crafted": cls.CRAFTED, "crf": cls.CRAFTED, "handmade": cls.CRAFTED,
            "industrial": cls.INDUSTRIAL, "ind": cls.INDUSTRIAL, "application": cls.INDUSTRIAL,
            "app": cls.INDUSTRIAL,
        }
        if key not in aliases:
            raise ValueError(f"unknown category {text!r}")
        return aliases[key]


@dataclass(frozen=True)
class InstanceRecord:
    instance_id: str
    category: Category
    features: Tuple[float, ...]
    outcomes: Mapping[str, RuntimeOutcome]

    def __post_init__(self):
        iid = self.instance_id
        if not iid or iid.startswith("#") or "\n" in iid or "\r" in iid:
            raise ValueError(f"invalid instance id {iid!r}")
        arr = check_feature_vector(self.features)
        object.__setattr__(self, "features", tuple(float(v) for v in arr))
        object.__setattr__(self, "category", Category.parse(self.category))
        object.__setattr__(self, "outcomes", dict(self.outcomes))

    @property
    def solved_by_any(self) -> bool:
        return any(o.is_solved for o in self.outcomes.values())


@dataclass(frozen=True)
class DroppedRow:
    row: int
    instance_id: str
    reason: str


@dataclass(frozen=True)
class KnowledgeBase:
    """Immutable training set. Records are kept sorted by instance id.

    ``executables`` maps each solver to its argv template, or None for
    solvers that are only known through recorded runtimes.
    """

    cutoff_seconds: float
    solvers: Tuple[str, ...]
    records: Tuple[InstanceRecord, ...]
    executables: Mapping[str, Optional[Tuple[str, ...]]] = field(default_factory=dict)
    dropped: Tuple[DroppedRow, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        cutoff = float(self.cutoff_seconds)
        if not (cutoff > 0 and math.isfinite(cutoff)):
            raise ValueError(f"cutoff must be positive and finite, got {self.cutoff_seconds!r}")
        object.__setattr__(self, "cutoff_seconds", cutoff)
        solvers = tuple(str(s) for s in self.solvers)
        if not solvers:
            raise ValueError("a knowledge base needs at least one solver")
        if len(set(solvers)) != len(solvers):
            raise ValueError("solver ids must be distinct")
        for s in solvers:
            _check_solver_id(s)
        object.__setattr__(self, "solvers", solvers)

        records = tuple(sorted(self.records, key=lambda r: r.instance_id))
        seen = set()
        expected = set(solvers)
        for rec in records:
            if rec.instance_id in seen:
                raise ValueError(f"duplicate instance id {rec.instance_id!r}")
            seen.add(rec.instance_id)
            if set(rec.outcomes) != expected:
                raise ValueError(f"{rec.instance_id!r}: outcomes must cover exactly {solvers}")
            if not rec.solved_by_any:
                raise ValueError(f"{rec.instance_id!r} is solved by no solver")
            for o in rec.outcomes.values():
                if o.is_solved and o.time_seconds > cutoff:
                    raise ValueError(f"{rec.instance_id!r}: solved time above cutoff")
        object.__setattr__(self, "records", records)

        exe = {s: None for s in solvers}
        for s, argv in dict(self.executables).items():
            if s not in exe:
                raise ValueError(f"executable given for unknown solver {s!r}")
            exe[s] = None if argv is None else tuple(argv)
        object.__setattr__(self, "executables", exe)

    def __len__(self):
        return len(self.records)

    @cached_property
    def instance_ids(self) -> Tuple[str, ...]:
        return tuple(r.instance_id for r in self.records)

    @cached_property
    def feature_matrix(self) -> np.ndarray:
        X = np.array([r.features for r in self.records], dtype=np.float64).reshape(-1, N_FEATURES)
        X.setflags(write=False)
        return X

    @cached_property
    def penalty_matrix(self) -> np.ndarray:
        """PAR10 penalty per (record, solver)."""
        P = np.array(
            [[par10(r.outcomes[s], self.cutoff_seconds) for s in self.solvers] for r in self.records],
            dtype=np.float64,
        ).reshape(-1, len(self.solvers))
        P.setflags(write=False)
        return P

    @cached_property
    def global_penalties(self) -> Tuple[float, ...]:
        P = self.penalty_matrix
        return tuple(math.fsum(P[:, j]) for j in range(P.shape[1]))

    def distance(self, dist=DistanceVariant.ARGOSMART) -> DistanceKind:
        """Resolve ``dist`` (variant, name or DistanceKind) against this KB."""
        if isinstance(dist, DistanceKind):
            return dist
        if not self.records:
            raise EmptyKnowledgeBase("knowledge base has no records")
        return DistanceKind.for_features(dist, self.feature_matrix)

    def without(self, index: int) -> "KnowledgeBase":
        records = self.records[:index] + self.records[index + 1:]
        return KnowledgeBase(self.cutoff_seconds, self.solvers, records, self.executables)

    def with_cutoff(self, cutoff: float) -> "KnowledgeBase":
        """Re-score against a new cutoff; solved times above it become timeouts.

        Records nobody solves under the new cutoff are dropped with a warning.
        """
        cutoff = float(cutoff)
        kept, dropped = [], list(self.dropped)
        for idx, rec in enumerate(self.records):
            outcomes = {
                s: (RuntimeOutcome.timeout() if o.is_solved and o.time_seconds > cutoff else o)
                for s, o in rec.outcomes.items()
            }
            new = InstanceRecord(rec.instance_id, rec.category, rec.features, outcomes)
            if new.solved_by_any:
                kept.append(new)
            else:
                logger.warning("dropping %s: unsolved within cutoff %g", rec.instance_id, cutoff)
                dropped.append(DroppedRow(idx + 1, rec.instance_id, "unsolved"))
        return KnowledgeBase(cutoff, self.solvers, tuple(kept), self.executables, tuple(dropped))


def _check_solver_id(s: str) -> None:
    if not s or s != s.strip() or any(ch in s for ch in "\t\n\r,\"") or s.startswith("#"):
        raise ValueError(f"invalid solver id {s!r}")
    if s in RESERVED_COLUMNS:
        raise ValueError(f"solver id {s!r} collides with a reserved column")


# -- nearest neighbours -----------------------------------------------------

def neighbor_order(X: np.ndarray, f, dist: DistanceKind) -> Tuple[np.ndarray, np.ndarray]:
    """All row indices of ``X`` sorted by distance to ``f``, plus distances.

    The sort is stable, so rows at equal distance stay in index order, which
    for a KB is instance-id order.
    """
    d = dist.to_matrix(X, f)
    order = np.argsort(d, kind="stable")
    return order, d[order]


def nearest_neighbors(kb: KnowledgeBase, f, k: int, dist=DistanceVariant.ARGOSMART
                      ) -> List[InstanceRecord]:
    """The ``k`` records closest to ``f``, nearest first, ties by instance id."""
    return [kb.records[i] for i in nearest_indices(kb, f, k, dist)[0]]


def nearest_indices(kb: KnowledgeBase, f, k: int, dist=DistanceVariant.ARGOSMART):
    if not kb.records:
        raise EmptyKnowledgeBase("knowledge base has no records")
    k = int(k)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > len(kb):
        raise KTooLarge(f"k={k} exceeds the {len(kb)} training records")
    f = check_feature_vector(f)
    order, d = neighbor_order(kb.feature_matrix, f, kb.distance(dist))
    return order[:k], d[:k]


# -- building from runtime tables -------------------------------------------

def parse_outcome_cell(text: str, cutoff: float, strict: bool = False) -> RuntimeOutcome:
    """Decode one runtime cell.

    Strict mode accepts only the KB encoding (seconds, ``T``, ``F``). The
    lenient mode used for ingesting runtime tables also accepts spelled-out
    statuses and treats times above the cutoff as timeouts.
    """
    cell = text.strip()
    if cell == "T":
        return RuntimeOutcome.timeout()
    if cell == "F":
        return RuntimeOutcome.failed()
    if not strict:
        upper = cell.upper()
        if upper in ("TIMEOUT", "TO", "TIME", "INF"):
            return RuntimeOutcome.timeout()
        if upper in ("FAILED", "FAIL", "CRASH", "MEMOUT", "ERROR", "NAN"):
            return RuntimeOutcome.failed()
    try:
        seconds = float(cell)
    except ValueError:
        raise ValueError(f"unrecognised outcome {text!r}") from None
    if not math.isfinite(seconds) or seconds < 0:
        raise ValueError(f"invalid solving time {text!r}")
    if seconds > cutoff:
        if strict:
            raise ValueError(f"solved time {seconds} exceeds cutoff {cutoff}")
        return RuntimeOutcome.timeout()
    return RuntimeOutcome.solved(seconds)


def format_outcome(outcome: RuntimeOutcome) -> str:
    if outcome.status is Status.SOLVED:
        return repr(outcome.time_seconds)
    return "T" if outcome.status is Status.TIMEOUT else "F"


def find_cnf(cnf_dir, instance_id: str) -> Optional[str]:
    for suffix in CNF_SUFFIXES:
        candidate = os.path.join(cnf_dir, instance_id + suffix)
        if os.path.isfile(candidate):
            return candidate
    return None


def _features_of_file(path: str) -> Tuple[float, ...]:
    return tuple(extract_features(parse_file(path)).tolist())


def _read_table(runtime_table) -> Tuple[List[str], List[Tuple[int, List[str]]]]:
    if isinstance(runtime_table, (str, os.PathLike)):
        with open(runtime_table, newline="", encoding="utf-8") as fh:
            return _read_table(fh)
    if hasattr(runtime_table, "read"):
        reader = csv.reader(line for line in runtime_table if not line.startswith("#"))
        rows = list(reader)
        if not rows:
            raise SchemaError("runtime table is empty")
        header = [h.strip() for h in rows[0]]
        return header, [(i + 2, r) for i, r in enumerate(rows[1:]) if any(c.strip() for c in r)]
    # iterable of mappings
    dict_rows = list(runtime_table)
    if not dict_rows:
        raise SchemaError("runtime table is empty")
    header = list(dict_rows[0].keys())
    return header, [(i + 1, [str(d.get(h, "")) for h in header]) for i, d in enumerate(dict_rows)]


def build_kb(runtime_table, cnf_dir=None, cutoff: float = 1500.0,
             executables: Optional[Mapping[str, Optional[Sequence[str]]]] = None,
             jobs: int = 1) -> KnowledgeBase:
    """Ingest a runtime table into a KnowledgeBase.

    Parameters
    ----------
    runtime_table : path, text stream, or iterable of dicts
        Columns ``instance``, optional ``category``, optional ``f01``..``f29``,
        then one column per solver.
    cnf_dir : path, optional
        Where to find ``<instance>[.cnf[.gz|.bz2|.xz]]`` for rows without
        feature values.
    cutoff : float
        Per-run time limit; recorded times above it count as timeouts.
    jobs : int
        Worker processes used for feature extraction.

    Duplicate instance ids (after the first) and rows solved by no solver are
    dropped with a logged warning and listed in ``kb.dropped``.
    """
    header, rows = _read_table(runtime_table)
    if "instance" not in header:
        raise SchemaError("runtime table needs an 'instance' column")
    feat_cols = [c for c in header if c in FEATURE_COLUMNS]
    if feat_cols and len(feat_cols) != N_FEATURES:
        raise SchemaError(f"runtime table has {len(feat_cols)} of the {N_FEATURES} feature columns")
    solvers = [c for c in header if c not in RESERVED_COLUMNS]
    if not solvers:
        raise SchemaError("runtime table has no solver columns")
    col = {name: i for i, name in enumerate(header)}

    pending = []
    seen = set()
    dropped = []
    for rowno, cells in rows:
        if len(cells) != len(header):
            raise MalformedRow(f"expected {len(header)} cells, got {len(cells)}", rowno)
        iid = cells[col["instance"]].strip()
        if not iid:
            raise MalformedRow("empty instance id", rowno)
        try:
            category = Category.parse(cells[col["category"]]) if "category" in col else Category.UNKNOWN
            outcomes = {s: parse_outcome_cell(cells[col[s]], cutoff) for s in solvers}
        except ValueError as exc:
            raise MalformedRow(str(exc), rowno) from None
        if iid in seen:
            logger.warning("row %d: dropping duplicate instance %s", rowno, iid)
            dropped.append(DroppedRow(rowno, iid, "duplicate"))
            continue
        seen.add(iid)
        if not any(o.is_solved for o in outcomes.values()):
            logger.warning("row %d: dropping %s, solved by no solver within %gs", rowno, iid, cutoff)
            dropped.append(DroppedRow(rowno, iid, "unsolved"))
            continue

        features = None
        if feat_cols:
            raw = [cells[col[c]].strip() for c in FEATURE_COLUMNS]
            if all(raw):
                try:
                    features = tuple(check_feature_vector([float(v) for v in raw]).tolist())
                except ValueError as exc:
                    raise MalformedRow(f"bad feature values: {exc}", rowno) from None
            elif any(raw):
                raise MalformedRow("feature columns partially filled", rowno)
        path = None
        if features is None:
            path = find_cnf(cnf_dir, iid) if cnf_dir is not None else None
            if path is None:
                raise MissingCnfAndFeatures(
                    f"row {rowno}: no feature columns and no CNF file for {iid!r}"
                    + (f" in {cnf_dir}" if cnf_dir is not None else "")
                )
        pending.append((iid, category, features, path, outcomes))

    todo = [p[3] for p in pending if p[2] is None]
    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            computed = dict(zip(todo, pool.map(_features_of_file, todo)))
    else:
        computed = {path: _features_of_file(path) for path in todo}

    records = [
        InstanceRecord(iid, cat, feats if feats is not None else computed[path], outcomes)
        for iid, cat, feats, path, outcomes in pending
    ]
    return KnowledgeBase(cutoff, tuple(solvers), tuple(records), executables or {}, tuple(dropped))


# -- persistence ------------------------------------------------------------

def manifest_path(kb_path) -> str:
    return os.fspath(kb_path) + ".solvers.tsv"


def dumps_kb(kb: KnowledgeBase) -> str:
    out = io.StringIO()
    out.write(f"{MAGIC} v{FORMAT_VERSION} cutoff={kb.cutoff_seconds!r}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(list(RESERVED_COLUMNS) + list(kb.solvers))
    for rec in kb.records:
        writer.writerow(
            [rec.instance_id, rec.category.value]
            + [repr(v) for v in rec.features]
            + [format_outcome(rec.outcomes[s]) for s in kb.solvers]
        )
    body = out.getvalue()
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    return f"{body}{CHECKSUM_PREFIX}{digest}\n"


def loads_kb(text: str, executables=None) -> KnowledgeBase:
    """Parse the v1 CSV text. A trailing checksum line is verified if present."""
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SchemaError("empty knowledge base file")
    if lines[-1].startswith(CHECKSUM_PREFIX):
        body = "\n".join(lines[:-1]) + "\n"
        expected = lines[-1][len(CHECKSUM_PREFIX):].strip()
        actual = hashlib.sha256(body.encode("utf-8")).hexdigest()
        if actual != expected:
            raise ChecksumMismatch(f"checksum {actual} does not match recorded {expected}")
        lines = lines[:-1]

    match = _HEADER_RE.match(lines[0])
    if not match:
        if lines[0].startswith(MAGIC):
            raise FormatVersionMismatch(f"unreadable format line {lines[0]!r}")
        raise SchemaError(f"not a knnportfolio knowledge base: {lines[0][:60]!r}")
    version = int(match.group(1))
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(f"KB format v{version}, this reader wants v{FORMAT_VERSION}")
    try:
        cutoff = float(match.group(2))
    except ValueError:
        raise SchemaError(f"bad cutoff {match.group(2)!r}") from None

    rows = list(csv.reader(lines[1:]))
    if not rows:
        raise SchemaError("missing column header")
    header = rows[0]
    if tuple(header[: len(RESERVED_COLUMNS)]) != RESERVED_COLUMNS or len(header) <= len(RESERVED_COLUMNS):
        raise SchemaError("column header must be instance,category,f01..f29,<solvers>")
    solvers = tuple(header[len(RESERVED_COLUMNS):])
    n_feat_end = 2 + N_FEATURES

    records = []
    for lineno, cells in enumerate(rows[1:], start=3):
        if len(cells) != len(header):
            raise SchemaError(f"line {lineno}: expected {len(header)} cells, got {len(cells)}")
        try:
            records.append(InstanceRecord(
                cells[0],
                Category.parse(cells[1]),
                tuple(float(v) for v in cells[2:n_feat_end]),
                {s: parse_outcome_cell(c, cutoff, strict=True)
                 for s, c in zip(solvers, cells[n_feat_end:])},
            ))
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from None
    try:
        return KnowledgeBase(cutoff, solvers, tuple(records), executables or {})
    except ValueError as exc:
        raise SchemaError(str(exc)) from None


def save_kb(kb: KnowledgeBase, path) -> None:
    """Write the KB file and its solver manifest sidecar."""
    data = dumps_kb(kb).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(data)
    save_manifest(kb.executables, manifest_path(path), kb.solvers)


def load_kb(path, manifest=None) -> KnowledgeBase:
    """Read a KB file; solver commands come from ``manifest`` or the sidecar."""
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    if manifest is None and os.path.exists(manifest_path(path)):
        manifest = manifest_path(path)
    executables = load_manifest(manifest) if manifest is not None else {}
    kb = loads_kb(text)
    unknown = set(executables) - set(kb.solvers)
    if unknown:
        logger.warning("manifest lists solvers absent from the KB: %s", ", ".join(sorted(unknown)))
    exe = {s: v for s, v in executables.items() if s in kb.solvers}
    return KnowledgeBase(kb.cutoff_seconds, kb.solvers, kb.records, exe)


def load_manifest(path) -> Dict[str, Optional[Tuple[str, ...]]]:
    """Parse ``solver-id<TAB>argv template`` lines; ``EXTERNAL`` means no command."""
    out: Dict[str, Optional[Tuple[str, ...]]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if "\t" not in line:
                raise SchemaError(f"{path}:{lineno}: expected solver-id<TAB>command")
            sid, template = line.split("\t", 1)
            template = template.strip()
            out[sid.strip()] = None if template == EXTERNAL else tuple(shlex.split(template))
    return out


def save_manifest(executables: Mapping[str, Optional[Sequence[str]]], path,
                  order: Iterable[str] = ()) -> None:
    order = list(order) or sorted(executables)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for sid in order:
            argv = executables.get(sid)
            fh.write(f"{sid}\t{EXTERNAL if argv is None else shlex.join(argv)}\n")
