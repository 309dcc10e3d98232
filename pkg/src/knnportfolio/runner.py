"""Supervised execution of external SAT solvers.

Each solver runs in its own session (process group) so that a timeout can
take down everything it spawned. Exit is observed by a thread blocked in
``waitpid``; the supervisor sleeps on an Event with the cutoff as timeout,
so nothing polls.
"""

from __future__ import annotations

import enum
import logging
import os
import shutil
import signal
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field
from typing import List, Mapping, Optional, Sequence, Tuple

from .dimacs import parse_file
from .exceptions import AllSolversFailed, ExecutableNotFound, SpawnFailure
from .features import extract_features
from .knowledge_base import KnowledgeBase
from .metrics import DistanceVariant, RuntimeOutcome, Status
from .selector import DEFAULT_K, SelectionResult, rank_solvers, select_solver

logger = logging.getLogger(__name__)

PLACEHOLDER = "{cnf}"
DEFAULT_GRACE = 1.0
EXIT_SAT = 10
EXIT_UNSAT = 20


class Answer(enum.Enum):
    SAT = "SAT"
    UNSAT = "UNSAT"
    UNKNOWN = "UNKNOWN"

    @property
    def exit_code(self) -> int:
        return {Answer.SAT: EXIT_SAT, Answer.UNSAT: EXIT_UNSAT}.get(self, 0)


def build_command(template: Sequence[str], cnf_path: str) -> List[str]:
    """Substitute ``{cnf}``; without a placeholder the path is appended."""
    if not template:
        raise ExecutableNotFound("empty solver command")
    if any(PLACEHOLDER in arg for arg in template):
        return [arg.replace(PLACEHOLDER, cnf_path) for arg in template]
    return list(template) + [cnf_path]


def _answer_from_output(stdout: bytes) -> Answer:
    for raw in stdout.splitlines():
        line = raw.strip()
        if line == b"s SATISFIABLE":
            return Answer.SAT
        if line == b"s UNSATISFIABLE":
            return Answer.UNSAT
    return Answer.UNKNOWN


@dataclass(frozen=True)
class RunResult:
    outcome: RuntimeOutcome
    answer: Answer
    wall_seconds: float
    returncode: Optional[int]


def _signal_group(pgid: int, sig) -> None:
    try:
        os.killpg(pgid, sig)
    except (ProcessLookupError, PermissionError):
        pass


def run_solver(template: Sequence[str], cnf_path, cutoff: float,
               grace: float = DEFAULT_GRACE) -> RunResult:
    """Run one solver on ``cnf_path`` under a wall-clock cutoff.

    Exit code 10/20 means SAT/UNSAT; exit 0 is accepted when stdout carries
    an ``s SATISFIABLE`` or ``s UNSATISFIABLE`` line. Anything else is a
    FAILED run. Past the cutoff the process group gets SIGTERM, then SIGKILL
    after ``grace`` seconds, and the run is a TIMEOUT.
    """
    if not cutoff > 0:
        raise ValueError(f"cutoff must be positive, got {cutoff!r}")
    argv = build_command(template, os.fspath(cnf_path))
    if shutil.which(argv[0]) is None:
        raise ExecutableNotFound(f"solver executable not found: {argv[0]!r}")

    with tempfile.TemporaryFile() as out:
        exited = threading.Event()
        finished_at = []
        start = time.perf_counter()
        try:
            proc = subprocess.Popen(argv, stdout=out, stderr=subprocess.DEVNULL,
                                    stdin=subprocess.DEVNULL, start_new_session=True)
        except OSError as exc:
            raise SpawnFailure(f"cannot start {argv[0]!r}: {exc}") from exc

        def _wait():
            proc.wait()
            finished_at.append(time.perf_counter())
            exited.set()

        waiter = threading.Thread(target=_wait, daemon=True)
        waiter.start()
        timed_out = False
        try:
            if not exited.wait(cutoff):
                timed_out = True
                _signal_group(proc.pid, signal.SIGTERM)
                if not exited.wait(grace):
                    _signal_group(proc.pid, signal.SIGKILL)
                    exited.wait()
        finally:
            if not exited.is_set():
                _signal_group(proc.pid, signal.SIGKILL)
                exited.wait()
            # leftovers the solver forked into its group
            _signal_group(proc.pid, signal.SIGKILL)
            waiter.join()

        elapsed = finished_at[0] - start
        if timed_out or elapsed > cutoff:
            return RunResult(RuntimeOutcome.timeout(), Answer.UNKNOWN, elapsed, proc.returncode)

        code = proc.returncode
        if code == EXIT_SAT:
            answer = Answer.SAT
        elif code == EXIT_UNSAT:
            answer = Answer.UNSAT
        elif code == 0:
            out.seek(0)
            answer = _answer_from_output(out.read())
        else:
            answer = Answer.UNKNOWN
        if answer is Answer.UNKNOWN:
            return RunResult(RuntimeOutcome.failed(), Answer.UNKNOWN, elapsed, code)
        return RunResult(RuntimeOutcome.solved(elapsed), answer, elapsed, code)


@dataclass(frozen=True)
class Attempt:
    solver_id: str
    outcome: RuntimeOutcome
    answer: Answer
    wall_seconds: float


@dataclass(frozen=True)
class SolveReport:
    solver_id: str
    outcome: RuntimeOutcome
    answer: Answer
    feature_time_seconds: float
    selection: SelectionResult
    attempts: Tuple[Attempt, ...] = field(default=())

    @property
    def fallback_chain(self) -> List[Tuple[str, RuntimeOutcome]]:
        """Attempts that preceded the final one."""
        return [(a.solver_id, a.outcome) for a in self.attempts[:-1]]

    @property
    def total_seconds(self) -> float:
        return self.feature_time_seconds + sum(a.wall_seconds for a in self.attempts)

    def render(self) -> str:
        lines = [
            f"solver\t{self.solver_id}",
            f"answer\t{self.answer.value}",
            f"outcome\t{self.outcome}",
            f"feature_seconds\t{self.feature_time_seconds:.6f}",
        ]
        for a in self.attempts:
            lines.append(f"attempt\t{a.solver_id}\t{a.outcome}\t{a.wall_seconds:.6f}")
        lines.append(f"total_seconds\t{self.total_seconds:.6f}")
        return "\n".join(lines)


def portfolio_solve(kb: KnowledgeBase, cnf_path, k: int = DEFAULT_K,
                    dist=DistanceVariant.ARGOSMART, fallback: bool = False,
                    cutoff: Optional[float] = None,
                    executables: Optional[Mapping[str, Optional[Sequence[str]]]] = None,
                    grace: float = DEFAULT_GRACE) -> SolveReport:
    """Parse, extract features, select a solver and run it.

    With ``fallback``, a FAILED run moves on to the next solver in
    ``rank_solvers`` order, each getting the full cutoff. Timeouts never
    trigger a fallback. Raises AllSolversFailed if every fallback failed.
    """
    cutoff = kb.cutoff_seconds if cutoff is None else float(cutoff)
    commands = dict(kb.executables)
    commands.update(executables or {})

    t0 = time.perf_counter()
    features = extract_features(parse_file(cnf_path))
    feature_time = time.perf_counter() - t0

    selection = select_solver(kb, features, k, dist)
    order = [selection.chosen_solver]
    if fallback:
        order += [s for s, _ in rank_solvers(kb, features, k, dist) if s != selection.chosen_solver]

    attempts = []
    for solver_id in order:
        template = commands.get(solver_id)
        if template is None:
            raise ExecutableNotFound(f"solver {solver_id!r} has no command (EXTERNAL)")
        result = run_solver(template, cnf_path, cutoff, grace=grace)
        attempts.append(Attempt(solver_id, result.outcome, result.answer, result.wall_seconds))
        logger.info("%s on %s: %s", solver_id, cnf_path, result.outcome)
        if result.outcome.status is not Status.FAILED:
            break

    last = attempts[-1]
    report = SolveReport(last.solver_id, last.outcome, last.answer, feature_time,
                         selection, tuple(attempts))
    if fallback and last.outcome.status is Status.FAILED:
        raise AllSolversFailed(f"all {len(attempts)} solvers failed on {cnf_path}", report)
    return report
