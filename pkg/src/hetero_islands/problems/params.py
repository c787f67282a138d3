"""Hyper-parameter tuning over a mixed integer/real/boolean space.

The objective is supplied by an evaluator object. Two are provided:

* :class:`SurrogateEvaluator` -- a bundled deterministic stand-in: a separable
  quadratic over range-normalized entries with one documented minimizer.
  It keeps tests hermetic; no model training happens here.
* :class:`ExternalEvaluator` -- drives a child process over its standard
  streams with a line protocol, so a real model-training evaluator can be
  plugged in:

      request:   EVAL <canonical record text>\\n
      response:  OK <decimal objective>\\n   or   ERR <message>\\n

  A response that does not arrive within the timeout, or does not parse,
  raises :class:`EvaluationError`; methods treat that as a discarded
  candidate.
"""

import subprocess
import threading
import queue
from typing import Any, Optional, Sequence

from ..core import (
    EvaluationError,
    ParamEntry,
    ParamRecord,
    ParamSpace,
    Rng,
    genome_to_text,
)
from .base import ProblemAdapter

REAL_STEP = 0.005  # both the mutation scale and the enumeration grid step


def default_param_space() -> ParamSpace:
    """Random-forest style tuning space used by the bundled benchmark."""
    return ParamSpace(
        entries=(
            ParamEntry("P", "int", 20, 100),
            ParamEntry("K", "int", 1, 6),
            ParamEntry("V", "real", 0.0001, 0.5),
            ParamEntry("U", "bool"),
            ParamEntry("B", "bool"),
            ParamEntry("depth", "int", 1, 20),
            ParamEntry("I", "int", 20, 30),
            ParamEntry("batchsize", "int", 80, 120),
        )
    )


class SurrogateEvaluator:
    """Separable quadratic in the normalized entries.

    Minimizer (value 0.0): P=60, K=3, V=0.1, U=True, B=False, depth=10,
    I=25, batchsize=100 on the default space; for other spaces the minimizer
    is the range midpoint (rounded down for integers, False for booleans).
    """

    deterministic = True

    _DEFAULT_TARGET = {
        "P": 60,
        "K": 3,
        "V": 0.1,
        "U": True,
        "B": False,
        "depth": 10,
        "I": 25,
        "batchsize": 100,
    }

    def __init__(self, space: ParamSpace):
        self.space = space
        self.weights = [1.0 + 0.1 * i for i in range(len(space.entries))]
        self.target = []
        for entry in space.entries:
            if entry.name in self._DEFAULT_TARGET:
                self.target.append(self._DEFAULT_TARGET[entry.name])
            elif entry.kind == "bool":
                self.target.append(False)
            elif entry.kind == "int":
                self.target.append(int((entry.lo + entry.hi) // 2))
            else:
                self.target.append((entry.lo + entry.hi) / 2.0)

    def minimizer(self) -> ParamRecord:
        return ParamRecord(self.space.names, self.target)

    def __call__(self, record: ParamRecord) -> float:
        total = 0.0
        for entry, value, target, w in zip(
            self.space.entries, record.values, self.target, self.weights
        ):
            span = (entry.hi - entry.lo) or 1.0
            t = (float(value) - float(target)) / span
            total += w * t * t
        return total

    def close(self) -> None:
        pass


class _EvaluatorSession:
    """One child process plus its reader thread."""

    def __init__(self, command):
        self.proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self.lines: "queue.Queue[Optional[str]]" = queue.Queue()
        threading.Thread(target=self._pump, daemon=True).start()

    def _pump(self) -> None:
        assert self.proc.stdout is not None
        for line in self.proc.stdout:
            self.lines.put(line)
        self.lines.put(None)

    def alive(self) -> bool:
        return self.proc.poll() is None

    def close(self) -> None:
        try:
            if self.proc.stdin is not None:
                self.proc.stdin.close()
            self.proc.terminate()
            self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()


class ExternalEvaluator:
    """Line-protocol client for a child-process evaluator.

    Calls may block up to the timeout. Each calling thread gets its own child
    process, so concurrently running islands never interleave requests on one
    pipe.
    """

    def __init__(self, command: Sequence[str], timeout: float = 60.0, deterministic: bool = False):
        self.command = list(command)
        self.timeout = timeout
        self.deterministic = deterministic
        self._local = threading.local()
        self._sessions: list = []
        self._lock = threading.Lock()

    def _session(self) -> _EvaluatorSession:
        session = getattr(self._local, "session", None)
        if session is None or not session.alive():
            session = _EvaluatorSession(self.command)
            self._local.session = session
            with self._lock:
                self._sessions.append(session)
        return session

    def __call__(self, record: ParamRecord) -> float:
        session = self._session()
        try:
            session.proc.stdin.write(f"EVAL {genome_to_text(record)}\n")
            session.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise EvaluationError(f"evaluator pipe closed: {exc}") from exc
        try:
            line = session.lines.get(timeout=self.timeout)
        except queue.Empty:
            session.close()
            self._local.session = None
            raise EvaluationError(f"evaluator timed out after {self.timeout}s")
        if line is None:
            raise EvaluationError("evaluator exited before answering")
        line = line.strip()
        if line.startswith("OK "):
            try:
                return float(line[3:])
            except ValueError as exc:
                raise EvaluationError(f"bad objective {line[3:]!r}") from exc
        if line.startswith("ERR"):
            raise EvaluationError(line[3:].strip() or "evaluator error")
        raise EvaluationError(f"malformed response {line!r}")

    def close(self) -> None:
        with self._lock:
            sessions, self._sessions = self._sessions, []
        for session in sessions:
            session.close()
        self._local = threading.local()


class ParamsAdapter(ProblemAdapter):
    name = "params"

    def __init__(self, space: Optional[ParamSpace] = None, evaluator=None, de_weight: float = 1.0):
        self.space = space or default_param_space()
        self.evaluator = evaluator or SurrogateEvaluator(self.space)
        self.deterministic = getattr(self.evaluator, "deterministic", False)
        self.de_weight = de_weight

    @property
    def genome_spec(self) -> ParamSpace:
        return self.space

    def evaluate(self, genome: ParamRecord) -> float:
        return float(self.evaluator(genome))

    def random_solution(self, rng: Rng) -> ParamRecord:
        values = []
        for entry in self.space.entries:
            if entry.kind == "bool":
                values.append(rng.py.random() < 0.5)
            elif entry.kind == "int":
                values.append(rng.py.randint(int(entry.lo), int(entry.hi)))
            else:
                values.append(rng.py.uniform(entry.lo, entry.hi))
        return ParamRecord(self.space.names, values)

    # Systematic enumeration: nested scan, first entry fastest. Integer and
    # boolean entries step by one; real entries walk a REAL_STEP grid.

    def _grid_size(self, entry: ParamEntry) -> int:
        if entry.kind == "bool":
            return 2
        if entry.kind == "int":
            return int(entry.hi) - int(entry.lo) + 1
        return int((entry.hi - entry.lo) / REAL_STEP) + 1

    def _grid_value(self, entry: ParamEntry, idx: int):
        if entry.kind == "bool":
            return bool(idx)
        if entry.kind == "int":
            return int(entry.lo) + idx
        return min(entry.lo + idx * REAL_STEP, entry.hi)

    def initial_cursor(self):
        return (0,) * len(self.space.entries)

    def next_solution(self, cursor):
        if cursor is None:
            return None
        entries = self.space.entries
        values = [self._grid_value(e, i) for e, i in zip(entries, cursor)]
        genome = ParamRecord(self.space.names, values)
        nxt = list(cursor)
        for d, entry in enumerate(entries):
            nxt[d] += 1
            if nxt[d] < self._grid_size(entry):
                return genome, tuple(nxt)
            nxt[d] = 0
        return genome, None

    def _clamp(self, entry: ParamEntry, value):
        if entry.kind == "bool":
            return bool(value)
        if entry.kind == "int":
            return int(min(max(value, entry.lo), entry.hi))
        return float(min(max(value, entry.lo), entry.hi))

    def unary(self, genome: ParamRecord, rng: Rng, op_state: Any = None) -> ParamRecord:
        """Perturb every entry: integers move by one, reals by a draw smaller
        than REAL_STEP in magnitude, booleans flip with probability one half."""
        values = []
        for entry, value in zip(self.space.entries, genome.values):
            if entry.kind == "bool":
                values.append(not value if rng.py.random() < 0.5 else value)
            elif entry.kind == "int":
                step = 1 if rng.py.random() < 0.5 else -1
                values.append(self._clamp(entry, value + step))
            else:
                values.append(self._clamp(entry, value + rng.py.uniform(-REAL_STEP, REAL_STEP)))
        return ParamRecord(self.space.names, values)

    def binary(self, a: ParamRecord, b: ParamRecord, rng: Rng) -> ParamRecord:
        k = rng.py.randint(1, len(self.space.entries) - 1)
        return ParamRecord(self.space.names, a.values[:k] + b.values[k:])

    def ternary(self, a: ParamRecord, b: ParamRecord, c: ParamRecord, rng: Rng) -> ParamRecord:
        """Numeric difference step; integer entries round afterwards."""
        values = []
        for entry, va, vb, vc in zip(self.space.entries, a.values, b.values, c.values):
            raw = float(va) + self.de_weight * (float(vb) - float(vc))
            if entry.kind == "bool":
                values.append(raw >= 0.5)
            elif entry.kind == "int":
                values.append(self._clamp(entry, int(round(raw))))
            else:
                values.append(self._clamp(entry, raw))
        return ParamRecord(self.space.names, values)

    def close(self) -> None:
        close = getattr(self.evaluator, "close", None)
        if close is not None:
            close()
