"""Interaction-record ingestion, grade discretization, filtering and splitting.

The unit of data is one student-challenge practice event. Records arrive as
CSV with a mandatory header; after parsing there is at most one record per
(user_id, challenge_id) pair (the one with the latest timestamp wins).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

COLUMNS = (
    "user_id",
    "challenge_id",
    "timestamp",
    "final_score",
    "exercise_id",
    "course_id",
    "difficulty",
    "retries",
    "duration",
)

N_GRADE_CLASSES = 5


class SchemaError(ValueError):
    """CSV header does not provide a required column."""


class RowError(ValueError):
    """A data row could not be parsed; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RangeError(ValueError):
    """A value is outside its documented range."""


@dataclass(frozen=True)
class InteractionRecord:
    """One student-challenge practice event (one CSV row)."""

    user_id: int
    challenge_id: int
    timestamp: float
    final_score: float
    exercise_id: int
    course_id: int
    difficulty: int
    retries: int
    duration: float

    def __post_init__(self):
        if not 0.0 <= self.final_score <= 100.0:
            raise RangeError(
                f"final_score {self.final_score!r} outside [0, 100]")
        if self.retries < 0:
            raise RangeError(f"retries {self.retries!r} negative")
        if self.duration < 0:
            raise RangeError(f"duration {self.duration!r} negative")
        if self.difficulty < 1:
            raise RangeError(f"difficulty {self.difficulty!r} below 1")


@dataclass(frozen=True)
class Dataset:
    """Immutable ordered collection of records with per-side indices."""

    records: tuple[InteractionRecord, ...]
    student_index: dict[int, tuple[int, ...]] = field(repr=False)
    challenge_index: dict[int, tuple[int, ...]] = field(repr=False)

    @classmethod
    def from_records(cls, records) -> "Dataset":
        records = tuple(records)
        students: dict[int, list[int]] = {}
        challenges: dict[int, list[int]] = {}
        for i, r in enumerate(records):
            students.setdefault(r.user_id, []).append(i)
            challenges.setdefault(r.challenge_id, []).append(i)
        return cls(
            records=records,
            student_index={u: tuple(v) for u, v in students.items()},
            challenge_index={c: tuple(v) for c, v in challenges.items()},
        )

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def students(self):
        return self.student_index.keys()

    def challenges(self):
        return self.challenge_index.keys()

    def records_for_student(self, user_id: int):
        return [self.records[i] for i in self.student_index[user_id]]


@dataclass(frozen=True)
class SplitDataset:
    train: Dataset
    test: Dataset


def discretize_grade(score: float) -> int:
    """Map a final score in [0, 100] onto the five grade classes.

    Class k covers [20k, 20k+20) for k in 0..3; class 4 covers [80, 100].
    """
    if not 0.0 <= score <= 100.0:
        raise RangeError(f"score {score!r} outside [0, 100]")
    return min(int(score // 20.0), N_GRADE_CLASSES - 1)


def _parse_int(text: str, column: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        # accept integral floats such as "3.0"
        try:
            f = float(text)
        except ValueError:
            raise RowError(line, f"column {column!r}: cannot parse {text!r}")
        if not f.is_integer():
            raise RowError(
                line, f"column {column!r}: expected integer, got {text!r}")
        return int(f)


def _parse_float(text: str, column: str, line: int) -> float:
    try:
        return float(text)
    except ValueError:
        raise RowError(line, f"column {column!r}: cannot parse {text!r}")


def parse_interactions(text: str) -> Dataset:
    """Parse CSV content (header mandatory) into a deduplicated Dataset.

    Header names are case-insensitive and may appear in any order. For
    duplicate (user_id, challenge_id) pairs the record with the latest
    timestamp is kept (later file position wins ties); the surviving record
    occupies the position of the pair's first occurrence.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("empty input: missing header row")
    positions = {name.strip().lower(): i for i, name in enumerate(header)}
    for column in COLUMNS:
        if column not in positions:
            raise SchemaError(f"missing required column {column!r}")
    col = [positions[c] for c in COLUMNS]
    width = max(col) + 1

    order: dict[tuple[int, int], int] = {}
    kept: list[InteractionRecord] = []
    for line, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) < width:
            raise RowError(line, f"expected at least {width} fields, "
                                 f"got {len(row)}")
        u = _parse_int(row[col[0]], "user_id", line)
        c = _parse_int(row[col[1]], "challenge_id", line)
        ts = _parse_float(row[col[2]], "timestamp", line)
        score = _parse_float(row[col[3]], "final_score", line)
        if not 0.0 <= score <= 100.0:
            raise RangeError(
                f"line {line}: final_score {score!r} outside [0, 100]")
        try:
            rec = InteractionRecord(
                user_id=u,
                challenge_id=c,
                timestamp=ts,
                final_score=score,
                exercise_id=_parse_int(row[col[4]], "exercise_id", line),
                course_id=_parse_int(row[col[5]], "course_id", line),
                difficulty=_parse_int(row[col[6]], "difficulty", line),
                retries=_parse_int(row[col[7]], "retries", line),
                duration=_parse_float(row[col[8]], "duration", line),
            )
        except RangeError as exc:
            raise RangeError(f"line {line}: {exc}") from None
        key = (u, c)
        if key in order:
            pos = order[key]
            if rec.timestamp >= kept[pos].timestamp:
                kept[pos] = rec
        else:
            order[key] = len(kept)
            kept.append(rec)
    return Dataset.from_records(kept)


def _format_number(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return repr(v) if isinstance(v, float) else str(v)


def serialize_interactions(d: Dataset) -> str:
    """Render a Dataset back to canonical CSV (UTF-8 text, LF endings)."""
    out = [",".join(COLUMNS)]
    for r in d.records:
        out.append(",".join(_format_number(v) for v in (
            r.user_id, r.challenge_id, r.timestamp, r.final_score,
            r.exercise_id, r.course_id, r.difficulty, r.retries, r.duration,
        )))
    return "\n".join(out) + "\n"


def filter_min_interactions(d: Dataset, k: int = 2) -> Dataset:
    """Keep only records of students with at least k distinct challenges."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    keep = set()
    for user_id, idx in d.student_index.items():
        if len({d.records[i].challenge_id for i in idx}) >= k:
            keep.add(user_id)
    if len(keep) == len(d.student_index):
        return d
    return Dataset.from_records(
        r for r in d.records if r.user_id in keep)


def temporal_split(d: Dataset, train_ratio: float = 0.8) -> SplitDataset:
    """Per-student temporal split: earliest records train, latest test.

    Records of each student are ordered by (timestamp, challenge_id); the
    first clamp(floor(train_ratio * n), 1, n - 1) go to train. Every student
    therefore appears on both sides. Output records are ordered by
    (user_id, timestamp, challenge_id).
    """
    if not 0.0 < train_ratio < 1.0:
        raise ValueError(f"train_ratio must be in (0, 1), got {train_ratio}")
    train: list[InteractionRecord] = []
    test: list[InteractionRecord] = []
    for user_id in sorted(d.student_index):
        recs = sorted(d.records_for_student(user_id),
                      key=lambda r: (r.timestamp, r.challenge_id))
        n = len(recs)
        if n < 2:
            raise ValueError(
                f"student {user_id} has {n} record(s); need >= 2 to split")
        n_train = min(max(math.floor(train_ratio * n), 1), n - 1)
        train.extend(recs[:n_train])
        test.extend(recs[n_train:])
    return SplitDataset(train=Dataset.from_records(train),
                        test=Dataset.from_records(test))


class ConfigError(ValueError):
    """Invalid generator or pipeline configuration."""


@dataclass(frozen=True)
class SynthConfig:
    """Block-structured synthetic practice-log generator settings.

    Students are grouped into cohorts; challenges are partitioned into
    per-cohort course blocks. Each student draws challenges from their own
    cohort's block with probability p_in (uniformly otherwise), preferring
    challenges whose latent difficulty is close to the student's latent
    ability (match_tau controls how strongly). Grades follow
    clamp(0, 100, 50 + 25*(ability - difficulty) + Normal(0, noise)).
    """

    students: int = 200
    challenges: int = 60
    cohorts: int = 4
    courses_per_cohort: int = 3
    p_in: float = 0.9
    noise: float = 8.0
    interactions_min: int = 4
    interactions_max: int = 12
    match_tau: float = 0.8
    cohort_spread: float = 1.0

    def validate(self):
        if self.students <= 0 or self.challenges <= 0:
            raise ConfigError("students and challenges must be positive")
        if self.cohorts <= 0:
            raise ConfigError("cohorts must be positive")
        if self.courses_per_cohort <= 0:
            raise ConfigError("courses_per_cohort must be positive")
        if not 0.0 <= self.p_in <= 1.0:
            raise ConfigError("p_in must be in [0, 1]")
        if self.noise < 0:
            raise ConfigError("noise must be non-negative")
        if self.interactions_min < 2:
            raise ConfigError("interactions_min must be >= 2")
        if self.interactions_max < self.interactions_min:
            raise ConfigError("interactions_max < interactions_min")
        if self.challenges < self.interactions_max:
            raise ConfigError("challenges must be >= interactions_max")
        if self.match_tau <= 0:
            raise ConfigError("match_tau must be positive")


def interaction_score(ability: float, difficulty: float,
                      noise: float = 0.0) -> float:
    """Latent score model: 50 + 25*(ability - difficulty) + noise, clamped."""
    return min(100.0, max(0.0, 50.0 + 25.0 * (ability - difficulty) + noise))


def generate_synthetic(cfg: SynthConfig, seed: int) -> Dataset:
    """Generate a deterministic block-structured synthetic Dataset.

    All randomness comes from one PCG64 stream seeded with `seed`; draws
    happen in a fixed documented order (cohort means, abilities, challenge
    difficulties, then per student in index order), so identical (cfg, seed)
    yield byte-identical serializations.
    """
    cfg.validate()
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    S, C, K = cfg.students, cfg.challenges, cfg.cohorts

    cohort_mean = rng.normal(0.0, cfg.cohort_spread, K)
    cohort_of = np.arange(S) * K // S
    ability = cohort_mean[cohort_of] + rng.normal(0.0, 1.0, S)
    difficulty = rng.normal(0.0, 1.0, C)
    block_of = np.arange(C) * K // C

    # ordinal difficulty 1..5: noisy quantization of the latent value
    diff_ordinal = np.clip(
        np.rint(3.0 + difficulty + rng.normal(0.0, 0.5, C)), 1, 5
    ).astype(int)

    # identifiers are shuffled so the numeric id carries no cohort structure
    user_ids = 10_000 + rng.permutation(S)
    challenge_ids = 500 + rng.permutation(C)
    course_ids = block_of * cfg.courses_per_cohort + (
        np.arange(C) % cfg.courses_per_cohort)
    exercise_ids = 100 + np.arange(C) // 2

    block_members = [np.flatnonzero(block_of == b) for b in range(K)]
    all_challenges = np.arange(C)
    t0 = 1_577_836_800  # 2020-01-01T00:00:00Z

    records = []
    for si in range(S):
        n_i = int(rng.integers(cfg.interactions_min,
                               cfg.interactions_max + 1))
        chosen: list[int] = []
        chosen_set = set()
        while len(chosen) < n_i:
            pool = (block_members[cohort_of[si]]
                    if rng.random() < cfg.p_in else all_challenges)
            w = np.exp(-((difficulty[pool] - ability[si]) ** 2)
                       / (2.0 * cfg.match_tau ** 2))
            j = int(pool[rng.choice(len(pool), p=w / w.sum())])
            if j not in chosen_set:
                chosen_set.add(j)
                chosen.append(j)
        ts = t0 + si * 7_200 + np.cumsum(
            rng.integers(300, 7_200, n_i))
        for k, j in enumerate(chosen):
            gap = difficulty[j] - ability[si]
            score = interaction_score(
                ability[si], difficulty[j],
                rng.normal(0.0, cfg.noise) if cfg.noise > 0 else 0.0)
            retries = int(rng.poisson(
                math.exp(0.5 * min(max(gap, -3.0), 3.0))))
            duration = round(60.0 * math.exp(
                0.6 * min(max(gap, -3.0), 3.0) + rng.normal(0.0, 0.5)), 1)
            records.append(InteractionRecord(
                user_id=int(user_ids[si]),
                challenge_id=int(challenge_ids[j]),
                timestamp=float(ts[k]),
                final_score=float(score),
                exercise_id=int(exercise_ids[j]),
                course_id=int(course_ids[j]),
                difficulty=int(diff_ordinal[j]),
                retries=retries,
                duration=float(duration),
            ))
    return Dataset.from_records(records)
