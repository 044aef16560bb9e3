import numpy as np
import pytest

from moocgrade.data import Dataset, InteractionRecord


def make_record(user_id=1, challenge_id=1, timestamp=0.0, final_score=50.0,
                exercise_id=1, course_id=1, difficulty=1, retries=0,
                duration=1.0):
    return InteractionRecord(
        user_id=user_id, challenge_id=challenge_id, timestamp=timestamp,
        final_score=final_score, exercise_id=exercise_id,
        course_id=course_id, difficulty=difficulty, retries=retries,
        duration=duration)


def dataset_from_pairs(pairs, scores=None):
    """Dataset with one record per (user, challenge) pair; timestamps follow
    pair order."""
    records = []
    for i, (u, c) in enumerate(pairs):
        score = 50.0 if scores is None else scores[i]
        records.append(make_record(user_id=u, challenge_id=c,
                                   timestamp=float(i), final_score=score))
    return Dataset.from_records(records)


def two_block_bridge_dataset():
    """Two complete K_{5,5} student-challenge blocks joined by one edge."""
    pairs = []
    for u in range(5):
        for c in range(100, 105):
            pairs.append((u, c))
    for u in range(5, 10):
        for c in range(105, 110):
            pairs.append((u, c))
    pairs.append((0, 105))
    return dataset_from_pairs(pairs)


def random_dataset(rng, n_students=20, n_challenges=10, max_per_student=6):
    """Random dedup-valid dataset where every student has >= 2 records."""
    records = []
    t = 0.0
    for u in range(n_students):
        k = int(rng.integers(2, max_per_student + 1))
        challenges = rng.choice(n_challenges, size=k, replace=False)
        for c in challenges:
            records.append(make_record(
                user_id=100 + u, challenge_id=500 + int(c), timestamp=t,
                final_score=float(rng.uniform(0, 100)),
                retries=int(rng.integers(0, 5)),
                duration=float(rng.uniform(1, 600))))
            t += 1.0
    return Dataset.from_records(records)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
