import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rankjoint import AttributeSchema, ConjointDataset, Mode, SimDesign, simulate_dataset  # noqa: E402

CANDIDATE_LEVELS = {
    "Race": ["White", "Hispanic", "Black", "Asian"],
    "Political experience": ["None", "School board president", "City council member", "State legislator",
                             "Representative in congress", "Mayor"],
    "Career experience": ["Educator", "Stay-at-home Mom/Dad", "Small business owner", "Police officer",
                          "Electrician", "Business executive", "Attorney"],
    "Gender": ["Female", "Male"],
    "Age": ["35", "45", "55", "65"],
    "Party": ["Independent", "Democrat", "Republican"],
}
BUDGET_LEVELS = {
    area: ["Decrease", "Remain the same", "Increase"]
    for area in ["Education spending", "Environmental protection spending", "Health and Medicare spending",
                 "Military spending", "Social security spending"]
}


@pytest.fixture
def candidate_schema():
    return AttributeSchema.from_levels(CANDIDATE_LEVELS)


@pytest.fixture
def budget_schema():
    return AttributeSchema.from_levels(BUDGET_LEVELS)


@pytest.fixture
def party_schema():
    return AttributeSchema.from_levels({"Party": ["Democrat", "Republican", "Independent"],
                                        "Age": ["35", "55"]})


def random_ranked(rng, schema, n_subjects, n_tasks, Ks, *, shuffle=False):
    """Ranked dataset with random levels and random rankings; K drawn per task from Ks."""
    subject, task, position, outcome, codes = [], [], [], [], []
    for s in range(n_subjects):
        for t in range(n_tasks):
            K = int(rng.choice(Ks))
            ranks = rng.permutation(K) + 1
            for k in range(K):
                subject.append(f"s{s}")
                task.append(f"t{t}")
                position.append(k + 1)
                outcome.append(ranks[k])
                codes.append([rng.integers(a.n_levels) for a in schema.attributes])
    d = ConjointDataset(schema, Mode.RANKED, subject, task, position, np.array(codes), outcome)
    if shuffle:
        d = d.take(rng.permutation(len(d)))
    return d


@pytest.fixture
def small_sim():
    design = SimDesign(n_subjects=60, n_tasks=3, K=3, gamma=(0.5, -0.3, 0.0, 0.8), seed=11)
    return simulate_dataset(design)
