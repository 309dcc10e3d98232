"""Shared test builders."""

from knnportfolio.features import N_FEATURES
from knnportfolio.knowledge_base import Category, InstanceRecord, KnowledgeBase
from knnportfolio.metrics import RuntimeOutcome

TOY_CNF = "p cnf 3 2\n1 -2 0\n2 3 -1 0\n"

S = RuntimeOutcome.solved
T = RuntimeOutcome.timeout()
F = RuntimeOutcome.failed()


def vec(*head):
    return tuple(head) + (0.0,) * (N_FEATURES - len(head))


def record(iid, feats, cat=Category.UNKNOWN, **outcomes):
    return InstanceRecord(iid, cat, feats, outcomes)
