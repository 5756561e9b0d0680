from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

from mpt_precond.sweep import RunRecord


TRANSFORMED_MAX_ITERATIONS = 5
TRANSFORMED_MAX_COND = 1.0 + 1e-6
CONTINUITY_SLACK = 1e-8


@dataclass
class RunCheck:
    record: RunRecord
    status: str  # accepted, flagged
    reasons: List[str] = field(default_factory=list)

    def flag(self, reason: str) -> None:
        if reason not in self.reasons:
            self.reasons.append(reason)
        self.status = "flagged"


def evaluate_run_check(record: RunRecord) -> RunCheck:
    """Compare one run against the envelope its formulation should meet.

    Transformed runs use exact block solves, so CG converges almost at once with a
    condition estimate of one. Standard runs are bounded above by continuity (J + 1).
    """
    check = RunCheck(record=record, status="accepted")

    if record.breakdown:
        check.flag("breakdown")
    elif not record.converged:
        check.flag("not_converged")

    if record.formulation == "transformed":
        if record.iterations > TRANSFORMED_MAX_ITERATIONS:
            check.flag("iterations_above_envelope")
        if record.cond_est is not None and record.cond_est > TRANSFORMED_MAX_COND:
            check.flag("cond_above_envelope")
    else:
        limit = (record.j_count + 1) * (1.0 + CONTINUITY_SLACK)
        if record.lambda_max_est is not None and record.lambda_max_est > limit:
            check.flag("lambda_max_above_continuity")

    return check


def evaluate_run_checks(records: Sequence[RunRecord]) -> List[RunCheck]:
    return [evaluate_run_check(record) for record in records]


def flagged(checks: Sequence[RunCheck]) -> List[RunCheck]:
    return [check for check in checks if check.status == "flagged"]
