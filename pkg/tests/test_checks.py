from pathlib import Path
import sys

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from mpt_precond.checks import evaluate_run_check, evaluate_run_checks, flagged
from mpt_precond.sweep import RunRecord


def make_record(**overrides):
    values = dict(
        j_count=2,
        n=16,
        formulation="transformed",
        k=(1.0, 1e-4),
        xi_pairs=(((1, 2), 1e4),),
        iterations=1,
        converged=True,
        cond_est=1.0,
        lambda_min_est=1.0,
        lambda_max_est=1.0,
        seed=3,
        wall_time=0.02,
    )
    values.update(overrides)
    return RunRecord(**values)


def test_transformed_run_within_envelope_is_accepted():
    check = evaluate_run_check(make_record())
    assert check.status == "accepted"
    assert check.reasons == []


def test_transformed_run_outside_envelope_is_flagged():
    check = evaluate_run_check(make_record(iterations=9, cond_est=1.5))
    assert check.status == "flagged"
    assert check.reasons == ["iterations_above_envelope", "cond_above_envelope"]


def test_unconverged_and_breakdown_runs_are_flagged():
    capped = evaluate_run_check(make_record(formulation="standard", converged=False, iterations=3001))
    assert capped.reasons == ["not_converged"]

    broken = evaluate_run_check(make_record(converged=False, breakdown=True, cond_est=None))
    assert broken.reasons == ["breakdown"]


def test_standard_run_checked_against_continuity():
    record = make_record(formulation="standard", iterations=40, cond_est=1000.0, lambda_min_est=0.002, lambda_max_est=2.0)
    assert evaluate_run_check(record).status == "accepted"

    too_large = make_record(formulation="standard", lambda_max_est=3.01)
    assert evaluate_run_check(too_large).reasons == ["lambda_max_above_continuity"]

    three_networks = make_record(j_count=3, formulation="standard", k=(1.0, 1.0, 1.0), lambda_max_est=3.9)
    assert evaluate_run_check(three_networks).status == "accepted"


def test_flagged_keeps_only_rejected_runs():
    checks = evaluate_run_checks([make_record(), make_record(iterations=7), make_record(seed=4)])
    rejected = flagged(checks)
    assert len(rejected) == 1
    assert rejected[0].record.iterations == 7
