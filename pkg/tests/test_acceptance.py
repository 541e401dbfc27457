"""Acceptance criteria, one test each.

Every test prints a ``[PASS]``/``[FAIL]`` line; the lines are also collected
and repeated in the terminal summary.  Run this file directly with
``python3 tests/test_acceptance.py`` to get only the lines.
"""
import sys
import time

import pytest

from polar_degree_lab import acceptance, cli

SEED = 42
LINES: dict[int, str] = {}


def _record(result, elapsed, limit):
    within = limit is None or elapsed < limit
    passed = result.passed and within
    note = f" ({elapsed:.1f} s" + (f", limit {limit:.0f} s)" if limit else ")")
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {result.number}: {result.title}{note}"
    LINES[result.number] = line
    print(line)
    return passed


def run_criterion(number):
    fn = acceptance.CRITERIA[number]
    if number == 1:
        # the runtime limit applies to each map separately
        rows, slowest, ok = [], 0.0, True
        for d in (2, 3, -2, 5):
            t0 = time.perf_counter()
            r = fn(seed=SEED, ds=(d,))
            slowest = max(slowest, time.perf_counter() - t0)
            ok &= r.passed
            rows += r.details["rows"]
        result = acceptance.CriterionResult(1, "degree triples of power_s2", ok, {"rows": rows})
        return result, slowest
    t0 = time.perf_counter()
    result = fn(seed=SEED)
    return result, time.perf_counter() - t0


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    result, elapsed = run_criterion(number)
    assert _record(result, elapsed, acceptance.RUNTIME_LIMITS[number]), result.details


def _verify_json(jobs):
    code, text = cli.run(["verify", "--seed", str(SEED), "--jobs", str(jobs)])
    assert code == 0, text
    return text.encode()


def test_criterion_10_determinism():
    t0 = time.perf_counter()
    outputs = [_verify_json(1), _verify_json(4)]
    passed = outputs[0] == outputs[1]
    result = acceptance.CriterionResult(10, "verify output is byte-identical for --jobs 1 and 4", passed)
    assert _record(result, time.perf_counter() - t0, None)


if __name__ == "__main__":
    ok = True
    for n in sorted(acceptance.CRITERIA):
        res, el = run_criterion(n)
        ok &= _record(res, el, acceptance.RUNTIME_LIMITS[n])
    t0 = time.perf_counter()
    same = _verify_json(1) == _verify_json(4)
    ok &= _record(acceptance.CriterionResult(10, "verify output is byte-identical for --jobs 1 and 4", same),
                  time.perf_counter() - t0, None)
    sys.exit(0 if ok else 1)
