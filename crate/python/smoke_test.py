"""Smoke test for the pysepctl extension module.

Build and install first, for example:

    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/sepctl_python-*.whl
"""

import math
import tempfile

import pysepctl


def close(a, b, tol=1e-9):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


def main():
    toy = pysepctl.Scenario.builtin("toy")
    lqg = pysepctl.Scenario.builtin("lqg")
    assert toy.family == "finite" and lqg.family == "linear_gaussian"
    assert lqg.horizon == 2 and lqg.beta == 1.0

    again = pysepctl.Scenario.parse(toy.serialize())
    assert again.hash == toy.hash

    v0 = pysepctl.solve(toy)["v0"]
    best, _ = pysepctl.exhaustive_oracle(toy)
    assert close(v0, best, 1e-12), (v0, best)

    report = pysepctl.solve(lqg)
    a, b, c, stated_cost = report["stated"]
    assert (a, b, c) == (0.5, 0.0, -0.25)
    assert close(stated_cost, pysepctl.two_step_cost(lqg, 0.5, 0.0, -0.25))
    print("two-step example:", {k: tuple(round(v, 4) for v in row) for k, row in report.items()})

    matching = pysepctl.monte_carlo_cost(lqg, 2000, seed=1, strategy="matching")
    assert close(matching["penalty"][0], 0.0)

    assert close(pysepctl.tv_distance([0.5, 0.5], [0.9, 0.1]), 0.4, 1e-12)

    emp = pysepctl.EmpiricalConditional(2)
    emp.record_run([0], [0, 1])
    assert emp.total([0]) == 1
    try:
        emp.query([1])
    except pysepctl.InsufficientDataError:
        pass
    else:
        raise AssertionError("unseen history must raise")

    with tempfile.TemporaryDirectory() as out:
        passed, printed = pysepctl.verify("builtin:toy", out, rollouts=200)
    assert passed, printed

    try:
        pysepctl.Scenario.builtin("nope")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown builtin must raise")

    print("pysepctl", pysepctl.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
