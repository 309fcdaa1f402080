"""Last-alphabetical sweep: the one-sided energy estimate must hold on
every evolution any test in this session produced, with zero violations."""

from conftest import TRAJECTORIES
from eigenfrac.evolution import verify_discrete_estimate


def test_every_recorded_trajectory_satisfies_the_estimate():
    assert TRAJECTORIES, "no evolutions were recorded this session"
    total = 0
    worst = float("-inf")
    for res in TRAJECTORIES:
        rep = verify_discrete_estimate(res)
        total += rep.n_violations
        worst = max(worst, rep.worst_overshoot)
    print(f"[estimate-sweep] {len(TRAJECTORIES)} trajectories, "
          f"{total} violations, worst overshoot {worst:.2e}")
    assert total == 0
