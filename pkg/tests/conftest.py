import os
import random
import shutil
from fractions import Fraction

import pytest

from sensynth.bench import gen_det_hallway, gen_fig1
from sensynth.model import BOT, PartialObsFn, Pomdp, reduce_targets, validate


def random_pomdp(rng, max_states=4, max_actions=2, max_obs=2):
    """Small random model with an absorbing goal; always validate-clean."""
    ns = rng.randint(2, max_states)
    na = rng.randint(1, max_actions)
    nz = rng.randint(0, max_obs)
    goal = ns - 1

    def weights(n):
        raw = [rng.randint(1, 5) for _ in range(n)]
        return [Fraction(r, sum(raw)) for r in raw]

    delta = []
    for s in range(ns):
        if s == goal:
            delta.append(tuple(((s, Fraction(1)),) for _ in range(na)))
            continue
        rows = []
        for _ in range(na):
            supp = rng.sample(range(ns), rng.randint(1, min(2, ns)))
            rows.append(tuple(sorted(zip(supp, weights(len(supp))))))
        delta.append(tuple(rows))

    obs_rows = []
    for s in range(ns):
        zs = sorted(rng.sample(range(nz), rng.randint(0, nz))) if nz else []
        use_bot = not zs or rng.random() < 0.5
        syms = zs + ([BOT] if use_bot else [])
        obs_rows.append(tuple(zip(syms, weights(len(syms)))))

    p = Pomdp(states=tuple(f"s{i}" for i in range(ns)),
              actions=tuple(f"a{j}" for j in range(na)),
              observations=tuple(f"z{t}" for t in range(nz)),
              initial=0, goal=goal, delta=tuple(delta),
              obs=PartialObsFn(tuple(obs_rows)))
    p = reduce_targets(p, [goal])
    assert not validate(p)
    return p


def reweight(p, rng):
    """Same supports, fresh random weights (transitions and observations)."""
    def weights(n):
        raw = [rng.randint(1, 7) for _ in range(n)]
        return [Fraction(r, sum(raw)) for r in raw]

    delta = tuple(
        tuple(tuple(zip([t for t, _ in row], weights(len(row)))) for row in arow)
        for arow in p.delta)
    obs_rows = tuple(
        tuple(zip([z for z, _ in row], weights(len(row)))) for row in p.obs.rows)
    return Pomdp(states=p.states, actions=p.actions, observations=p.observations,
                 initial=p.initial, goal=p.goal, delta=delta,
                 obs=PartialObsFn(obs_rows))


def external_solver():
    """Command template for a drop-in DIMACS solver, or None."""
    env = os.environ.get("SENSYNTH_SOLVER")
    if env and env != "embedded":
        return env
    for path in (shutil.which("splr"), "/tmp/splr_install/bin/splr"):
        if path and os.path.exists(path):
            return f"{path} -q -r - {{input}}"
    return None


@pytest.fixture(scope="session")
def fig1():
    return gen_fig1()


@pytest.fixture(scope="session")
def det_hallway():
    return gen_det_hallway()
