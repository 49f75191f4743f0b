#!/usr/bin/env python3
"""End-to-end check of the Python bindings.

Builds nothing itself: run `cargo build -p metagame-py` first, then
`python3 python/smoke_test.py`. The built cdylib is copied next to a
temporary directory under the import name Python expects.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path


def import_bindings():
    root = Path(__file__).resolve().parent.parent
    candidates = [
        root / "target" / profile / f"libmetagame_py{suffix}"
        for profile in ("debug", "release")
        for suffix in (".so", ".dylib")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("no built cdylib found; run `cargo build -p metagame-py` first")
    stage = Path(tempfile.mkdtemp(prefix="metagame_py_"))
    shutil.copy2(built, stage / "metagame_py.so")
    sys.path.insert(0, str(stage))
    import metagame_py

    return metagame_py


def close(a, b, tol=1e-9):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)


def check_prisoners_dilemma(mg):
    pd = mg.Game(
        type_names=[["only"], ["only"]],
        action_names=[["cooperate", "defect"], ["cooperate", "defect"]],
        prior=[1.0],
        payoffs=[
            [3.0, 0.0, 5.0, 1.0],
            [3.0, 5.0, 0.0, 1.0],
        ],
    )
    assert pd.players == 2
    assert pd.action_counts() == [2, 2]

    eqs = pd.equilibria(tol=1e-8)
    assert len(eqs) == 1, eqs
    (p1,), (p2,) = eqs[0]
    assert close(p1[1], 1.0) and close(p2[1], 1.0), eqs[0]

    holds, regret = pd.is_bne(eqs[0], 1e-9)
    assert holds and regret <= 1e-12, (holds, regret)
    not_eq, gain = pd.is_bne([[[1.0, 0.0]], [[1.0, 0.0]]], 1e-6)
    assert not not_eq and close(gain, 2.0), (not_eq, gain)

    assert close(pd.interim_payoff(eqs[0], 0, 0), 1.0)

    solved = pd.solve(method="br", seed=3)
    assert solved["converged"], solved
    holds, _ = pd.is_bne(solved["equilibria"][0], 1e-6)
    assert holds


def check_random_meta_game(mg):
    meta = mg.MetaGame.random(seed=11, stream=2)
    assert meta.players == 2
    ids = meta.transformation_ids()
    assert ids, ids

    solved = meta.solve(method="enumerate")
    assert solved["converged"] and solved["equilibria"], solved
    for rows, env in solved["equilibria"]:
        holds, gain = meta.is_meta_bne(rows, env, 1e-6)
        assert holds, (rows, env, gain)

    rows, env = solved["equilibria"][0]
    types = [0] * len(meta.type_counts())
    pi = meta.transformation_probability(rows, env, types)
    assert len(pi) == len(ids)
    assert close(sum(pi), 1.0, tol=1e-12), pi

    v = meta.interim_meta_payoff(rows, env, 0, 0)
    w = meta.environment_payoff(rows, env)
    assert math.isfinite(v) and math.isfinite(w)

    agent = meta.to_game()
    assert agent.players == len(meta.type_counts()) + 1
    agent_profile = rows + [[env]]
    for eps in (0.0, 1e-6, 0.1):
        meta_holds, _ = meta.is_meta_bne(rows, env, eps)
        agent_holds, _ = agent.is_bne(agent_profile, eps)
        assert meta_holds == agent_holds, eps


def check_subsidy_example(mg):
    meta = mg.MetaGame.subsidy()
    assert meta.transformation_ids() == ["T0", "T1", "T2", "TS"]
    solved = meta.solve(method="enumerate")
    assert solved["converged"], solved
    for rows, env in solved["equilibria"]:
        holds, gain = meta.is_meta_bne(rows, env, 1e-6)
        assert holds, gain
        for player_rows in rows:
            low, high = player_rows
            assert low[1] >= high[1] - 1e-9, player_rows


def main():
    mg = import_bindings()
    check_prisoners_dilemma(mg)
    check_random_meta_game(mg)
    check_subsidy_example(mg)
    print(f"smoke test passed (metagame_py {mg.__version__})")


if __name__ == "__main__":
    main()
