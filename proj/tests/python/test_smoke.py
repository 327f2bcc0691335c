import math

import numpy as np
import pytest

import weic


def feasible_instance(K=4, Nt=2, r=2.0):
    cfg = weic.SystemConfig(K=K, Nt=Nt)
    for seed in range(100):
        s = weic.generate_scenario(seed, cfg, r)
        if weic.has_feasible_eic(s):
            return cfg, s, weic.sample_channels(seed, cfg)
    pytest.fail("no feasible scenario in 100 seeds")


def test_action_table_sizes():
    assert len(weic.ActionTable(5, 4)) == 52
    assert len(weic.ActionTable(3, 2)) == 5
    assert weic.bell_number(5) == 52


def test_single_user_matches_top_singular_value():
    cfg = weic.SystemConfig(K=2, Nt=3, P=2.0)
    ch = weic.sample_channels(3, cfg)
    H = ch.link(0, 1)
    beams, min_sinr = weic.dtrcg_solve(ch, 0, [[1]], cfg.P)
    sigma = np.linalg.svd(H, compute_uv=False)[0]
    assert min_sinr == pytest.approx(cfg.P * sigma**2, rel=1e-3)
    assert sum(np.linalg.norm(b) ** 2 for b in beams) == pytest.approx(cfg.P, rel=1e-9)


def test_exhaustive_never_worse_than_sequential():
    cfg, s, ch = feasible_instance()
    ex = weic.exhaustive_search(s, ch)
    sq = weic.sequential_optimize(s, ch)
    assert ex["T"] <= sq["T"] * (1 + 1e-12)
    assert weic.plan_violations(ex["plan"], s) == []
    assert math.isclose(ex["T"], sum(ex["round_times"]))


def test_session_episode_roundtrip():
    sess = weic.Session()
    cfg = {"K": 3, "N": 3, "Nt": 2, "r": 2}
    reply = sess.request("reset", seed=0, config=cfg)
    ep = reply["episode_id"]
    assert reply["action_table_size"] == 5
    done = False
    rnd = 0
    while not done:
        step = sess.request("step", episode_id=ep, round=rnd, action_index=0)
        done = step["done"]
        rnd += 1
    fin = sess.request("finalize", episode_id=ep)
    assert fin["reward"] > 0
    with pytest.raises(RuntimeError, match="unknown_episode"):
        sess.request("step", episode_id=ep, round=0, action_index=0)
