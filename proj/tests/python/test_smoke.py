import pytest

import cached_dfl as cd

QUICK = {
    "agents": 6,
    "epochs": 3,
    "train-samples": 600,
    "test-samples": 120,
    "input-dim": 12,
    "partition": "iid",
    "epoch-seconds": 30,
    "patience": 0,
}


def test_defaults_and_resolution():
    d = cd.default_config()
    assert d["agents"] == 100
    assert d["tau-max"] == 10
    r = cd.resolve_config({"cache-size": 4, "seed": 9})
    assert r["cache-size"] == 4
    assert r["seed"] == 9
    with pytest.raises(ValueError):
        cd.resolve_config({"agents": 0})
    with pytest.raises(ValueError):
        cd.resolve_config({"no-such-key": 1})


def test_speedup():
    s = cd.speedup_config({"local-steps": 30}, 3)
    assert s["local-steps"] == 10
    assert s["speed"] == pytest.approx(3 * cd.default_config()["speed"])


def test_run_is_deterministic():
    a = cd.run(QUICK)
    b = cd.run(QUICK)
    assert len(a) == 3
    assert a == b
    assert all(0.0 <= m["mean_acc"] <= 1.0 for m in a)
    csv = cd.metrics_csv(a)
    assert csv.splitlines()[0].startswith("epoch,mean_acc,var_acc")
    assert len(csv.splitlines()) == 4


def test_grid_and_contacts():
    g = cd.build_grid(10, 10, 200.0)
    assert g.intersection_count == 100
    assert g.diameter() == 18
    assert cd.detect_contacts([(0, 0), (50, 0), (500, 500)], 100.0) == [(0, 1)]


def test_lru_update():
    out = cd.lru_update(0, 2, 10, [(1, 3, 5, 0)], (2, 7, 5, 0), [(1, 5, 5, 0), (3, 2, 5, 0)], 7)
    assert [(e[0], e[1]) for e in out] == [(2, 7), (1, 5)]


def test_cache_occupancy_age_zero():
    s = cd.cache_occupancy({"agents": 30, "tau-max": 1, "cache-size": 30}, 5)
    assert s["age_mean"] == 0.0
