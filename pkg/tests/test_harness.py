import json

import numpy as np
import pytest

from greenp2p import cli
from greenp2p.harness import engine
from greenp2p.harness.config import (
    SimConfig,
    coerce,
    deviations,
    load_config,
    preset,
    strategy,
)
from greenp2p.harness.runner import (
    CycleMetrics,
    compare_strategies,
    final_fractions,
    run_experiment,
    run_query_cycle,
)
from greenp2p.harness.world import init_world, refresh_friend_dbs, snapshot_hash
from greenp2p.reputation import VoteHistory, correlation, extend_history, weighted_score
from greenp2p.verification import plan_verification


def smoke(**kw):
    return preset("smoke", **kw)


def test_same_seed_same_bytes():
    a = run_experiment(smoke())
    b = run_experiment(smoke())
    assert a.csv_text() == b.csv_text()
    assert a.report["snapshot"] == b.report["snapshot"]
    assert run_experiment(smoke(seed=2)).report["snapshot"] != a.report["snapshot"]


def test_metrics_rows_and_fraction():
    res = run_experiment(smoke())
    assert len(res.metrics) == 3
    for m in res.metrics:
        assert m.total_downloads == m.authentic_downloads + m.polluted_accepted
        if m.total_downloads:
            assert m.fraction_authentic == m.authentic_downloads / m.total_downloads
    assert res.csv_text().splitlines()[0].startswith("experimental_cycle,")


def test_degenerate_run():
    res = run_experiment(smoke(experimental_cycles=1, query_cycles_per_experimental_cycle=0))
    assert len(res.metrics) == 1
    m = res.metrics[0]
    assert m.total_downloads == 0 and m.fraction_authentic is None
    assert res.report["counters"]["genuine_queries"] == 0


def test_world_snapshot_is_deterministic():
    assert snapshot_hash(init_world(smoke())) == snapshot_hash(init_world(smoke()))


def test_init_conservation():
    cfg = smoke()
    w = init_world(cfg)
    genuine = int((~w.arrays["is_pol"]).sum())
    polluters = int(w.arrays["is_pol"].sum())
    decoy = w.arrays["decoy"]
    prov_n = w.arrays["prov_n"]
    assert prov_n[~decoy].sum() == genuine * cfg.authentic_shares_per_genuine
    assert prov_n[decoy].sum() == polluters * cfg.polluted_shares_per_polluter
    assert not w.arrays["L"].any() and not w.arrays["vot_n"].any()


def test_seeded_shares_follow_zipf():
    cfg = preset("desk", attack="identifier", polluted_shares_per_polluter=0)
    w = init_world(cfg)
    a = w.arrays
    counts = a["prov_n"].astype(float)
    fv, fvn = a["fv"], a["fvn"]
    per_file = np.array([counts[fv[f, : fvn[f]]].sum() for f in range(len(w.files))])
    per_rank = np.zeros(fv.shape[1])
    for f in range(len(w.files)):
        per_rank[: fvn[f]] += counts[fv[f, : fvn[f]]]

    def slope(c):
        c = np.sort(c)[::-1]
        return np.polyfit(np.log(np.arange(1, len(c) + 1)), np.log(c), 1)[0]

    assert slope(per_file) == pytest.approx(-0.8, abs=0.1)
    assert slope(per_rank) == pytest.approx(-0.8, abs=0.1)


def test_single_honest_version_always_authentic():
    cfg = SimConfig(users=60, group_count=3, beta=0.0, file_count=1, versions_per_file=1,
                    decoys_per_file=0, authentic_shares_per_genuine=1, experimental_cycles=1,
                    query_cycles_per_experimental_cycle=200, friend_db_refresh_period=100)
    res = run_experiment(cfg)
    c = res.report["counters"]
    assert c["authentic_accepted"] == c["genuine_queries"] == 200
    assert res.final_fraction == 1.0


def test_baseline_never_scores():
    c = run_experiment(smoke(strategy="baseline")).report["counters"]
    assert c["rep_evaluations"] == 0 and c["quick_estimates"] == 0 and c["detected"] == 0
    c = run_experiment(smoke(strategy="green")).report["counters"]
    assert c["rep_evaluations"] > 0 and c["quick_estimates"] > 0


def test_replay_cycle_by_cycle_matches_batch():
    cfg = smoke(experimental_cycles=1, query_cycles_per_experimental_cycle=2500)
    batch = run_experiment(cfg, keep_world=True)
    w = init_world(cfg)
    events = [run_query_cycle(w) for _ in range(cfg.total_cycles)]
    assert snapshot_hash(w) == batch.report["snapshot"]
    total = np.zeros(engine.N_COUNTERS, np.int64)
    for ev in events:
        for name, d in ev["counters"].items():
            total[engine.C[name]] += d
    replayed = CycleMetrics.from_counters(0, total)
    assert replayed == batch.metrics[0]
    assert all(ev["cycle"] == i for i, ev in enumerate(events))


def test_compare_against_itself_gives_identical_columns():
    rows = compare_strategies(smoke(), ["green", "green"])
    by = {}
    for r in rows:
        by.setdefault(r["experimental_cycle"], []).append(
            {k: v for k, v in r.items() if k != "strategy"})
    assert all(a == b for a, b in by.values())
    with pytest.raises(ValueError):
        compare_strategies(smoke(), ["green"])
    with pytest.raises(ValueError):
        compare_strategies(smoke(), ["green", "nope"])


def test_comparison_is_paired(tmp_path):
    rows = compare_strategies(smoke(), ["baseline", "green"], seeds=[1, 2], out_dir=tmp_path)
    finals = final_fractions(rows)
    assert set(finals) == {("baseline", 1), ("green", 1), ("baseline", 2), ("green", 2)}
    assert (tmp_path / "comparison.csv").read_text().count("\n") == 1 + 2 * 2 * 3
    doc = json.loads((tmp_path / "comparison.json").read_text())
    assert doc["strategies"]["baseline"]["reputation"] is False


def test_strategy_table():
    assert strategy("credence").m == 1 and not strategy("credence").verify
    assert strategy("green").social and strategy("green").verify
    assert smoke(strategy="credence").effective_m() == 1
    assert smoke(strategy="green").effective_m() == 5
    with pytest.raises(ValueError):
        strategy("eigentrust")


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(beta=1.5)
    with pytest.raises(ValueError):
        SimConfig(gamma=0.0)
    with pytest.raises(ValueError):
        SimConfig(file_count=1, versions_per_file=2, authentic_shares_per_genuine=3)
    with pytest.raises(ValueError):
        SimConfig(attack="sybil")


def test_config_file_then_overrides(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"format": 1, "beta": 0.3, "seed": 4}))
    cfg = load_config(p, {"seed": 9}, base="smoke")
    assert (cfg.beta, cfg.seed, cfg.users) == (0.3, 9, 300)
    p.write_text(json.dumps({"format": 2}))
    with pytest.raises(ValueError):
        load_config(p)
    p.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(ValueError):
        load_config(p)
    assert coerce("download_sources", "none") is None
    assert coerce("efpr", "0") == 0.0 and coerce("strategy", "green") == "green"


def test_deviation_report_lists_scale():
    dev = deviations(preset("desk"))
    assert dev["users"] == (2000, 1_157_827)
    assert "beta" not in dev


def test_cli_run_writes_outputs(tmp_path, capsys):
    rc = cli.main(["run", "--preset", "smoke", "--set", "experimental_cycles=2",
                   "--set", "strategy=baseline", "--out", str(tmp_path), "--quiet"])
    assert rc == 0
    assert (tmp_path / "metrics.csv").read_text().count("\n") == 3
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["config"]["strategy"] == "baseline" and report["environment"]["python"]
    assert "timings_s" in report


def test_cli_planners(capsys):
    cli.main(["plan-verify", "-b", "10", "-r", "2", "--efpr", "0.133"])
    assert json.loads(capsys.readouterr().out)["v_min"] == 6
    cli.main(["plan-group", "--beta", "0.2", "--target", "0.94"])
    assert json.loads(capsys.readouterr().out)["m"] == 5
    assert cli.main(["plan-group", "--beta", "0.6", "--target", "0.9"]) == 1


def test_cli_rejects_unknown_field():
    with pytest.raises(SystemExit):
        cli.main(["run", "--preset", "smoke", "--set", "nope=1"])


# -- the compiled engine agrees with the reference library ---------------------


def _history(col, vids):
    return VoteHistory({vids[i]: float(x) for i, x in enumerate(col) if x})


def test_engine_correlations_and_scores_match_library():
    cfg = smoke(experimental_cycles=2)
    res = run_experiment(cfg, keep_world=True)
    w = res.world
    a = w.arrays
    L, E, S = a["L"], a["E"], a["S"]
    vids = list(range(L.shape[0]))
    rng = np.random.default_rng(0)
    gen = np.flatnonzero(~a["is_pol"])
    checked = 0
    for _ in range(200):
        u, o = int(rng.choice(gen)), int(rng.integers(0, L.shape[1]))
        if u == o:
            continue
        lib = correlation(_history(E[:, u], vids), _history(L[:, o], vids))
        eng = engine.theta_from_counts(*S[u, o])
        assert lib == pytest.approx(eng, abs=1e-12)
        checked += 1
    assert checked > 150

    ip = w.ip.copy()
    ip[engine.P_CAP] = L.shape[1]  # no sampling: the score is deterministic
    ip[engine.P_SOCIAL] = 0
    rs = np.zeros(1, np.uint64)
    tc, ts = np.zeros(L.shape[1]), np.zeros(L.shape[1], np.int64)
    counters = np.zeros(engine.N_COUNTERS, np.int64)
    for tag, v in enumerate(np.flatnonzero(a["vot_n"])[:40], start=1):
        u = int(rng.choice(gen))
        eng = engine.reputation(rs, u, v, L, S, a["QS"], a["QC"], a["vot"].copy(), a["vot_n"],
                                a["vcomp"], ip, w.fp, tc, ts, tag, counters)
        pairs = [(L[v, o], engine.theta_from_counts(*S[u, o]))
                 for o in a["vot"][v, : a["vot_n"][v]] if o != u]
        assert eng == pytest.approx(weighted_score(pairs), abs=1e-12)


def test_engine_extension_matches_library_after_refresh():
    cfg = smoke(experimental_cycles=1, query_cycles_per_experimental_cycle=999)
    w = init_world(cfg)
    run_query_cycle(w)
    from greenp2p.harness.runner import _advance

    _advance(w, 999)
    refresh_friend_dbs(w)
    a = w.arrays
    L, E = a["L"], a["E"]
    vids = list(range(L.shape[0]))
    adj = w.adjacency
    for u in np.flatnonzero(~a["is_pol"])[:60]:
        friends = adj.indices[adj.indptr[u] : adj.indptr[u + 1]]
        ext = extend_history(_history(L[:, u], vids), [_history(L[:, f], vids) for f in friends],
                             cfg.gamma)
        expect = np.array([np.sign(ext.get(v)) for v in vids], np.int8)
        assert np.array_equal(expect, E[:, u])


def test_engine_plan_matches_planner():
    w = init_world(smoke())
    assert w.ip[engine.P_VMIN] == plan_verification(10, 2, 0.133).v_min
    assert w.ip[engine.P_SOURCES] == 5
