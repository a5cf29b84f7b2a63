import math

import pytest

import freshsched as fs


def test_fcfs_closed_form():
    r = fs.fcfs_metrics(fs.params(0.5, 0.1))
    assert r.response_time == pytest.approx(2.5)
    assert r.paoi == pytest.approx(4.5)
    assert r.paoi == 1 / 0.5 + r.update_system_time


def test_query1_and_chain_agree():
    p = fs.params(0.45, 0.45)
    closed = fs.query1_metrics(p)
    chain = fs.query_k_metrics(p, 1)
    assert chain.paoi == pytest.approx(closed.paoi, rel=1e-4)
    assert chain.ctmc.tail_mass < 1e-8
    assert chain.ctmc.consistent


def test_errors_surface_as_exceptions():
    with pytest.raises(fs.FreshschedError, match="Unstable"):
        fs.fcfs_metrics(fs.params(0.9, 0.2))
    with pytest.raises(fs.FreshschedError, match="NonPositiveRate"):
        fs.params(0.0, 0.1)
    with pytest.raises(ValueError):
        fs.Policy("lifo")


def test_simulation_is_reproducible():
    p = fs.params(1 / 3, 1 / 3)
    cfg = fs.SimConfig(horizon=5000, replications=4)
    a = fs.simulate(p, fs.Policy("joint-3-3"), cfg)
    b = fs.simulate(p, "joint-3-3", cfg, workers=1)
    assert a.paoi.mean == b.paoi.mean
    assert a.paoi.half_width > 0
    assert a.nq.mean + a.nu.mean == pytest.approx(fs.conservation_rhs(p), rel=0.06)
    run = fs.run_replication(p, "query-3", cfg, 2)
    q, u = run.littles_law_residual(p)
    assert q < 0.05 and u < 0.05


def test_decide():
    s = fs.SchedulerState(2, 5, fs.ServerPosition.ServingUpdate)
    n = fs.decide(fs.Policy("query-3"), s, fs.Trigger.ArrivalQuery)
    assert (n.n_q, n.n_u, n.position, n.emptying) == (3, 5, fs.ServerPosition.ServingQuery, True)


def test_config_rows_and_cli():
    text = "[model]\nlambda_u = 0.5\nlambda_q = 0.1\n[sim]\nhorizon = 2000\nreplications = 3\n[policy.f]\nkind = fcfs\n"
    rows = fs.run_config(text)
    assert len(rows) == 10
    assert {r["source"] for r in rows} == {"analytic", "sim"}
    analytic = [r for r in rows if r["source"] == "analytic" and r["metric"] == "response_time"]
    assert analytic[0]["mean"] == pytest.approx(2.5)
    assert fs.config_csv(text) == fs.config_csv(text)
    code, out, _ = fs.cli(["analyze", "--lambda-u", "0.5", "--lambda-q", "0.1"])
    assert code == 0 and "E[A] = 4.5" in out
    aoi = [r for r in rows if r["metric"] == "aoi" and r["source"] == "analytic"]
    assert aoi[0]["mean"] is None and aoi[0]["status"] == "n/a"
    assert all(math.isfinite(r["mean"]) for r in rows if r["mean"] is not None)
