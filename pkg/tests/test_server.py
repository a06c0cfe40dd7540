import asyncio
import json
import os
import sys

import pytest
from aiohttp.test_utils import TestClient, TestServer

import server
from dcboost.config import Settings
from dcboost.dc_core import ConfigurationError

SLEEPER = [sys.executable, "-c", "import time; time.sleep(30)"]


def test_worker_command():
    cmd = server.build_worker_cmd({"solver": "dca", "problem": "p6_4", "trials": 5, "seed": None})
    assert cmd == server.WORKER_BASE + ["--problem", "p6_4", "--solver", "dca", "--trials", "5"]
    assert server.build_worker_cmd({"nu_strategy": "zhang_hager"}, ["x"]) == ["x", "--nu-strategy", "zhang_hager"]
    with pytest.raises(ConfigurationError):
        server.build_worker_cmd({"rm": "-rf"})


def test_latest_summary_picks_newest(tmp_path):
    assert server.latest_summary(str(tmp_path)) is None
    old = tmp_path / "p6_2_dca_summary.json"
    new = tmp_path / "p6_4_nmbdca_summary.json"
    old.write_text(json.dumps({"problem": "p6_2"}))
    new.write_text(json.dumps({"problem": "p6_4"}))
    os.utime(old, (1_000_000, 1_000_000))
    os.utime(new, (2_000_000, 2_000_000))
    got = server.latest_summary(str(tmp_path))
    assert got["problem"] == "p6_4"
    assert got["path"].endswith("p6_4_nmbdca_summary.json")


def test_controller_start_stop(tmp_path):
    pid_file = str(tmp_path / "worker.pid")

    async def scenario():
        ctl = server.WorkerController(pid_file=pid_file, base_cmd=SLEEPER, cwd=str(tmp_path))
        assert not ctl.status()["running"]

        res = await ctl.start(params={"problem": "p6_2"})
        assert res["ok"] and res["running"] and res["msg"] == "started"
        assert res["cmd"][-2:] == ["--problem", "p6_2"]
        assert os.path.exists(pid_file)

        again = await ctl.start()
        assert again["msg"] == "already running"

        stopped = await ctl.stop(timeout_sec=5.0)
        assert stopped["ok"] and not stopped["running"]
        assert not os.path.exists(pid_file)
        assert (await ctl.stop())["msg"] == "already stopped"

        refused = await ctl.start(params={"bogus": 1})
        assert not refused["ok"]
        skipped = await ctl.start(enable=False)
        assert skipped["msg"].startswith("enable=false")

    asyncio.run(scenario())


def test_http_routes(tmp_path):
    (tmp_path / "p6_2_dca_summary.json").write_text(json.dumps({"problem": "p6_2", "med_k": 24.0}))
    pid_file = str(tmp_path / "worker.pid")

    async def scenario():
        ctl = server.WorkerController(pid_file=pid_file, base_cmd=SLEEPER, cwd=str(tmp_path))
        app = server.create_app(Settings(out_dir=str(tmp_path)), ctl=ctl)
        async with TestClient(TestServer(app)) as client:
            resp = await client.get("/status")
            assert resp.status == 200
            assert (await resp.json())["running"] is False

            resp = await client.get("/results")
            body = await resp.json()
            assert body["ok"] and body["summary"]["med_k"] == 24.0

            resp = await client.post("/start", json={"enable": False})
            assert (await resp.json())["msg"].startswith("enable=false")

            resp = await client.post("/start?trials=2", json={"colour": "red"})
            assert resp.status == 400

            resp = await client.post("/start", json={"problem": "p6_4", "trials": 2})
            body = await resp.json()
            assert body["running"]
            assert "--trials" in body["cmd"]

            resp = await client.post("/stop?timeout=5")
            assert (await resp.json())["running"] is False

            resp = await client.post("/stop?timeout=soon")
            assert resp.status == 400

    asyncio.run(scenario())


def test_results_without_summaries(tmp_path):
    async def scenario():
        ctl = server.WorkerController(pid_file=str(tmp_path / "w.pid"), base_cmd=SLEEPER)
        app = server.create_app(Settings(out_dir=str(tmp_path / "empty")), ctl=ctl)
        async with TestClient(TestServer(app)) as client:
            resp = await client.get("/results")
            assert resp.status == 404

    asyncio.run(scenario())
