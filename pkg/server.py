import asyncio
import glob
import json
import logging
import os
import signal
import subprocess
import sys
import time
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

from aiohttp import web

from dcboost.config import Settings, load_settings
from dcboost.dc_core import ConfigurationError
from dcboost.logger import setup_logging

log = logging.getLogger("server")

PID_FILE = "./bench_worker.pid"
WORKER_BASE = [sys.executable, "main.py", "bench"]
WORKER_CWD = os.path.dirname(os.path.abspath(__file__))

# query/JSON 里允许透传给 main.py bench 的参数
BENCH_OVERRIDES = ("problem", "solver", "trials", "seed", "nu_strategy", "omega", "inner", "workers")


def _pid_is_running(pid: int) -> bool:
    try:
        os.kill(pid, 0)
        return True
    except ProcessLookupError:
        return False
    except PermissionError:
        return True


def _reap(pid: int) -> Optional[int]:
    # 子进程结束后回收，避免僵尸进程让 kill(pid, 0) 一直成功
    try:
        done, status = os.waitpid(pid, os.WNOHANG)
    except ChildProcessError:
        return None
    if done == 0:
        return None
    return os.waitstatus_to_exitcode(status)


def _read_pidfile(path: str) -> Optional[int]:
    if not os.path.exists(path):
        return None
    try:
        with open(path, "r", encoding="utf-8") as f:
            return int(f.read().strip())
    except (OSError, ValueError):
        return None


def _write_pidfile(path: str, pid: int) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(str(pid))


def _remove_pidfile(path: str) -> None:
    try:
        os.remove(path)
    except FileNotFoundError:
        pass


def build_worker_cmd(params: Dict[str, Any], base: Sequence[str] = WORKER_BASE) -> List[str]:
    """main.py bench command line; unknown keys are rejected."""
    unknown = set(params) - set(BENCH_OVERRIDES)
    if unknown:
        raise ConfigurationError(f"unsupported bench parameters {sorted(unknown)}")
    cmd = list(base)
    for key in BENCH_OVERRIDES:
        value = params.get(key)
        if value is None or value == "":
            continue
        cmd += ["--" + key.replace("_", "-"), str(value)]
    return cmd


def latest_summary(out_dir: str) -> Optional[Dict[str, Any]]:
    paths = glob.glob(os.path.join(out_dir, "*_summary.json"))
    if not paths:
        return None
    newest = max(paths, key=os.path.getmtime)
    with open(newest, "r", encoding="utf-8") as f:
        payload = json.load(f)
    payload["path"] = os.path.abspath(newest)
    return payload


@dataclass
class WorkerState:
    pid: Optional[int] = None
    started_at: Optional[float] = None
    cmd: Optional[List[str]] = None
    last_exit_code: Optional[int] = None
    last_error: Optional[str] = None


class WorkerController:
    def __init__(self, *, pid_file: str = PID_FILE, base_cmd: Sequence[str] = WORKER_BASE,
                 cwd: str = WORKER_CWD) -> None:
        self.pid_file = pid_file
        self.base_cmd = list(base_cmd)
        self.cwd = cwd
        self.state = WorkerState()
        self._lock = asyncio.Lock()

        # 从 pidfile 恢复
        pid = _read_pidfile(pid_file)
        if pid and _pid_is_running(pid):
            self.state.pid = pid
        else:
            _remove_pidfile(pid_file)

    def _alive(self, pid: int) -> bool:
        code = _reap(pid)
        if code is not None:
            self.state.last_exit_code = code
            return False
        return _pid_is_running(pid)

    def status(self) -> Dict[str, Any]:
        pid = self.state.pid
        running = bool(pid) and self._alive(pid)
        if pid and not running:
            self.state.pid = None
            _remove_pidfile(self.pid_file)
        return {
            "ok": True,
            "running": running,
            "pid": pid if running else None,
            "started_at": self.state.started_at,
            "last_exit_code": self.state.last_exit_code,
            "last_error": self.state.last_error,
            "pidfile": os.path.abspath(self.pid_file),
            "cmd": self.state.cmd or self.base_cmd,
        }

    async def start(self, *, enable: bool = True, params: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        async with self._lock:
            if not enable:
                return {**self.status(), "msg": "enable=false, not starting"}

            st = self.status()
            if st["running"]:
                return {**st, "msg": "already running"}

            try:
                cmd = build_worker_cmd(params or {}, self.base_cmd)
            except ConfigurationError as e:
                return {**self.status(), "ok": False, "msg": str(e)}

            try:
                # 独立进程组，stop 时整组杀掉（含 ProcessPool 子进程）
                p = subprocess.Popen(cmd, cwd=self.cwd, stdout=None, stderr=None, preexec_fn=os.setsid)
            except OSError as e:
                self.state.last_error = repr(e)
                log.error("worker start failed: %r", e)
                return {**self.status(), "ok": False, "msg": f"start failed: {e!r}"}

            self.state.pid = p.pid
            self.state.started_at = time.time()
            self.state.cmd = cmd
            self.state.last_exit_code = None
            self.state.last_error = None
            _write_pidfile(self.pid_file, p.pid)
            log.info("worker started pid=%d cmd=%s", p.pid, " ".join(cmd))
            return {**self.status(), "msg": "started"}

    async def stop(self, *, timeout_sec: float = 8.0) -> Dict[str, Any]:
        async with self._lock:
            st = self.status()
            if not st["running"]:
                return {**st, "msg": "already stopped"}

            pid = st["pid"]
            assert pid is not None

            try:
                os.killpg(os.getpgid(pid), signal.SIGTERM)
            except ProcessLookupError:
                self.state.pid = None
                _remove_pidfile(self.pid_file)
                return {**self.status(), "msg": "already exited"}
            except OSError as e:
                self.state.last_error = repr(e)
                return {**self.status(), "ok": False, "msg": f"stop failed: {e!r}"}

            deadline = time.time() + timeout_sec
            while time.time() < deadline:
                if not self._alive(pid):
                    self.state.pid = None
                    _remove_pidfile(self.pid_file)
                    log.info("worker pid=%d stopped (SIGTERM)", pid)
                    return {**self.status(), "msg": "stopped (SIGTERM)"}
                await asyncio.sleep(0.2)

            # 超时强杀
            try:
                os.killpg(os.getpgid(pid), signal.SIGKILL)
            except ProcessLookupError:
                pass

            await asyncio.sleep(0.2)
            self._alive(pid)
            self.state.pid = None
            _remove_pidfile(self.pid_file)
            log.warning("worker pid=%d killed (SIGKILL)", pid)
            return {**self.status(), "msg": "killed (SIGKILL)"}


# ---------- HTTP Handlers ----------

def _truthy(text: str) -> bool:
    return text.lower() in ("1", "true", "yes", "on")


async def handle_start(request: web.Request) -> web.Response:
    ctl: WorkerController = request.app["ctl"]

    # /start?enable=true&problem=p6_4&solver=dca
    enable = _truthy(request.query.get("enable", "true"))
    params: Dict[str, Any] = {k: v for k, v in request.query.items() if k != "enable"}

    # 也支持 JSON body
    if request.can_read_body and request.content_type == "application/json":
        try:
            body = await request.json()
        except json.JSONDecodeError:
            return web.json_response({"ok": False, "msg": "invalid JSON body"}, status=400)
        if isinstance(body, dict):
            if "enable" in body:
                enable = bool(body.pop("enable"))
            params.update(body)

    res = await ctl.start(enable=enable, params=params)
    return web.json_response(res, status=200 if res["ok"] else 400)


async def handle_stop(request: web.Request) -> web.Response:
    ctl: WorkerController = request.app["ctl"]

    timeout = request.query.get("timeout")
    try:
        timeout_sec = float(timeout) if timeout else 8.0
    except ValueError:
        return web.json_response({"ok": False, "msg": f"bad timeout {timeout!r}"}, status=400)

    res = await ctl.stop(timeout_sec=timeout_sec)
    return web.json_response(res)


async def handle_status(request: web.Request) -> web.Response:
    ctl: WorkerController = request.app["ctl"]
    return web.json_response(ctl.status())


async def handle_results(request: web.Request) -> web.Response:
    out_dir: str = request.app["out_dir"]
    summary = latest_summary(out_dir)
    if summary is None:
        return web.json_response({"ok": False, "msg": f"no summary in {out_dir}"}, status=404)
    return web.json_response({"ok": True, "summary": summary})


def create_app(settings: Optional[Settings] = None, ctl: Optional[WorkerController] = None) -> web.Application:
    st = settings or Settings()
    app = web.Application()
    app["ctl"] = ctl or WorkerController()
    app["out_dir"] = os.path.join(WORKER_CWD, st.out_dir) if not os.path.isabs(st.out_dir) else st.out_dir
    app.router.add_post("/start", handle_start)
    app.router.add_post("/stop", handle_stop)
    app.router.add_get("/status", handle_status)
    app.router.add_get("/results", handle_results)
    return app


if __name__ == "__main__":
    st = load_settings(os.path.join(WORKER_CWD, "config.yaml"))
    setup_logging(st.log_level, st.log_file)
    web.run_app(create_app(st), host=st.server_host, port=st.server_port)
