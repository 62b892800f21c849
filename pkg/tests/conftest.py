import os
import subprocess
import sys
import threading

import pytest

from sdmm.harness import WorkerEndpoint, WorkerServer


class ThreadWorkers:
    def __init__(self):
        self.servers = []

    def start(self, count=1):
        out = []
        for _ in range(count):
            server = WorkerServer("127.0.0.1", 0)
            threading.Thread(target=server.serve_forever, daemon=True).start()
            self.servers.append(server)
            out.append(WorkerEndpoint("127.0.0.1", server.port))
        return out

    def close(self):
        for s in self.servers:
            s.shutdown()
            s.server_close()


@pytest.fixture
def thread_workers():
    pool = ThreadWorkers()
    yield pool
    pool.close()


def spawn_worker_processes(count):
    """Start ``count`` worker processes on ephemeral ports; returns (procs, endpoints)."""
    env = dict(os.environ, PYTHONUNBUFFERED="1")
    procs = [subprocess.Popen([sys.executable, "-m", "sdmm", "serve", "--port", "0"],
                              stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True, env=env)
             for _ in range(count)]
    endpoints = []
    for p in procs:
        line = p.stdout.readline().strip()
        assert line.startswith("listening "), line
        endpoints.append(WorkerEndpoint.parse(line.split()[1]))
    return procs, endpoints


def stop_processes(procs):
    for p in procs:
        p.terminate()
    for p in procs:
        p.wait(timeout=10)
        p.stdout.close()
        p.stderr.close()


@pytest.fixture
def worker_processes():
    started = []

    def start(count):
        procs, endpoints = spawn_worker_processes(count)
        started.extend(procs)
        return procs, endpoints

    yield start
    stop_processes(started)


_criteria: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when == "teardown":
        return
    number, title = mark.args
    if report.when == "call" or report.failed or report.skipped:
        status = "PASS" if report.passed else "FAIL"
        prev = _criteria.get(number, (title, "PASS"))[1]
        _criteria[number] = (title, "FAIL" if "FAIL" in (prev, status) else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        title, status = _criteria[number]
        terminalreporter.write_line(f"criterion {number}: {status}  {title}")
