"""Running the N-server protocol, in process or over TCP."""

from __future__ import annotations

import logging
import socket
import socketserver
import time
import warnings
from collections import Counter
from collections.abc import Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import protocol
from .matrix import DenseMatrix, mod_matmul, storage_dtype
from .scheme import SchemePlan, ShareSet, decode, encode, server_multiply

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 30.0


class WorkerError(RuntimeError):
    def __init__(self, server_index: int, message: str):
        super().__init__(f"server {server_index}: {message}")
        self.server_index = server_index


@dataclass(frozen=True)
class WorkerEndpoint:
    host: str
    port: int

    def __post_init__(self):
        if not 1 <= self.port <= 65535:
            raise ValueError(f"port {self.port} outside [1, 65535]")

    @classmethod
    def parse(cls, text: str) -> WorkerEndpoint:
        host, sep, port = text.strip().rpartition(":")
        if not sep or not host:
            raise ValueError(f"endpoint {text!r} is not host:port")
        return cls(host, int(port))

    def __str__(self):
        return f"{self.host}:{self.port}"


@dataclass(frozen=True)
class ServerRecord:
    index: int
    share_a: DenseMatrix
    share_b: DenseMatrix
    product: DenseMatrix
    sent_at: float = field(compare=False)
    received_at: float = field(compare=False)


@dataclass
class LeakageLog:
    """Everything each server saw during one job, one record per server."""

    records: list[ServerRecord]
    collusion_limit: int

    def __len__(self):
        return len(self.records)

    def __getitem__(self, index: int) -> ServerRecord:
        return self.records[index - 1]


def _build_log(shares: ShareSet, products: list[DenseMatrix], times, plan: SchemePlan) -> LeakageLog:
    records = [
        ServerRecord(i, shares.share_a[i - 1], shares.share_b[i - 1], products[i - 1], *times[i - 1])
        for i in range(1, plan.n + 1)
    ]
    return LeakageLog(records, plan.params.T)


def run_local(a: DenseMatrix, b: DenseMatrix, plan: SchemePlan, rng: np.random.Generator,
              workers: int = 1) -> tuple[DenseMatrix, LeakageLog]:
    shares = encode(a, b, plan, rng)

    def job(i):
        sent = time.time()
        h = server_multiply(shares.share_a[i], shares.share_b[i])
        return h, (sent, time.time())

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(job, range(plan.n)))
    products = [h for h, _ in results]
    return decode(products, plan), _build_log(shares, products, [ts for _, ts in results], plan)


def call_worker(endpoint: WorkerEndpoint, share_a: DenseMatrix, share_b: DenseMatrix,
                timeout: float = DEFAULT_TIMEOUT) -> DenseMatrix:
    """Send one COMPUTE request and wait for the product."""
    q = share_a.field.modulus
    with socket.create_connection((endpoint.host, endpoint.port), timeout=timeout) as sock:
        protocol.send_message(sock, protocol.Compute(q, share_a.values, share_b.values))
        reply = protocol.recv_message(sock)
    if isinstance(reply, protocol.Error):
        raise protocol.ProtocolError(reply.code, f"worker replied with error code {reply.code}")
    if not isinstance(reply, protocol.Result):
        raise protocol.ProtocolError(protocol.ERR_MALFORMED, "worker sent a non-RESULT reply")
    expected = (share_a.rows, share_b.cols)
    if reply.values.shape != expected:
        raise protocol.ProtocolError(protocol.ERR_DIMENSION,
                                     f"result shape {reply.values.shape}, expected {expected}")
    if reply.values.size and int(reply.values.max()) >= q:
        raise protocol.ProtocolError(protocol.ERR_ELEMENT_RANGE, "result element >= q")
    return DenseMatrix(share_a.field, reply.values.astype(object))


def run_remote(a: DenseMatrix, b: DenseMatrix, plan: SchemePlan, rng: np.random.Generator,
               endpoints: Sequence[WorkerEndpoint], timeout: float = DEFAULT_TIMEOUT
               ) -> tuple[DenseMatrix, LeakageLog]:
    """Dispatch share i to endpoints[i-1]; every server must answer."""
    if len(endpoints) != plan.n:
        raise ValueError(f"plan needs exactly {plan.n} endpoints, got {len(endpoints)}")
    repeated = [str(e) for e, c in Counter(endpoints).items() if c > 1]
    if repeated:
        warnings.warn(f"endpoints host several logical servers ({', '.join(repeated)}); "
                      "collusion among co-hosted servers is not covered by the T-security guarantee",
                      stacklevel=2)
    shares = encode(a, b, plan, rng)

    def job(i):
        sent = time.time()
        try:
            h = call_worker(endpoints[i], shares.share_a[i], shares.share_b[i], timeout)
        except (OSError, protocol.ProtocolError, protocol.ConnectionClosed) as exc:
            raise WorkerError(i + 1, f"{endpoints[i]}: {exc}") from exc
        return h, (sent, time.time())

    with ThreadPoolExecutor(max_workers=plan.n) as pool:
        futures = [pool.submit(job, i) for i in range(plan.n)]
        results = [f.result() for f in futures]
    products = [h for h, _ in results]
    return decode(products, plan), _build_log(shares, products, [ts for _, ts in results], plan)


def collusion_view(log: LeakageLog, servers: Iterable[int]) -> tuple[tuple[DenseMatrix, DenseMatrix], ...]:
    """The (share_a, share_b) pairs a coalition jointly received, in index order."""
    idx = sorted(set(servers))
    for i in idx:
        if not 1 <= i <= len(log):
            raise IndexError(f"server index {i} outside [1, {len(log)}]")
    if len(idx) > log.collusion_limit:
        raise ValueError(f"{len(idx)} servers exceed the collusion limit T={log.collusion_limit}")
    return tuple((log[i].share_a, log[i].share_b) for i in idx)


def worker_compute(msg: protocol.Compute) -> np.ndarray:
    dtype = storage_dtype(msg.q)
    return mod_matmul(msg.share_a.astype(dtype), msg.share_b.astype(dtype), msg.q)


class _WorkerHandler(socketserver.BaseRequestHandler):
    def handle(self):
        sock = self.request
        while True:
            try:
                payload = protocol.read_frame(sock)
            except protocol.ConnectionClosed as exc:
                if exc.partial:
                    self._reply(protocol.Error(protocol.ERR_MALFORMED))
                return
            except protocol.ProtocolError as exc:
                # Cannot resynchronize after an oversized length prefix.
                self._reply(protocol.Error(exc.code))
                return
            except OSError:
                return
            try:
                msg = protocol.decode_payload(payload)
                if not isinstance(msg, protocol.Compute):
                    raise protocol.ProtocolError(protocol.ERR_MALFORMED, "workers only accept COMPUTE")
                reply = protocol.Result(worker_compute(msg))
            except protocol.ProtocolError as exc:
                log.debug("rejected frame from %s: %s", self.client_address, exc)
                reply = protocol.Error(exc.code)
            except Exception:
                log.exception("unexpected failure handling frame from %s", self.client_address)
                reply = protocol.Error(protocol.ERR_MALFORMED)
            if not self._reply(reply):
                return

    def _reply(self, msg) -> bool:
        try:
            protocol.send_message(self.request, msg)
            return True
        except OSError:
            return False


class WorkerServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _WorkerHandler)

    @property
    def port(self) -> int:
        return self.server_address[1]


def serve(port: int, host: str = "127.0.0.1", on_ready=None):
    """Run a stateless worker until shut down."""
    with WorkerServer(host, port) as server:
        if on_ready is not None:
            on_ready(server)
        server.serve_forever()
