import socket
import struct
import threading

import numpy as np
import pytest

from sdmm import protocol
from sdmm.harness import (LeakageLog, WorkerEndpoint, WorkerError, call_worker, collusion_view,
                          run_local, run_remote)
from sdmm.matrix import DenseMatrix
from sdmm.scheme import PartitionParams, make_plan


def schoolbook(x, y, q):
    return [[sum(a * b for a, b in zip(row, col)) % q for col in zip(*y)] for row in x]


def exchange(sock, raw: bytes):
    sock.sendall(raw)
    return protocol.recv_message(sock)


@pytest.fixture
def plan():
    return make_plan(PartitionParams(2, 2, 2, 1))


def inputs(plan, seed=0, shape=(4, 4, 4)):
    rng = np.random.default_rng(seed)
    a, b, c = shape
    return DenseMatrix.random(plan.field, a, b, rng), DenseMatrix.random(plan.field, b, c, rng)


def test_run_local_matches_schoolbook(plan):
    a, b = inputs(plan)
    product, log = run_local(a, b, plan, np.random.default_rng(1))
    assert (plan.n, plan.q) == (13, 53)
    assert product.tolist() == schoolbook(a.tolist(), b.tolist(), plan.q)
    assert len(log) == plan.n
    assert [r.index for r in log.records] == list(range(1, 14))


def test_run_local_thread_count_irrelevant(plan):
    a, b = inputs(plan, 3)
    p1, l1 = run_local(a, b, plan, np.random.default_rng(7), workers=1)
    p2, l2 = run_local(a, b, plan, np.random.default_rng(7), workers=plan.n)
    assert p1 == p2
    assert l1.records == l2.records


def test_run_local_zero(plan):
    z = DenseMatrix.zeros(plan.field, 4, 4)
    product, _ = run_local(z, z, plan, np.random.default_rng(0))
    assert product == z


def test_log_products_are_share_products(plan):
    a, b = inputs(plan, 4)
    _, log = run_local(a, b, plan, np.random.default_rng(2))
    for rec in log.records:
        assert rec.product == rec.share_a @ rec.share_b


def test_collusion_view(plan):
    a, b = inputs(plan, 5)
    _, log = run_local(a, b, plan, np.random.default_rng(2))
    assert collusion_view(log, []) == ()
    (pair,) = collusion_view(log, [4])
    assert pair == (log[4].share_a, log[4].share_b)
    with pytest.raises(IndexError):
        collusion_view(log, [14])
    with pytest.raises(ValueError):
        collusion_view(log, [1, 2])
    wide = LeakageLog(log.records, collusion_limit=3)
    view = collusion_view(wide, [9, 2, 5])
    assert view == tuple((wide[i].share_a, wide[i].share_b) for i in (2, 5, 9))


def test_worker_scalar_compute(thread_workers):
    (ep,) = thread_workers.start()
    with socket.create_connection((ep.host, ep.port), timeout=5) as sock:
        reply = exchange(sock, protocol.encode_message(
            protocol.Compute(53, np.array([[3]]), np.array([[4]]))))
    assert isinstance(reply, protocol.Result)
    assert reply.values.tolist() == [[12]]


def test_worker_errors_keep_connection_open(thread_workers):
    (ep,) = thread_workers.start()
    bad_dims = b"SDMM\x01\x01" + struct.pack("<QIII", 53, 1, 2, 1) + struct.pack("<5Q", 1, 2, 3, 4, 5)
    with socket.create_connection((ep.host, ep.port), timeout=5) as sock:
        reply = exchange(sock, struct.pack("<I", len(bad_dims)) + bad_dims)
        assert reply == protocol.Error(protocol.ERR_DIMENSION)
        reply = exchange(sock, struct.pack("<I", 6) + b"NOPE\x01\x01")
        assert reply == protocol.Error(protocol.ERR_BAD_MAGIC)
        reply = exchange(sock, protocol.encode_message(protocol.Result(np.array([[1]]))))
        assert reply == protocol.Error(protocol.ERR_MALFORMED)
        reply = exchange(sock, protocol.encode_message(
            protocol.Compute(53, np.array([[5, 1]]), np.array([[2], [3]]))))
        assert reply.values.tolist() == [[13]]


def test_worker_truncated_frame(thread_workers):
    (ep,) = thread_workers.start()
    frame = protocol.encode_message(protocol.Compute(53, np.array([[3]]), np.array([[4]])))
    with socket.create_connection((ep.host, ep.port), timeout=5) as sock:
        sock.sendall(frame[:-5])
        sock.shutdown(socket.SHUT_WR)
        assert protocol.recv_message(sock) == protocol.Error(protocol.ERR_MALFORMED)


def test_worker_oversized_frame(thread_workers):
    (ep,) = thread_workers.start()
    with socket.create_connection((ep.host, ep.port), timeout=5) as sock:
        reply = exchange(sock, struct.pack("<I", 2**32 - 1))
        assert reply == protocol.Error(protocol.ERR_MALFORMED)
        assert sock.recv(1) == b""


def test_worker_concurrent_clients(thread_workers):
    (ep,) = thread_workers.start()
    results = {}
    barrier = threading.Barrier(8)

    def client(k):
        barrier.wait()
        f = make_plan(PartitionParams(1, 1, 1, 1)).field
        x = DenseMatrix.from_rows(f, [[k]])
        results[k] = call_worker(ep, x, x).tolist()

    threads = [threading.Thread(target=client, args=(k,)) for k in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    q = make_plan(PartitionParams(1, 1, 1, 1)).q
    assert results == {k: [[k * k % q]] for k in range(8)}


def test_run_remote_matches_local(thread_workers, plan):
    endpoints = thread_workers.start(plan.n)
    a, b = inputs(plan, 9, (8, 4, 6))
    pr, lr = run_remote(a, b, plan, np.random.default_rng(42), endpoints)
    pl, ll = run_local(a, b, plan, np.random.default_rng(42))
    assert pr == pl
    assert lr.records == ll.records


def test_run_remote_endpoint_down(thread_workers, plan):
    endpoints = thread_workers.start(plan.n)
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        dead = WorkerEndpoint("127.0.0.1", s.getsockname()[1])
    endpoints[6] = dead
    a, b = inputs(plan)
    with pytest.raises(WorkerError) as info:
        run_remote(a, b, plan, np.random.default_rng(0), endpoints, timeout=5)
    assert info.value.server_index == 7
    assert "server 7" in str(info.value)


def test_run_remote_repeated_endpoint_warns(thread_workers, plan):
    (ep,) = thread_workers.start()
    a, b = inputs(plan)
    with pytest.warns(UserWarning, match="several logical servers"):
        product, _ = run_remote(a, b, plan, np.random.default_rng(0), [ep] * plan.n)
    assert product.tolist() == schoolbook(a.tolist(), b.tolist(), plan.q)


def test_run_remote_needs_n_endpoints(thread_workers, plan):
    eps = thread_workers.start(2)
    a, b = inputs(plan)
    with pytest.raises(ValueError):
        run_remote(a, b, plan, np.random.default_rng(0), eps)


def test_endpoint_parsing():
    assert WorkerEndpoint.parse("localhost:9000") == WorkerEndpoint("localhost", 9000)
    with pytest.raises(ValueError):
        WorkerEndpoint.parse("nohost")
    with pytest.raises(ValueError):
        WorkerEndpoint("h", 70000)
