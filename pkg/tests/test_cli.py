import signal
import socket
import subprocess
import sys

import numpy as np
import pytest

from sdmm import protocol
from sdmm.cli import main

P2221 = ["--t", "2", "--s", "2", "--d", "2", "--T", "1"]


def write_matrix(path, rows):
    path.write_text(f"{len(rows)} {len(rows[0])}\n" + "".join(" ".join(map(str, r)) + "\n" for r in rows))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_plan_output(capsys):
    code, out, _ = run(capsys, "plan", *P2221)
    assert code == 0
    lines = out.splitlines()
    assert "N(minimal)=13 (selected)" in lines
    assert "N(closed-form)=15" in lines
    assert "q=53" in lines
    assert "rate(a=b=c)=4/39" in lines
    assert "(1, 1)->0, (1, 2)->5, (2, 1)->11, (2, 2)->3" in out
    table = lines[lines.index("degree table:") + 1:]
    assert len(table) == 1 + 5
    assert sum(cell.endswith("*") for row in table for cell in row.split()) == 8


def test_plan_closed_form_selection(capsys):
    code, out, _ = run(capsys, "plan", *P2221, "--n", "closed-form")
    assert code == 0
    assert "N(closed-form)=15 (selected)" in out


def test_plan_bad_params(capsys):
    with pytest.raises(SystemExit) as info:
        main(["plan", "--t", "2", "--s", "2", "--d", "2", "--T", "0"])
    assert info.value.code == 2
    code, _, err = run(capsys, "plan", *P2221, "--n", "12")
    assert code == 2 and "error" in err


def test_multiply_identity(tmp_path, capsys):
    ident = [[int(i == j) for j in range(4)] for i in range(4)]
    m = [[(3 * i + 5 * j) % 53 for j in range(4)] for i in range(4)]
    code, out, err = run(capsys, "multiply", *P2221, "--a-file", write_matrix(tmp_path / "a", ident),
                         "--b-file", write_matrix(tmp_path / "b", m), "--seed", "1")
    assert code == 0
    assert out == "4 4\n" + "".join(" ".join(map(str, r)) + "\n" for r in m)
    assert "N=13 q=53 seed=1" in err


def test_multiply_seed_reproducible(tmp_path, capsys):
    a = write_matrix(tmp_path / "a", [[1, 2], [3, 4]])
    b = write_matrix(tmp_path / "b", [[5, 6], [7, 8]])
    args = ["multiply", *P2221, "--a-file", a, "--b-file", b, "--seed", "9", "--min-q", "1000"]
    first = run(capsys, *args)
    second = run(capsys, *args, "--threads", "4")
    assert first == second
    assert first[1] == "2 2\n19 22\n43 50\n"


def test_multiply_pad(tmp_path, capsys):
    a = write_matrix(tmp_path / "a", [[1, 2, 3]])
    b = write_matrix(tmp_path / "b", [[1], [1], [1]])
    code, _, err = run(capsys, "multiply", *P2221, "--a-file", a, "--b-file", b)
    assert code == 2 and "--pad" in err
    out_file = tmp_path / "c"
    code, out, _ = run(capsys, "multiply", *P2221, "--a-file", a, "--b-file", b, "--pad", "--out", str(out_file))
    assert code == 0 and out == ""
    assert out_file.read_text() == "1 1\n6\n"


def test_multiply_io_errors(tmp_path, capsys):
    good = write_matrix(tmp_path / "a", [[1]])
    code, _, _ = run(capsys, "multiply", *P2221, "--a-file", str(tmp_path / "missing"), "--b-file", good)
    assert code == 3
    (tmp_path / "bad").write_text("2 2\n1 2\n")
    code, _, _ = run(capsys, "multiply", *P2221, "--a-file", str(tmp_path / "bad"), "--b-file", good)
    assert code == 3


def test_multiply_warns_on_small_field(tmp_path, capsys, caplog):
    a = write_matrix(tmp_path / "a", [[60, 1], [1, 1]])
    code, out, _ = run(capsys, "multiply", *P2221, "--a-file", a, "--b-file", a, "--seed", "0")
    assert code == 0
    assert "reducing mod q" in caplog.text and "--min-q" in caplog.text
    assert out == "2 2\n%d %d\n%d %d\n" % ((3601 % 53), 61 % 53, 61 % 53, 2)


def test_multiply_remote_matches_local(tmp_path, capsys, thread_workers):
    rng = np.random.default_rng(3)
    a = write_matrix(tmp_path / "a", rng.integers(0, 53, (4, 6)).tolist())
    b = write_matrix(tmp_path / "b", rng.integers(0, 53, (6, 2)).tolist())
    eps = ",".join(f"{e.host}:{e.port}" for e in thread_workers.start(13))
    base = ["multiply", *P2221, "--a-file", a, "--b-file", b, "--seed", "5"]
    local = run(capsys, *base)
    remote = run(capsys, *base, "--mode", "remote", "--workers", eps)
    assert local == remote and local[0] == 0


def test_multiply_remote_failures(tmp_path, capsys, thread_workers):
    a = write_matrix(tmp_path / "a", [[1, 2], [3, 4]])
    base = ["multiply", *P2221, "--a-file", a, "--b-file", a, "--mode", "remote"]
    assert run(capsys, *base)[0] == 2
    eps = [f"{e.host}:{e.port}" for e in thread_workers.start(13)]
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        eps[2] = f"127.0.0.1:{s.getsockname()[1]}"
    code, _, err = run(capsys, *base, "--workers", ",".join(eps), "--timeout", "5")
    assert code == 4 and "server 3" in err


def test_costs_compare(capsys):
    code, out, _ = run(capsys, "costs", *P2221, "--a", "4", "--b", "4", "--c", "4", "--compare", "--format", "csv")
    assert code == 0
    assert out.splitlines() == ["scheme,upload,download,encode,decode", "Proposed,104,52,832,368",
                                "GASP,112,28,896,432", "Inner-product,48,112,384,112"]


def test_costs_rational_output(capsys):
    code, out, _ = run(capsys, "costs", *P2221, "--a", "8", "--b", "8", "--c", "8")
    assert code == 0
    assert "N=13" in out and "total_rate=4/39" in out


def test_costs_compare_other_params(capsys):
    code, _, err = run(capsys, "costs", "--t", "1", "--s", "2", "--d", "2", "--T", "1",
                       "--a", "4", "--b", "4", "--c", "4", "--compare")
    assert code == 2 and "--compare" in err


@pytest.mark.parametrize("argv", [
    ["--t", "1", "--s", "2", "--d", "1", "--T", "1", "--q", "5"],
    ["--t", "1", "--s", "1", "--d", "1", "--T", "1", "--q", "5"],
    P2221,
    P2221 + ["--collude", "0"],
])
def test_audit_passes(capsys, argv):
    code, out, _ = run(capsys, "audit", *argv)
    assert code == 0
    assert "FAIL" not in out
    assert out.count("PASS") == 3


def test_audit_budget_skip(capsys):
    code, out, err = run(capsys, "audit", *P2221, "--budget", "10")
    assert code == 0 and "SKIP" in err and out.count("PASS") == 2


def test_audit_collude_too_large(capsys):
    assert run(capsys, "audit", *P2221, "--collude", "2")[0] == 2


def test_audit_bad_modulus(capsys):
    assert run(capsys, "audit", *P2221, "--q", "7")[0] == 2


def test_serve_subprocess():
    proc = subprocess.Popen([sys.executable, "-m", "sdmm", "serve", "--port", "0"],
                            stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True)
    try:
        line = proc.stdout.readline().split()
        assert line[0] == "listening"
        host, port = line[1].rsplit(":", 1)
        with socket.create_connection((host, int(port)), timeout=5) as sock:
            sock.sendall(protocol.encode_message(protocol.Compute(53, np.array([[3]]), np.array([[4]]))))
            assert protocol.recv_message(sock).values.tolist() == [[12]]
        proc.send_signal(signal.SIGTERM)
        assert proc.wait(timeout=10) == 0
    finally:
        proc.kill()
        proc.stdout.close()
        proc.stderr.close()


def test_serve_bad_port(capsys):
    assert run(capsys, "serve", "--port", "70000")[0] == 3
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        s.listen()
        assert run(capsys, "serve", "--port", str(s.getsockname()[1]))[0] == 3
