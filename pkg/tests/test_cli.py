import subprocess
import sys

import numpy as np
import pytest

from ternlut.cli import main
from ternlut.tnf import read_tnf, write_float_matrix


@pytest.fixture
def floats(tmp_path):
    rng = np.random.default_rng(7)

    def make(m, k, name="w.f32"):
        path = tmp_path / name
        write_float_matrix(path, rng.standard_normal((m, k)))
        return path
    return make


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("layout, k, payload", [("tl2", 192, 40), ("i2s", 128, 32)])
def test_quantize_payload(capsys, floats, tmp_path, layout, k, payload):
    out_path = tmp_path / "w.tnf"
    code, out, _ = run(capsys, "quantize", floats(1, k), out_path, "--layout", layout)
    assert code == 0
    assert f"payload={payload}" in out and "beta=" in out and "bpw=" in out
    (t,) = read_tnf(out_path)
    assert t.tensor.nbytes == payload


def test_quantize_shape_violation(capsys, floats, tmp_path):
    code, _, err = run(capsys, "quantize", floats(1, 130), tmp_path / "x.tnf", "--layout", "i2s")
    assert code == 2 and "128" in err


def test_quantize_missing_input(capsys, tmp_path):
    code, _, _ = run(capsys, "quantize", tmp_path / "missing.f32", tmp_path / "x.tnf")
    assert code == 1


@pytest.mark.parametrize("layout", ["tl1", "tl2", "i2s"])
def test_verify_passes_and_is_deterministic(capsys, floats, tmp_path, layout):
    tnf = tmp_path / "w.tnf"
    run(capsys, "quantize", floats(40, 384), tnf, "--layout", layout, "--bm", "16")
    reports = []
    for threads in ("1", "2", "4", "8"):
        code, out, _ = run(capsys, "verify", tnf, "--trials", "3", "--seed", "11", "--threads", threads)
        assert code == 0
        reports.append(out)
    assert all(r == reports[0] for r in reports)
    assert reports[0].rstrip().endswith("RESULT PASS")
    for line in reports[0].splitlines()[:-1]:
        if "mode=lossless" in line:
            assert "max_abs_err=0 " in line
        else:
            assert "bound=ok" in line and "max_abs_err=0 " not in line


def test_verify_corrupt_payload(capsys, floats, tmp_path):
    tnf = tmp_path / "w.tnf"
    run(capsys, "quantize", floats(1, 192), tnf, "--layout", "tl2")
    raw = bytearray(tnf.read_bytes())
    raw[-40] = 0x0E        # first index nibble = 14
    tnf.write_bytes(bytes(raw))
    code, _, err = run(capsys, "verify", tnf)
    assert code == 2 and "14" in err


def test_verify_failure_exit_code(capsys, floats, tmp_path, monkeypatch):
    import ternlut.harness as harness

    tnf = tmp_path / "w.tnf"
    run(capsys, "quantize", floats(4, 128), tnf, "--layout", "i2s")
    real = harness.run_kernel

    def broken(name, packed, act, threads=1, executor=None):
        res = real(name, packed, act, threads, executor)
        return type(res)(res.accum + 1, res.dequant_scale)

    monkeypatch.setattr(harness, "run_kernel", broken)
    code, out, _ = run(capsys, "verify", tnf, "--trials", "1")
    assert code == 3 and "FAIL" in out


def test_bench_rows(capsys, floats, tmp_path):
    tnf = tmp_path / "w.tnf"
    run(capsys, "quantize", floats(8, 384), tnf, "--layout", "tl2")
    code, out, _ = run(capsys, "bench", tnf, "--threads", "1,2,4", "--reps", "2")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "kernel,m,n,k,threads,reps,ns,gbps,bpw"
    rows = [line.split(",") for line in lines[1:]]
    kernels = {r[0] for r in rows}
    assert kernels == {"TL1_0", "TL1_1", "TL2_0", "TL2_1", "I2_S"}
    for name in kernels:
        assert [r[4] for r in rows if r[0] == name] == ["1", "2", "4"]
    for r in rows:
        bpw = float(r[8])
        if r[0].startswith("TL2"):
            assert abs(bpw - 5 / 3) <= 0.01
        else:
            assert bpw == 2.0


def test_bench_kernel_subset(capsys, floats, tmp_path):
    tnf = tmp_path / "w.tnf"
    run(capsys, "quantize", floats(4, 192), tnf, "--layout", "tl1")
    code, out, _ = run(capsys, "bench", tnf, "--threads", "1", "--reps", "1", "--kernels", "TL1_1,I2_S")
    assert code == 0
    # K=192 is not a multiple of 128, so I2_S is skipped
    assert [line.split(",")[0] for line in out.strip().splitlines()[1:]] == ["TL1_1"]


def _analyze(capsys, *argv):
    code, out, _ = run(capsys, "analyze", *argv)
    rows = {line.split(",")[0]: line.split(",")[1:] for line in out.strip().splitlines()[1:]}
    return code, rows


def test_analyze_examples(capsys):
    code, rows = _analyze(capsys, "--c", "3", "--g", "3", "--mirror")
    assert code == 0 and rows["bpw"] == ["1.667", "5/3"] and rows["g_max"][0] == "3"
    _, rows = _analyze(capsys, "--c", "5", "--g", "2", "--mirror")
    assert rows["bpw"] == ["2.500", "5/2"]
    _, rows = _analyze(capsys, "--c", "3", "--g", "2", "--no-mirror", "--register-bits", "128")
    assert rows["g_max"][0] == "2" and rows["bpw"][1] == "2"


def test_analyze_invalid(capsys):
    code, _, _ = run(capsys, "analyze", "--g", "5", "--k", "4096")
    assert code == 2
    code, _, _ = run(capsys, "analyze", "--c", "0")
    assert code == 2


def test_gemm_prints_float_output(capsys, floats, tmp_path):
    tnf = tmp_path / "w.tnf"
    run(capsys, "quantize", floats(3, 128), tnf, "--layout", "tl1")
    act = floats(2, 128, "a.f32")
    code, out, _ = run(capsys, "gemm", tnf, "--act", act)
    lossless = out.strip().splitlines()
    assert code == 0 and lossless[0].startswith("# kernel=TL1_1")
    assert len(lossless) == 4 and all(len(r.split(",")) == 2 for r in lossless[1:])
    code, out, _ = run(capsys, "gemm", tnf, "--act", act, "--lossy")
    assert code == 0 and out.startswith("# kernel=TL1_0")


def test_gemm_lossy_i2s_rejected(capsys, floats, tmp_path):
    tnf = tmp_path / "w.tnf"
    run(capsys, "quantize", floats(3, 128), tnf, "--layout", "i2s")
    code, _, _ = run(capsys, "gemm", tnf, "--lossy")
    assert code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ternlut", "analyze", "--c", "3", "--g", "3"],
                          capture_output=True, text=True, check=True)
    assert "bpw,1.667,5/3" in proc.stdout
