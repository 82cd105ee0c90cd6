"""CLI dispatch, CSV formats, round-trips, reproducibility, plotting."""

import os

import pytest

from hexsync.cli import (
    SERVO_HEADER,
    SWEEP_HEADER,
    TRACE_HEADER,
    dispatch,
    read_trace_csv,
    render_ascii_plot,
    trace_csv_lines,
    write_trace_csv,
)
from hexsync.experiment import ErrorTrace, SchemeId


def run_cli(tmp_path, *argv):
    out = tmp_path / "out.csv"
    code = dispatch(list(argv) + ["--out", str(out)])
    return code, out


def test_help_exits_zero(capsys):
    assert dispatch(["run", "--help"]) == 0


def test_unknown_flag_exits_two(capsys):
    assert dispatch(["run", "--frobnicate"]) == 2


def test_missing_subcommand_exits_two(capsys):
    assert dispatch([]) == 2


def test_invalid_value_exits_one(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "run", "--ppm-m1", "25")
    assert code == 1


def test_unwritable_output_exits_one(capsys):
    code = dispatch(["run", "--duration-s", "5", "--out", "/nonexistent/dir/x.csv"])
    assert code == 1


def test_open_loop_run_reaches_two_ms(tmp_path):
    code, out = run_cli(tmp_path, "run", "--scheme", "open-loop",
                        "--duration-s", "400", "--ppm-m1", "-5")
    assert code == 0
    rows = read_trace_csv(str(out))
    assert abs(abs(rows[-1][2]) - 2000) < 62
    assert all(r[3] == 0 for r in rows)  # no resyncs in open loop


def test_synchronized_run_bounded_with_resync_marks(tmp_path):
    code, out = run_cli(tmp_path, "run", "--scheme", "synchronized",
                        "--resync-period-s", "30", "--duration-s", "400")
    assert code == 0
    rows = read_trace_csv(str(out))
    assert max(abs(r[2]) for r in rows) <= 122
    resync_rows = sum(r[3] for r in rows)
    assert 10 <= resync_rows <= 16  # ~every 30 s over 400 s


def test_trace_header_and_formatting(tmp_path):
    code, out = run_cli(tmp_path, "run", "--duration-s", "10")
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == TRACE_HEADER
    fields = lines[1].split(",")
    assert len(fields[0].split(".")[1]) == 6
    assert len(fields[2].split(".")[1]) == 3
    assert fields[3] in ("0", "1")


def test_empty_trace_writes_header_only(tmp_path):
    trace = ErrorTrace(samples=[], resync_marks=[],
                       scheme=SchemeId.S1_OPEN_LOOP, config={})
    path = tmp_path / "empty.csv"
    write_trace_csv(trace, str(path))
    assert path.read_text() == TRACE_HEADER + "\n"


def test_csv_round_trip(tmp_path):
    code, out = run_cli(tmp_path, "run", "--duration-s", "60")
    assert code == 0
    rows = read_trace_csv(str(out))
    rewritten = [TRACE_HEADER] + [
        f"{t:.6f},{k},{e:.3f},{r}" for t, k, e, r in rows]
    assert "\n".join(rewritten) + "\n" == out.read_text()


def test_byte_identical_reruns(tmp_path):
    outputs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        assert dispatch(["run", "--duration-s", "90", "--seed", "7",
                         "--out", str(out)]) == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]


def test_sweep_csv(tmp_path):
    code, out = run_cli(tmp_path, "sweep", "--periods", "30,10",
                        "--duration-s", "120")
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == SWEEP_HEADER
    periods = [float(l.split(",")[0]) for l in lines[1:]]
    assert periods == sorted(periods)


def test_servo_trace_csv(tmp_path):
    code, out = run_cli(tmp_path, "trace", "--duration-s", "5")
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == SERVO_HEADER
    assert len(lines) > 24
    controllers = {l.split(",")[1] for l in lines[1:]}
    assert controllers == {"M1", "M2"}


def test_config_file_defaults_with_flag_override(tmp_path):
    cfg = tmp_path / "defaults.cfg"
    cfg.write_text("duration-s=50\nppm-m1=-5\n# comment\n")
    out1 = tmp_path / "one.csv"
    assert dispatch(["run", "--config", str(cfg), "--out", str(out1)]) == 0
    rows = read_trace_csv(str(out1))
    assert rows[-1][0] < 51  # file default shortened the run
    out2 = tmp_path / "two.csv"
    assert dispatch(["run", "--config", str(cfg), "--duration-s", "20",
                     "--out", str(out2)]) == 0
    assert read_trace_csv(str(out2))[-1][0] < 21  # explicit flag wins


def test_ascii_plot_shapes():
    flat = ErrorTrace(samples=[(float(t), t, 0.0) for t in range(50)],
                      resync_marks=[], scheme=SchemeId.S1_OPEN_LOOP, config={})
    art = render_ascii_plot(flat)
    assert "*" in art and "max=" in art
    ramp = ErrorTrace(samples=[(float(t), t, -5.0 * t) for t in range(50)],
                      resync_marks=[], scheme=SchemeId.S1_OPEN_LOOP, config={})
    art = render_ascii_plot(ramp)
    rows = [l for l in art.splitlines() if l.startswith("|")]
    first_star = next(i for i, l in enumerate(rows) if "*" in l[:10])
    last_star = next(i for i, l in enumerate(rows) if "*" in l[-10:])
    assert first_star < last_star  # visible downward ramp


def test_ascii_plot_rejects_tiny_canvas():
    trace = ErrorTrace(samples=[(0.0, 0, 0.0)], resync_marks=[],
                       scheme=SchemeId.S1_OPEN_LOOP, config={})
    with pytest.raises(ValueError):
        render_ascii_plot(trace, width=4, height=4)
