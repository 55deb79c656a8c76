import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wkglab.checkpoint import CheckpointError, decode, encode, read_checkpoint, write_checkpoint
from wkglab.cli import dispatch
from wkglab.config import ConfigError, SCHEMA, load_config, parse_config, serialize
from wkglab.evolution import SchemeConfig
from wkglab.foliation import SliceChart
from wkglab.io import SERIES_HEADER, emit_series, fmt, read_series, read_table, write_manifest
from wkglab.models import FRModel, WKGModel
from wkglab.state import EvolutionState

DATA = Path(__file__).parent / "data"

TINY = """\
[model]
kind = wkg

[data]
epsilon = 0.01

[grid]
dr = 0.1
r_max = 6.0

[run]
start = 2.0
stop = 3.0
record_every = 0.5
"""


def write_config(tmp_path, text=TINY, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


# -- config ------------------------------------------------------------------

def test_defaults_fill_every_field():
    cfg = parse_config("")
    assert set(cfg.as_dict()) == set(SCHEMA)
    assert cfg.get("model", "kind") == "wkg"
    assert cfg.get("grid", "dr") == 0.05
    assert cfg.get("scheme", "dt") is None
    assert isinstance(cfg.model(), WKGModel)
    assert isinstance(cfg.scheme(), SchemeConfig)


def test_negative_kappa_names_key_and_line():
    text = "[model]\nkind = fr\n\nkappa = -0.1\n"
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.key == "model.kappa"
    assert err.value.line == 4
    assert "line 4" in str(err.value) and "model.kappa" in str(err.value)


@pytest.mark.parametrize("text, key, line", [
    ("[model]\nflavour = 3\n", "model.flavour", 2),
    ("[grid]\ndr = 0.1\n[extras]\nx = 1\n", "extras", 3),
    ("[grid]\n\ndr = fast\n", "grid.dr", 3),
    ("[run]\nmode = spherical\n", "run.mode", 2),
    ("[scheme]\nstiff = maybe\n", "scheme.stiff", 2),
    ("[model]\nnonlinearities = null,cubic\n", "model.nonlinearities", 2),
    ("[analysis]\nfit_window = 9:3\n", "analysis.fit_window", 2),
    ("[model]\nkind = fr\n", "model.kappa", 2),
    ("[run]\nstart = 5\nstop = 4\n", "run.stop", 3),
    ("[grid]\ndr = 1\nr_max = 2\n", "grid.r_max", 3),
])
def test_rejections_carry_location(text, key, line):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.key == key
    assert err.value.line == line


def test_duplicate_key_and_stray_line():
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("[grid]\ndr = 0.1\ndr = 0.2\n")
    with pytest.raises(ConfigError, match="outside"):
        parse_config("dr = 0.1\n")


def test_fr_config_builds_model():
    cfg = parse_config("[model]\nkind = fr\nkappa = 0.05\nq = 2\ncoupling = off\n")
    m = cfg.model()
    assert isinstance(m, FRModel)
    assert m.kappa == 0.05 and m.q == 2.0 and m.coupling is False


def test_serialize_round_trip():
    text = ("[model]\nkind = fr\nkappa = 0.1\nnonlinearities = null\n"
            "[analysis]\nfit_window = 5:50\n[scheme]\ndt = 0.01\nstiff = yes\n")
    cfg = parse_config(text)
    again = parse_config(serialize(cfg))
    assert again == cfg
    assert serialize(again) == serialize(cfg)


def test_missing_config_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="not found"):
        load_config(tmp_path / "absent.cfg")


# -- series io ---------------------------------------------------------------

class _Rec:
    def __init__(self, time, sup, extra):
        self.time, self.sup, self.extra = time, sup, extra


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@given(st.lists(st.tuples(finite, finite, finite, finite, finite, finite), min_size=1, max_size=6))
def test_series_round_trip_is_bit_exact(tmp_path_factory, rows):
    path = tmp_path_factory.mktemp("series") / "s.csv"
    recs = [_Rec(r[0], {"u": r[1], "phi": r[2]}, {"E0": r[3], "E1": r[4], "E2": r[5]}) for r in rows]
    emit_series(recs, path)
    cols = read_series(path)
    got = np.column_stack([cols[h] for h in SERIES_HEADER])
    assert np.array_equal(got, np.array(rows, dtype=float))


def test_series_header_and_missing_energies(tmp_path):
    path = emit_series([_Rec(2.0, {"u": 0.5}, {"E0": 1.0})], tmp_path / "s.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "s,sup_u,sup_phi,E0,E1,E2"
    assert lines[1] == "2,0.5,0,1,nan,nan"


def test_fmt_uses_seventeen_digits():
    assert fmt(0.1) == "0.10000000000000001"
    assert float(fmt(1 / 3)) == 1 / 3


def test_series_reader_errors(tmp_path):
    with pytest.raises(ValueError, match="no records"):
        emit_series([], tmp_path / "x.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("t,a\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        read_series(bad)
    bad.write_text("s,sup_u,sup_phi,E0,E1,E2\n1,2,x,4,5,6\n")
    with pytest.raises(ValueError):
        read_series(bad)
    with pytest.raises(OSError, match="cannot read"):
        read_table(tmp_path / "nope.csv")


def test_manifest_serializes_numpy_and_sets(tmp_path):
    path = write_manifest(tmp_path / "m.json", {"a": np.float64(1.5), "b": frozenset({"y", "x"}),
                                                "p": tmp_path})
    got = json.loads(path.read_text())
    assert got == {"a": 1.5, "b": ["x", "y"], "p": str(tmp_path)}


# -- checkpoints -------------------------------------------------------------

def _state():
    r = np.linspace(0.0, 3.0, 31)
    chart = SliceChart(2.0 + 1e-13, r, "hyperboloidal")
    rng = np.random.default_rng(5)
    values = {"u": rng.standard_normal(31), "phi": rng.standard_normal(31)}
    rates = {"u": rng.standard_normal(31), "phi": np.full(31, math.pi)}
    return EvolutionState(chart, values, rates)


def test_checkpoint_round_trip_bit_exact(tmp_path):
    state = _state()
    path = write_checkpoint(state, tmp_path / "c.wkg", "wkg c=1.0")
    back, meta = read_checkpoint(path)
    assert back.chart.time == state.chart.time
    assert back.chart.kind == "hyperboloidal"
    assert np.array_equal(back.chart.r, state.chart.r)
    for n in ("u", "phi"):
        assert np.array_equal(back.values[n], state.values[n])
        assert np.array_equal(back.rates[n], state.rates[n])
    assert meta["model"] == "wkg c=1.0"
    assert encode(back, meta["model"]) == path.read_bytes()


def test_checkpoint_rejects_damage():
    blob = encode(_state())
    with pytest.raises(CheckpointError, match="magic"):
        decode(b"JUNK\n" + blob)
    with pytest.raises(CheckpointError, match="payload"):
        decode(blob[:-8])
    with pytest.raises(CheckpointError, match="truncated"):
        decode(blob[:10])
    with pytest.raises(CheckpointError, match="single line"):
        encode(_state(), "two\nlines")


# -- cli ---------------------------------------------------------------------

def test_simulate_writes_series_and_manifest(tmp_path, capsys):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert dispatch(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    cols = read_series(out / "series.csv")
    assert np.allclose(cols["s"], [2.0, 2.5, 3.0])
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["outcome"] == "completed"
    assert manifest["command"] == "simulate"
    assert parse_config(manifest["config_text"]) == load_config(cfg)
    assert "completed" in capsys.readouterr().out


def test_simulate_is_deterministic(tmp_path):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert dispatch(["simulate", "--config", str(cfg), "--out", str(a)]) == 0
    assert dispatch(["simulate", "--config", str(cfg), "--out", str(b)]) == 0
    assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()


def test_simulate_matches_golden_series(tmp_path):
    cfg = write_config(tmp_path)
    assert dispatch(["simulate", "--config", str(cfg), "--out", str(tmp_path / "g")]) == 0
    got = read_series(tmp_path / "g" / "series.csv")
    want = read_series(DATA / "golden_series.csv")
    for h in SERIES_HEADER:
        np.testing.assert_allclose(got[h], want[h], rtol=1e-12, atol=0.0)


def test_simulate_abort_writes_manifest(tmp_path, capsys):
    text = TINY.replace("[grid]\n", "[scheme]\ndt = 0.5\n\n[grid]\n")
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    code = dispatch(["simulate", "--config", str(cfg), "--out", str(out)])
    manifest = json.loads((out / "manifest.json").read_text())
    assert code == 2
    assert manifest["outcome"] == "aborted"
    assert manifest["reason"]
    assert "aborted" in capsys.readouterr().out


def test_simulate_checkpoints_verify(tmp_path, capsys):
    text = TINY.replace("record_every = 0.5\n", "record_every = 0.5\ncheckpoint_every = 5\n")
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert dispatch(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    ckpts = sorted((out / "checkpoints").glob("*.wkg"))
    assert ckpts
    capsys.readouterr()
    assert dispatch(["checkpoint", "verify", str(ckpts[-1])]) == 0
    assert "round-trip identical" in capsys.readouterr().out
    assert dispatch(["checkpoint", "inspect", str(ckpts[0])]) == 0
    text = capsys.readouterr().out
    assert "kind = cartesian" in text and "time_decimal = 2.0" in text
    bad = tmp_path / "bad.wkg"
    bad.write_bytes(b"nope\n")
    assert dispatch(["checkpoint", "verify", str(bad)]) == 1


def test_ricci_verify_exit_zero(tmp_path, capsys):
    report = tmp_path / "ricci.txt"
    assert dispatch(["ricci", "verify", "--order", "2", "--report", str(report)]) == 0
    out = capsys.readouterr().out
    assert report.read_text() == out


def test_ricci_linear(capsys):
    assert dispatch(["ricci", "linear"]) == 0
    assert "status = PASS" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    [], ["bogus"], ["simulate"], ["decay-fit", "--input", "x.csv", "--window", "5"],
    ["sweep-kappa", "--kappas", "a,b", "--config", "x"],
])
def test_usage_errors_exit_one(argv, capsys):
    assert dispatch(argv) == 1
    assert capsys.readouterr().err


def test_missing_config_exit_one(tmp_path, capsys):
    assert dispatch(["simulate", "--config", str(tmp_path / "none.cfg")]) == 1
    assert "not found" in capsys.readouterr().err


def test_invalid_config_exit_one(tmp_path, capsys):
    cfg = write_config(tmp_path, "[model]\nkind = fr\nkappa = -0.1\n")
    assert dispatch(["simulate", "--config", str(cfg)]) == 1
    assert "line 3" in capsys.readouterr().err


def _power_series(tmp_path, exponent):
    s = np.linspace(5.0, 50.0, 46)
    recs = [_Rec(x, {"u": 3.0 * x ** exponent, "phi": 2.0 * x ** -1.5},
                 {"E0": 1.0, "E1": 2.0, "E2": 3.0 + 0.01 * math.sin(x)}) for x in s]
    return emit_series(recs, tmp_path / "p.csv")


def test_decay_fit_prints_exponent(tmp_path, capsys):
    path = _power_series(tmp_path, -1.0)
    assert dispatch(["decay-fit", "--input", str(path), "--window", "5:50"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "exponent -1.000"
    assert dispatch(["decay-fit", "--input", str(path), "--column", "sup_phi"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "exponent -1.500"
    assert dispatch(["decay-fit", "--input", str(path), "--column", "nope"]) == 1


def test_energy_verdict(tmp_path, capsys):
    path = _power_series(tmp_path, -1.0)
    assert dispatch(["energy", "--input", str(path)]) == 0
    assert capsys.readouterr().out.startswith("bounded")
    assert dispatch(["energy", "--input", str(path), "--factor", "1.0"]) == 0
    assert capsys.readouterr().out.startswith("amplified ratio=1.00655 worst_s=33")


def test_sweep_kappa_writes_report(tmp_path, capsys):
    text = TINY.replace("stop = 3.0", "stop = 2.5").replace("r_max = 6.0", "r_max = 4.0")
    cfg = write_config(tmp_path, text)
    out = tmp_path / "sweep"
    assert dispatch(["sweep-kappa", "--kappas", "0.1,0.05", "--config", str(cfg), "--out", str(out)]) == 0
    table = read_table(out / "kappa_report.csv")
    assert list(table["kappa"]) == [0.1, 0.05]
    assert (out / "kappa_summary.txt").read_text().strip() == capsys.readouterr().out.strip()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["outcome"] == "completed" and manifest["kappas"] == [0.1, 0.05]
