import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import array_shapes, arrays

from mixhilbert import cli
from mixhilbert import kernel_estimates as ke
from mixhilbert.config import config_from_dict, load_config
from mixhilbert.errors import ConfigError


def _write(tmp_path, obj, name="c.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return p


def test_minimal_config_fills_defaults(tmp_path):
    cfg, defaulted = load_config(_write(tmp_path, {"species": {"m_A": 1.0, "m_B": 3.0, "gamma": -1.0}}))
    assert cfg.velocity.N == 16 and cfg.velocity.R == pytest.approx(6.0)
    assert "velocity.N" in defaulted and "species.gamma" not in defaulted


@pytest.mark.parametrize("bad, field", [
    ({"species": {"gamma": 1.5}}, "species.gamma"),
    ({"velocity": {"N": 15}}, "velocity.N"),
    ({"spatial": {"flux": 1}}, "spatial.flux"),
    ({"study": {"deltas": [0.1, 0.2, 0.05]}}, "study.deltas"),
    ({"angular_order": 5}, "angular_order"),
    ({"cutoff_m": 1.5}, "cutoff.m"),
])
def test_rejections_name_the_field(bad, field):
    with pytest.raises(ConfigError) as e:
        config_from_dict(bad)
    assert e.value.field == field


def test_gamma_message_cites_range():
    with pytest.raises(ConfigError, match=r"\(-3, 1\]"):
        config_from_dict({"species": {"gamma": 1.5}})


def test_parse_error_has_line(tmp_path):
    with pytest.raises(ConfigError, match="line 3"):
        load_config(_write(tmp_path, '{\n "seed": 1,\n}'))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, array_shapes(max_dims=3, max_side=6)))
def test_field_roundtrip_bit_exact(tmp_path_factory, a):
    p = tmp_path_factory.mktemp("f") / "x.bin"
    cli.write_field(p, a, {"t": 0.5}, frame="weighted")
    b, side = cli.read_field(p)
    assert side["frame"] == "weighted" and side["dtype"] == "<f8"
    assert b.tobytes() == np.ascontiguousarray(a, "<f8").tobytes()


def test_exit_codes(tmp_path):
    assert cli.main(["euler", "--config", str(_write(tmp_path, {"species": {"gamma": 2}})),
                     "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["euler", "--config", str(tmp_path / "missing.json")]) == 2
    cfg = _write(tmp_path, {"spatial": {"M": 32}, "study": {"deltas": [0.95, 0.9, 0.8], "t_end": 3.0}}, "big.json")
    assert cli.main(["euler", "--config", str(cfg), "--out", str(tmp_path / "b")]) in (0, 1, 3)


def test_euler_and_acoustic_outputs(tmp_path):
    cfg = _write(tmp_path, {"spatial": {"M": 64}})
    for cmd in ("euler", "acoustic"):
        assert cli.main([cmd, "--config", str(cfg), "--out", str(tmp_path / cmd), "--threads", "1"]) == 0
        man = json.loads((tmp_path / cmd / "manifest.json").read_text())
        assert man["command"] == cmd and len(man["config_hash"]) == 64 and "numpy" in man["versions"]
    assert (tmp_path / "euler" / "euler_trajectory.csv").exists()
    q, side = cli.read_field(tmp_path / "euler" / "euler_final.bin")
    assert q.shape == (6, 64) and side["frame"] == "primitive"


def test_spectrum_reports_coercivity(tmp_path):
    cfg = _write(tmp_path, {"velocity": {"N": 10}})
    cli.main(["spectrum", "--config", str(cfg), "--out", str(tmp_path / "s")])
    assert json.loads((tmp_path / "s" / "spectrum.json").read_text())["coercivity"] > 0


def test_equal_masses_skip_cross_hybrid(tmp_path, monkeypatch):
    def stub(name):
        return lambda *a, **k: ke.BoundReport(name, 1.0, (1.0, 1.0), 1, "stub", 1.0, {}, 0.0, True)

    for f in ("verify_k1", "verify_typical", "verify_hybrid_cross", "verify_hybrid_equal",
              "verify_integrated_decay", "verify_singular_scaling"):
        monkeypatch.setattr(ke, f, stub(f))
    cfg = _write(tmp_path, {"species": {"m_A": 1.0, "m_B": 1.0}})
    assert cli.main(["kernels", "--config", str(cfg), "--out", str(tmp_path / "k")]) == 0
    doc = json.loads((tmp_path / "k" / "kernels.json").read_text())
    names = [r["bound_id"] for r in doc["reports"]]
    assert "verify_hybrid_cross" not in names and "cross_jacobian" in names
    assert any("equal masses" in n for n in doc["notes"])


def test_seed_flag_overrides(tmp_path):
    cfg = _write(tmp_path, {"velocity": {"N": 8}, "study": {"h_states": 2}})
    cli.main(["collide", "--config", str(cfg), "--out", str(tmp_path / "a"), "--seed", "7"])
    assert json.loads((tmp_path / "a" / "manifest.json").read_text())["seed"] == 7
