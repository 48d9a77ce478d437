import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mixhilbert import kernel_estimates as ke
from mixhilbert.errors import ConfigError, DomainError, FrameError
from mixhilbert.species import MaxwellParams, SpeciesPair
from oracles import cross_jacobian, smoothstep5


@given(st.floats(0.01, 0.99), st.floats(0, 5))
def test_cutoff_matches_smoothstep(m, s):
    spec = ke.CutoffSpec(m)
    assert float(ke.chi(s, spec)) == pytest.approx(smoothstep5((s - m) / m), abs=1e-12)


def test_cutoff_shape():
    spec = ke.CutoffSpec(0.2)
    s = np.linspace(0, 1, 2001)
    c = ke.chi(s, spec)
    assert np.all(np.diff(c) <= 1e-15)
    assert np.all(c[s <= 0.2] == 1.0) and np.all(c[s >= 0.4] == 0.0)
    slope = np.abs(np.diff(c) / np.diff(s))
    assert slope[s[:-1] < 0.2].max() == 0.0
    assert slope[:5].max() < 1e-9 and slope[-5:].max() < 1e-9


@pytest.mark.parametrize("m", [0.0, 1.0, -0.1])
def test_cutoff_radius_validated(m):
    with pytest.raises(ConfigError):
        ke.CutoffSpec(m)


def test_negative_cutoff_argument():
    with pytest.raises(DomainError):
        ke.chi(-1.0, ke.CutoffSpec(0.2))


@settings(max_examples=40)
@given(st.floats(0.2, 5), st.floats(0.2, 5), st.integers(0, 10_000))
def test_jacobian_matches_closed_form(ma, mb, seed):
    rng = np.random.default_rng(seed)
    om = rng.normal(size=3)
    om /= np.linalg.norm(om)
    J = ke.jacobian_fd(rng.normal(size=3), rng.normal(size=3), om, ma, mb)
    assert J == pytest.approx(cross_jacobian(ma, mb), abs=1e-7)
    assert ke.jacobian_cross(om, ma, mb) == pytest.approx(cross_jacobian(ma, mb))


def test_loglog_slope_exact():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    s, hw = ke.loglog_slope(x, 3.0 * x ** -1.5)
    assert s == pytest.approx(-1.5) and hw < 1e-10


def test_gaussian_envelope_recovers_rate():
    rng = np.random.default_rng(0)
    Q = rng.uniform(0, 20, 5000)
    lk = np.log(2.0) - 0.3 * Q - rng.uniform(0, 1, 5000) ** 8
    c, hw, logC, ratio = ke.fit_gaussian_envelope(lk, Q)
    assert c == pytest.approx(0.3, abs=0.02) and np.isfinite(ratio)


def test_k1_report_serialises():
    sp = SpeciesPair()
    rep = ke.verify_k1(ke.default_frame(sp), ke.CutoffSpec(0.2), n_samples=8000)
    doc = json.loads(rep.to_json())
    assert {"bound_id", "gamma", "masses", "n_samples", "max_ratio", "fitted_exponents", "tolerance",
            "pass"} <= set(doc)
    assert doc["bound_id"] == "k1_weighted" and doc["pass"]


def test_cross_constant_degenerates_towards_equal_masses():
    spec = ke.CutoffSpec(0.2)
    far = ke.cross_decay_constant(SpeciesPair(m_A=1.0, m_B=4.0), spec, n_samples=8000)
    near = ke.cross_decay_constant(SpeciesPair(m_A=1.0, m_B=1.1), spec, n_samples=8000)
    assert far > near


def test_integrated_decay_needs_centred_frame():
    sp = SpeciesPair()
    fr = ke.default_frame(sp, local=(MaxwellParams(1, (0.1, 0, 0), 1), MaxwellParams(1, (0.1, 0, 0), 1)))
    with pytest.raises(FrameError):
        ke.integrated_decay("typical", [8.0], 0, 1, fr, ke.CutoffSpec(0.2))


def test_jacobian_report():
    assert ke.verify_jacobian(SpeciesPair(m_A=1.0, m_B=3.0), n_configs=20).passed
