import json
import math
import os

import numpy as np
import pytest

import bragg_forge as bf

SOURCE = os.environ.get("BRAGG_SOURCE_DIR", os.path.join(os.path.dirname(__file__), "..", ".."))


def test_version_and_species():
    assert bf.__version__ == "0.1.0"
    rb = bf.AtomSpecies.rubidium87()
    # recoil frequency hbar k^2 / 2M, recomputed here
    hbar = 1.054571817e-34
    assert rb.recoil_frequency == pytest.approx(hbar * rb.wavenumber**2 / (2 * rb.mass), rel=1e-12)


def test_propagator_is_unitary():
    w = bf.gaussian_pulse(2 * math.pi * 18e3, 25e-6, 220e-6, 1e-6)
    w.order = 3
    u = bf.propagator(w, 0.05, 0.1, basis=bf.BlochBasis.for_order(3))
    assert u.shape == (10, 10)
    assert np.allclose(u.conj().T @ u, np.eye(10), atol=1e-10)


def test_two_level_rabi():
    area = 1.1
    w = bf.PulseWaveform()
    w.dt = 10e-6
    w.order = 1
    w.samples = [bf.WaveformSample(area / 10e-6)]
    u = bf.propagator(w, basis=bf.BlochBasis(1, 0, 1))
    assert abs(u[1, 0]) ** 2 == pytest.approx(math.sin(area) ** 2, abs=1e-10)


def test_waveform_round_trip(tmp_path):
    w = bf.load_waveform(os.path.join(SOURCE, "fixtures", "robust_mirror.json"))
    assert w.role == bf.PulseRole.mirror
    assert len(w) == 220
    assert bf.PulseWaveform.from_json(w.to_json()) == w
    path = str(tmp_path / "w.json")
    bf.save_waveform(w, path)
    assert bf.load_waveform(path) == w
    assert w.violations() == []


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        bf.OptimizationConfig.from_json('{"role": "mirror"}')
    with pytest.raises(OSError):
        bf.load_waveform("/nonexistent/waveform.json")


def test_small_optimization_is_deterministic():
    c = bf.OptimizationConfig.mirror_defaults()
    c.segments = 40
    c.iterations = 10
    c.batch_size = 4
    c.validation_size = 4
    a = bf.optimize_pulse(c)
    b = bf.optimize_pulse(c)
    assert a.waveform == b.waveform
    assert len(a.cost) == 10
    assert 0.0 <= a.validation_cost <= 1.0


def test_ideal_fringe():
    s = bf.InterferometerSequence()
    phases = bf.phase_grid(16)
    values, _ = bf.phase_scan(s, phases)
    assert np.allclose(values, np.cos(3 * np.asarray(phases)), atol=1e-9)
    fit = bf.fit_sinusoid(phases, values, frequency=3.0)
    assert fit.amplitude == pytest.approx(1.0, abs=1e-9)


def test_cli_in_process(tmp_path):
    cfg = tmp_path / "scan.json"
    cfg.write_text(json.dumps({"scan": "phase", "T_ms": 5, "beamsplitter": "ideal", "mirror": "ideal",
                               "source": {"sigma_p_hbar_k": 0.0, "nodes": 1}}))
    out = tmp_path / "out"
    assert bf.cli(["fringe", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "manifest.json").exists()
    assert bf.cli(["optimize", "--config", str(tmp_path / "missing.json"), "--out", str(out)]) == 4
