import json
import math

import numpy as np
import pytest

import momentflow as mf


def test_identity_suite_passes():
    rows = mf.identity_suite(seed=42, samples=20)
    assert len(rows) == 35
    assert all(r["pass"] for r in rows)


def test_identity_suite_is_deterministic():
    assert mf.identity_suite(seed=7, samples=10) == mf.identity_suite(seed=7, samples=10)


def test_spectrum_first_eigenvalue():
    lam = mf.spectrum(1, "zero_free", 513, count=3)
    assert len(lam) == 3
    assert lam[0] == pytest.approx(4 * math.pi**2, rel=5e-3)
    assert lam[0] < lam[1] < lam[2]


def test_resolve_manifest_fills_defaults():
    resolved = json.loads(mf.resolve_manifest('{"kind": "nonlinear_flow", "n": 2, "p": 3}'))
    assert resolved["p"] == 3
    assert resolved["n_points"] == 513
    assert resolved["dt"] == pytest.approx(1e-3)


def test_config_error_names_field():
    with pytest.raises(mf.ConfigError, match="p:"):
        mf.resolve_manifest('{"kind": "nonlinear_flow", "n": 2, "p": 0.5}')
    with pytest.raises(ValueError, match="grid_size"):
        mf.resolve_manifest('{"kind": "spectrum", "n": 1, "grid_size": 65}')


def test_flow_keeps_moments_and_dissipates():
    records, final = mf.flow(
        '{"kind": "nonlinear_flow", "n": 2, "p": 3, "n_points": 65, "dt": 0.002, "t_final": 0.2}'
    )
    assert records.shape == (101, len(mf.RECORD_COLUMNS))
    assert final.shape == (65,)
    assert np.max(np.abs(records[:, [1, 3]])) < 1e-8
    assert np.all(np.diff(records[:, 5]) <= 0)


def test_run_writes_csv_with_manifest(tmp_path):
    paths = mf.run('{"kind": "linear_flow", "n": 2, "n_points": 33, "dt": 0.01, "t_final": 0.1}', tmp_path)
    csv = next(p for p in paths if p.suffix == ".csv")
    lines = csv.read_text().splitlines()
    assert lines[0].startswith("# ")
    header = next(line for line in lines if not line.startswith("#"))
    assert header == ",".join(mf.RECORD_COLUMNS)
