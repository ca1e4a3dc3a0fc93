import os
import subprocess

import numpy as np
import pytest

import mhdsc


def small_data(seed=3):
    data, truth = mhdsc.synth_multiview(views=2, dims=[6], classes=3, samples=40, atoms=6,
                                        sparsity=2, noise=0.0, seed=seed)
    return data, truth


def test_synth_shapes_and_determinism():
    data, truth = small_data()
    assert data.num_views == 2
    assert data.views[0].shape == (6, 40)
    assert data.labels.shape == (3, 40)
    again, _ = small_data()
    np.testing.assert_array_equal(data.views[1], again.views[1])
    recon = truth["dictionaries"][0] @ truth["codes"]
    np.testing.assert_allclose(recon, data.views[0], atol=1e-12)


def test_prox_examples():
    np.testing.assert_allclose(mhdsc.project_l1_ball(np.array([1.0, 1.0]), 1.0), [0.5, 0.5])
    np.testing.assert_allclose(mhdsc.prox_linf(np.array([3.0, 1.0]), 1.0), [2.0, 1.0])
    np.testing.assert_allclose(mhdsc.soft_threshold(np.array([2.0, -0.5]), 1.0), [1.0, 0.0])
    np.testing.assert_allclose(mhdsc.prox_l1inf_rows(np.array([[3.0, 1.0], [0.0, 0.0]]), 1.0),
                               [[2.0, 1.0], [0.0, 0.0]])


def test_fit_encode_predict_roundtrip(tmp_path):
    data, _ = small_data()
    data = mhdsc.split_labelled(data, 0.5, 1)
    hp = mhdsc.Hyperparams()
    hp.atoms = 6
    hp.gamma3 = 1e-3
    hp.neighbors = 6
    hp.outer_max_iters = 5
    model, trace = mhdsc.fit(data, hp, 0)
    totals = [t["total"] for t in trace]
    assert all(b <= a * (1 + 1e-8) for a, b in zip(totals, totals[1:]))
    assert abs(model.alpha.sum() - 1.0) < 1e-12

    path = str(tmp_path / "m.bin")
    model.save(path)
    loaded = mhdsc.load_model(path)
    np.testing.assert_array_equal(loaded.codes, model.codes)

    codes = mhdsc.encode(loaded, data)
    scores = mhdsc.predict_scores(codes, loaded.label_dictionary)
    assert scores.shape == (3, 40)
    assert np.isfinite(scores).all()


def test_average_precision_hand_case():
    ap = mhdsc.average_precision(np.array([0.9, 0.8, 0.7]), np.array([1.0, 0.0, 1.0]))
    assert ap == pytest.approx(28 / 33, abs=1e-15)
    assert mhdsc.mean_ap([1.0, 0.0]) == 0.5


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        mhdsc.project_l1_ball(np.array([1.0]), 0.0)
    with pytest.raises(ValueError):
        mhdsc.average_precision(np.array([0.1, 0.2]), np.array([0.0, 0.0]))
    with pytest.raises(mhdsc.ValidationError):
        mhdsc.alpha_from_energies(np.array([1.0, 2.0]), 1.0)


def test_run_cli_exit_codes(tmp_path):
    out = str(tmp_path / "d.txt")
    code, _, _ = mhdsc.run_cli(["synth", "--views", "2", "--n", "20", "--seed", "7", "--out", out])
    assert code == 0
    code, _, err = mhdsc.run_cli(["synth", "--sparsity", "20", "--atoms", "5", "--out", out])
    assert code == 2 and err


@pytest.mark.skipif("MHDSC_CLI" not in os.environ, reason="CLI binary path not provided")
def test_cli_binary_matches_module(tmp_path):
    a = tmp_path / "a.txt"
    b = tmp_path / "b.txt"
    subprocess.run([os.environ["MHDSC_CLI"], "synth", "--n", "30", "--seed", "5", "--out", str(a)], check=True)
    mhdsc.run_cli(["synth", "--n", "30", "--seed", "5", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()
