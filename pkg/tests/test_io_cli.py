import json
from dataclasses import replace

import numpy as np
import pytest

from musicfusion import io
from musicfusion.cli import main
from musicfusion.config import (
    ConfigError,
    default_scenario,
    dumps,
    from_dict,
    parse_scenario,
    scenario_digest,
    to_dict,
    write_scenario,
)
from musicfusion.experiment import draw_scene, fuse_scenario, run_experiment, summarize
from musicfusion.fusion import LikelihoodMap, SearchGrid
from musicfusion.subspace import CovarianceSet


# -- config -------------------------------------------------------------------

def test_seed_only_file_gives_defaults(tmp_path):
    p = tmp_path / "s.json"
    p.write_text('{"seed": 42}')
    cfg = parse_scenario(p)
    assert cfg.seed == 42
    assert cfg == replace(default_scenario(), seed=42)
    assert len(cfg.pairs) == 2 and cfg.n_targets == 3
    assert cfg.pairs[0].tx.origin == (-5.0, 0.0) and cfg.pairs[1].tx.origin == (5.0, 0.0)


def test_partial_pairs_inherit_slot_defaults():
    cfg = from_dict({"pairs": [{"tx": {"elements": 8}}, {"noise_variance": 1.5}]})
    assert cfg.pairs[0].M == 8 and cfg.pairs[0].tx.origin == (-5.0, 0.0)
    assert cfg.pairs[1].tx.origin == (5.0, 0.0) and cfg.pairs[1].noise_variance == 1.5
    third = from_dict({"pairs": [{}, {}, {"tx": {"origin": [0, -3]}}]}).pairs[2]
    assert third.pair_id == 3 and third.tx.origin == (0.0, -3.0)


def test_negative_noise_variance_names_key():
    raw = to_dict(default_scenario())
    raw["pairs"][0]["noise_variance"] = -1
    with pytest.raises(ConfigError, match="noise_variance"):
        from_dict(raw)


@pytest.mark.parametrize("raw, key", [
    ({"sed": 1}, "sed"),
    ({"grid": {"step": 0}}, "grid.step"),
    ({"pairs": [{"tx": {"origin": [0, 0], "colour": 1}}]}, "pairs[0].tx.colour"),
    ({"methods": ["music"]}, "methods"),
    ({"amplitude_model": "swerling"}, "amplitude_model"),
    ({"n_targets": 16}, "n_targets"),
])
def test_schema_violations(raw, key):
    with pytest.raises(ConfigError, match=key.replace("[", r"\[").replace("]", r"\]")):
        from_dict(raw)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_scenario(tmp_path / "nope.json")


def test_config_round_trip(tmp_path):
    cfg = default_scenario(seed=9).with_pair(0, tx_elements=8, noise_variance=1.5)
    write_scenario(cfg, tmp_path / "c.json")
    back = parse_scenario(tmp_path / "c.json")
    assert back == cfg
    assert scenario_digest(back) == scenario_digest(cfg)
    assert dumps(back) == dumps(cfg)
    assert scenario_digest(cfg) != scenario_digest(default_scenario())


# -- maps ---------------------------------------------------------------------

def test_map_export_rows_and_round_trip(tmp_path):
    grid = SearchGrid(0, 1, 0, 1, 1.0)
    lm = LikelihoodMap(grid, np.array([[1.0, 2.5e-7], [np.pi, -np.inf]]), "proposed", 1)
    io.export_map(lm, tmp_path / "m.csv", scenario_digest="abc", seed=3)
    text = (tmp_path / "m.csv").read_text()
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert body[0] == "x,y,value" and len(body) == 5
    assert body[4] == "1.0,1.0,"
    assert "# scenario_digest=abc" in text and "# seed=3" in text
    back = io.import_map(tmp_path / "m.csv")
    np.testing.assert_array_equal(back.values, lm.values)
    assert back.grid == grid and back.pair_id == 1


def test_map_db_mode(tmp_path):
    grid = SearchGrid(0, 2, 0, 0, 1.0)
    lm = LikelihoodMap(grid, np.array([[10.0, 1.0, 100.0]]), "proposed", "combined")
    io.export_map(lm, tmp_path / "m.csv", db=True)
    back = io.import_map(tmp_path / "m.csv")
    assert np.max(back.values) == 0.0
    np.testing.assert_allclose(back.values, [[-10.0, -20.0, 0.0]], atol=1e-12)


# -- covariance exchange ------------------------------------------------------

def _random_cov(seed=0, dim=16):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((dim, 40)) + 1j * rng.standard_normal((dim, 40))
    return CovarianceSet(2, X @ X.conj().T / 40, 40, 0.75)


def test_covariance_round_trip(tmp_path):
    cov = _random_cov()
    io.export_covariance(cov, tmp_path / "c.txt", scenario_digest="d", seed=1)
    lines = [ln for ln in (tmp_path / "c.txt").read_text().splitlines() if not ln.startswith("#")]
    assert lines[0] == "2,40,0.75,16" and len(lines) == 1 + 256
    back = io.import_covariance(tmp_path / "c.txt")
    assert np.abs(back.R - cov.R).max() < 1e-12
    assert (back.pair_id, back.Q, back.sigma2) == (2, 40, 0.75)


def test_tampered_covariance_rejected(tmp_path):
    io.export_covariance(_random_cov(), tmp_path / "c.txt")
    lines = (tmp_path / "c.txt").read_text().splitlines()
    i = next(i for i, ln in enumerate(lines) if not ln.startswith("#")) + 2  # entry (0, 1)
    re, im = lines[i].split(",")
    lines[i] = f"{float(re) + 0.5},{im}"
    (tmp_path / "c.txt").write_text("\n".join(lines) + "\n")
    with pytest.raises(io.FormatError, match="Hermitian"):
        io.import_covariance(tmp_path / "c.txt")


def test_truncated_covariance_rejected(tmp_path):
    io.export_covariance(_random_cov(), tmp_path / "c.txt")
    lines = (tmp_path / "c.txt").read_text().splitlines()[:-3]
    (tmp_path / "c.txt").write_text("\n".join(lines))
    with pytest.raises(io.FormatError):
        io.import_covariance(tmp_path / "c.txt")


def test_fusion_from_imported_covariances(tmp_path):
    cfg = default_scenario()
    targets, _, covs = draw_scene(cfg, 1)
    for c in covs:
        io.export_covariance(c, tmp_path / f"c{c.pair_id}.txt")
    imported = [io.import_covariance(tmp_path / f"c{c.pair_id}.txt") for c in covs]
    a = fuse_scenario(cfg, covs, truth=targets)
    b = fuse_scenario(cfg, imported, truth=targets)
    for m in a.combined_maps:
        assert np.abs(a.combined_maps[m].values - b.combined_maps[m].values).max() <= 1e-12 * np.abs(
            a.combined_maps[m].values).max()
    for m in a.positions:
        np.testing.assert_array_equal(a.positions[m], b.positions[m])


# -- reports ------------------------------------------------------------------

def test_report_recomputable_from_trial_log(tmp_path):
    cfg = default_scenario().with_subcarriers(64)
    rep = run_experiment(cfg, 5)
    io.write_report(rep, tmp_path / "r.json")
    io.write_trial_log(rep.trial_results, tmp_path / "t.jsonl", rep.scenario_digest, rep.seed)
    header, results = io.read_trial_log(tmp_path / "t.jsonl")
    assert header == {"scenario_digest": rep.scenario_digest, "seed": rep.seed}
    again = summarize(cfg, results, cfg.methods)
    stored = io.read_report(tmp_path / "r.json")
    for m in cfg.methods:
        assert stored["methods"][m]["rmse_m"] == again.rmse[m]
        assert stored["methods"][m]["trials"] == 5
    assert stored["scenario_digest"] == scenario_digest(cfg)


# -- CLI ----------------------------------------------------------------------

def test_cli_mc_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["mc", "--trials", "3", "--seed", "7", "--out", str(tmp_path / d)]) == 0
    for f in ("report.json", "trials.jsonl"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    assert rep["seed"] == 7 and set(rep["methods"]) == {"proposed", "method_A", "method_B", "fft2d", "soft_fusion"}


def test_cli_map_writes_all_maps(tmp_path):
    assert main(["map", "--out", str(tmp_path)]) == 0
    maps = sorted(p.name for p in tmp_path.glob("map_*.csv"))
    assert len(maps) == 4 * (2 + 1)
    assert "map_proposed_combined.csv" in maps and "map_fft2d_pair2.csv" in maps
    assert len(list(tmp_path.glob("cov_pair*.txt"))) == 2
    head = (tmp_path / "map_proposed_combined.csv").read_text().splitlines()[:2]
    assert head[0].startswith("# scenario_digest=") and head[1] == "# seed=0"


def test_cli_oracle_exact_on_noiseless_k1(tmp_path, capsys):
    cfg = {"n_targets": 1, "noiseless": True, "grid": {"x_min": -7, "x_max": 7, "y_min": 3, "y_max": 17, "step": 1.0},
           "pairs": [{"subcarriers": 64}, {"tx": {"origin": [5, 0]}, "subcarriers": 64}]}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert main(["oracle", "--config", str(tmp_path / "c.json"), "--out", str(tmp_path / "o")]) == 0
    assert "agreement = exact" in capsys.readouterr().out


def test_cli_sweep(tmp_path):
    assert main(["sweep", "--trials", "2", "--q-list", "32,64", "--methods", "proposed", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "sweep_report.json").read_text())
    assert len(rep["reports"]) == 2


@pytest.mark.parametrize("argv", [["bogus"], ["mc", "--frobnicate"], ["mc", "--methods", "nope"], []])
def test_cli_errors_are_nonzero(argv, tmp_path, capsys):
    assert main(argv + (["--out", str(tmp_path)] if argv and argv[0] == "mc" else [])) != 0


def test_cli_oracle_budget_error(tmp_path, capsys):
    assert main(["oracle", "--out", str(tmp_path)]) == 2
    assert "budget" in capsys.readouterr().err
