import pytest

from gsmas.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from gsmas.harness import read_results

pytestmark = pytest.mark.filterwarnings("ignore::gsmas.features.EmptyClassWarning")

SMALL = ["--set", "snr_grid_db=10", "--set", "n_instances=200", "--set", "mlp_epochs=1",
         "--set", "mlp_hidden_layers=2", "--set", "dt_max_depth=5", "--set", "chunk_blocks=250"]


def run(tmp_path, *args):
    return main(["--out-dir", str(tmp_path), *SMALL, *args])


def test_full_workflow(tmp_path, capsys):
    assert run(tmp_path, "gen-data") == EXIT_OK
    assert (tmp_path / "train_a1_b0_snr10.csv").exists()
    assert run(tmp_path, "train", "--data-dir", str(tmp_path)) == EXIT_OK
    assert (tmp_path / "models" / "a1_b0_snr10_mlp.json").exists()
    assert run(tmp_path, "evaluate") == EXIT_OK
    assert "accuracy=" in capsys.readouterr().out
    assert run(tmp_path, "sweep", "--n-blocks", "500", "--models-dir", str(tmp_path / "models")) == EXIT_OK
    _, results = read_results(tmp_path / "results.csv")
    assert len(results) == 5
    (tmp_path / "fig_ber_alpha1_beta0.dat").unlink()
    assert run(tmp_path, "report") == EXIT_OK
    assert (tmp_path / "fig_ber_alpha1_beta0.dat").exists()


def test_config_file_and_seed(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("snr_grid_db = 0, 20\nseed = 1\n")
    args = ["--config", str(cfg), "--seed", "5", "--out-dir", str(tmp_path)]
    assert main(args + ["sweep", "--n-blocks", "100", "--methods", "edas_perfect"]) == EXIT_OK
    config, results = read_results(tmp_path / "results.csv")
    assert config.seed == 5 and [r.snr_db for r in results] == [0.0, 20.0]


def test_flags_after_subcommand(tmp_path):
    rc = main(["sweep", "--out-dir", str(tmp_path), "--seed", "2", "--set", "snr_grid_db=5",
               "--n-blocks", "50", "--methods", "random_baseline"])
    assert rc == EXIT_OK
    assert read_results(tmp_path / "results.csv")[0].seed == 2


def test_sweep_deterministic_across_workers(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    common = ["--set", "snr_grid_db=0,10", "--set", "chunk_blocks=200", "--seed", "8"]
    methods = ["--methods", "edas_perfect", "edas_impaired", "random_baseline"]
    assert main(["--out-dir", str(a), "--workers", "1", *common, "sweep", "--n-blocks", "600", *methods]) == 0
    assert main(["--out-dir", str(b), "--workers", "2", *common, "sweep", "--n-blocks", "600", *methods]) == 0
    assert (a / "results.csv").read_bytes() == (b / "results.csv").read_bytes()


@pytest.mark.parametrize("argv", [
    ["--set", "bogus=1", "sweep"],
    ["--set", "n_tx=zero", "sweep"],
    ["--set", "novalue", "sweep"],
    ["--workers", "0", "sweep"],
    ["sweep", "--n-blocks", "0"],
    ["--config", "/nonexistent/file.cfg", "sweep"],
    ["frobnicate"],
    ["sweep", "--methods", "magic"],
])
def test_config_errors_exit_one(tmp_path, argv):
    with pytest.raises(SystemExit) as info:
        raise SystemExit(main(["--out-dir", str(tmp_path), *argv]))
    assert info.value.code == EXIT_CONFIG


def test_missing_models_is_config_error(tmp_path):
    assert run(tmp_path, "evaluate") == EXIT_CONFIG


def test_runtime_errors_exit_two(tmp_path):
    assert run(tmp_path, "report") == EXIT_RUNTIME  # no results.csv yet
    bad = tmp_path / "results.csv"
    bad.write_text("garbage\n")
    assert run(tmp_path, "report") == EXIT_RUNTIME
    (tmp_path / "d").mkdir()
    (tmp_path / "d" / "train_a1_b0_snr10.csv").write_text("")
    (tmp_path / "d" / "test_a1_b0_snr10.csv").write_text("")
    assert run(tmp_path, "train", "--data-dir", str(tmp_path / "d")) == EXIT_RUNTIME
