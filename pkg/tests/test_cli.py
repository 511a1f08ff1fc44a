import json

import numpy as np
import pytest
from PIL import Image

from snnwhiten import pipeline
from snnwhiten.classify import load_features, save_features
from snnwhiten.cli import cross_dataset, format_report, main
from snnwhiten.config import ExperimentConfig, dump_config, load_config, parse_config
from snnwhiten.errors import ConfigError
from snnwhiten.snn import SnnLayer, load_layer, save_layer
from snnwhiten.whitening import WhiteningKernels, load_preprocessor


class TestConfig:
    def test_defaults_match_table(self):
        cfg = ExperimentConfig()
        assert cfg.whitening.preproc == "kernels"
        assert (cfg.whitening.patch_w, cfg.whitening.patch_h) == (9, 9)
        assert (cfg.whitening.epsilon, cfg.whitening.ratio) == (1e-2, 1.0)
        assert (cfg.homeostasis.t_expected, cfg.homeostasis.lr) == (0.97, 1.0)
        assert (cfg.training.annealing, cfg.training.epochs) == (0.95, 100)
        assert (cfg.network.filter_w, cfg.network.stride, cfg.network.padding) == (5, 1, 0)
        assert (cfg.neuron.threshold_mean, cfg.neuron.threshold_std, cfg.neuron.v_rest) == (10.0, 0.1, 0.0)
        assert cfg.run.run_count == 3

    def test_round_trip(self):
        cfg = ExperimentConfig()
        cfg.data.train_limit = 500
        cfg.stdp.beta = 3.0
        cfg.whitening.preproc = "dog-color"
        assert parse_config(dump_config(cfg)) == cfg
        assert parse_config(dump_config(ExperimentConfig())) == ExperimentConfig()

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="stdp.betta"):
            parse_config("stdp.betta = 2")
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config("snn.beta = 2")

    def test_bad_value(self):
        with pytest.raises(ConfigError, match=":2:"):
            parse_config("# comment\ntraining.epochs = many")

    @pytest.mark.parametrize("line", ["homeostasis.t_expected = 1.0", "whitening.ratio = 0",
                                      "whitening.preproc = pca", "stdp.w_min = 2", "network.padding = 1",
                                      "classify.reg_grid = 0.1,-1", "neuron.capacitance = 0"])
    def test_validation(self, tmp_path, line):
        path = tmp_path / "c.cfg"
        path.write_text(line + "\n")
        with pytest.raises(ConfigError):
            load_config(path)

    def test_replace(self):
        cfg = ExperimentConfig().replace(network__filter_count=16)
        assert cfg.network.filter_count == 16 and ExperimentConfig().network.filter_count == 64


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


class TestCommands:
    def test_default_config(self, capsys):
        code, out, _ = run_cli(capsys, "default-config")
        assert code == 0 and parse_config(out) == ExperimentConfig()

    def test_whiten_fit_is_reproducible(self, capsys, tmp_path, write_config):
        cfg = write_config()
        assert run_cli(capsys, "whiten-fit", "--config", cfg, "--out", tmp_path / "a.bin")[0] == 0
        code, out, _ = run_cli(capsys, "whiten-fit", "--config", cfg, "--out", tmp_path / "b.bin")
        assert code == 0 and "retained=75/75" in out and "kernels 5x5x3" in out
        assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
        k = load_preprocessor(tmp_path / "a.bin")
        assert isinstance(k, WhiteningKernels) and k.kernels.shape == (3, 5, 5, 3)

    @pytest.mark.filterwarnings("ignore:fitting a 3072-dim")
    @pytest.mark.parametrize("preproc, kind", [("standard-zca", "zca-transform"), ("dog-gray", "dog-config")])
    def test_whiten_fit_kinds(self, capsys, tmp_path, write_config, preproc, kind):
        cfg = write_config(extra=f"whitening.preproc = {preproc}\n")
        assert run_cli(capsys, "whiten-fit", "--config", cfg, "--out", tmp_path / "p.bin")[0] == 0
        assert run_cli(capsys, "inspect", tmp_path / "p.bin")[1].strip() == kind

    def test_bad_paths(self, capsys, tmp_path, write_config):
        missing = write_config(extra=f"data.cifar10_dir = {tmp_path / 'nowhere'}\n")
        code, _, err = run_cli(capsys, "whiten-fit", "--config", missing, "--out", tmp_path / "a.bin")
        assert code == 4 and "missing file" in err
        assert run_cli(capsys, "whiten-fit", "--config", tmp_path / "no.cfg", "--out", tmp_path / "a.bin")[0] == 3
        assert run_cli(capsys, "export-filters", "--layer", tmp_path / "no.bin", "--out", tmp_path / "x.png")[0] == 4
        with pytest.raises(SystemExit) as exc:
            main(["train"])
        assert exc.value.code == 2

    def test_stages_match_library(self, capsys, tmp_path, write_config):
        cfg_path = write_config()
        pre, layer = tmp_path / "k.bin", tmp_path / "l.bin"
        assert run_cli(capsys, "whiten-fit", "--config", cfg_path, "--out", pre)[0] == 0
        code, out, _ = run_cli(capsys, "train", "--config", cfg_path, "--preproc", pre, "--out", layer,
                               "--seed", 5, "--log", tmp_path / "log.tsv")
        assert code == 0 and out.count("epoch=") == 2
        log_lines = (tmp_path / "log.tsv").read_text().splitlines()
        assert len(log_lines) == 3 and log_lines[0].startswith("epoch\tpatches")
        # same seed twice gives a byte-identical layer
        run_cli(capsys, "train", "--config", cfg_path, "--preproc", pre, "--out", tmp_path / "l2.bin", "--seed", 5)
        assert layer.read_bytes() == (tmp_path / "l2.bin").read_bytes()

        for split in ("train", "test"):
            assert run_cli(capsys, "extract", "--config", cfg_path, "--preproc", pre, "--layer", layer,
                           "--split", split, "--out", tmp_path / f"{split}.feat")[0] == 0
        fx, fy = load_features(tmp_path / "test.feat")
        assert fx.shape == (20, 16)

        # library path on the same inputs
        cfg = load_config(cfg_path)
        train_set, test_set = pipeline.load_split(cfg)
        k = pipeline.fit_preprocessor(cfg, train_set)
        trained, _ = pipeline.train_layer(cfg, pipeline.preprocess(k, train_set.images), 5)
        assert trained.weights.tobytes() == load_layer(layer).weights.tobytes()
        api = pipeline.extract_features(trained, pipeline.preprocess(k, test_set.images[:1]), cfg)
        np.testing.assert_array_equal(api[0], fx[0])
        np.testing.assert_array_equal(fy, test_set.labels)

        code, out, _ = run_cli(capsys, "classify", "--config", cfg_path, "--train", tmp_path / "train.feat",
                               "--test", tmp_path / "test.feat", "--summary", tmp_path / "s.json")
        assert code == 0 and out.splitlines()[-1].startswith("summary\truns=1\tmean=")
        summary = json.loads((tmp_path / "s.json").read_text())
        assert summary["std"] == 0.0 and 0 <= summary["mean"] <= 1

    def test_zeroed_layer_gives_zero_features(self, capsys, tmp_path, write_config):
        cfg_path = write_config()
        run_cli(capsys, "whiten-fit", "--config", cfg_path, "--out", tmp_path / "k.bin")
        save_layer(tmp_path / "z.bin", SnnLayer(np.zeros((4, 150)), np.full(4, 4.0), 5, 5, 6))
        run_cli(capsys, "extract", "--config", cfg_path, "--preproc", tmp_path / "k.bin", "--layer",
                tmp_path / "z.bin", "--split", "test", "--out", tmp_path / "z.feat")
        np.testing.assert_array_equal(load_features(tmp_path / "z.feat")[0], 0.0)

    def test_classify_perfect_features_and_runs(self, capsys, tmp_path):
        labels = np.arange(40) % 4
        feats = np.eye(4)[labels] * 5.0
        save_features(tmp_path / "tr.feat", feats, labels)
        save_features(tmp_path / "te.feat", feats[:12], labels[:12])
        args = ["--train"] + [tmp_path / "tr.feat"] * 3 + ["--test"] + [tmp_path / "te.feat"] * 3
        code, out, _ = run_cli(capsys, "classify", *args)
        assert code == 0
        assert out.splitlines() == ["run=0\taccuracy=100.00", "run=1\taccuracy=100.00", "run=2\taccuracy=100.00",
                                    "summary\truns=3\tmean=100.00\tstd=0.00"]

    def test_classify_needs_labels(self, capsys, tmp_path):
        save_features(tmp_path / "u.feat", np.zeros((4, 2)))
        assert run_cli(capsys, "classify", "--train", tmp_path / "u.feat", "--test", tmp_path / "u.feat")[0] == 5

    def test_report_std_uses_n_minus_one(self):
        # mean 0.6; squared deviations 0.01 + 0 + 0.01 over n - 1 = 2 -> std 0.1
        assert format_report([0.5, 0.6, 0.7])[-1] == "summary\truns=3\tmean=60.00\tstd=10.00"

    def test_run_writes_layers(self, capsys, tmp_path, write_config):
        cfg_path = write_config(extra="whitening.preproc = dog-color\n")
        code, out, _ = run_cli(capsys, "run", "--config", cfg_path, "--out-dir", tmp_path / "out")
        assert code == 0 and out.count("run=") == 2
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert summary["seeds"] == [0, 1] and summary["preproc"] == "dog-color"
        assert load_layer(tmp_path / "out" / "layer_seed1.bin").channels == 6

    def test_export_filters(self, capsys, tmp_path):
        rng = np.random.default_rng(0)
        save_layer(tmp_path / "l.bin", SnnLayer(rng.random((64, 150)), np.ones(64), 5, 5, 6))
        assert run_cli(capsys, "export-filters", "--layer", tmp_path / "l.bin", "--out", tmp_path / "f.png")[0] == 0
        assert np.asarray(Image.open(tmp_path / "f.png")).shape == (47, 47, 3)
        save_layer(tmp_path / "c.bin", SnnLayer(np.full((4, 150), 0.3), np.ones(4), 5, 5, 6))
        run_cli(capsys, "export-filters", "--layer", tmp_path / "c.bin", "--out", tmp_path / "c.png")
        arr = np.asarray(Image.open(tmp_path / "c.png"))
        tile = arr[:5, :5]
        assert np.all(tile == tile[0, 0]) and 0 < tile[0, 0, 0] < 255


class TestCrossDataset:
    def test_matrix_and_composition(self, capsys, write_config):
        cfg_a = load_config(write_config("cifar10", name="a.cfg"))
        cfg_b = load_config(write_config("stl10", extra="run.run_count = 1\n", name="b.cfg"))
        table = cross_dataset(cfg_a, cfg_b)
        assert set(table) == {"cifar10", "stl10"}
        row = table["cifar10"]
        assert row["kernel_source_cross"] == "stl10" and len(row["same"]) == 2
        # same-dataset cell equals a direct pipeline run
        train_set, test_set = pipeline.load_split(cfg_a)
        direct = [r.accuracy for r in pipeline.run_experiment(cfg_a, train_set, test_set)]
        assert row["same"] == direct
        expected = (np.mean(row["cross"]) - np.mean(row["same"])) * 100
        assert row["delta_pp"] == pytest.approx(expected)

    def test_cli_errors(self, capsys, write_config, tmp_path):
        a = write_config("cifar10", name="a.cfg")
        assert run_cli(capsys, "cross-dataset", "--config-a", a, "--config-b", a)[0] == 3
        b = write_config("stl10", extra=f"data.stl10_dir = {tmp_path / 'none'}\n", name="b.cfg")
        assert run_cli(capsys, "cross-dataset", "--config-a", a, "--config-b", b)[0] == 4
