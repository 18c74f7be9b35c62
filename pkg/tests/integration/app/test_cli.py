"""Integration tests for the pairwise-imaging command line"""
import csv

import numpy as np
import pytest

from src.app.main import main
from src.shared.exceptions import EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE
from src.shared.imageio import read_image, write_pgm
from tests.utils import write_config

CS_SECTIONS = {
    "experiment": {"family": "cs-shifted-partitions", "regime": "unsup-nonblind", "seed": 3},
    "measurement": {"image_size": 8, "patch_size": 4, "ratio": 0.25},
    "data": {"num_images": 8, "num_eval": 2},
    "model": {"widths": "4,8"},
    "train": {"batch_size": 4, "max_epochs": 1, "val_fraction": 0.25},
    "analysis": {"domain_size": 8},
}

BLIND_SECTIONS = {
    "experiment": {"family": "motion-kernels", "regime": "unsup-blind", "seed": 5},
    "measurement": {"image_size": 16, "kernel_size": 3},
    "data": {"num_images": 4, "num_eval": 2},
    "model": {"widths": "4,8,8"},
    "train": {"batch_size": 2, "max_epochs": 1, "val_fraction": 0.25},
    "analysis": {"domain_size": 8, "n_samples": 50},
}

THEORY_SECTIONS = {
    "theory": {"family": "orthogonal", "n_samples": 5000, "n_train": 1000, "n_test": 1000},
}


@pytest.fixture
def cs_config(tmp_path):
    return write_config(tmp_path / "cs.ini", **CS_SECTIONS)


@pytest.fixture
def blind_config(tmp_path):
    return write_config(tmp_path / "blind.ini", **BLIND_SECTIONS)


class TestDataCommands:
    """Test gen-data and analyze-q"""

    def test_gen_data_writes_splits(self, cs_config, tmp_path, capsys):
        """Test gen-data writes train and eval dataset directories"""
        out = tmp_path / "data"
        assert main(["gen-data", "--config", cs_config, "--out", str(out)]) == EXIT_OK
        assert (out / "train" / "manifest.json").exists()
        assert (out / "eval" / "manifest.json").exists()
        assert (out / "resolved_config.ini").exists()
        assert "train:" in capsys.readouterr().out

    def test_analyze_q_cs_report(self, cs_config, tmp_path, capsys):
        """Test the CS shifted-partition family reports a rank verdict and spectrum"""
        out = tmp_path / "analysis"
        assert main(["analyze-q", "--config", cs_config, "--out", str(out)]) == EXIT_OK
        assert "full_rank = " in capsys.readouterr().out
        assert (out / "eigenvalues.csv").exists()

    def test_analyze_q_kernel_spectrum(self, blind_config, tmp_path, capsys):
        """Test motion kernels report a positive spectrum ratio"""
        out = tmp_path / "analysis"
        assert main(["analyze-q", "--config", blind_config, "--out", str(out)]) == EXIT_OK
        assert "spectrum_min_over_max" in capsys.readouterr().out
        assert (out / "spectrum.csv").exists()


class TestTrainingCommands:
    """Test train, eval and reconstruct end to end"""

    def test_train_eval_reconstruct_cs(self, cs_config, tmp_path, capsys):
        """Test a CS run from generated data through evaluation and reconstruction"""
        data, run = tmp_path / "data", tmp_path / "run"
        assert main(["gen-data", "--config", cs_config, "--out", str(data)]) == EXIT_OK
        code = main([
            "train", "--config", cs_config, "--out", str(run),
            "--data", str(data / "train"), "--eval-data", str(data / "eval"),
        ])
        assert code == EXIT_OK
        assert (run / "final.uim").exists() and (run / "best.uim").exists()
        assert (run / "metrics.csv").exists()

        evaluation = tmp_path / "eval"
        code = main([
            "eval", "--config", cs_config, "--out", str(evaluation),
            "--checkpoint", str(run / "best.uim"), "--eval-data", str(data / "eval"),
        ])
        assert code == EXIT_OK
        with open(evaluation / "psnr.csv", newline="") as handle:
            rows = list(csv.reader(handle))
        assert rows[0] == ["image", "psnr_db"] and rows[-1][0] == "mean"
        assert len(list((evaluation / "reconstructions").glob("*.pgm"))) == 2

        source, output = tmp_path / "in.pgm", tmp_path / "out.pgm"
        write_pgm(source, np.linspace(0.0, 1.0, 64).reshape(8, 8))
        code = main([
            "reconstruct", "--config", cs_config, "--checkpoint", str(run / "final.uim"),
            "--input", str(source), "--output", str(output),
        ])
        assert code == EXIT_OK
        assert read_image(output).shape == (8, 8)
        assert "mean_psnr" in capsys.readouterr().out

    def test_blind_train_and_resume(self, blind_config, tmp_path, capsys):
        """Test blind training in memory and resuming it for a second epoch"""
        run = tmp_path / "run"
        assert main(["train", "--config", blind_config, "--out", str(run)]) == EXIT_OK
        longer = write_config(
            tmp_path / "longer.ini", **{**BLIND_SECTIONS, "train": {**BLIND_SECTIONS["train"], "max_epochs": 2}}
        )
        capsys.readouterr()
        resumed = tmp_path / "resumed"
        code = main(["train", "--config", longer, "--out", str(resumed), "--resume", str(run / "final.uim")])
        assert code == EXIT_OK
        assert "epochs = 2" in capsys.readouterr().out
        assert (resumed / "final.uim").exists()

    def test_regime_override(self, cs_config, tmp_path, capsys):
        """Test --regime switches the CS run to the supervised baseline"""
        run = tmp_path / "supervised"
        assert main(["train", "--config", cs_config, "--out", str(run), "--regime", "supervised"]) == EXIT_OK
        assert "final_loss" in capsys.readouterr().out


class TestTheoryCommand:
    """Test verify-theory"""

    def test_verify_theory_prints_identity(self, tmp_path, capsys):
        """Test the identity and floor lines are printed and the report written"""
        config = write_config(tmp_path / "theory.ini", **THEORY_SECTIONS)
        out = tmp_path / "theory"
        assert main(["verify-theory", "--config", config, "--out", str(out)]) == EXIT_OK
        printed = capsys.readouterr().out
        for key in ("lhs =", "rhs =", "rel_err =", "floor_loss", "floor_excess", "oracle_psnr_gap"):
            assert key in printed
        assert (out / "theory_report.csv").exists()

    def test_rank_deficient_exit_code(self, tmp_path):
        """Test a refused oracle exits with the numerical-failure code"""
        sections = {"theory": {**THEORY_SECTIONS["theory"], "family": "fixed"}}
        config = write_config(tmp_path / "fixed.ini", **sections)
        assert main(["verify-theory", "--config", config, "--out", str(tmp_path / "t")]) == EXIT_NUMERICAL


class TestCliErrors:
    """Test usage errors map to exit code 1"""

    def test_unknown_config_key(self, tmp_path):
        """Test an unknown key is rejected"""
        config = write_config(tmp_path / "bad.ini", train={"learning_rate": 0.1})
        assert main(["gen-data", "--config", config, "--out", str(tmp_path / "x")]) == EXIT_USAGE

    def test_missing_command(self):
        """Test running without a sub-command is a usage error"""
        assert main([]) == EXIT_USAGE

    def test_blind_cs_rejected(self, tmp_path):
        """Test compressive sensing has no blind regime"""
        config = write_config(tmp_path / "cs.ini", experiment={"family": "cs-shifted-partitions", "regime": "unsup-blind"})
        assert main(["train", "--config", config, "--out", str(tmp_path / "r")]) == EXIT_USAGE

    def test_missing_checkpoint(self, cs_config, tmp_path):
        """Test eval with a missing checkpoint file fails cleanly"""
        code = main(["eval", "--config", cs_config, "--checkpoint", str(tmp_path / "none.uim"), "--out", str(tmp_path / "e")])
        assert code == EXIT_USAGE
