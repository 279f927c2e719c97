import csv

import numpy as np
import pytest

from mpdfit import selftest
from mpdfit.cli import EXIT_DATA, EXIT_OK, EXIT_PROPERTY, EXIT_USAGE, main
from mpdfit.data import load_csv

SMALL = ["--samples", "200", "--hidden", "6", "--steps", "3", "--minibatch", "64"]


def rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


class TestTrain:
    def test_zero_steps(self, tmp_path, capsys):
        code = main(["train", "--method", "mpd", "--synthetic", "terrain", "--steps", "0",
                     "--samples", "100", "--hidden", "5", "--outdir", str(tmp_path)])
        assert code == EXIT_OK
        assert (tmp_path / "mpd_loss.csv").read_text() == "step,train_loss,val_loss,wall_ms\n"
        assert len((tmp_path / "mpd_params.txt").read_text().split()) == 2 * 5 + 5 + 5 + 1
        assert "final train loss" in capsys.readouterr().out

    @pytest.mark.parametrize("method", ["mpd", "adam", "nag"])
    def test_outputs(self, tmp_path, method):
        args = ["train", "--method", method, "--outdir", str(tmp_path)] + SMALL
        assert main(args) == EXIT_OK
        table = rows(tmp_path / f"{method}_loss.csv")
        assert [r[0] for r in table] == ["step", "1", "2", "3"]
        ds = load_csv(tmp_path / f"{method}_loss.csv", [0], [1, 2], has_header=True)
        assert ds.n_samples == 3

    def test_repeatable_except_timing(self, tmp_path):
        for d in ("a", "b"):
            assert main(["train", "--outdir", str(tmp_path / d), "--seed", "4"] + SMALL) == EXIT_OK
        a, b = rows(tmp_path / "a" / "mpd_loss.csv"), rows(tmp_path / "b" / "mpd_loss.csv")
        assert [r[:3] for r in a] == [r[:3] for r in b]
        assert (tmp_path / "a" / "mpd_params.txt").read_text() == (tmp_path / "b" / "mpd_params.txt").read_text()

    def test_adam_baseline_setting(self, tmp_path):
        args = ["train", "--method", "adam", "--lr", "1e-3", "--minibatch", "256", "--samples", "300",
                "--hidden", "4", "--steps", "1", "--outdir", str(tmp_path)]
        assert main(args) == EXIT_OK

    def test_csv_source(self, tmp_path, rng):
        data = np.column_stack([rng.normal(size=(40, 2)), rng.normal(size=40)])
        path = tmp_path / "in.csv"
        np.savetxt(path, data, delimiter=",", header="a,b,c", comments="")
        args = ["train", "--csv", str(path), "--x-cols", "0,1", "--y-cols", "2", "--header",
                "--hidden", "3", "--steps", "2", "--outdir", str(tmp_path)]
        assert main(args) == EXIT_OK

    def test_bbox_filter(self, tmp_path, rng):
        data = np.column_stack([rng.uniform(0, 10, size=(100, 2)), rng.normal(size=100)])
        path = tmp_path / "in.csv"
        np.savetxt(path, data, delimiter=",")
        args = ["train", "--csv", str(path), "--x-cols", "0,1", "--y-cols", "2", "--bbox", "0,8,0,8",
                "--hidden", "3", "--steps", "0", "--outdir", str(tmp_path)]
        assert main(args) == EXIT_OK


class TestUsageErrors:
    @pytest.mark.parametrize(
        "args",
        [
            ["train", "--method", "mpd", "--lr", "0.1"],
            ["train", "--bogus"],
            ["train", "--method", "sgd"],
            ["train", "--csv", "x.csv"],
            ["train", "--x-cols", "0"],
            ["train", "--csv", "x.csv", "--synthetic", "terrain", "--x-cols", "0", "--y-cols", "1"],
            ["train", "--steps", "-1"],
            ["train", "--meth", "adam"],
            ["train", "--minibatch-growth", "1"],
            ["compare", "--method", "mpd"],
            ["compare", "--method", "mpd,mpd"],
            ["compare", "--method", "mpd,lbfgs"],
            [],
        ],
    )
    def test_exit_one(self, args, tmp_path):
        argv = args + (["--outdir", str(tmp_path)] if args else [])
        try:
            code = main(argv)
        except SystemExit as exc:
            code = exc.code
        assert code == EXIT_USAGE

    def test_data_error(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("1,2\n3,oops\n")
        code = main(["train", "--csv", str(bad), "--x-cols", "0", "--y-cols", "1", "--outdir", str(tmp_path)])
        assert code == EXIT_DATA

    def test_missing_file(self, tmp_path):
        code = main(["train", "--csv", str(tmp_path / "none.csv"), "--x-cols", "0", "--y-cols", "1",
                     "--outdir", str(tmp_path)])
        assert code == EXIT_DATA


class TestCompare:
    def test_shared_start(self, tmp_path, capsys):
        assert main(["compare", "--outdir", str(tmp_path)] + SMALL) == EXIT_OK
        table = rows(tmp_path / "compare_loss.csv")
        assert table[0] == ["step", "mpd", "adam", "nag"]
        assert len(set(table[1][1:])) == 1
        assert [r[0] for r in table[1:]] == ["0", "1", "2", "3"]
        assert "least:" in capsys.readouterr().out

    def test_teacher_all_descend(self, tmp_path):
        args = ["compare", "--synthetic", "teacher_pwl", "--samples", "400", "--hidden", "8",
                "--steps", "20", "--outdir", str(tmp_path)]
        assert main(args) == EXIT_OK
        table = rows(tmp_path / "compare_loss.csv")
        first, last = [float(v) for v in table[1][1:]], [float(v) for v in table[-1][1:]]
        assert all(b < a for a, b in zip(first, last))

    def test_byte_identical(self, tmp_path):
        for d in ("a", "b"):
            assert main(["compare", "--outdir", str(tmp_path / d)] + SMALL) == EXIT_OK
        assert (tmp_path / "a" / "compare_loss.csv").read_bytes() == (tmp_path / "b" / "compare_loss.csv").read_bytes()


class TestSelftest:
    def test_passes(self, capsys):
        assert main(["selftest"]) == EXIT_OK
        assert "checks passed" in capsys.readouterr().out

    def test_filter(self, capsys):
        assert main(["selftest", "--filter", "pwp"]) == EXIT_OK
        lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith(("ok", "FAIL"))]
        assert lines and all(" pwp." in l for l in lines)

    def test_mutation_detected(self, monkeypatch, capsys):
        monkeypatch.setenv("MPDFIT_SELFTEST_MUTATION", "sum_pwp")
        assert main(["selftest"]) == EXIT_PROPERTY
        assert "FAIL pwp.sum_pointwise" in capsys.readouterr().out

    def test_check_names_are_grouped(self):
        groups = {name.split(".")[0] for name, _ in selftest.CHECKS}
        assert groups == {"pwp", "nn", "mpd", "baselines", "data"}
