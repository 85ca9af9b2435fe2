"""End-to-end command line coverage through main(argv)."""

import numpy as np
import pytest

from mrtensor.cli import main, parse_config
from mrtensor.model import read_model
from mrtensor.solver import read_report
from mrtensor.sptensor import read_tensor

EVENTS = """replicate_id,team,minutes,x_o,y_o,x_d,y_d
m1,alpha,96,10,10,50,40
m1,alpha,96,50,40,90,60
m1,alpha,96,30,20,70,50
m2,beta,90,20,30,60,50
m2,beta,90,80,60,40,30
m2,beta,90,15,35,65,45
"""


@pytest.fixture
def events_csv(tmp_path):
    path = tmp_path / "events.csv"
    path.write_text(EVENTS)
    return path


@pytest.fixture
def fitted_model(tmp_path, events_csv):
    tensor = tmp_path / "t.txt"
    model = tmp_path / "m.txt"
    assert main(["encode", str(events_csv), "-S", "2",
                 "--out", str(tensor)]) == 0
    assert main([
        "fit", str(tensor), "--terms", "2", "--rank", "1",
        "--max-outer", "15", "--seed", "0", "--out", str(model),
    ]) == 0
    return model


class TestEncode:
    def test_writes_tensor_and_reports_sparsity(
        self, tmp_path, events_csv, capsys
    ):
        out = tmp_path / "t.txt"
        code = main(["encode", str(events_csv), "-S", "2", "--out", str(out)])
        assert code == 0
        line = capsys.readouterr().out.strip()
        assert line == "cells=512 nnz=5 sparsity=99.02%"
        t = read_tensor(out)
        assert t.shape == (4, 4, 4, 4, 2)
        assert t.total == 6

    def test_geometry_flags(self, tmp_path, events_csv):
        out = tmp_path / "t.txt"
        code = main([
            "encode", str(events_csv), "-S", "1", "--out", str(out),
            "--attack-direction", "right_to_left",
        ])
        assert code == 0

    def test_missing_file_exits_two(self, tmp_path, capsys):
        code = main([
            "encode", str(tmp_path / "nope.csv"), "-S", "1",
            "--out", str(tmp_path / "t.txt"),
        ])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestFit:
    def test_writes_model_and_report(self, tmp_path, events_csv, capsys):
        tensor = tmp_path / "t.txt"
        main(["encode", str(events_csv), "-S", "1", "--out", str(tensor)])
        model = tmp_path / "m.txt"
        report = tmp_path / "r.csv"
        code = main([
            "fit", str(tensor), "--terms", "2", "--rank", "1",
            "--max-outer", "10", "--out", str(model),
            "--report", str(report),
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "backend=block-gs" in out
        fitted = read_model(model)
        assert fitted.n_terms == 2
        trace = read_report(report)
        assert len(trace.objective) >= 1

    def test_em_backend(self, tmp_path, events_csv):
        tensor = tmp_path / "t.txt"
        main(["encode", str(events_csv), "-S", "1", "--out", str(tensor)])
        model = tmp_path / "m.txt"
        code = main([
            "fit", str(tensor), "--backend", "em", "--terms", "2",
            "--rank", "1", "--beta", "0", "--max-outer", "10",
            "--out", str(model),
        ])
        assert code == 0

    def test_em_with_shrinkage_fails_cleanly(
        self, tmp_path, events_csv, capsys
    ):
        tensor = tmp_path / "t.txt"
        main(["encode", str(events_csv), "-S", "1", "--out", str(tensor)])
        code = main([
            "fit", str(tensor), "--backend", "em", "--terms", "2",
            "--rank", "1", "--beta", "0.01",
            "--out", str(tmp_path / "m.txt"),
        ])
        assert code == 2
        assert "beta" in capsys.readouterr().err

    def test_config_file_with_flag_override(self, tmp_path, events_csv):
        tensor = tmp_path / "t.txt"
        main(["encode", str(events_csv), "-S", "1", "--out", str(tensor)])
        config = tmp_path / "run.cfg"
        config.write_text(
            "n_terms = 3\n"
            "rank = 1\n"
            "beta = 0  # plain likelihood\n"
            "\n"
            "max_outer = 5\n"
        )
        model = tmp_path / "m.txt"
        code = main([
            "fit", str(tensor), "--config", str(config),
            "--terms", "2", "--out", str(model),
        ])
        assert code == 0
        assert read_model(model).n_terms == 2


class TestConfigParser:
    def test_parses_types(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text(
            "n_terms = 4\nrank = 2,1,1,3\nbeta = 1e-2\n"
            "beta_rule = global\nglobal_observations = 1000\nseed = 3\n"
        )
        values = parse_config(path)
        assert values["n_terms"] == 4
        assert values["rank"] == (2, 1, 1, 3)
        assert values["beta"] == 0.01
        assert values["beta_rule"] == "global"
        assert values["global_observations"] == 1000

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("terms = 4\n")
        with pytest.raises(ValueError, match="unknown key"):
            parse_config(path)

    def test_missing_equals_rejected(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("n_terms 4\n")
        with pytest.raises(ValueError, match="expected key = value"):
            parse_config(path)


class TestMotifs:
    def test_writes_csv_and_svg_per_scale(
        self, tmp_path, fitted_model, capsys
    ):
        outdir = tmp_path / "motifs"
        code = main([
            "motifs", str(fitted_model), "--top", "1", "--out", str(outdir),
        ])
        assert code == 0
        names = sorted(p.name for p in outdir.iterdir())
        assert names == [
            "motif_1_scale_1.csv",
            "motif_1_scale_1.svg",
            "motif_1_scale_2.csv",
            "motif_1_scale_2.svg",
        ]
        assert "motif=1" in capsys.readouterr().out

    def test_scale_subset(self, tmp_path, fitted_model):
        outdir = tmp_path / "motifs"
        code = main([
            "motifs", str(fitted_model), "--top", "1",
            "--scales", "2", "--out", str(outdir),
        ])
        assert code == 0
        names = sorted(p.name for p in outdir.iterdir())
        assert names == ["motif_1_scale_2.csv", "motif_1_scale_2.svg"]

    def test_overlong_top_warns(self, tmp_path, fitted_model, capsys):
        code = main([
            "motifs", str(fitted_model), "--top", "99",
            "--out", str(tmp_path / "motifs"),
        ])
        assert code == 0
        assert "warning" in capsys.readouterr().err

    def test_top_zero_writes_nothing(self, tmp_path, fitted_model):
        outdir = tmp_path / "motifs"
        code = main([
            "motifs", str(fitted_model), "--top", "0", "--out", str(outdir),
        ])
        assert code == 0
        assert list(outdir.iterdir()) == []


class TestScores:
    def test_rows_per_term_then_eta(self, tmp_path, fitted_model):
        out = tmp_path / "scores.csv"
        assert main(["scores", str(fitted_model), "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "term,n1,n2"
        assert lines[1].startswith("1,")
        assert lines[2].startswith("2,")
        assert lines[3].startswith("eta,")
        # Shares in each replicate column sum to one.
        theta = np.array(
            [[float(v) for v in line.split(",")[1:]] for line in lines[1:3]]
        )
        np.testing.assert_allclose(theta.sum(axis=0), [1.0, 1.0])


class TestDissim:
    def test_writes_labeled_matrix(self, tmp_path, events_csv):
        out = tmp_path / "d.csv"
        code = main([
            "dissim", str(events_csv), "--scale", "1", "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "team,alpha,beta"
        assert len(lines) == 3


class TestSimulate:
    def test_round_trip(self, tmp_path, fitted_model):
        rates = tmp_path / "rates.csv"
        rates.write_text("term,m1,m2\n1,40,20\n2,10,30\n")
        out = tmp_path / "sim.txt"
        code = main([
            "simulate", str(fitted_model), str(rates),
            "--seed", "5", "--out", str(out),
        ])
        assert code == 0
        t = read_tensor(out)
        assert t.shape[-1] == 2
        assert t.total > 0

    def test_cells_method(self, tmp_path, fitted_model):
        rates = tmp_path / "rates.csv"
        rates.write_text("term,m1,m2\n1,40,20\n2,10,30\n")
        out = tmp_path / "sim.txt"
        code = main([
            "simulate", str(fitted_model), str(rates),
            "--method", "cells", "--out", str(out),
        ])
        assert code == 0

    def test_bad_header_rejected(self, tmp_path, fitted_model, capsys):
        rates = tmp_path / "rates.csv"
        rates.write_text("motif,m1,m2\n1,40,20\n")
        code = main([
            "simulate", str(fitted_model), str(rates),
            "--out", str(tmp_path / "sim.txt"),
        ])
        assert code == 2
        assert "term" in capsys.readouterr().err

    def test_row_count_mismatch_rejected(self, tmp_path, fitted_model):
        rates = tmp_path / "rates.csv"
        rates.write_text("term,m1,m2\n1,40,20\n")
        code = main([
            "simulate", str(fitted_model), str(rates),
            "--out", str(tmp_path / "sim.txt"),
        ])
        assert code == 2
