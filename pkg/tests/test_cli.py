import csv

import pytest

from hdgtransfer.cli import build_parser, main
from hdgtransfer.study import CSV_COLUMNS


def write_config(tmp_path, **kw):
    base = {"domain": "disk-immersed", "k": 1, "levels": 2, "base_resolution": 8, "out": str(tmp_path / "res")}
    base.update(kw)
    path = tmp_path / "case.cfg"
    path.write_text("# test case\n" + "".join(f"{k} = {v}\n" for k, v in base.items()))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestCommands:
    def test_convergence(self, tmp_path, capsys):
        assert main(["convergence", "--config", write_config(tmp_path)]) == 0
        rows = read_csv(tmp_path / "res.csv")
        assert rows[0] == CSV_COLUMNS
        assert len(rows) == 3
        assert rows[1][8:] == ["", "", "", ""]
        assert all(cell != "" for cell in rows[2])
        assert "final eoc_sigma=" in capsys.readouterr().out

    def test_run_with_export(self, tmp_path, capsys):
        mtx = tmp_path / "k.mtx"
        cfg = write_config(tmp_path, k=2, level=1, export_matrix=str(mtx))
        assert main(["run", "--config", cfg]) == 0
        rows = read_csv(tmp_path / "res_run.csv")
        assert rows[0] == CSV_COLUMNS and rows[1][0] == "1"
        assert mtx.read_text().startswith("%%MatrixMarket matrix coordinate real general")
        out = capsys.readouterr().out
        assert "certificate weak_symmetry" in out and "paths_valid=True" in out

    def test_diagnostics(self, tmp_path):
        assert main(["diagnostics", "--config", write_config(tmp_path, domain="kidney-immersed", base_resolution=16)]) == 0
        rows = read_csv(tmp_path / "res_diagnostics.csv")
        assert rows[0] == ["edge", "r_e", "C_ext", "C_inv", "C_tr"]
        assert len(rows) > 10 and all(float(r[3]) > 0 for r in rows[1:])

    def test_paths(self, tmp_path, capsys):
        assert main(["paths", "--config", write_config(tmp_path, domain="square", base_resolution=2)]) == 0
        rows = read_csv(tmp_path / "res_paths.csv")
        assert rows[0] == ["edge", "qp", "x0", "y0", "x1", "y1", "l"]
        assert len(rows) == 1 + 8 * 4 and all(float(r[6]) == 0.0 for r in rows[1:])
        assert "non_crossing=True" in capsys.readouterr().out


class TestErrors:
    def test_bad_config(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        path.write_text("k = 7\n")
        assert main(["run", "--config", str(path)]) == 1
        assert "error:" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["paths", "--config", str(tmp_path / "nope.cfg")]) == 1
        assert "error:" in capsys.readouterr().err

    def test_mesh_failure_reports_level(self, tmp_path, capsys):
        assert main(["run", "--config", write_config(tmp_path, base_resolution=1)]) == 1
        assert "level 0" in capsys.readouterr().err

    def test_config_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["run"])
        with pytest.raises(SystemExit):
            build_parser().parse_args(["plot", "--config", "x"])
