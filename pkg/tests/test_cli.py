import numpy as np
import pytest

from stochadd.cli import PRESETS, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestDigits:
    def test_base3_eight(self, capsys):
        code, out, _ = run(capsys, "digits", "8", "--base", "const:3")
        assert code == 0
        assert out == "digits=2,2 counter=3 succ=9\n"

    def test_zero_even_base(self, capsys):
        code, out, _ = run(capsys, "digits", "0", "--base", "even")
        assert code == 0
        assert out == "digits= counter=1 succ=1\n"

    def test_mixed_prefix(self, capsys):
        code, out, _ = run(capsys, "digits", "17", "--base", "list:2,3,4;tail=4")
        assert code == 0
        assert out.startswith("digits=1,2,2 ")

    def test_parse_error_exit_code(self, capsys):
        code, _, err = run(capsys, "digits", "8", "--base", "nonsense:3")
        assert code == 2
        assert "error" in err


class TestMatrix:
    def test_report_and_file(self, capsys, tmp_path):
        out_path = tmp_path / "mat.txt"
        code, out, _ = run(capsys, "matrix", "--n", "10", "--base", "const:3",
                           "--probs", "pconst:0.7", "--out", str(out_path))
        assert code == 0
        assert "result=pass" in out
        header = out_path.read_text().splitlines()[0]
        assert header.split()[:2] == ["10", "10"]

    def test_certain_machine_rows(self, capsys, tmp_path):
        out_path = tmp_path / "mat.txt"
        code, out, _ = run(capsys, "matrix", "--n", "6", "--base", "const:3",
                           "--probs", "pconst:1", "--out", str(out_path))
        assert code == 0
        body = out_path.read_text().splitlines()[1:]
        # pure successor shifts: one unit entry per unclipped row
        assert body == [f"{n} {n + 1} 1" for n in range(5)]


class TestRender:
    def test_writes_images_and_meta(self, capsys, tmp_path):
        prefix = tmp_path / "img"
        code, out, _ = run(capsys, "render", "--preset", "fig6a",
                           "--res", "48x48", "--depth", "50",
                           "--out", str(prefix))
        assert code == 0
        assert (tmp_path / "img.pgm").read_bytes().startswith(b"P5\n48 48\n255\n")
        assert (tmp_path / "img.pbm").read_bytes().startswith(b"P4\n48 48\n")
        meta = (tmp_path / "img.meta").read_text()
        assert "base=even" in meta and "probs=pconst:0.8" in meta

    def test_unit_disk_image(self, capsys, tmp_path):
        prefix = tmp_path / "disk"
        code, _, _ = run(capsys, "render", "--base", "const:2", "--probs",
                         "pconst:1", "--window=-1.5,1.5,-1.5,1.5",
                         "--res", "64x64", "--depth", "40", "--out", str(prefix))
        assert code == 0
        raw = (tmp_path / "disk.pgm").read_bytes()
        pixels = np.frombuffer(raw.split(b"255\n", 1)[1], dtype=np.uint8)
        bounded_fraction = np.mean(pixels == 255)
        assert abs(bounded_fraction - np.pi / 9) < 0.02

    def test_zero_area_window_usage_error(self, capsys, tmp_path):
        code, _, err = run(capsys, "render", "--base", "const:2", "--probs",
                           "pconst:1", "--window", "1,1,0,2",
                           "--res", "16x16", "--out", str(tmp_path / "x"))
        assert code == 2
        assert "zero area" in err

    def test_byte_identical_runs(self, capsys, tmp_path):
        for prefix in ("a", "b"):
            run(capsys, "render", "--preset", "fig10a", "--res", "32x32",
                "--depth", "25", "--out", str(tmp_path / prefix))
        assert ((tmp_path / "a.pgm").read_bytes()
                == (tmp_path / "b.pgm").read_bytes())
        assert ((tmp_path / "a.pbm").read_bytes()
                == (tmp_path / "b.pbm").read_bytes())

    def test_presets_cover_gallery(self):
        for fig in (3, 4, 5, 6, 7, 8, 9, 10):
            for variant in "abc":
                assert f"fig{fig}{variant}" in PRESETS


class TestRoots:
    def test_binary_half_depth_two(self, capsys, tmp_path):
        path = tmp_path / "roots.csv"
        code, out, _ = run(capsys, "roots", "--base", "const:2", "--probs",
                           "pconst:0.5", "--depth", "2", "--out", str(path))
        assert code == 0
        lines = path.read_text().splitlines()
        assert lines[0] == "depth,re,im"
        values = sorted(float(l.split(",")[1]) for l in lines[1:]
                        if l.startswith("2,"))
        assert np.allclose(values, [0.0, 0.5, 1.0], atol=1e-12)

    def test_always_contains_one(self, capsys, tmp_path):
        path = tmp_path / "roots.csv"
        run(capsys, "roots", "--preset", "fig10a", "--depth", "3",
            "--out", str(path))
        ones = [l for l in path.read_text().splitlines()[1:]
                if abs(float(l.split(",")[1]) - 1.0) < 1e-9
                and abs(float(l.split(",")[2])) < 1e-9]
        assert len(ones) == 3  # one per depth

    def test_cap_partial_flag(self, capsys, tmp_path):
        path = tmp_path / "roots.csv"
        code, out, _ = run(capsys, "roots", "--base", "const:2", "--probs",
                           "pconst:0.5", "--depth", "10", "--cap", "8",
                           "--out", str(path))
        assert code == 0
        assert path.read_text().startswith("# partial")
        assert "capped=true" in out


class TestVerify:
    def test_stochasticity_on_presets(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "stochasticity")
        assert code == 0
        lines = [l for l in out.splitlines() if l]
        assert len(lines) == 5
        assert all(l.startswith("PASS") for l in lines)

    def test_renorm_single_config(self, capsys):
        code, out, _ = run(capsys, "verify", "--suite", "renorm",
                           "--base", "const:2", "--probs", "pconst:0.5")
        assert code == 0
        assert out.startswith("PASS renorm")

    def test_unknown_suite_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "--suite", "bogus"])
        assert exc.value.code == 2

    def test_flat_report_file(self, capsys, tmp_path):
        path = tmp_path / "report.txt"
        code, _, _ = run(capsys, "verify", "--suite", "eigenpairs",
                         "--base", "const:2", "--probs", "pconst:0.5",
                         "--out", str(path))
        assert code == 0
        lines = path.read_text().splitlines()
        assert "eigenpairs.custom.result=pass" in lines
        assert any(l.startswith("eigenpairs.custom.max_resid=") for l in lines)

    def test_check_failure_exit_code(self, capsys, monkeypatch):
        import stochadd.cli as cli_mod
        monkeypatch.setitem(cli_mod._SUITE_FUNCS, "stochasticity",
                            lambda sysm, seed: (False, "forced"))
        code, out, _ = run(capsys, "verify", "--suite", "stochasticity",
                           "--base", "const:2", "--probs", "pconst:0.5")
        assert code == 1
        assert out.startswith("FAIL")


class TestSimulate:
    def test_certain_machine_progression(self, capsys):
        code, out, _ = run(capsys, "simulate", "--base", "const:3", "--probs",
                           "pconst:1", "--steps", "5")
        assert code == 0
        assert out == "step,state\n0,0\n1,1\n2,2\n3,3\n4,4\n5,5\n"

    def test_fixed_seed_byte_identical(self, capsys, tmp_path):
        for name in ("a.csv", "b.csv"):
            run(capsys, "simulate", "--base", "const:2", "--probs",
                "pconst:0.5", "--steps", "200", "--seed", "9",
                "--out", str(tmp_path / name))
        assert ((tmp_path / "a.csv").read_bytes()
                == (tmp_path / "b.csv").read_bytes())

    def test_zero_steps_single_row(self, capsys):
        code, out, _ = run(capsys, "simulate", "--base", "const:2", "--probs",
                           "pconst:0.5", "--start", "7", "--steps", "0")
        assert code == 0
        assert out == "step,state\n0,7\n"
