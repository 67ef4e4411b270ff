import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wpflow.errors import ConfigError
from wpflow.flow import DIAGNOSTIC_COLUMNS
from wpflow.grid import Grid
from wpflow.io import (
    Config,
    Snapshot,
    format_snapshot,
    initial_direction,
    parse_config,
    parse_snapshot,
    read_diagnostics,
    write_diagnostics,
)


class TestConfig:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg == Config()
        assert cfg.grid == Grid.line(1.0, 128)

    def test_full(self):
        text = "\n".join([
            "# a comment", "dim = 2", "Lx=2", "Ly=1", "nx=16", "ny=8", "a=2", "alpha=0.1",
            "beta=0.9", "tau=0.002", "t_end=0.5", "tol_el=1e-7", "tol_area=1e-9",
            "tol_mean=1e-11", "margin_floor=1e-6", "phi=tanh-split   # trailing",
            "snapshot_every=5", "out_dir=res", "seed=7", "",
        ])
        cfg = parse_config(text)
        assert cfg.grid == Grid.box(2.0, 1.0, 16, 8)
        assert cfg.spec.tol_area == 1e-9 and cfg.potential.a == 2.0
        rc = cfg.run_config()
        assert rc.step_cfg.tol_el == 1e-7 and rc.snapshot_every == 5 and rc.n_steps == 250

    def test_2d_defaults_copy_x_axis(self):
        cfg = parse_config("dim=2\nLx=3\nnx=12")
        assert cfg.grid == Grid.box(3.0, 3.0, 12, 12)

    @pytest.mark.parametrize("text,line", [
        ("nx=64\ntaau=0.1", 2), ("tau=0.1\n\n# c\nbogus=1", 4), ("nx=64\nnx=32", 2),
        ("nx=6.5", 1), ("tau=1.5", 1), ("beta=-1", 1), ("dim=3", 1), ("nx=2", 1),
        ("tau=nan", 1), ("phi=sine", 1), ("no equals sign", 1), ("seed=-1", 1),
        ("snapshot_every=0", 1), ("out_dir=", 1),
    ])
    def test_rejections_cite_line(self, text, line):
        with pytest.raises(ConfigError, match=f"line {line}:"):
            parse_config(text)

    def test_step_cap(self):
        with pytest.raises(ConfigError):
            parse_config("tau=1e-9\nt_end=1")

    def test_out_dir_env(self, monkeypatch, tmp_path):
        cfg = parse_config("out_dir=here", base_dir=str(tmp_path))
        monkeypatch.delenv("WPF_OUT_DIR", raising=False)
        assert cfg.output_dir() == tmp_path / "here"
        monkeypatch.setenv("WPF_OUT_DIR", "/elsewhere")
        assert str(cfg.output_dir()) == "/elsewhere"


class TestSnapshot:
    def test_layout(self):
        g = Grid.box(1.0, 2.0, 4, 4)
        text = format_snapshot(Snapshot(g, 1.0, 0.0, 0.5, 0.25, np.arange(16.0).reshape(4, 4)))
        lines = text.splitlines()
        assert lines[:8] == ["dim 2", "extents 1 2", "counts 4 4", "a 1", "alpha 0",
                             "beta 0.5", "t 0.25", "values"]
        assert lines[8:11] == ["0", "1", "2"] and len(lines) == 24

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, 8, elements=st.floats(allow_nan=False, allow_infinity=False,
                                                     width=64)),
           st.floats(0.1, 10), st.floats(-1, 1), st.floats(1e-3, 5), st.floats(0, 100))
    def test_round_trip_is_byte_identical(self, values, a, alpha, beta, t):
        g = Grid.line(0.3, 8)
        first = format_snapshot(Snapshot(g, a, alpha, beta, t, values))
        snap = parse_snapshot(first)
        assert np.array_equal(snap.values, values)
        assert format_snapshot(snap) == first

    def test_wrong_count(self):
        text = format_snapshot(Snapshot(Grid.line(1.0, 4), 1, 0, 1, 0, np.zeros(4)))
        with pytest.raises(ConfigError):
            parse_snapshot(text + "1.0\n")
        with pytest.raises(ConfigError):
            parse_snapshot(text.replace("counts 4", "counts"))


class TestDiagnostics:
    def test_header_and_round_trip(self, tmp_path, reference_run):
        path = tmp_path / "d.csv"
        write_diagnostics(path, reference_run.rows[:3])
        header = path.read_text().splitlines()[0]
        assert header == ",".join(DIAGNOSTIC_COLUMNS)
        back = read_diagnostics(path)
        for row, orig in zip(back, reference_run.rows):
            assert row == {k: orig[k] for k in DIAGNOSTIC_COLUMNS}

    def test_header_only(self, tmp_path):
        path = tmp_path / "d.csv"
        write_diagnostics(path, [])
        assert path.read_text().strip() == ",".join(DIAGNOSTIC_COLUMNS)


class TestInitialDirection:
    @pytest.mark.parametrize("phi", ["cos1", "cos2", "tanh-split"])
    @pytest.mark.parametrize("dim", [1, 2])
    def test_presets_mean_zero(self, phi, dim):
        cfg = parse_config(f"dim={dim}\nnx=16\nphi={phi}")
        d = initial_direction(cfg)
        assert d.shape == cfg.grid.shape
        assert abs(cfg.grid.mean(d)) <= 1e-15 and cfg.grid.norm(d) > 0.1

    def test_cos_presets(self):
        g = Grid.box(2.0, 1.0, 8, 8)
        cfg = parse_config("dim=2\nLx=2\nLy=1\nnx=8\nphi=cos2")
        assert np.allclose(initial_direction(cfg), g.cosine_mode((2, 1)), atol=1e-15)

    def test_file(self, tmp_path):
        g = Grid.line(1.0, 8)
        values = np.linspace(-1, 1, 8) + 3.0
        (tmp_path / "plain.txt").write_text("\n".join("%.17g" % x for x in values))
        (tmp_path / "snap.txt").write_text(
            format_snapshot(Snapshot(g, 1, 0, 1, 0, values)))
        for name in ("plain.txt", "snap.txt"):
            cfg = parse_config(f"nx=8\nphi=file:{name}", base_dir=str(tmp_path))
            assert np.allclose(initial_direction(cfg), values - 3.0, atol=1e-15)

    def test_file_errors(self, tmp_path):
        (tmp_path / "short.txt").write_text("1\n2\n")
        (tmp_path / "junk.txt").write_text("1\nabc\n")
        with pytest.raises(ConfigError):
            initial_direction(parse_config("nx=8\nphi=file:junk.txt", base_dir=str(tmp_path)))
        with pytest.raises(ConfigError):
            initial_direction(parse_config("nx=8\nphi=file:short.txt", base_dir=str(tmp_path)))
        with pytest.raises(ConfigError):
            initial_direction(parse_config("nx=8\nphi=file:missing", base_dir=str(tmp_path)))
