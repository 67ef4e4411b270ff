"""Config files, snapshot files, diagnostics CSV and initial-direction presets."""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .constraints import ConstraintSpec
from .errors import ConfigError
from .flow import DIAGNOSTIC_COLUMNS, RunConfig
from .functionals import PotentialParams
from .grid import Grid
from .stepper import StepConfig

OUT_DIR_ENV = "WPF_OUT_DIR"
PHI_PRESETS = ("cos1", "cos2", "tanh-split")


@dataclass(frozen=True)
class Config:
    dim: int = 1
    Lx: float = 1.0
    Ly: float = 1.0
    nx: int = 128
    ny: int = 128
    a: float = 1.0
    alpha: float = 0.0
    beta: float = 0.5
    tau: float = 1e-3
    t_end: float = 0.1
    tol_el: float = 1e-8
    tol_area: float = 1e-10
    tol_mean: float = 1e-12
    margin_floor: float = 1e-8
    phi: str = "cos1"
    snapshot_every: int = 10
    out_dir: str = "wpf_out"
    seed: int = 0
    base_dir: str = "."  # directory of the config file, for relative paths

    @property
    def grid(self) -> Grid:
        if self.dim == 1:
            return Grid.line(self.Lx, self.nx)
        return Grid.box(self.Lx, self.Ly, self.nx, self.ny)

    @property
    def potential(self) -> PotentialParams:
        return PotentialParams(self.a)

    @property
    def spec(self) -> ConstraintSpec:
        return ConstraintSpec(self.alpha, self.beta, tol_mean=self.tol_mean,
                              tol_area=self.tol_area)

    def run_config(self, t_end: float | None = None) -> RunConfig:
        return RunConfig(
            spec=self.spec, potential=self.potential, grid=self.grid, tau=self.tau,
            t_end=self.t_end if t_end is None else t_end,
            step_cfg=StepConfig(tau=self.tau, tol_el=self.tol_el),
            margin_floor=self.margin_floor, snapshot_every=self.snapshot_every,
        )

    def output_dir(self) -> Path:
        """``WPF_OUT_DIR`` if set, otherwise ``out_dir`` relative to the config file."""
        env = os.environ.get(OUT_DIR_ENV)
        if env:
            return Path(env)
        path = Path(self.out_dir)
        return path if path.is_absolute() else Path(self.base_dir) / path


_INT_KEYS = {"dim", "nx", "ny", "snapshot_every", "seed"}
_STR_KEYS = {"phi", "out_dir"}
_KEYS = [f.name for f in fields(Config) if f.name != "base_dir"]


def _check_range(key, value):
    positive = {"Lx", "Ly", "a", "beta", "tol_el", "tol_area", "tol_mean"}
    if key in positive and not value > 0:
        return "must be positive"
    if key == "dim" and value not in (1, 2):
        return "must be 1 or 2"
    if key in ("nx", "ny") and value < 4:
        return "must be at least 4"
    if key == "tau" and not 0 < value < 1:
        return "must lie in (0, 1)"
    if key in ("t_end", "margin_floor", "seed") and value < 0:
        return "must be non-negative"
    if key == "snapshot_every" and value < 1:
        return "must be at least 1"
    return None


def parse_config(text: str, base_dir: str = ".") -> Config:
    """Parse ``key=value`` lines; ``#`` starts a comment.

    Raises
    ------
    ConfigError
        On unknown or repeated keys, unparsable or out-of-range values; the
        message cites the line number.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key in _STR_KEYS:
            if not val:
                raise ConfigError(f"line {lineno}: {key} is empty")
            if key == "phi" and val not in PHI_PRESETS and not val.startswith("file:"):
                raise ConfigError(
                    f"line {lineno}: phi must be one of {', '.join(PHI_PRESETS)} or file:<path>")
            values[key] = val
            continue
        try:
            parsed = int(val) if key in _INT_KEYS else float(val)
        except ValueError:
            kind = "an integer" if key in _INT_KEYS else "a real number"
            raise ConfigError(f"line {lineno}: {key}={val!r} is not {kind}") from None
        if not math.isfinite(parsed):
            raise ConfigError(f"line {lineno}: {key} must be finite")
        problem = _check_range(key, parsed)
        if problem:
            raise ConfigError(f"line {lineno}: {key} {problem}")
        values[key] = parsed
    if values.get("dim", 1) == 2:
        values.setdefault("Ly", values.get("Lx", Config.Lx))
        values.setdefault("ny", values.get("nx", Config.nx))
    cfg = Config(base_dir=base_dir, **values)
    if cfg.t_end > 0 and cfg.t_end / cfg.tau > 1e7:
        raise ConfigError("t_end / tau exceeds 1e7 steps")
    return cfg


def load_config(path) -> Config:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=str(path.parent))


# -- snapshots ------------------------------------------------------------------

@dataclass
class Snapshot:
    grid: Grid
    a: float
    alpha: float
    beta: float
    t: float
    values: np.ndarray


def _fmt(x) -> str:
    return "%.17g" % x


def format_snapshot(snap: Snapshot) -> str:
    g = snap.grid
    lines = [
        f"dim {g.dim}",
        "extents " + " ".join(_fmt(L) for L in g.extents),
        "counts " + " ".join(str(n) for n in g.counts),
        f"a {_fmt(snap.a)}",
        f"alpha {_fmt(snap.alpha)}",
        f"beta {_fmt(snap.beta)}",
        f"t {_fmt(snap.t)}",
        "values",
    ]
    lines.extend(_fmt(x) for x in np.asarray(snap.values, dtype=np.float64).ravel())
    return "\n".join(lines) + "\n"


def write_snapshot(path, snap: Snapshot) -> None:
    Path(path).write_text(format_snapshot(snap))


def parse_snapshot(text: str) -> Snapshot:
    lines = text.splitlines()
    header = {}
    i = 0
    while i < len(lines) and lines[i].strip() != "values":
        key, _, rest = lines[i].partition(" ")
        header[key] = rest.split()
        i += 1
    try:
        dim = int(header["dim"][0])
        extents = tuple(float(x) for x in header["extents"])
        counts = tuple(int(x) for x in header["counts"])
        a, alpha, beta, t = (float(header[k][0]) for k in ("a", "alpha", "beta", "t"))
    except (KeyError, IndexError, ValueError) as exc:
        raise ConfigError(f"malformed snapshot header: {exc}") from exc
    if i == len(lines) or len(extents) != dim or len(counts) != dim:
        raise ConfigError("malformed snapshot header")
    grid = Grid(extents, counts)
    data = np.array([float(x) for x in lines[i + 1:] if x.strip()], dtype=np.float64)
    if data.size != grid.size:
        raise ConfigError(f"snapshot holds {data.size} values, grid needs {grid.size}")
    return Snapshot(grid, a, alpha, beta, t, data.reshape(grid.shape))


def read_snapshot(path) -> Snapshot:
    return parse_snapshot(Path(path).read_text())


# -- diagnostics CSV -------------------------------------------------------------

def write_diagnostics(path, rows) -> None:
    """CSV with the fixed column order of ``DIAGNOSTIC_COLUMNS``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DIAGNOSTIC_COLUMNS)
        for row in rows:
            writer.writerow([row[c] if c in ("step", "inner_iters") else _fmt(row[c])
                             for c in DIAGNOSTIC_COLUMNS])


def read_diagnostics(path) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [{k: (int(v) if k in ("step", "inner_iters") else float(v))
                 for k, v in row.items()} for row in reader]


# -- initial directions ------------------------------------------------------------

def initial_direction(cfg: Config, grid: Grid | None = None) -> np.ndarray:
    """Mean-zero direction along which the initial field is built."""
    grid = grid or cfg.grid
    x = grid.coords()[0]
    if cfg.phi == "cos1":
        phi = grid.cosine_mode((1,) * grid.dim)
    elif cfg.phi == "cos2":
        phi = grid.cosine_mode((2,) + (1,) * (grid.dim - 1))
    elif cfg.phi == "tanh-split":
        L = grid.extents[0]
        phi = np.tanh((x - 0.3 * L) / (0.1 * L))
    else:
        path = Path(cfg.phi[len("file:"):])
        if not path.is_absolute():
            path = Path(cfg.base_dir) / path
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read phi file {path}: {exc}") from exc
        if text.startswith("dim "):
            phi = parse_snapshot(text).values
        else:
            try:
                phi = np.array([float(s) for s in text.split()], dtype=np.float64)
            except ValueError as exc:
                raise ConfigError(f"phi file {path}: {exc}") from exc
        if phi.size != grid.size:
            raise ConfigError(f"phi file has {phi.size} values, grid needs {grid.size}")
        phi = phi.reshape(grid.shape)
    return phi - grid.mean(phi)
