"""Dataset ingestion, run configuration and report generation.

A run evaluates every requested hypothesis under each domain assumption
(finite grid and/or continuous) for the precise and, when an epsilon is set,
the pragmatic version, then writes ``evalues.csv``, prior and posterior path
draws and a ``manifest.txt`` that echoes every resolved setting.
"""

import csv
import hashlib
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from . import __version__, fbst, gchi2, gp, hypothesis, measure
from .exceptions import ConfigError, EmptyDataset, NegativeRadicand, ParseError

logger = logging.getLogger(__name__)

STOKES_DELTA = 0.14
STOKES_ETA = 0.3555
STOKES_KS = 8.446
PUBLISHED_EPSILON = 0.1606
DROPLET_ENV = "GPFBST_DROPLET_DATA"
DROPLET_FILENAME = "droplet.csv"
RADIUS_BAND = (0.5, 20.0)
RADIUS_TYPICAL = (3.0, 9.0)


# ------------------------------------------------------------------- datasets


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    y: np.ndarray
    v_mean: Optional[np.ndarray]
    path: str
    sha256: str

    def __len__(self):
        return len(self.y)


def load_dataset(path, x_columns=("t",), y_column="radius", velocity_column="v_mean",
                 droplet=False):
    """Read a comma-separated file with a header row.

    Parameters
    ----------
    path : str or Path
    x_columns : sequence of str
        Covariate columns, in order.
    y_column : str
        Response column.
    velocity_column : str
        Optional mean-velocity column; returned as ``None`` when absent.
    droplet : bool
        Apply the droplet plausibility checks (``t >= 0``, radius band).

    Raises
    ------
    ParseError
        Missing columns or non-numeric fields, with the 1-based file line.
    EmptyDataset
        No header or no data rows.
    """
    path = Path(path)
    raw = path.read_bytes()
    text = raw.decode("utf-8-sig")
    rows = list(csv.reader(text.splitlines()))
    lines = [(i + 1, r) for i, r in enumerate(rows) if any(c.strip() for c in r)]
    if not lines:
        raise EmptyDataset(f"{path} is empty")
    header_line, header = lines[0]
    header = [h.strip() for h in header]
    if isinstance(x_columns, str):
        x_columns = (x_columns,)
    missing = [c for c in (*x_columns, y_column) if c not in header]
    if missing:
        raise ParseError(header_line, f"missing column(s) {', '.join(missing)}")
    x_idx = [header.index(c) for c in x_columns]
    y_idx = header.index(y_column)
    v_idx = header.index(velocity_column) if velocity_column in header else None

    xs, ys, vs = [], [], []
    for line_no, row in lines[1:]:
        if len(row) != len(header):
            raise ParseError(line_no, f"expected {len(header)} fields, got {len(row)}")
        try:
            xs.append([float(row[i]) for i in x_idx])
            ys.append(float(row[y_idx]))
            if v_idx is not None:
                vs.append(float(row[v_idx]))
        except ValueError as exc:
            raise ParseError(line_no, str(exc)) from exc
        if not all(map(math.isfinite, xs[-1] + [ys[-1]] + vs[-1:])):
            raise ParseError(line_no, "non-finite value")
        if droplet:
            _check_droplet_row(line_no, xs[-1][0], ys[-1])
    if not ys:
        raise EmptyDataset(f"{path} has a header but no records")
    logger.info("loaded %d records from %s", len(ys), path)
    return Dataset(np.array(xs), np.array(ys), np.array(vs) if v_idx is not None else None,
                   str(path), hashlib.sha256(raw).hexdigest())


def _check_droplet_row(line_no, t, radius):
    if t < 0:
        raise ParseError(line_no, f"negative time {t}")
    if not RADIUS_BAND[0] <= radius <= RADIUS_BAND[1]:
        raise ParseError(line_no, f"radius {radius} outside {RADIUS_BAND}")
    if not RADIUS_TYPICAL[0] <= radius <= RADIUS_TYPICAL[1]:
        logger.warning("line %d: radius %g outside the typical 3-9 micrometer range",
                       line_no, radius)


def droplet_fixture_path():
    """Location of the droplet data: ``$GPFBST_DROPLET_DATA`` or the packaged file."""
    env = os.environ.get(DROPLET_ENV)
    if env:
        return Path(env)
    return Path(__file__).parent / "data" / DROPLET_FILENAME


def droplet_grid():
    return np.arange(15) * 0.5  # 0, 0.5, ..., 7


# --------------------------------------------------------------------- Stokes


def stokes_threshold(v_mean, y, delta=STOKES_DELTA, eta=STOKES_ETA, ks=STOKES_KS, n=None,
                     t=None):
    """Radius margin of error implied by velocity measurement error.

    Returns ``(eps_inf, eps_l2)`` where ``eps_inf`` is the largest deviation of
    ``sqrt(ks * (v_mean -/+ (delta + eta)))`` from the recorded radius and
    ``eps_l2 = eps_inf / sqrt(n)``.
    """
    v = np.asarray(v_mean, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if v.shape != y.shape:
        raise ValueError("v_mean and y must have the same length")
    slack = delta + eta
    low = v - slack
    if np.any(low < 0):
        i = int(np.argmax(low < 0))
        raise NegativeRadicand(t[i] if t is not None else i, float(low[i]))
    dev = np.maximum(np.abs(np.sqrt(ks * low) - y), np.abs(np.sqrt(ks * (v + slack)) - y))
    eps_inf = float(dev.max())
    n = len(y) if n is None else int(n)
    return eps_inf, eps_inf / math.sqrt(n)


# --------------------------------------------------------------------- config


@dataclass
class ExperimentConfig:
    data_path: Optional[str] = None
    x_columns: List[str] = field(default_factory=lambda: ["t"])
    y_column: str = "radius"
    grid: Union[str, List[float]] = "continuous"
    prior_mean: float = 0.0
    kernel: str = "exponential"
    length_scale: float = 1.0
    amplitude: float = 1.0
    noise_var: float = 0.01
    hypotheses: List[str] = field(default_factory=lambda: ["intercept+slope", "intercept-only"])
    epsilon: Union[None, float, str] = None
    measure_finite: str = "uniform"
    measure_infinite: str = "dp:1:0:7"
    alpha: float = fbst.DEFAULT_ALPHA
    seed: int = 0
    output_dir: str = "out"
    draw_count: int = 20
    draw_points: int = 141
    stokes_delta: float = STOKES_DELTA
    stokes_eta: float = STOKES_ETA
    stokes_ks: float = STOKES_KS

    def validate(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if isinstance(self.epsilon, float) and not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if isinstance(self.epsilon, str) and self.epsilon != "stokes":
            raise ConfigError(f"epsilon must be a number or 'stokes', got {self.epsilon!r}")
        if not isinstance(self.grid, str):
            if len(set(self.grid)) != len(self.grid):
                raise ConfigError("grid points must be distinct")
        elif self.grid != "continuous":
            raise ConfigError("grid must be a list of points or 'continuous'")
        if self.kernel not in gp.KERNEL_VARIANTS:
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        for m in (self.measure_finite, self.measure_infinite):
            parse_measure(m)
        if self.draw_count < 1 or self.draw_points < 2:
            raise ConfigError("draws.count must be >= 1 and draws.points >= 2")
        return self

    @classmethod
    def droplet(cls):
        return cls(data_path=str(droplet_fixture_path()), grid=droplet_grid().tolist(),
                   prior_mean=6.0, epsilon=PUBLISHED_EPSILON)


CONFIG_KEYS = {
    "data.path": ("data_path", str),
    "data.x_columns": ("x_columns", "list"),
    "data.y_column": ("y_column", str),
    "grid": ("grid", "grid"),
    "prior.mean": ("prior_mean", float),
    "prior.kernel": ("kernel", str),
    "prior.length_scale": ("length_scale", float),
    "prior.amplitude": ("amplitude", float),
    "prior.noise_var": ("noise_var", float),
    "hypotheses": ("hypotheses", "list"),
    "pragmatic.epsilon": ("epsilon", "epsilon"),
    "pragmatic.measure_finite": ("measure_finite", str),
    "pragmatic.measure_infinite": ("measure_infinite", str),
    "alpha": ("alpha", float),
    "seed": ("seed", int),
    "output_dir": ("output_dir", str),
    "draws.count": ("draw_count", int),
    "draws.points": ("draw_points", int),
    "stokes.delta": ("stokes_delta", float),
    "stokes.eta": ("stokes_eta", float),
    "stokes.ks": ("stokes_ks", float),
}


def parse_grid(text):
    """``continuous``, ``lo:hi:step`` or a comma-separated list of points."""
    text = text.strip()
    if text == "continuous":
        return text
    if text.count(":") == 2:
        lo, hi, step = (float(p) for p in text.split(":"))
        if step <= 0 or hi < lo:
            raise ConfigError(f"bad grid range {text!r}")
        count = int(round((hi - lo) / step)) + 1
        return [round(lo + i * step, 12) for i in range(count)]
    return [float(p) for p in text.split(",") if p.strip()]


def parse_epsilon(text):
    text = str(text).strip()
    if text in ("", "none"):
        return None
    if text == "stokes":
        return text
    return float(text)


def _convert(kind, value, key):
    try:
        if kind == "list":
            return [p.strip() for p in value.split(",") if p.strip()]
        if kind == "grid":
            return parse_grid(value)
        if kind == "epsilon":
            return parse_epsilon(value)
        return kind(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def apply_settings(config: ExperimentConfig, settings: dict):
    """Apply flat dotted-key settings; unknown keys are errors."""
    for key, value in settings.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        attr, kind = CONFIG_KEYS[key]
        setattr(config, attr, _convert(kind, value, key))
    return config


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment, quotes are stripped."""
    settings = {}
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1]
        if key in settings:
            raise ConfigError(f"{path}:{line_no}: duplicate key {key!r}")
        settings[key] = value
    return settings


def parse_measure(text):
    """``uniform`` or ``dp:TAU:LO:HI``; returns ``("uniform",)`` or ``("dp", tau, lo, hi)``."""
    parts = text.strip().split(":")
    if parts == ["uniform"]:
        return ("uniform",)
    if parts[0] == "dp" and len(parts) == 4:
        try:
            tau, lo, hi = (float(p) for p in parts[1:])
        except ValueError as exc:
            raise ConfigError(f"bad measure {text!r}") from exc
        if tau <= 0 or hi <= lo:
            raise ConfigError(f"bad measure {text!r}")
        return ("dp", tau, lo, hi)
    raise ConfigError(f"measure must be 'uniform' or 'dp:TAU:LO:HI', got {text!r}")


def finite_measure(text, domain, x_obs):
    spec = parse_measure(text)
    if spec[0] == "uniform":
        return measure.finite_uniform(domain)
    return measure.dp_predictive(spec[1], x_obs, base_is_continuous=False,
                                 base_label="uniform on domain", base_atoms=domain)


def infinite_measure(text, data: gp.CollapsedData, x_obs):
    spec = parse_measure(text)
    if spec[0] == "uniform":
        return measure.explicit_pmf(data.unique_rows, data.counts / data.n)
    return measure.dp_predictive(spec[1], x_obs, base_label=f"U({spec[2]:g},{spec[3]:g})")


def resolve_basis(name, dim):
    if name.startswith("file:"):
        return load_basis_table(name[5:], dim)
    try:
        return hypothesis.preset(name, dim)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc


def load_basis_table(path, dim=1):
    """Tabulated basis: a CSV whose first ``dim`` columns are covariates."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise EmptyDataset(f"basis table {path} has no rows")
    try:
        values = np.array([[float(c) for c in r] for r in rows[1:]])
    except ValueError as exc:
        raise ParseError(0, f"basis table {path}: {exc}") from exc
    return hypothesis.tabulated(values[:, :dim], values[:, dim:], name=Path(path).stem)


# ---------------------------------------------------------------------- runs


@dataclass(frozen=True)
class ResultRow:
    hypothesis: str
    domain_assumption: str
    pragmatic: bool
    outcome: fbst.FbstOutcome


def resolve_epsilon(config: ExperimentConfig, ds: Dataset):
    if config.epsilon != "stokes":
        return config.epsilon
    if ds.v_mean is None:
        raise ConfigError("epsilon 'stokes' needs a v_mean column in the data")
    _, eps = stokes_threshold(ds.v_mean, ds.y, config.stokes_delta, config.stokes_eta,
                              config.stokes_ks, t=ds.x[:, 0])
    return eps


def build_prior(config: ExperimentConfig):
    return gp.GpPrior(config.prior_mean,
                      gp.Kernel(config.kernel, config.length_scale, config.amplitude),
                      config.noise_var)


def canonical_order(x, y):
    """Sort records by covariates then response so results ignore file order."""
    keys = [y] + [x[:, j] for j in reversed(range(x.shape[1]))]
    order = np.lexsort(keys)
    return x[order], y[order]


def evaluate(x, y, prior, bases, grid=None, epsilon=None, measure_finite="uniform",
             measure_infinite="dp:1:0:7", alpha=fbst.DEFAULT_ALPHA):
    """Run every applicable test; returns a list of :class:`ResultRow`."""
    x, y = canonical_order(gp.as_points(x), np.asarray(y, dtype=float))
    data = gp.collapse(x, y)
    post_star = gp.posterior(prior, x, y, data.unique_rows)
    law = gchi2.quadform_law(post_star, data)
    c_alpha = gchi2.quantile(law, 1.0 - alpha)
    post_grid = gp.posterior(prior, x, y, grid) if grid is not None else None

    rows = []
    for name, b in bases:
        if post_grid is not None:
            rows.append(ResultRow(name, "finite", False,
                                  fbst.test_linear_finite(post_grid, b, alpha)))
        rows.append(ResultRow(name, "infinite", False,
                              fbst.test_linear_infinite(data, b, post_star, alpha, law, c_alpha)))
        if epsilon is None:
            continue
        if post_grid is not None:
            spec = fbst.PragmaticSpec(epsilon, finite_measure(measure_finite, post_grid.grid, x),
                                      b)
            rows.append(ResultRow(name, "finite", True,
                                  fbst.test_pragmatic_finite(post_grid, spec, alpha)))
        spec = fbst.PragmaticSpec(epsilon, infinite_measure(measure_infinite, data, x), b)
        rows.append(ResultRow(name, "infinite", True,
                              fbst.test_pragmatic_infinite(data, post_star, spec, alpha, law,
                                                           c_alpha)))
    return rows


def _fmt(v):
    return f"{v:.10g}"


EVALUE_COLUMNS = ("hypothesis", "domain_assumption", "pragmatic", "statistic", "threshold",
                  "e_value", "reject")


def write_evalues(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVALUE_COLUMNS)
        for r in rows:
            o = r.outcome
            w.writerow([r.hypothesis, r.domain_assumption, str(r.pragmatic).lower(),
                        _fmt(o.statistic), _fmt(o.threshold), _fmt(o.e_value),
                        str(o.reject).lower()])


def write_paths(path, points, paths):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x"] + [f"path_{i + 1}" for i in range(len(paths))])
        for j, pt in enumerate(points[:, 0]):
            w.writerow([_fmt(pt)] + [_fmt(v) for v in paths[:, j]])


def draw_grid(config: ExperimentConfig, x):
    if not isinstance(config.grid, str):
        lo, hi = min(config.grid), max(config.grid)
    else:
        lo, hi = float(x[:, 0].min()), float(x[:, 0].max())
    return np.linspace(lo, hi, config.draw_points)


def emit_draws(config: ExperimentConfig, x, y, out_dir):
    """Write prior and posterior sample paths on the dense draw grid."""
    if x.shape[1] != 1:
        logger.info("path draws are only emitted for a single covariate")
        return []
    prior = build_prior(config)
    pts = gp.as_points(draw_grid(config, x))
    prior_paths = gp.draw_paths(gp.prior_on(prior, pts), config.draw_count, config.seed)
    post_paths = gp.draw_paths(gp.posterior(prior, x, y, pts), config.draw_count,
                               config.seed + 1)
    out_dir = Path(out_dir)
    write_paths(out_dir / "paths_prior.csv", pts, prior_paths)
    write_paths(out_dir / "paths_posterior.csv", pts, post_paths)
    return ["paths_prior.csv", "paths_posterior.csv"]


def write_manifest(path, config: ExperimentConfig, ds: Dataset, extra):
    lines = [f"gpfbst_version = {__version__}", f"data_sha256 = {ds.sha256}",
             f"records = {len(ds)}"]
    for key, (attr, _) in CONFIG_KEYS.items():
        value = getattr(config, attr)
        if isinstance(value, list):
            value = ",".join(_fmt(v) if isinstance(v, float) else str(v) for v in value)
        lines.append(f"{key} = {value}")
    lines += [f"{k} = {v}" for k, v in extra.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def run(config: ExperimentConfig, droplet=False):
    """Execute a configured run and write its report files.

    Returns the list of :class:`ResultRow`.
    """
    config.validate()
    if config.data_path is None:
        raise ConfigError("no data path configured")
    ds = load_dataset(config.data_path, config.x_columns, config.y_column, droplet=droplet)
    eps = resolve_epsilon(config, ds)
    bases = [(name, resolve_basis(name, ds.x.shape[1])) for name in config.hypotheses]
    grid = None if isinstance(config.grid, str) else np.asarray(config.grid, dtype=float)
    rows = evaluate(ds.x, ds.y, build_prior(config), bases, grid, eps, config.measure_finite,
                    config.measure_infinite, config.alpha)

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_evalues(out / "evalues.csv", rows)
    x, y = canonical_order(ds.x, ds.y)
    files = emit_draws(config, x, y, out)
    extra = {"resolved_epsilon": "none" if eps is None else _fmt(eps),
             "outputs": ",".join(["evalues.csv", *files, "manifest.txt"])}
    write_manifest(out / "manifest.txt", config, ds, extra)
    return rows


def run_droplet(config: Optional[ExperimentConfig] = None):
    return run(config or ExperimentConfig.droplet(), droplet=True)


def run_custom(config: ExperimentConfig):
    return run(config, droplet=False)
