"""Flat key = value run configuration.

Lines are `key = value`; `#` starts a comment. Unknown keys, type errors,
missing files and bad expressions are all collected and reported together.
"""
import difflib
import os
from dataclasses import dataclass, fields

from .errors import ConfigError
from .expr import Expression, ExpressionError

COMMANDS = ("evolve", "constraints", "kirchhoff", "norms", "convergence", "checks")
SYSTEMS = ("linear_wave", "semilinear_cubic", "quasilinear_demo", "einstein_reduced_plane")
METRICS = ("minkowski", "conformal_flat", "harmonic_gauge_wave", "linearized_tt_wave", "flrw_flat")
BOUNDARIES = ("periodic", "one-sided")


@dataclass
class RunConfig:
    command: str = "evolve"
    system: str = "linear_wave"
    T: float = 1.0
    sigma: float = 1.0
    h: float = 0.0625
    h_trans: float = 1.0
    B: tuple = (0.0, 1.0, 0.0, 1.0)
    boundary: str = "periodic"
    data1: str = "0"
    data2: str = "0"
    data1_file: str = ""
    data2_file: str = ""
    source: str = "0"
    exact: str = ""
    metric: str = "minkowski"
    eps: float = 0.001
    coupling: float = 1.0
    tol: float = 1e-10
    max_sweeps: int = 50
    quad_mu: int = 12
    quad_phi: int = 16
    quad_lam: int = 12
    quad_theta: int = 32
    picard_tol: float = 1e-12
    picard_max_iter: int = 30
    ball_radius: float = 0.0
    norm_field: str = "1"
    norm_p: int = 0
    norm_t: float = 0.0
    start_k: int = 0
    levels: int = 3
    seed: int = 0
    checkpoint_every: int = 0
    plots: bool = True

    @property
    def B_bounds(self):
        return ((self.B[0], self.B[1]), (self.B[2], self.B[3]))

    @property
    def periodic(self):
        return self.boundary == "periodic"


_FIELDS = {f.name: f for f in fields(RunConfig)}
_POSITIVE = ("T", "sigma", "h", "h_trans", "tol", "picard_tol")
_EXPRESSIONS = ("data1", "data2", "source", "exact", "norm_field")
_CHOICES = {"command": COMMANDS, "system": SYSTEMS, "metric": METRICS, "boundary": BOUNDARIES}


def _convert(name, raw):
    kind = _FIELDS[name].type
    if kind in ("float", float):
        return float(raw)
    if kind in ("int", int):
        if not raw.lstrip("+-").isdigit():
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(raw)
    if kind in ("bool", bool):
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected true/false, got {raw!r}")
    if kind in ("tuple", tuple):
        parts = [float(p) for p in raw.replace(" ", "").split(",")]
        if len(parts) != 4:
            raise ValueError("B needs four numbers: x2_lo, x2_hi, x3_lo, x3_hi")
        return tuple(parts)
    return raw


def parse_config(text, base_dir="."):
    values = {}
    problems = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            hint = difflib.get_close_matches(key.replace(" ", ""), list(_FIELDS), n=1, cutoff=0.5)
            msg = f"line {lineno}: unknown key {key!r}"
            if hint:
                msg += f" (did you mean {hint[0]!r}?)"
            problems.append(msg)
            continue
        if key in values:
            problems.append(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            problems.append(f"line {lineno}: {key}: {exc}")
    cfg = RunConfig(**values)
    problems.extend(validate(cfg, base_dir))
    if problems:
        raise ConfigError(problems)
    return cfg


def validate(cfg, base_dir="."):
    problems = []
    for name in _POSITIVE:
        if not getattr(cfg, name) > 0:
            problems.append(f"{name} must be positive (got {getattr(cfg, name)})")
    for name, allowed in _CHOICES.items():
        if getattr(cfg, name) not in allowed:
            problems.append(f"{name} must be one of {', '.join(allowed)} (got {getattr(cfg, name)!r})")
    for name in _EXPRESSIONS:
        text = getattr(cfg, name)
        if text:
            try:
                Expression(text)
            except ExpressionError as exc:
                problems.append(f"{name}: {exc}")
    for name in ("data1_file", "data2_file"):
        path = getattr(cfg, name)
        if path and not os.path.exists(os.path.join(base_dir, path)):
            problems.append(f"{name}: file {path!r} does not exist")
    if cfg.B[1] <= cfg.B[0] or cfg.B[3] <= cfg.B[2]:
        problems.append("B must satisfy lo < hi on both axes")
    for name in ("levels", "max_sweeps", "picard_max_iter", "quad_mu", "quad_phi", "quad_lam", "quad_theta"):
        if getattr(cfg, name) < 1:
            problems.append(f"{name} must be at least 1")
    if cfg.norm_p < 0 or cfg.start_k < 0 or cfg.checkpoint_every < 0:
        problems.append("norm_p, start_k and checkpoint_every must be nonnegative")
    return problems


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize(cfg):
    return "".join(f"{f.name} = {_format(getattr(cfg, f.name))}\n" for f in fields(RunConfig))


def as_dict(cfg):
    return {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}
