"""Run configuration: INI parsing, validation, serialization, initial data.

A configuration file has ``[section]`` headers and ``key = value`` lines::

    [grid]
    dim = 1
    extents = 0 1            ; 2D: 0 1, 0 2
    n_cells = 256            ; 2D: 64 128

    [params]
    chi = 2
    kappa = 1
    mu = 0.5
    eps = 0.1
    t_end = 1

    [initial]
    u = gaussian_bump(0.5, 0.1, 2.0)
    v = cosine(1, 0.3, 1.0)

Sections ``[stepper]``, ``[output]``, ``[weakform]`` and ``[sweep]`` are
optional; see :data:`DEFAULTS`. Unknown sections or keys are rejected.
"""

from __future__ import annotations

import ast
import configparser
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, build_grid
from .model import ModelParams
from .stepper import StepConfig


class ConfigError(ValueError):
    """Invalid configuration text; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


# ---------------------------------------------------------------- profiles


@dataclass(frozen=True)
class ProfileSpec:
    """A named analytic profile with literal arguments, e.g. ``cosine(1, 0.3, 1.0)``."""

    name: str
    args: tuple = ()
    kwargs: tuple[tuple[str, object], ...] = ()

    def __str__(self) -> str:
        parts = [repr(a) for a in self.args] + [f"{k}={v!r}" for k, v in self.kwargs]
        return f"{self.name}({', '.join(parts)})"

    @classmethod
    def parse(cls, text: str) -> "ProfileSpec":
        try:
            node = ast.parse(text.strip(), mode="eval").body
        except SyntaxError as exc:
            raise ValueError(f"cannot parse profile {text!r}: {exc.msg}") from None
        if not (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)):
            raise ValueError(f"profile must look like name(arg, ...), got {text!r}")
        try:
            args = tuple(_as_number(ast.literal_eval(a)) for a in node.args)
            kwargs = tuple((k.arg, _as_number(ast.literal_eval(k.value))) for k in node.keywords)
        except ValueError:
            raise ValueError(f"profile arguments must be numeric literals in {text!r}") from None
        return cls(node.func.id, args, kwargs)


def _as_number(x):
    if isinstance(x, bool):
        raise ValueError
    if isinstance(x, (int, float)):
        return x
    if isinstance(x, (tuple, list)):
        return tuple(_as_number(y) for y in x)
    raise ValueError


def _per_axis(x, dim: int, what: str) -> tuple:
    if isinstance(x, tuple):
        if len(x) != dim:
            raise ValueError(f"{what} needs {dim} entries, got {len(x)}")
        return x
    return (x,) * dim


def _constant(g: Grid, c):
    return g.full(float(c)), float(c)


def _gaussian_bump(g: Grid, center, width, amplitude, floor=0.0):
    if amplitude < 0:
        raise ValueError(f"gaussian_bump amplitude must be >= 0, got {amplitude!r}")
    if not width > 0:
        raise ValueError(f"gaussian_bump width must be > 0, got {width!r}")
    center = _per_axis(center, g.dim, "gaussian_bump center")
    r2 = sum((x - c) ** 2 for x, c in zip(g.mesh, center))
    return floor + amplitude * np.exp(-r2 / (2.0 * width**2)), float(floor)


def _cosine(g: Grid, mode, amplitude, offset):
    modes = _per_axis(mode, g.dim, "cosine mode")
    if any(int(k) != k or k < 0 for k in modes):
        raise ValueError(f"cosine modes must be nonnegative integers, got {mode!r}")
    f = np.ones(g.shape)
    for x, k, (a, _), L in zip(g.mesh, modes, g.extents, g.lengths):
        f = f * np.cos(int(k) * math.pi * (x - a) / L)
    inf = offset + amplitude if all(k == 0 for k in modes) else offset - abs(amplitude)
    return offset + amplitude * f, float(inf)


# name -> sampler(grid, *args) returning (field, analytic lower bound)
PROFILES = {"constant": _constant, "gaussian_bump": _gaussian_bump, "cosine": _cosine}


def sample_profile(spec: ProfileSpec, g: Grid) -> tuple[np.ndarray, float]:
    """Sample a profile at cell centers; also return its analytic infimum."""
    try:
        fn = PROFILES[spec.name]
    except KeyError:
        raise ValueError(f"unknown profile {spec.name!r}; available: {sorted(PROFILES)}") from None
    try:
        return fn(g, *spec.args, **dict(spec.kwargs))
    except TypeError as exc:
        raise ValueError(f"bad arguments for {spec}: {exc}") from None


# ---------------------------------------------------------------- config


@dataclass(frozen=True)
class InitialSpec:
    u: ProfileSpec | None = None
    v: ProfileSpec | None = None
    file: str | None = None


@dataclass(frozen=True)
class WeakformSpec:
    amplitude: float = 1.0
    A: float = 10.0
    modes: tuple[int, ...] = (0, 1)
    # (kind, t1, t2); for "initial" t1 is 0
    windows: tuple[tuple[str, float, float], ...] = (("initial", 0.0, 0.3), ("bump", 0.2, 0.6), ("bump", 0.5, 0.95))


@dataclass(frozen=True)
class SweepSpec:
    eps: tuple[float, ...] = (1.0, 0.5, 0.25, 0.125, 0.0625)
    levels: int = 3
    axis: str = "h"
    dt_power: int = 1


@dataclass(frozen=True)
class RunConfig:
    grid: Grid
    params: ModelParams
    initial: InitialSpec
    stepper: StepConfig = field(default_factory=StepConfig)
    output_dir: str = "chemofv-out"
    weakform: WeakformSpec = field(default_factory=WeakformSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)


SCHEMA = {
    "grid": {"dim", "extents", "n_cells"},
    "params": {"chi", "kappa", "mu", "eps", "t_end"},
    "stepper": {"dt_max", "cfl_safety", "snapshot_every"},
    "initial": {"u", "v", "file"},
    "output": {"dir"},
    "weakform": {"amplitude", "a", "modes", "windows"},
    "sweep": {"eps", "levels", "axis", "dt_power"},
}
REQUIRED = {"grid": {"dim", "extents", "n_cells"}, "params": {"chi", "kappa", "mu", "eps", "t_end"}}

DEFAULTS = {
    "stepper": StepConfig(),
    "output_dir": RunConfig.__dataclass_fields__["output_dir"].default,
    "weakform": WeakformSpec(),
    "sweep": SweepSpec(),
}


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        m = re.match(r"^\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip().lower()
            if key is None and current == section:
                return i
            continue
        if current == section and key is not None:
            m = re.match(r"^([^=:;#\s][^=:]*?)\s*[=:]", s)
            if m and m.group(1).strip().lower() == key:
                return i
    return None


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.replace(",", " ").split()]


def _ints(s: str) -> list[int]:
    out = []
    for x in s.replace(",", " ").split():
        f = float(x)
        if f != int(f):
            raise ValueError(f"expected an integer, got {x!r}")
        out.append(int(f))
    return out


def _windows(s: str) -> tuple[tuple[str, float, float], ...]:
    out = []
    for item in s.split(","):
        parts = [p.strip() for p in item.strip().split(":")]
        if parts[0] == "initial" and len(parts) == 2:
            out.append(("initial", 0.0, float(parts[1])))
        elif parts[0] == "bump" and len(parts) == 3:
            out.append(("bump", float(parts[1]), float(parts[2])))
        else:
            raise ValueError(f"window {item.strip()!r} must be initial:t2 or bump:t1:t2")
    return tuple(out)


def parse_config(text: str) -> RunConfig:
    """Parse and validate configuration text.

    Raises :class:`ConfigError` with the offending line number for syntax
    errors, unknown sections or keys, malformed values and parameter values
    outside the admissible range.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("expected a [section] header before the first key", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line (expected 'key = value')", line) from None

    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", _line_of(text, sec))
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", _line_of(text, sec, key))
    for sec, keys in REQUIRED.items():
        if sec not in cp:
            raise ConfigError(f"missing required section [{sec}]")
        missing = keys - set(cp[sec])
        if missing:
            raise ConfigError(f"[{sec}] is missing {sorted(missing)}", _line_of(text, sec))

    def get(sec, key, conv, default=None):
        if sec not in cp or key not in cp[sec]:
            return default
        try:
            return conv(cp[sec][key])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"[{sec}] {key}: {exc}", _line_of(text, sec, key)) from None

    def build(sec, key, fn):
        try:
            return fn()
        except ValueError as exc:
            raise ConfigError(str(exc), _line_of(text, sec, key)) from None

    dim = get("grid", "dim", int)
    ext = get("grid", "extents", _floats)
    cells = get("grid", "n_cells", _ints)
    grid = build("grid", "extents", lambda: _grid(dim, ext, cells))

    vals = {k: get("params", k, float) for k in ("chi", "kappa", "mu", "eps", "t_end")}
    params = _params(vals, text)

    d = DEFAULTS["stepper"]
    stepper = build("stepper", None, lambda: StepConfig(
        dt_max=get("stepper", "dt_max", float, d.dt_max),
        cfl_safety=get("stepper", "cfl_safety", float, d.cfl_safety),
        snapshot_every=get("stepper", "snapshot_every", float, d.snapshot_every),
    ))

    initial = InitialSpec(
        u=get("initial", "u", ProfileSpec.parse),
        v=get("initial", "v", ProfileSpec.parse),
        file=get("initial", "file", str.strip),
    )
    if initial.file is None and (initial.u is None or initial.v is None):
        raise ConfigError("[initial] needs both 'u' and 'v' profiles or a 'file'", _line_of(text, "initial"))
    if initial.file is None:
        for name, spec in (("u", initial.u), ("v", initial.v)):
            build("initial", name, lambda spec=spec, name=name: _check_profile(name, spec, grid))

    w = DEFAULTS["weakform"]
    weak = WeakformSpec(
        amplitude=get("weakform", "amplitude", float, w.amplitude),
        A=get("weakform", "a", float, w.A),
        modes=get("weakform", "modes", lambda s: tuple(_ints(s)), w.modes),
        windows=get("weakform", "windows", _windows, w.windows),
    )
    if not weak.amplitude > 0 or not weak.A > 0:
        raise ConfigError("[weakform] amplitude and A must be > 0", _line_of(text, "weakform"))

    s = DEFAULTS["sweep"]
    sweep = SweepSpec(
        eps=get("sweep", "eps", lambda x: tuple(_floats(x)), s.eps),
        levels=get("sweep", "levels", int, s.levels),
        axis=get("sweep", "axis", str.strip, s.axis),
        dt_power=get("sweep", "dt_power", int, s.dt_power),
    )
    if sweep.axis not in ("h", "dt"):
        raise ConfigError("[sweep] axis must be 'h' or 'dt'", _line_of(text, "sweep", "axis"))

    out = get("output", "dir", str.strip, DEFAULTS["output_dir"])
    return RunConfig(grid, params, initial, stepper, out, weak, sweep)


def _grid(dim, ext, cells) -> Grid:
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if len(ext) != 2 * dim or len(cells) != dim:
        raise ValueError(f"need {2 * dim} extent values and {dim} cell counts")
    return build_grid(dim, ext, cells)


def _params(vals: dict, text: str) -> ModelParams:
    try:
        return ModelParams(vals["chi"], vals["kappa"], vals["mu"], vals["eps"], vals["t_end"])
    except ValueError as exc:
        key = str(exc).split()[0].lower()
        raise ConfigError(str(exc), _line_of(text, "params", key)) from None


def _check_profile(name: str, spec: ProfileSpec, g: Grid) -> None:
    _, inf = sample_profile(spec, g)
    if name == "u" and inf < 0:
        raise ValueError(f"u profile {spec} can be negative (lower bound {inf!r}); need u0 >= 0")
    if name == "v" and not inf > 0:
        raise ValueError(f"v profile {spec} has lower bound {inf!r}; need v0 > 0 (hypothesis v0 positive)")


def serialize_config(cfg: RunConfig) -> str:
    """Inverse of :func:`parse_config` (floats written with ``repr``)."""
    g, p, st = cfg.grid, cfg.params, cfg.stepper
    lines = [
        "[grid]",
        f"dim = {g.dim}",
        "extents = " + ", ".join(f"{a!r} {b!r}" for a, b in g.extents),
        "n_cells = " + " ".join(str(n) for n in g.n_cells),
        "",
        "[params]",
        f"chi = {p.chi!r}",
        f"kappa = {p.kappa!r}",
        f"mu = {p.mu!r}",
        f"eps = {p.eps!r}",
        f"t_end = {p.T_end!r}",
        "",
        "[stepper]",
        f"dt_max = {st.dt_max!r}",
        f"cfl_safety = {st.cfl_safety!r}",
        f"snapshot_every = {st.snapshot_every!r}",
        "",
        "[initial]",
    ]
    ini = cfg.initial
    if ini.u is not None:
        lines.append(f"u = {ini.u}")
    if ini.v is not None:
        lines.append(f"v = {ini.v}")
    if ini.file is not None:
        lines.append(f"file = {ini.file}")
    w, s = cfg.weakform, cfg.sweep
    win = ", ".join(f"initial:{t2!r}" if k == "initial" else f"bump:{t1!r}:{t2!r}" for k, t1, t2 in w.windows)
    lines += [
        "",
        "[output]",
        f"dir = {cfg.output_dir}",
        "",
        "[weakform]",
        f"amplitude = {w.amplitude!r}",
        f"A = {w.A!r}",
        "modes = " + " ".join(str(m) for m in w.modes),
        f"windows = {win}",
        "",
        "[sweep]",
        "eps = " + " ".join(repr(e) for e in s.eps),
        f"levels = {s.levels}",
        f"axis = {s.axis}",
        f"dt_power = {s.dt_power}",
        "",
    ]
    return "\n".join(lines)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def build_initial_data(spec: InitialSpec, g: Grid, base_dir=None) -> tuple[np.ndarray, np.ndarray]:
    """Sample ``(u0, v0)`` on ``g`` and verify ``u0 >= 0`` and ``v0 > 0``.

    With ``spec.file`` set, the fields are read from a snapshot file (a
    relative path is resolved against ``base_dir``).
    """
    if spec.file is not None:
        from pathlib import Path

        from .snapshots import read_snapshot

        path = Path(spec.file)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        state = read_snapshot(path, g)
        u0, v0 = state.u, state.v
    else:
        if spec.u is None or spec.v is None:
            raise ValueError("initial data needs both u and v profiles")
        _check_profile("u", spec.u, g)
        _check_profile("v", spec.v, g)
        u0, _ = sample_profile(spec.u, g)
        v0, _ = sample_profile(spec.v, g)
    if np.any(u0 < 0):
        raise ValueError("sampled u0 has negative cells")
    if np.any(v0 <= 0):
        raise ValueError("sampled v0 has non-positive cells")
    return u0, v0


def is_uniform(spec: InitialSpec) -> bool:
    """True when both profiles are spatially constant."""
    return spec.file is None and spec.u is not None and spec.v is not None and \
        spec.u.name == "constant" and spec.v.name == "constant"
