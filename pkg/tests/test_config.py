import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chemofv.config import (
    ConfigError,
    InitialSpec,
    ProfileSpec,
    RunConfig,
    SweepSpec,
    WeakformSpec,
    build_initial_data,
    parse_config,
    serialize_config,
)
from chemofv.grid import build_grid
from chemofv.model import ModelParams, State
from chemofv.snapshots import SnapshotError, decode_snapshot, encode_snapshot, read_snapshot, write_snapshot
from chemofv.stepper import StepConfig

MINIMAL = """\
[grid]
dim = 1
extents = 0 1
n_cells = 16

[params]
chi = 2
kappa = 1
mu = 0.5
eps = 0.1
t_end = 1

[initial]
u = gaussian_bump(0.5, 0.1, 2.0)
v = cosine(1, 0.3, 1.0)
"""


def test_minimal_config_uses_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.grid == build_grid(1, (0, 1), 16)
    assert cfg.params == ModelParams(2.0, 1.0, 0.5, 0.1, 1.0)
    assert cfg.stepper == StepConfig()
    assert cfg.weakform == WeakformSpec()
    assert cfg.sweep == SweepSpec()
    assert cfg.initial.u == ProfileSpec("gaussian_bump", (0.5, 0.1, 2.0))


def test_mu_zero_names_the_condition_and_line():
    with pytest.raises(ConfigError, match="mu > 0") as info:
        parse_config(MINIMAL.replace("mu = 0.5", "mu = 0"))
    assert info.value.line == 9


@pytest.mark.parametrize("old, new, needle", [
    ("chi = 2", "chi = -1", "chi >= 0"),
    ("kappa = 1", "kappa = -1", "kappa >= 0"),
    ("v = cosine(1, 0.3, 1.0)", "v = cosine(1, 1.0, 1.0)", "v0 > 0"),
    ("v = cosine(1, 0.3, 1.0)", "v = constant(0)", "v0 > 0"),
])
def test_hypothesis_violations_rejected(old, new, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_config(MINIMAL.replace(old, new))


def test_unknown_key_reported_with_name_and_line():
    text = MINIMAL.replace("n_cells = 16", "n_cells = 16\nspacing = 3")
    with pytest.raises(ConfigError, match="spacing") as info:
        parse_config(text)
    assert info.value.line == 5


def test_unknown_section_and_syntax_errors():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config(MINIMAL + "\n[plot]\nx = 1\n")
    with pytest.raises(ConfigError) as info:
        parse_config("dim = 1\n")
    assert info.value.line == 1
    with pytest.raises(ConfigError) as info:
        parse_config(MINIMAL.replace("dim = 1", "dim = 1\nthis line is junk"))
    assert info.value.line == 3
    with pytest.raises(ConfigError, match="missing"):
        parse_config(MINIMAL.replace("eps = 0.1\n", ""))
    with pytest.raises(ConfigError, match="n_cells") as info:
        parse_config(MINIMAL.replace("n_cells = 16", "n_cells = many"))
    assert info.value.line == 4


def test_round_trip_standard_and_2d(tmp_path):
    cfg = parse_config(MINIMAL)
    assert parse_config(serialize_config(cfg)) == cfg
    text2 = """\
[grid]
dim = 2
extents = 0 1, 0 2
n_cells = 8 16
[params]
chi = 0.3
kappa = 0
mu = 2
eps = 0.01
t_end = 0.5
[initial]
u = gaussian_bump((0.5, 1.0), 0.2, 1.0, floor=0.1)
v = cosine((1, 2), 0.2, 1.5)
[weakform]
windows = initial:0.1, bump:0.1:0.4
modes = 0 2
"""
    cfg2 = parse_config(text2)
    assert parse_config(serialize_config(cfg2)) == cfg2


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0, 50), st.floats(0, 50), st.floats(1e-6, 50), st.floats(1e-6, 10), st.floats(1e-3, 100),
    st.floats(1e-6, 1), st.floats(0.01, 1), st.integers(4, 4096),
    st.floats(0.01, 5), st.floats(0.5, 5),
)
def test_round_trip_property(chi, kappa, mu, eps, T, dt, safety, n, amp, offset):
    cfg = RunConfig(
        grid=build_grid(1, (-0.5, 2.25), n),
        params=ModelParams(chi, kappa, mu, eps, T),
        initial=InitialSpec(ProfileSpec("constant", (amp,)), ProfileSpec("cosine", (1, 0.1 * offset, offset))),
        stepper=StepConfig(dt, safety, dt * 3),
        sweep=SweepSpec(eps=(eps * 4, eps * 2, eps), levels=4, axis="dt", dt_power=2),
    )
    assert parse_config(serialize_config(cfg)) == cfg


def test_build_initial_data_profiles():
    g = build_grid(1, (0, 1), 8)
    u, v = build_initial_data(InitialSpec(ProfileSpec("constant", (1,)), ProfileSpec("cosine", (1, 0.3, 1.0))), g)
    assert np.all(u == 1.0)
    assert v.min() > 0.7
    x = g.mesh[0]
    u, _ = build_initial_data(
        InitialSpec(ProfileSpec("gaussian_bump", (0.5, 0.1, 2.0), (("floor", 0.05),)), ProfileSpec("constant", (1,))), g
    )
    np.testing.assert_allclose(u, 0.05 + 2 * np.exp(-((x - 0.5) ** 2) / (2 * 0.01)))


def test_build_initial_data_rejections():
    g = build_grid(1, (0, 1), 8)
    with pytest.raises(ValueError, match="amplitude"):
        build_initial_data(InitialSpec(ProfileSpec("gaussian_bump", (0.5, 0.1, -1.0)), ProfileSpec("constant", (1,))), g)
    with pytest.raises(ValueError, match="unknown profile"):
        build_initial_data(InitialSpec(ProfileSpec("triangle", (1,)), ProfileSpec("constant", (1,))), g)
    with pytest.raises(ValueError):
        build_initial_data(InitialSpec(ProfileSpec("constant", (-1,)), ProfileSpec("constant", (1,))), g)
    with pytest.raises(ValueError):
        ProfileSpec.parse("cosine(1, 'a', 2)")
    with pytest.raises(ValueError):
        ProfileSpec.parse("not a call")


def test_initial_data_from_snapshot_file(tmp_path):
    g = build_grid(1, (0, 1), 8)
    s = State(np.linspace(0, 1, 8), np.linspace(1, 2, 8), 0.0)
    write_snapshot(s, tmp_path / "init.chsn")
    u, v = build_initial_data(InitialSpec(file="init.chsn"), g, base_dir=tmp_path)
    np.testing.assert_array_equal(u, s.u)
    np.testing.assert_array_equal(v, s.v)
    text = MINIMAL.replace("u = gaussian_bump(0.5, 0.1, 2.0)\nv = cosine(1, 0.3, 1.0)", "file = init.chsn")
    assert parse_config(text).initial == InitialSpec(file="init.chsn")


def test_snapshot_round_trip_bitwise(tmp_path):
    rng = np.random.default_rng(0)
    s = State(rng.uniform(0, 3, (5, 7)), rng.uniform(0.1, 2, (5, 7)), 0.123456789)
    write_snapshot(s, tmp_path / "s.chsn")
    r = read_snapshot(tmp_path / "s.chsn", build_grid(2, [(0, 1), (0, 1)], (5, 7)))
    assert r.t == s.t
    assert r.u.tobytes() == s.u.tobytes() and r.v.tobytes() == s.v.tobytes()


def test_snapshot_header_layout():
    buf = encode_snapshot(State(np.zeros(4), np.ones(4), 2.5))
    assert buf[:4] == b"CHSN"
    assert struct.unpack_from("<III", buf, 4) == (1, 1, 4)
    assert struct.unpack_from("<d", buf, 16) == (2.5,)
    assert len(buf) == 24 + 64


def test_snapshot_corruptions():
    buf = encode_snapshot(State(np.zeros(4), np.ones(4), 0.0))
    with pytest.raises(SnapshotError, match="truncated") as info:
        decode_snapshot(buf[:-3])
    assert info.value.offset == 56
    with pytest.raises(SnapshotError, match="CHSN") as info:
        decode_snapshot(b"XXXX" + buf[4:])
    assert info.value.offset == 0
    with pytest.raises(SnapshotError, match="version"):
        decode_snapshot(buf[:4] + struct.pack("<I", 9) + buf[8:])
    with pytest.raises(SnapshotError, match="trailing"):
        decode_snapshot(buf + b"\0")
    with pytest.raises(SnapshotError, match="does not match") as info:
        decode_snapshot(buf, build_grid(1, (0, 1), 8))
    assert info.value.offset == 12
