"""
Test config
===========
Parsing INI-like and JSON experiment configs, defaults, validation messages
and the shipped experiment configs.
"""

import json
import sys
from pathlib import Path

import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

try:
    from space_split.src.config import ExperimentConfig, parse_config
    from space_split.src.errors import ConfigError
except ImportError as e:
    print(f"Import Error: {e}")
    print("Ensure you are running this from the project root or have installed the package.")
    sys.exit(1)

CONFIGS = Path(__file__).parent.parent / "configs"


def test_minimal_config_gets_defaults():
    cfg = parse_config(text="map = baker\nmode = run\n")
    assert cfg.mode == "run"
    assert cfg.map_name == "baker"
    assert cfg.warmup == 100
    assert cfg.k_grid == (1, 2, 3, 5, 8, 11, 16, 20)
    assert cfg.delta_s == 0.01
    assert cfg.seeds == (0,)
    assert cfg.params == (0.0, 0.0, 0.0, 0.0)
    assert cfg.perturb_dir == (1.0, 1.0, 0.0, 0.0)
    assert cfg.observable == "cos4x2"
    assert cfg.format == "csv"
    assert cfg.timestamp is True


def test_solenoid_defaults():
    cfg = parse_config(text="[experiment]\nmap = solenoid\n")
    assert cfg.params == (0.0,)
    assert cfg.observable == "sin_cos_x3"


def test_short_run_names_every_field():
    with pytest.raises(ConfigError) as info:
        parse_config(text="map = baker\nn_steps = 100\nwarmup = 100\n")
    assert "n_steps" in info.value.fields
    assert "warmup" in info.value.fields
    assert "n_steps" in str(info.value) and "warmup" in str(info.value)


def test_sweep_baker_config_settings():
    cfg = parse_config(path=CONFIGS / "sweep_baker.ini")
    assert cfg.mode == "sweep"
    assert cfg.map_name == "baker"
    assert cfg.select_k == 11
    assert cfg.warmup == 100
    # 1e6 S3 samples and 1e7 finite-difference samples, spread over chains
    assert cfg.n_chains * (cfg.n_steps - max(cfg.warmup, max(cfg.k_grid))) == 1_000_000
    assert cfg.fd_chains * cfg.fd_samples == 10_000_000
    assert cfg.perturb_dir == (1.0, 1.0, 0.0, 0.0)
    assert cfg.observable == "cos4x2"
    assert cfg.delta_s == 0.01


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.ini")), ids=lambda p: p.name)
def test_shipped_configs_parse(path):
    cfg = parse_config(path=path)
    assert cfg.mode in ("run", "sweep", "converge", "scaling", "lyapunov", "fd")


def test_json_config():
    text = json.dumps({"mode": "fd", "map": "solenoid", "params": [0.05], "seeds": [1, 2], "fd_samples": 5000})
    cfg = parse_config(text=text)
    assert cfg.mode == "fd"
    assert cfg.params == (0.05,)
    assert cfg.seeds == (1, 2)
    assert cfg.fd_samples == 5000


def test_json_file_suffix(tmp_path):
    path = tmp_path / "exp.json"
    path.write_text(json.dumps({"map_name": "baker", "n_steps": "2e4"}))
    assert parse_config(path=path).n_steps == 20_000


def test_overrides_win():
    cfg = parse_config(text="map = baker\nseeds = 0, 1\n", overrides={"seeds": [7], "format": "json", "timestamp": False})
    assert cfg.seeds == (7,)
    assert cfg.format == "json"
    assert cfg.timestamp is False


def test_unknown_key():
    with pytest.raises(ConfigError, match="bogus"):
        parse_config(text="map = baker\nbogus = 1\n")


def test_semicolon_starts_a_comment_not_a_list_item():
    cfg = parse_config(text="map = baker\nseeds = 0, 1 ; two seeds\nk_grid = 1, 5 # short grid\n")
    assert cfg.seeds == (0, 1)
    assert cfg.k_grid == (1, 5)
    with pytest.raises(ConfigError) as info:
        parse_config(text="map = baker\nk_grid = 1;5\n")
    assert "k_grid" in info.value.fields


@pytest.mark.parametrize(
    "text,field",
    [
        ("map = lorenz", "map_name"),
        ("mode = plot", "mode"),
        ("format = xml", "format"),
        ("map = baker\nparams = 0.1, 0.2", "params"),
        ("map = baker\nobservable = sin_cos_x3", "observable"),
        ("map = baker\nseeds = ", "seeds"),
        ("mode = sweep\nsweep = 0.1, 0.05", "sweep"),
        ("mode = sweep", "sweep"),
        ("delta_s = 0", "delta_s"),
        ("fd_samples = 10\nfd_warmup = 100", "fd_samples"),
        ("mode = converge\nseeds = 3", "seeds"),
        ("select_k = 7", "select_k"),
        ("n_steps = 1.5e3x", "n_steps"),
        ("deterministic_init = maybe", "deterministic_init"),
        ("mode = scaling\nscaling_axis = t", "scaling_axis"),
        ("mode = scaling\nscaling_n = 100, 1000", "scaling_n"),
    ],
)
def test_validation_errors_name_fields(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text=text)
    assert field in info.value.fields


def test_malformed_ini():
    with pytest.raises(ConfigError):
        parse_config(text="map baker\n")


def test_dict_round_trip():
    cfg = parse_config(path=CONFIGS / "sweep_solenoid.ini")
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))).validate()
    assert again == cfg
