"""Configuration loading from pyproject.toml and YAML files."""

import logging
import sys
from pathlib import Path
from typing import Any

import yaml

from .models import SimConfig

# Use tomllib for Python 3.11+, tomli for older versions
if sys.version_info >= (3, 11):
    import tomllib
else:
    try:
        import tomli as tomllib
    except ImportError:
        tomllib = None  # type: ignore

LOG = logging.getLogger(__name__)

TOOL_NAME = "ffts-eso"
COMMAND_TABLES = ("run", "suite", "gains")


class Config:
    """Configuration container for ffts-eso settings.

    Top-level keys of ``[tool.ffts-eso]`` mirror :class:`SimConfig` fields;
    the ``run``, ``suite`` and ``gains`` sub-tables hold per-command options.
    """

    def __init__(self, config_dict: dict[str, Any] | None = None):
        """Initialize configuration.

        Args:
            config_dict: Dictionary containing configuration values.
        """
        self._config = config_dict or {}

    def get(self, key: str, default: Any = None) -> Any:
        """Get a configuration value.

        Args:
            key: Configuration key (can use dot notation for nested keys).
            default: Default value if key not found.

        Returns:
            Configuration value or default.
        """
        keys = key.split(".")
        value = self._config
        for k in keys:
            if isinstance(value, dict):
                value = value.get(k)
                if value is None:
                    return default
            else:
                return default
        return value

    def get_sim_config(self) -> dict[str, Any]:
        """Simulation settings: everything outside the command sub-tables."""
        return {k: v for k, v in self._config.items() if k not in COMMAND_TABLES}

    def get_run_config(self) -> dict[str, Any]:
        return self.get("run", {})

    def get_suite_config(self) -> dict[str, Any]:
        return self.get("suite", {})

    def get_gains_config(self) -> dict[str, Any]:
        return self.get("gains", {})


def find_pyproject_toml(start_path: Path | None = None) -> Path | None:
    """Find pyproject.toml by walking up the directory tree.

    Args:
        start_path: Starting directory. Defaults to current directory.

    Returns:
        Path to pyproject.toml if found, None otherwise.
    """
    if start_path is None:
        start_path = Path.cwd()
    else:
        start_path = Path(start_path).resolve()

    current = start_path
    while True:
        pyproject_path = current / "pyproject.toml"
        if pyproject_path.exists():
            return pyproject_path

        parent = current.parent
        if parent == current:
            break
        current = parent

    return None


def load_config(root_dir: Path | None = None) -> Config:
    """Load the ``[tool.ffts-eso]`` table from the nearest pyproject.toml.

    Args:
        root_dir: Root directory to start searching. Defaults to current directory.

    Returns:
        Config object with loaded configuration; empty if none was found.
    """
    if tomllib is None:
        return Config()

    pyproject_path = find_pyproject_toml(root_dir)
    if pyproject_path is None:
        return Config()

    try:
        with open(pyproject_path, "rb") as f:
            data = tomllib.load(f)
    except (OSError, tomllib.TOMLDecodeError) as e:
        LOG.warning("ignoring unreadable %s: %s", pyproject_path, e)
        return Config()

    LOG.debug("loaded configuration from %s", pyproject_path)
    return Config(data.get("tool", {}).get(TOOL_NAME, {}))


def load_yaml_config(path: Path) -> dict[str, Any]:
    """Read a YAML mapping of SimConfig fields.

    Raises:
        OSError: If the file cannot be read.
        ValueError: If the document is not a mapping.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise OSError(f"cannot read config file {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a mapping at the top level")
    return data


def deep_merge(base: dict[str, Any], update: dict[str, Any]) -> dict[str, Any]:
    """Recursively merge ``update`` into a copy of ``base``; ``update`` wins."""
    out = dict(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def build_sim_config(
    config: Config,
    config_file: Path | None = None,
    overrides: dict[str, Any] | None = None,
) -> SimConfig:
    """Combine pyproject settings, an optional YAML file and overrides into a SimConfig.

    Raises:
        pydantic.ValidationError: If the combined settings are invalid.
    """
    merged = config.get_sim_config()
    if config_file is not None:
        merged = deep_merge(merged, load_yaml_config(config_file))
    if overrides:
        merged = deep_merge(merged, overrides)
    return SimConfig.model_validate(merged)


def _on_off(value: str | None) -> bool | None:
    return None if value is None else value == "on"


def _modes(value: Any, default: tuple[bool, ...] | None) -> tuple[bool, ...] | None:
    # "on", "off" or "both" from a flag; booleans or the same strings from pyproject
    if value is None:
        return default
    if value == "both":
        return (False, True)
    return (value in ("on", True),)


def _sim_overrides(args: Any) -> dict[str, Any]:
    out: dict[str, Any] = {}
    if getattr(args, "scenario", None) is not None:
        out["scenario"] = args.scenario
    noise = _on_off(getattr(args, "noise", None))
    if noise is not None:
        out["noise_enabled"] = noise
    if getattr(args, "seed", None) is not None:
        out["noise"] = {"seed": args.seed}
    if getattr(args, "h", None) is not None:
        out["h"] = args.h
    if getattr(args, "duration", None) is not None:
        out["duration"] = args.duration
    if getattr(args, "out", None) is not None:
        out["out_dir"] = args.out
    baselines = _on_off(getattr(args, "baselines", None))
    if baselines is not None:
        out["baselines"] = baselines
    return out


def merge_config_with_args(config: Config, args: Any, command: str) -> dict[str, Any]:
    """Merge configuration from pyproject.toml with command-line arguments.

    Command-line arguments take precedence over pyproject.toml configuration.

    Args:
        config: Config object from pyproject.toml.
        args: Parsed command-line arguments.
        command: Command name ('run', 'suite' or 'gains').

    Returns:
        Dictionary of merged configuration values. ``overrides`` holds the
        SimConfig fields set on the command line.
    """
    result: dict[str, Any] = {}

    if command in ("run", "suite"):
        cmd_config = config.get_run_config() if command == "run" else config.get_suite_config()

        # config file
        if args.config is not None:
            result["config_file"] = Path(args.config)
        elif "config" in cmd_config:
            result["config_file"] = Path(cmd_config["config"])
        else:
            result["config_file"] = None

        # plots
        if args.no_plots:
            result["plots"] = False
        elif "plots" in cmd_config:
            result["plots"] = bool(cmd_config["plots"])
        else:
            result["plots"] = True

        result["overrides"] = _sim_overrides(args)

        if command == "run":
            reject = _on_off(args.reject)
            if reject is None and "reject" in cmd_config:
                reject = bool(cmd_config["reject"])
            if reject is not None:
                result["overrides"]["reject"] = reject
        else:
            # grid axes, not SimConfig overrides
            overrides = result["overrides"]
            overrides.pop("noise_enabled", None)
            overrides.pop("baselines", None)
            for axis in ("noise", "baselines", "reject"):
                value = getattr(args, axis)
                if value is None:
                    value = cmd_config.get(axis)
                default = None if axis == "reject" else (False, True)
                result[f"{axis}_modes"] = _modes(value, default)

            # jobs
            if args.jobs is not None:
                result["jobs"] = args.jobs
            elif "jobs" in cmd_config:
                result["jobs"] = int(cmd_config["jobs"])
            else:
                result["jobs"] = 1

    elif command == "gains":
        cmd_config = config.get_gains_config()

        if args.config is not None:
            result["config_file"] = Path(args.config)
        elif "config" in cmd_config:
            result["config_file"] = Path(cmd_config["config"])
        else:
            result["config_file"] = None

        # initial Lyapunov value for settling bounds
        if args.v0 is not None:
            result["v0"] = args.v0
        elif "v0" in cmd_config:
            result["v0"] = float(cmd_config["v0"])
        else:
            result["v0"] = 1.0

        result["overrides"] = {}

    return result
