import copy
import logging
from pathlib import Path
import tomllib

from platformdirs import user_config_dir

from .exceptions import ConfigError

logger = logging.getLogger(__name__)

TOML_NAME = "colormapgan.toml"


def _check_value(name: str, details: dict, value):
    """Return `value` as it should be stored for option `name`, or raise `ConfigError`."""
    if "choices" in details and value not in details["choices"]:
        raise ConfigError(f"Value {value!r} for {name} not amongst possible choices: {details['choices']}")
    default = details["default"]
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{name} expects a list, got {value!r}")
        return list(value)
    numeric = isinstance(default, (int, float)) and not isinstance(default, bool)
    if numeric and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise ConfigError(f"{name} expects a number, got {value!r}")
    return value


class ColorMapGANConfig:
    """Hyperparameters, data paths and pipeline choices in one place.

    The module-level instance `cmapfig` is the one the rest of the package reads.
    Every option declared in `config.toml` is an attribute, e.g.
    `cmapfig.GENERATOR_LR`, and assignment is validated against the option's
    default type and its `choices`.
    """
    def __init__(self):
        with open(Path(__file__).with_name("config.toml"), "rb") as f:
            declared = tomllib.load(f)["config"]

        # Flat {OPTION: details} view of the categorised tables; set through
        # object.__setattr__ since our own __setattr__ looks it up
        object.__setattr__(self, "options", {})
        self.config_table = declared
        for category, table in declared.items():
            for option, details in table.items():
                details["category"] = category
                details["current"] = copy.deepcopy(details["default"])
                self.options[option] = details

        # Every TOML file found or loaded, oldest first
        self.toml_list = []

    def __getattribute__(self, name):
        options = object.__getattribute__(self, "options")
        if name in options:
            return options[name]["current"]
        return object.__getattribute__(self, name)

    def __setattr__(self, name, value):
        if name not in self.options:
            object.__setattr__(self, name, value)
            return
        details = self.options[name]
        details["current"] = _check_value(name, details, value)

    def print_options(self) -> None:
        for category, table in self.config_table.items():
            print(f"[{category}]\n")
            for option, details in table.items():
                print(option)
                print("\t" + details["doc"].replace("\n", "\n\t") + "\n")
                if "choices" in details:
                    print(f"\tPossible values: {details['choices']}")
                print(f"\tCurrent value: {getattr(self, option)!r}")
                print(f"\tDefault value: {details['default']!r}\n")

    def find_toml(self, *dirs) -> Path | None:
        """Return the first `colormapgan.toml` found, remembering it in `toml_list`.

        Searched in order: `dirs`, the working directory, each of its parents, and
        finally the user config directory given by `platformdirs`
        (~/.config/colormapgan on Linux).
        """
        cwd = Path.cwd()
        candidates = [Path(d) for d in dirs] + [cwd, *cwd.parents]
        candidates.append(Path(user_config_dir("colormapgan", roaming=True)))
        for directory in candidates:
            path = directory / TOML_NAME
            if path.exists():
                self.toml_list.append(path)
                return path
        return None

    def load_toml(self, sections: list[str] | None = None, toml_path: Path | str | None = None):
        """Apply the `[config.*]` tables of a TOML file.

        Without `toml_path` the most recently found or loaded file is used, and
        nothing happens if there is none. `sections` restricts which top-level
        tables are read; only `config` carries options.
        """
        if toml_path is None:
            if not self.toml_list:
                return
            toml_path = self.toml_list[-1]
        else:
            toml_path = Path(toml_path)
            self.toml_list.append(toml_path)
        with open(toml_path, "rb") as f:
            content = tomllib.load(f)
        logger.debug("Loaded %s with sections %s", toml_path, list(content))
        wanted = content.keys() if sections is None else set(sections) & content.keys()
        if "config" in wanted:
            self.load_config(content["config"])

    def load_config(self, config_table: dict):
        """Set options from a `[config]` table; the category tables only group them.

        ```toml
        [config.training]
        GAN_ITERATIONS = 2000

        [config.pipeline]
        METHOD = "histmatch"
        ```
        """
        for category, values in config_table.items():
            for option, value in values.items():
                if option not in self.options:
                    raise ConfigError(f"Unknown option {option} in section [config.{category}]")
                setattr(self, option, value)

    def reset(self):
        """Restore every option to its default value."""
        for details in self.options.values():
            details["current"] = copy.deepcopy(details["default"])

    def save_config(self, toml_path: Path | str | None = None):
        """Write the current values as a `colormapgan.toml`.

        Defaults to the first file found or loaded, else the working directory.
        """
        import tomli_w

        if toml_path is None:
            toml_path = self.toml_list[0] if self.toml_list else Path.cwd() / TOML_NAME
        tables = {}
        for option, details in self.options.items():
            tables.setdefault(details["category"], {})[option] = details["current"]
        with open(toml_path, "wb") as f:
            tomli_w.dump({"config": tables}, f)


cmapfig = ColorMapGANConfig()
