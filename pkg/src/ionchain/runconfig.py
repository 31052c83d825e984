"""Run configuration for the command-line front end.

Configurations live in a flat key = value text file with explicit unit
suffixes in the key names; command-line flags override file values.  The
whole document is schema-validated before any computation starts, so a
bad run dies with a config error instead of a half-written output tree.
"""

from dataclasses import dataclass, fields, replace

import scipy.constants as const

from .equilibrium import TrapConfig
from .errors import ConfigError

SCENARIOS = ("collision", "impurity", "modes-table")
FORMATS = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    """Validated description of one CLI run."""

    scenario: str
    n_ions: int = 5
    mass_amu: float = 40.0
    omega0_hz: float = 1.0e6
    site: int = None                 # collision site / impurity position
    v0_m_per_s: float = None         # default: harmonic-regime velocity
    noise_sigma_rel: float = 0.0     # relative to the dominant spectral peak
    seed: int = None
    sample_rate_hz: float = None     # default: 4x the fastest mode
    duration_s: float = None         # default: 12 center-of-mass periods
    observe_ion: int = 1
    impurity_mass_amu: float = None  # default: majority mass (uniform chain)
    out_dir: str = "."
    format: str = "csv"

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(
                f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}"
            )
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}; choose from {FORMATS}")
        if int(self.n_ions) != self.n_ions or self.n_ions < 1:
            raise ConfigError(f"n_ions must be a positive integer, got {self.n_ions}")
        object.__setattr__(self, "n_ions", int(self.n_ions))
        for key in ("mass_amu", "omega0_hz"):
            if not getattr(self, key) > 0:
                raise ConfigError(f"{key} must be positive, got {getattr(self, key)}")
        for key in ("sample_rate_hz", "duration_s", "impurity_mass_amu"):
            value = getattr(self, key)
            if value is not None and not value > 0:
                raise ConfigError(f"{key} must be positive, got {value}")
        if self.noise_sigma_rel < 0:
            raise ConfigError("noise_sigma_rel must be non-negative")
        if self.noise_sigma_rel > 0 and self.seed is None:
            raise ConfigError("a seed is mandatory whenever noise_sigma_rel > 0")
        if self.seed is not None:
            object.__setattr__(self, "seed", int(self.seed))
        if self.site is not None:
            if int(self.site) != self.site or not 1 <= self.site <= self.n_ions:
                raise ConfigError(
                    f"site must be an integer in 1..{self.n_ions}, got {self.site}"
                )
            object.__setattr__(self, "site", int(self.site))
        if not 1 <= self.observe_ion <= self.n_ions:
            raise ConfigError(
                f"observe_ion must lie in 1..{self.n_ions}, got {self.observe_ion}"
            )
        object.__setattr__(self, "observe_ion", int(self.observe_ion))
        if self.scenario == "collision" and self.site is None:
            raise ConfigError("the collision scenario requires a site")

    def trap_config(self):
        return TrapConfig(
            n_ions=self.n_ions,
            ion_mass=self.mass_amu * const.atomic_mass,
            omega0=2 * const.pi * self.omega0_hz,
        )


_INT_KEYS = {"n_ions", "site", "seed", "observe_ion"}
_FLOAT_KEYS = {
    "mass_amu",
    "omega0_hz",
    "v0_m_per_s",
    "noise_sigma_rel",
    "sample_rate_hz",
    "duration_s",
    "impurity_mass_amu",
}
_STR_KEYS = {"scenario", "out_dir", "format"}
_ALL_KEYS = _INT_KEYS | _FLOAT_KEYS | _STR_KEYS


def _coerce(key, raw):
    try:
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw


def parse_config_text(text):
    """Parse a flat ``key = value`` document into a key/value dict."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        if key not in _ALL_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def load_config(path=None, overrides=None, scenario=None):
    """Build a RunConfig from an optional file plus CLI overrides.

    ``overrides`` maps RunConfig field names to values (None entries are
    ignored); ``scenario`` wins over any scenario in the file.
    """
    values = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                values.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    if scenario is not None:
        values["scenario"] = scenario
    if "scenario" not in values:
        raise ConfigError("no scenario given (subcommand or config file)")

    field_names = {f.name for f in fields(RunConfig)}
    unknown = set(values) - field_names
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    return RunConfig(**values)


def with_defaults_applied(config, trap, basis):
    """Fill sampling defaults that depend on the trap and mode structure."""
    updates = {}
    if config.duration_s is None:
        updates["duration_s"] = 12.0 / config.omega0_hz
    if config.sample_rate_hz is None:
        f_max = float(basis.frequencies[-1]) / (2 * const.pi)
        updates["sample_rate_hz"] = 4.0 * f_max
    return replace(config, **updates) if updates else config
