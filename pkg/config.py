"""Configuration settings for deltabench experiments."""

import hashlib
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields, asdict, is_dataclass
from pathlib import Path
from typing import Any, Dict, List, get_args, get_type_hints

from src.errors import ConfigurationError


DEFAULT_ROSTER = [
    "zero",
    "bs_delta",
    "fixed",
    "delta",
    "gamma",
    "vega",
    "vanna",
    "delta_gamma",
    "delta_vega",
    "delta_vanna",
    "delta_vega_gamma",
    "delta_vega_vanna",
    "delta_gamma_vanna",
    "delta_vega_gamma_vanna",
    "hull_white",
    "relaxed_hull_white",
    # Off by default; append to the roster (or --set) to fit them:
    # "semilinear_1",
    # "semilinear_2",
]

DEFAULT_NETS = ["M_sigtau", "delta_vega_tau", "delta_vega_vanna_tau"]


@dataclass
class SimulationConfig:
    """Underlying dynamics and in/out-of-sample layout."""
    model: str = "bs"  # bs | heston
    s0: float = 2000.0
    mu: float = 0.1
    sigma: float = 0.2
    y0: float = 0.04
    theta: float = 0.04
    kappa: float = 5.0
    sigma_y: float = 0.3
    rho: float = -0.6
    steps_per_day: int = 10
    scheme: str = "euler"  # euler | milstein
    start_date: str = "2015-01-02"
    in_sample_days: int = 450
    train_days: int = 360
    n_oos_sets: int = 20
    oos_days: int = 90
    r_onr: float = 0.0  # Overnight rate used in R = 1 + r_onr * delta_t


@dataclass
class CleaningConfig:
    """Cleaning rule toggles and thresholds."""
    negative_time_value: bool = True
    short_maturity: bool = True
    moneyness: bool = True
    implied_vol: bool = True
    min_price: bool = True
    in_the_money: bool = True
    quote_rules: bool = False  # Zero volume, wide spread, low bid, missing next price
    moneyness_low: float = 0.8
    moneyness_high: float = 1.5
    iv_low: float = 0.01
    iv_high: float = 1.0
    min_price_tick: float = 0.01  # In original currency units
    min_bid: float = 0.05
    filter_tau_min_days: float = 0.0  # Drop tau <= N calendar days when N > 0


@dataclass
class TrainingConfig:
    """HedgeNet training settings."""
    hidden_layers: List[int] = field(default_factory=lambda: [30, 30])
    learning_rate: float = 1e-4
    batch_size: int = 64
    epochs: int = 300
    l2_alpha: float = -1.0  # Negative selects the per-dataset default
    n_seeds: int = 1


@dataclass
class ExperimentConfig:
    """Complete experiment configuration."""
    simulation: SimulationConfig
    cleaning: CleaningConfig
    training: TrainingConfig
    horizons: List[int] = field(default_factory=lambda: [1, 2])  # Trading days
    window_mode: str = "simulation"  # simulation | rolling | single
    roster: List[str] = field(default_factory=lambda: list(DEFAULT_ROSTER))
    nets: List[str] = field(default_factory=lambda: list(DEFAULT_NETS))
    intercept: bool = False
    fixed_call: float = 0.9
    fixed_put: float = 1.1
    seed: int = 1
    tolerance_min: float = 6.0
    underlying_id: str = "UNDERLYING"
    ingest_horizon: str = "1d"  # 1h | 1d | 2d for tick data
    bucket_moneyness: bool = False
    output_dir: str = "runs/default"
    debug: bool = False

    @classmethod
    def create_default(cls, model: str = "bs", debug: bool = False) -> 'ExperimentConfig':
        """Create default configuration.

        Args:
            model: Simulation model, 'bs' or 'heston'
            debug: Enable debug logging

        Returns:
            ExperimentConfig with the simulation-study defaults
        """
        config = cls(
            simulation=SimulationConfig(model=model),
            cleaning=CleaningConfig(),
            training=TrainingConfig(),
            debug=debug,
        )
        if model == "heston":
            config.roster = config.roster + ["heston_adjusted", "delta_vega_neutral"]
        config.validate()
        return config

    @classmethod
    def from_file(cls, path: str) -> 'ExperimentConfig':
        """Load a TOML config on top of the defaults.

        Keys may be flat dotted names ('simulation.s0') or TOML tables.
        The model key is applied first so Heston roster defaults follow it.

        Raises:
            ConfigurationError: Unreadable file, unknown key or bad value
        """
        try:
            with open(path, 'rb') as f:
                document = tomllib.load(f)
        except OSError as e:
            raise ConfigurationError(f"Cannot read config {path}: {e}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"Invalid TOML in {path}: {e}") from e

        flat = _flatten(document)
        config = cls.create_default(model=str(flat.get("simulation.model", "bs")))
        config.apply_overrides(flat)
        return config

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        """Rebuild a config from its asdict() form (as stored in manifests)."""
        config = cls.create_default()
        config.apply_overrides(_flatten(data))
        return config

    @staticmethod
    def flat_keys() -> List[str]:
        """All accepted configuration keys."""
        return list(_flatten(asdict(ExperimentConfig.create_default())).keys())

    def apply_overrides(self, overrides: Dict[str, Any]) -> None:
        """Apply flat dotted-key overrides with type coercion.

        Raises:
            ConfigurationError: Unknown key or value of the wrong type
        """
        for key, value in overrides.items():
            target, name = self._resolve(key)
            current = getattr(target, name)
            element = get_args(get_type_hints(type(target)).get(name))
            setattr(target, name, _coerce(key, current, value, element[0] if element else None))
        self.validate()

    def _resolve(self, key: str):
        parts = key.split(".")
        target: Any = self
        for part in parts[:-1]:
            if not hasattr(target, part) or not is_dataclass(getattr(target, part)):
                raise ConfigurationError(f"Unknown config key: {key}")
            target = getattr(target, part)
        name = parts[-1]
        names = {f.name for f in fields(target)}
        if name not in names or is_dataclass(getattr(target, name)):
            raise ConfigurationError(f"Unknown config key: {key}")
        return target, name

    def validate(self) -> None:
        """Check cross-field invariants.

        Raises:
            ConfigurationError: On the first violated invariant
        """
        sim = self.simulation
        if sim.model not in ("bs", "heston"):
            raise ConfigurationError(f"simulation.model must be 'bs' or 'heston', got {sim.model!r}")
        if sim.scheme not in ("euler", "milstein"):
            raise ConfigurationError(f"simulation.scheme must be 'euler' or 'milstein', got {sim.scheme!r}")
        if not self.horizons or any(h <= 0 for h in self.horizons):
            raise ConfigurationError("horizons must be a non-empty list of positive day counts")
        if not self.roster and not self.nets:
            raise ConfigurationError("roster and nets are both empty")
        if self.window_mode not in ("simulation", "rolling", "single"):
            raise ConfigurationError(f"Unknown window_mode {self.window_mode!r}")
        if not 0 < sim.train_days < sim.in_sample_days:
            raise ConfigurationError("simulation.train_days must lie in (0, in_sample_days)")
        if sim.n_oos_sets < 1 or sim.oos_days < 1:
            raise ConfigurationError("simulation needs at least one out-of-sample set of one day")
        if sim.steps_per_day < 1:
            raise ConfigurationError("simulation.steps_per_day must be positive")
        if self.fixed_call <= 0 or self.fixed_put <= 0:
            raise ConfigurationError("fixed_call and fixed_put must be positive")
        if self.tolerance_min < 0:
            raise ConfigurationError("tolerance_min must be non-negative")
        if self.ingest_horizon not in ("1h", "1d", "2d"):
            raise ConfigurationError(f"ingest_horizon must be 1h, 1d or 2d, got {self.ingest_horizon!r}")
        tr = self.training
        if (tr.learning_rate <= 0 or tr.batch_size <= 0 or tr.epochs <= 0 or tr.n_seeds <= 0
                or not tr.hidden_layers or any(w <= 0 for w in tr.hidden_layers)):
            raise ConfigurationError("training settings must be positive")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def run_dir(self) -> Path:
        return Path(self.output_dir)


def parse_override(text: str) -> Dict[str, Any]:
    """Parse a 'key=value' CLI override, value in TOML syntax when possible.

    Example:
        parse_override("simulation.s0=2500")     -> {'simulation.s0': 2500}
        parse_override("roster=['zero','fixed']") -> {'roster': ['zero', 'fixed']}
        parse_override("window_mode=rolling")    -> {'window_mode': 'rolling'}
    """
    if "=" not in text:
        raise ConfigurationError(f"Override must look like key=value, got {text!r}")
    key, raw = text.split("=", 1)
    key = key.strip()
    try:
        value = tomllib.loads(f"v = {raw.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw.strip()
    return {key: value}


def _flatten(document: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in document.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, prefix=f"{name}."))
        else:
            flat[name] = value
    return flat


def _coerce(key: str, current: Any, value: Any, element: Any = None) -> Any:
    """Check value against the type of current; list items against element."""
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigurationError(f"{key} expects true/false, got {value!r}")
        return value
    if isinstance(current, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{key} expects an integer, got {value!r}")
        return value
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigurationError(f"{key} expects a number, got {value!r}")
        return float(value)
    if isinstance(current, list):
        if not isinstance(value, list):
            raise ConfigurationError(f"{key} expects a list, got {value!r}")
        if element is None:
            return list(value)
        return [_coerce(f"{key}[{i}]", element(), item) for i, item in enumerate(value)]
    if isinstance(current, str):
        if not isinstance(value, str):
            raise ConfigurationError(f"{key} expects a string, got {value!r}")
        return value
    raise ConfigurationError(f"Unsupported config key type for {key}")
