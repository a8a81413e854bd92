"""
Model and experiment configuration: defaults, loading and validation.

Config files are JSON; they are read with yaml.safe_load so YAML works too.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from difflib import get_close_matches
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import yaml

from levysphere.errors import ConfigError
from levysphere.fluid_operators import OperatorContext
from levysphere.spherical_spectral import SPECTRA, SpectralField, SphereGrid, stokes_eig
from levysphere.stable_noise import CONVENTIONS, StableParams

logger = logging.getLogger(__name__)

COMMANDS = ['simulate', 'pullback', 'attractor', 'ou-stats', 'verify', 'measure', 'cocycle']

# Purpose tags for seed derivation; adding a purpose never perturbs the others
SEED_PURPOSES = {
    'path': 101,
    'init': 202,
    'probe': 303,
    'moment': 404,
    'delta': 505,
}


@dataclass(frozen=True)
class ModelConfig:
    """Physical, numerical and noise parameters of one model."""
    l_max: int = 31
    l_min: int = 2
    n_lat: int = 48
    n_lon: int = 96
    nu: float = 1.0
    rotation: float = 2.0
    beta: float = 1.5
    alpha: float = 0.0
    alpha_auto: bool = False
    noise_modes: Tuple[Tuple[int, int], ...] = ((2, 0), (3, 0))
    sigma: Tuple[float, ...] = (1.0, 1.0)
    forcing: Tuple[Tuple[int, int, float, float], ...] = ()
    dt: float = 1e-3
    path_substeps: int = 1
    dealias: bool = True
    spectrum: str = 'stokes'
    stable_convention: str = 'standard'
    c: Optional[float] = None
    c_prime: Optional[float] = None
    delta: Optional[float] = None
    c_b: Optional[float] = None
    kappa: Optional[float] = None
    seed: int = 0

    @property
    def m(self) -> int:
        return len(self.noise_modes)

    @property
    def lambda1(self) -> float:
        return stokes_eig(self.l_min, self.spectrum, self.l_min)

    @property
    def grid(self) -> SphereGrid:
        return SphereGrid(self.n_lat, self.n_lon)

    @property
    def path_step(self) -> float:
        return self.dt / self.path_substeps

    def context(self) -> OperatorContext:
        return OperatorContext(
            grid=self.grid,
            rotation=self.rotation,
            viscosity=self.nu,
            dealias=self.dealias,
            spectrum=self.spectrum,
        )

    def mode_params(self) -> List[StableParams]:
        return [StableParams(beta=self.beta, scale=s, convention=self.stable_convention)
                for s in self.sigma]

    def noise_fields(self) -> List[SpectralField]:
        """Unit-H-norm basis fields e_l for the declared noise modes."""
        return [SpectralField.unit_mode(l, m, self.l_max, self.l_min) for l, m in self.noise_modes]

    def forcing_field(self) -> SpectralField:
        f = SpectralField.zeros(self.l_max, self.l_min)
        for l, m, re, im in self.forcing:
            f = f + SpectralField.single_mode(l, m, self.l_max, self.l_min, complex(re, im))
        return f

    @property
    def c_value(self) -> float:
        """Young constant on |f|^2 and |alpha z|^2 (default 1 / (4 c'))."""
        if self.c is not None:
            return self.c
        return 1.0 / (4.0 * self.c_prime_value)

    @property
    def c_prime_value(self) -> float:
        if self.c_prime is not None:
            return self.c_prime
        return self.nu * self.lambda1 / 8.0

    @property
    def kappa_value(self) -> float:
        return self.kappa if self.kappa is not None else 2.0 / self.beta

    def replace(self, **changes: Any) -> 'ModelConfig':
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        data = dataclasses.asdict(self)
        data['noise_modes'] = [list(x) for x in self.noise_modes]
        data['sigma'] = list(self.sigma)
        data['forcing'] = [{'l': l, 'm': m, 're': re, 'im': im} for l, m, re, im in self.forcing]
        return data


FIELD_NAMES = [f.name for f in dataclasses.fields(ModelConfig)]


@dataclass
class ExperimentSpec:
    """One CLI invocation: command, model, schedules and output location."""
    command: str
    model: ModelConfig
    schedules: Dict[str, Any] = field(default_factory=dict)
    output_dir: Optional[str] = None
    seed: int = 0
    threads: int = 1

    def schedule(self, key: str, default: Any) -> Any:
        return self.schedules.get(key, default)


def derive_seed(base_seed: int, purpose: str, *indices: int) -> int:
    """
    Independent 64-bit seed for (base seed, purpose, indices).

    Args:
        base_seed: Experiment base seed
        purpose: One of SEED_PURPOSES
        indices: Member / sample indices

    Returns:
        Integer seed
    """
    tag = SEED_PURPOSES[purpose]
    ss = np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, tag, *[int(i) for i in indices]])
    return int(ss.generate_state(1, np.uint64)[0])


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)


def _check_unknown(raw: Dict[str, Any], errors: List[str]) -> None:
    for key in raw:
        if key in FIELD_NAMES or key == 'experiment':
            continue
        msg = f"Unknown config field '{key}'"
        matches = get_close_matches(key, FIELD_NAMES, n=3, cutoff=0.5)
        if matches:
            msg += f". Did you mean: {', '.join(matches)}?"
        errors.append(msg)


def _parse_forcing(items: Any, errors: List[str]) -> Tuple[Tuple[int, int, float, float], ...]:
    out = []
    if not isinstance(items, (list, tuple)):
        errors.append("forcing: expected a list of {l, m, re, im} entries")
        return ()
    for k, item in enumerate(items):
        if isinstance(item, dict):
            vals = (item.get('l'), item.get('m', 0), item.get('re', 0.0), item.get('im', 0.0))
        elif isinstance(item, (list, tuple)) and len(item) == 4:
            vals = tuple(item)
        else:
            errors.append(f"forcing[{k}]: expected {{l, m, re, im}}")
            continue
        if not all(_is_number(v) for v in vals):
            errors.append(f"forcing[{k}]: non-numeric entry {vals}")
            continue
        out.append((int(vals[0]), int(vals[1]), float(vals[2]), float(vals[3])))
    return tuple(out)


def validate_config(raw: Union[str, Dict[str, Any], None]) -> Tuple[ModelConfig, List[str]]:
    """
    Validate a raw model configuration, reporting every problem at once.

    Args:
        raw: Mapping or JSON/YAML text; missing keys take defaults

    Returns:
        Tuple of (ModelConfig, warnings)

    Raises:
        ConfigError: Listing all invalid fields
    """
    if raw is None:
        raw = {}
    if isinstance(raw, str):
        try:
            raw = yaml.safe_load(raw) or {}
        except yaml.YAMLError as e:
            raise ConfigError([f"config is not valid JSON/YAML: {e}"])
    if not isinstance(raw, dict):
        raise ConfigError([f"config must be a mapping, got {type(raw).__name__}"])

    errors: List[str] = []
    warnings: List[str] = []
    _check_unknown(raw, errors)
    defaults = ModelConfig()
    values: Dict[str, Any] = {}

    int_fields = ['l_max', 'l_min', 'n_lat', 'n_lon', 'path_substeps', 'seed']
    float_fields = ['nu', 'rotation', 'beta', 'alpha', 'dt']
    optional_floats = ['c', 'c_prime', 'delta', 'c_b', 'kappa']

    for name in int_fields:
        value = raw.get(name, getattr(defaults, name))
        if not isinstance(value, int) or isinstance(value, bool):
            errors.append(f"{name}: expected an integer, got {value!r}")
        else:
            values[name] = value
    for name in float_fields:
        value = raw.get(name, getattr(defaults, name))
        if not _is_number(value):
            errors.append(f"{name}: expected a finite number, got {value!r}")
        else:
            values[name] = float(value)
    for name in optional_floats:
        value = raw.get(name)
        if value is None:
            values[name] = None
        elif not _is_number(value) or value <= 0:
            errors.append(f"{name}: expected a positive number or null, got {value!r}")
        else:
            values[name] = float(value)
    for name in ('alpha_auto', 'dealias'):
        value = raw.get(name, getattr(defaults, name))
        if not isinstance(value, bool):
            errors.append(f"{name}: expected true/false, got {value!r}")
        else:
            values[name] = value

    spectrum = raw.get('spectrum', defaults.spectrum)
    if spectrum not in SPECTRA:
        errors.append(f"spectrum: must be one of {list(SPECTRA)}, got {spectrum!r}")
    values['spectrum'] = spectrum
    convention = raw.get('stable_convention', defaults.stable_convention)
    if convention not in CONVENTIONS:
        errors.append(f"stable_convention: must be one of {list(CONVENTIONS)}, got {convention!r}")
    values['stable_convention'] = convention

    modes_raw = raw.get('noise_modes', [list(x) for x in defaults.noise_modes])
    modes: List[Tuple[int, int]] = []
    if not isinstance(modes_raw, (list, tuple)):
        errors.append("noise_modes: expected a list of [l, m] pairs")
    else:
        for k, pair in enumerate(modes_raw):
            if (isinstance(pair, (list, tuple)) and len(pair) == 2
                    and all(isinstance(v, int) and not isinstance(v, bool) for v in pair)):
                modes.append((pair[0], pair[1]))
            else:
                errors.append(f"noise_modes[{k}]: expected [l, m] integers, got {pair!r}")
    sigma_raw = raw.get('sigma', list(defaults.sigma))
    sigma: List[float] = []
    sigma_ok = False
    if not isinstance(sigma_raw, (list, tuple)) or not all(_is_number(s) for s in sigma_raw):
        errors.append(f"sigma: expected a list of numbers, got {sigma_raw!r}")
    else:
        sigma = [float(s) for s in sigma_raw]
        sigma_ok = True
        if any(s < 0 for s in sigma):
            errors.append("sigma: entries must be >= 0")
    if sigma_ok and len(sigma) != len(modes):
        errors.append(
            f"sigma has {len(sigma)} entries but noise_modes has {len(modes)}; lengths must match"
        )
    values['noise_modes'] = tuple(modes)
    values['sigma'] = tuple(sigma)
    values['forcing'] = _parse_forcing(raw.get('forcing', []), errors)

    # Range checks run only on fields whose type check passed
    l_max, l_min = values.get('l_max'), values.get('l_min')
    if l_min is not None:
        if l_min < 1:
            errors.append(f"l_min: must be >= 1, got {l_min}")
        if l_min == 1 and spectrum == 'stokes':
            errors.append("l_min: 1 requires spectrum 'laplacian' (the Stokes spectrum vanishes at l=1)")
    if l_max is not None and l_min is not None and l_max < l_min:
        errors.append(f"l_max: must be >= l_min={l_min}, got {l_max}")
    if 'beta' in values and not 0.0 < values['beta'] <= 2.0:
        errors.append(f"beta: must lie in (0, 2], got {values['beta']}")
    if 'nu' in values:
        if values['nu'] < 0:
            errors.append(f"nu: must be >= 0, got {values['nu']}")
        elif values['nu'] == 0:
            warnings.append("nu = 0: inviscid run, the energy ledger is undefined")
    for name in ('rotation', 'alpha'):
        if name in values and values[name] < 0:
            errors.append(f"{name}: must be >= 0, got {values[name]}")
    if 'dt' in values and values['dt'] <= 0:
        errors.append(f"dt: must be > 0, got {values['dt']}")
    if 'path_substeps' in values and values['path_substeps'] < 1:
        errors.append(f"path_substeps: must be >= 1, got {values['path_substeps']}")
    if l_max is not None and l_min is not None:
        for l, m in modes:
            if not l_min <= l <= l_max or abs(m) > l:
                errors.append(f"noise_modes: mode ({l}, {m}) outside truncation [{l_min}, {l_max}]")
        for l, m, _, _ in values['forcing']:
            if not l_min <= l <= l_max or abs(m) > l:
                errors.append(f"forcing: mode ({l}, {m}) outside truncation [{l_min}, {l_max}]")
    if len({(l, abs(m)) for l, m in modes}) != len(modes):
        errors.append("noise_modes: duplicate modes ((l, m) and (l, -m) span the same real field)")
    if all(k in values for k in ('l_max', 'n_lat', 'n_lon', 'dealias')):
        grid = SphereGrid(values['n_lat'], values['n_lon'])
        try:
            grid.check(l_max, values['dealias'])
        except ValueError as e:
            errors.append(f"n_lat/n_lon: {e}")
    if errors:
        raise ConfigError(errors)

    if values['dt'] > 0:
        steps_per_unit = 1.0 / values['dt']
        if abs(steps_per_unit - round(steps_per_unit)) > 1e-9 * steps_per_unit:
            warnings.append(
                f"dt={values['dt']} does not divide 1.0; pullback schedules need integer start times"
            )
    for w in warnings:
        logger.warning(w)
    return ModelConfig(**values), warnings


def load_config(path: Union[str, Path]) -> Tuple[ModelConfig, Dict[str, Any], List[str]]:
    """
    Read and validate a config file.

    Returns:
        Tuple of (ModelConfig, experiment section, warnings)
    """
    text = Path(path).read_text(encoding='utf-8')
    try:
        raw = yaml.safe_load(text) or {}
    except yaml.YAMLError as e:
        raise ConfigError([f"{path}: not valid JSON/YAML: {e}"])
    if not isinstance(raw, dict):
        raise ConfigError([f"{path}: config must be a mapping"])
    experiment = raw.get('experiment') or {}
    cfg, warnings = validate_config(raw)
    return cfg, experiment, warnings


def validate_command(command: str) -> None:
    """
    Raise ValueError naming close matches for an unknown command.
    """
    if command in COMMANDS:
        return
    msg = f"Unknown command '{command}'"
    matches = get_close_matches(command, COMMANDS, n=3, cutoff=0.5)
    if matches:
        msg += f". Did you mean: {', '.join(matches)}?"
    raise ValueError(msg)


def default_config_dict() -> Dict[str, Any]:
    """The shipped default configuration as a plain mapping."""
    return ModelConfig().to_dict()
