"""Study configuration files (TOML) and the bundled presets.

A study file has a top-level ``which`` (``figure1``, ``table1`` or
``table2``) and up to three tables::

    which = "table1"

    [scenario]          # fields of ScenarioConfig except coef_size
    n = 100
    p = 80

    [grid]
    coef_size = [0.5, 1, 2, 4]
    k0 = [3, 5, 10]     # figure1 only

    [inference]         # table studies only
    alpha = 0.05
    sigma_source = "scaled_lasso"
    cov_sigma_source = "auto"
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .desparsified import SIGMA_SOURCES, DesparsConfig
from .exceptions import ConfigError
from .simulation import ScenarioConfig

STUDIES = ("figure1", "table1", "table2")
PRESETS = ("figure1", "figure1-reduced", "table1", "table2")

_INFERENCE_KEYS = {f.name for f in fields(DesparsConfig)} | {"cov_sigma_source"}


@dataclass(frozen=True)
class StudyConfig:
    which: str
    scenario: ScenarioConfig
    coef_sizes: tuple
    k0_values: tuple = ()
    despars: DesparsConfig = field(default_factory=DesparsConfig)
    cov_sigma_source: str = "auto"
    name: str = "custom"

    def __post_init__(self):
        if self.which not in STUDIES:
            raise ConfigError(f"which must be one of {STUDIES}, got {self.which!r}")
        if not self.coef_sizes:
            raise ConfigError("grid.coef_size must list at least one value")
        if any(b < 0 for b in self.coef_sizes):
            raise ConfigError("coefficient sizes must be nonnegative")
        if self.which == "figure1":
            if not self.k0_values:
                raise ConfigError("figure1 needs grid.k0")
            if any(k < 1 or k > self.scenario.p for k in self.k0_values):
                raise ConfigError(f"every k0 must lie in [1, p={self.scenario.p}]")
        if self.cov_sigma_source not in SIGMA_SOURCES or self.cov_sigma_source == "known":
            raise ConfigError(f"cov_sigma_source must be one of auto, scaled_lasso, ols_residual")

    @property
    def alpha(self):
        return self.despars.alpha

    def scenarios(self):
        """One ScenarioConfig per grid point, in output order."""
        if self.which == "figure1":
            return [
                replace(self.scenario, k0=k, coef_size=b) for b in self.coef_sizes for k in self.k0_values
            ]
        return [replace(self.scenario, coef_size=b) for b in self.coef_sizes]

    def with_overrides(self, runs=None, seed=None):
        sc = self.scenario
        if runs is not None:
            sc = replace(sc, runs=int(runs))
        if seed is not None:
            sc = replace(sc, seed=int(seed))
        return replace(self, scenario=sc)

    def to_dict(self):
        d = {
            "name": self.name,
            "which": self.which,
            "scenario": {k: v for k, v in asdict(self.scenario).items() if k != "coef_size"},
            "grid": {"coef_size": list(self.coef_sizes)},
        }
        if self.which == "figure1":
            d["scenario"].pop("k0")
            d["grid"]["k0"] = list(self.k0_values)
        else:
            d["inference"] = {**asdict(self.despars), "cov_sigma_source": self.cov_sigma_source}
        return d

    def digest(self):
        """Short SHA-256 of the canonical JSON form of the resolved configuration."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _check_keys(table, allowed, where):
    extra = set(table) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(extra))}")


def study_from_dict(data, name="custom"):
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table")
    _check_keys(data, {"which", "name", "scenario", "grid", "inference"}, "top level")
    which = data.get("which")
    if which is None:
        raise ConfigError("missing top-level key 'which'")
    sc_keys = {f.name for f in fields(ScenarioConfig)} - {"coef_size"}
    sc = dict(data.get("scenario", {}))
    _check_keys(sc, sc_keys, "[scenario]")
    grid = dict(data.get("grid", {}))
    _check_keys(grid, {"coef_size", "k0"}, "[grid]")
    inf = dict(data.get("inference", {}))
    _check_keys(inf, _INFERENCE_KEYS, "[inference]")
    if which == "figure1" and inf:
        raise ConfigError("[inference] does not apply to figure1")
    try:
        sizes = tuple(float(b) for b in grid.get("coef_size", ()))
        k0s = tuple(int(k) for k in grid.get("k0", ()))
        if which == "figure1":
            sc.setdefault("k0", max(k0s) if k0s else 1)
        scenario = ScenarioConfig(**sc)
        cov_src = inf.pop("cov_sigma_source", "auto")
        despars = DesparsConfig(**inf)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    return StudyConfig(which, scenario, sizes, k0s, despars, cov_src, data.get("name", name))


def load_study(path):
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return study_from_dict(data, name=str(path))


def preset_text(name):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return resources.files("lassosig.presets").joinpath(f"{name}.toml").read_text()


def load_preset(name):
    return study_from_dict(tomllib.loads(preset_text(name)), name=name)
