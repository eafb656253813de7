"""Run configuration: one TOML file describing a whole run, with strict
unknown-key rejection so typos fail loudly."""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .ensembles import ENSEMBLE_KINDS
from .errors import ConfigError
from .gitlab import RetryPolicy
from .taxonomy import (
    DEFAULT_REVERT_PREFIXES,
    DEFAULT_WIP_LABELS,
    DEFAULT_WIP_TITLE_PREFIXES,
    RuleConfig,
)

DEFAULT_TOKEN_ENV = "MRLENS_TOKEN"


@dataclass(frozen=True)
class ApiConfig:
    host: str = ""
    group: str = ""
    project_ids: tuple[int, ...] = ()
    page_size: int = 100
    retry_attempts: int = 5
    retry_base_s: float = 1.0
    timeout_s: float = 30.0
    fanout: int = 4
    token_env: str = DEFAULT_TOKEN_ENV

    def retry_policy(self) -> RetryPolicy:
        return RetryPolicy(attempts=self.retry_attempts, base_delay_s=self.retry_base_s)

    def token(self) -> str:
        value = os.environ.get(self.token_env, "")
        if not value:
            raise ConfigError(
                f"API token not found: set the {self.token_env} environment variable"
            )
        return value


@dataclass(frozen=True)
class SamplingConfig:
    z: float = 1.96
    margin: float = 0.05
    proportion: float = 0.5
    seed: int = 13
    stratify: bool = False


@dataclass(frozen=True)
class ModelsConfig:
    kinds: tuple[str, ...] = ENSEMBLE_KINDS
    n_trees: int = 100
    min_leaf: int = 5
    learning_rate: float = 0.1
    importance: str = "permutation"


@dataclass(frozen=True)
class ImpactSettings:
    n_boot: int = 20
    seed: int = 7
    corr_threshold: float = 0.70
    r2_threshold: float = 0.90
    min_arm_size: int = 50


@dataclass(frozen=True)
class ClassifierConfig:
    backend: str = "rules"
    service_cmd: str = ""
    socket: str = ""


@dataclass(frozen=True)
class RunConfig:
    api: ApiConfig = field(default_factory=ApiConfig)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    rules: RuleConfig = field(default_factory=RuleConfig)
    models: ModelsConfig = field(default_factory=ModelsConfig)
    impact: ImpactSettings = field(default_factory=ImpactSettings)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    output_dir: str = "out"


def _build_section(cls, doc: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in doc:
            continue
        value = doc[f.name]
        if isinstance(value, list):
            value = tuple(value)
        kwargs[f.name] = value
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad [{section}] section: {exc}") from None


_SECTIONS = {
    "api": (ApiConfig, "api"),
    "sampling": (SamplingConfig, "sampling"),
    "rules": (RuleConfig, "rules"),
    "models": (ModelsConfig, "models"),
    "impact": (ImpactSettings, "impact"),
    "classifier": (ClassifierConfig, "classifier"),
}


def _validate(config: RunConfig) -> RunConfig:
    if config.api.page_size < 1:
        raise ConfigError("api.page_size must be >= 1")
    if not 0 < config.sampling.margin < 1:
        raise ConfigError("sampling.margin must lie in (0, 1)")
    if not 0 < config.sampling.proportion < 1:
        raise ConfigError("sampling.proportion must lie in (0, 1)")
    if config.rules.cc_dominance_ratio < 0:
        raise ConfigError("rules.cc_dominance_ratio must be >= 0")
    if config.rules.hc_commit_threshold < 1 or config.rules.hc_churn_threshold < 1:
        raise ConfigError("rules.hc_* thresholds must be >= 1")
    for kind in config.models.kinds:
        if kind not in ENSEMBLE_KINDS:
            raise ConfigError(f"models.kinds contains unknown kind {kind!r}")
    if config.models.importance not in ("permutation", "impurity"):
        raise ConfigError("models.importance must be 'permutation' or 'impurity'")
    if not 0 < config.models.learning_rate <= 1:
        raise ConfigError("models.learning_rate must lie in (0, 1]")
    if config.impact.n_boot < 1:
        raise ConfigError("impact.n_boot must be >= 1")
    if not 0 < config.impact.corr_threshold <= 1:
        raise ConfigError("impact.corr_threshold must lie in (0, 1]")
    if not 0 < config.impact.r2_threshold <= 1:
        raise ConfigError("impact.r2_threshold must lie in (0, 1]")
    if config.classifier.backend not in ("rules", "service"):
        raise ConfigError("classifier.backend must be 'rules' or 'service'")
    return config


def load_config(path: str | Path | None) -> RunConfig:
    """Load a TOML run configuration; a missing argument gives all defaults."""
    if path is None:
        return _validate(RunConfig())
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None

    unknown = set(doc) - set(_SECTIONS) - {"output"}
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")
    kwargs = {}
    for key, (cls, label) in _SECTIONS.items():
        if key in doc:
            kwargs[key] = _build_section(cls, doc[key], label)
    output_dir = "out"
    if "output" in doc:
        extra = set(doc["output"]) - {"dir"}
        if extra:
            raise ConfigError(f"unknown key(s) in [output]: {sorted(extra)}")
        output_dir = str(doc["output"].get("dir", "out"))
    return _validate(RunConfig(output_dir=output_dir, **kwargs))


EXAMPLE_CONFIG = f"""\
# mrlens run configuration. Every key is optional; these are the defaults.

[api]
host = ""                 # e.g. "https://gitlab.example.com"
group = ""
project_ids = []
page_size = 100
retry_attempts = 5
retry_base_s = 1.0
timeout_s = 30.0
fanout = 4
token_env = "{DEFAULT_TOKEN_ENV}"   # token is read from this env var, never a flag

[sampling]
z = 1.96
margin = 0.05
proportion = 0.5
seed = 13
stratify = false

[rules]
hc_commit_threshold = 500
hc_churn_threshold = 10000
cc_dominance_ratio = 0.1
lu_churn_cap = 20
enable_du = false
wip_title_prefixes = {list(DEFAULT_WIP_TITLE_PREFIXES)!r}
wip_labels = {list(DEFAULT_WIP_LABELS)!r}
revert_prefixes = {list(DEFAULT_REVERT_PREFIXES)!r}
# manifest_globs / build_globs / docs_globs accept the same list syntax.

[models]
kinds = {list(ENSEMBLE_KINDS)!r}
n_trees = 100
min_leaf = 5
learning_rate = 0.1
importance = "permutation"   # or "impurity"

[impact]
n_boot = 20        # the paper-scale run uses --full (100)
seed = 7
corr_threshold = 0.70
r2_threshold = 0.90
min_arm_size = 50

[classifier]
backend = "rules"       # or "service"
service_cmd = ""        # command spawning a streaming classifier service
socket = ""             # or a local socket address host:port

[output]
dir = "out"
"""
