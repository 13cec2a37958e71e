"""
Run configuration for the privcode command line.

Values are resolved from four layers, later layers winning: built-in defaults,
the file named by the PRIVCODE_CONFIG environment variable, the file passed
with --config, and explicit command-line flags. Config files are plain
`key = value` lines read with python-dotenv.
"""

import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

from dotenv import dotenv_values
from sympy import isprime

from privcode.core.blockmat import PartitionSpec
from privcode.core.errors import InvalidSpecError
from privcode.core.ffield import DEFAULT_PRIME, MAX_PRIME_EXCLUSIVE
from privcode.core.stragglersim import DEFAULT_GROUPING_CAP, FIGURE_GROUPS, Convention
from privcode.utils.validators import (
    desired_index_violations,
    field_capacity_violations,
    parse_dims,
    partition_spec_violations,
)

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "PRIVCODE_CONFIG"

SUPPORTED_FIGURES = (2, 3)


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a command needs.

    Args:
        prime: Field characteristic p.
        dims: (r, s, t): A is r x s, each library matrix s x t.
        m, n: Row blocks of A and number of worker groups.
        big_m: Library size M.
        workers: Number of workers N.
        l: Sub-computations per worker L.
        desired: 1-based index D of the wanted library matrix.
        seed: Seed for every random choice.
        trials: Monte Carlo trials.
        convention: Order-statistic convention for the closed forms.
        fig: Figure to reproduce (2 or 3).
        out: Output path for CSV files.
        gamma, mu: Delay model overrides; figure defaults apply when unset.
        cap: Grouping enumeration cap.
    """

    prime: int = DEFAULT_PRIME
    dims: Tuple[int, int, int] = (4, 6, 4)
    m: int = 2
    n: int = 3
    big_m: int = 4
    workers: int = 12
    l: int = 1
    desired: int = 1
    seed: int = 0
    trials: int = 10000
    convention: str = Convention.HARMONIC.value
    fig: int = 2
    out: Optional[str] = None
    gamma: Optional[float] = None
    mu: Optional[float] = None
    cap: int = DEFAULT_GROUPING_CAP

    @property
    def spec(self) -> PartitionSpec:
        """The partition spec; raises InvalidSpecError when it is invalid."""
        return PartitionSpec(m=self.m, n=self.n, M=self.big_m, N=self.workers, L=self.l)

    def violations(self) -> List[str]:
        """Every violated constraint, empty when the config is usable."""
        problems = partition_spec_violations(self.m, self.n, self.big_m, self.workers, self.l)
        problems += desired_index_violations(self.desired, self.big_m)
        if self.prime < 2 or self.prime >= MAX_PRIME_EXCLUSIVE or not isprime(self.prime):
            problems.append(f"p must be a prime below 2^64 (got {self.prime})")
        else:
            problems += field_capacity_violations(
                self.prime, self.m, self.n, self.big_m, self.workers, self.l
            )
        return problems + self._run_violations()

    def timing_violations(self) -> List[str]:
        """
        Constraints on the fields the figure commands read.

        The figures fix their own grouping (n = 2, one block per worker), so
        only N and M are checked as a partition.
        """
        problems = partition_spec_violations(1, FIGURE_GROUPS, self.big_m, self.workers, 1)
        return problems + self._run_violations()

    def _run_violations(self) -> List[str]:
        problems = []
        if self.trials < 1:
            problems.append(f"trials ≥ 1 (got {self.trials})")
        if self.cap < 1:
            problems.append(f"cap ≥ 1 (got {self.cap})")
        if self.fig not in SUPPORTED_FIGURES:
            problems.append(f"fig must be one of {SUPPORTED_FIGURES} (got {self.fig})")
        if self.convention not in {c.value for c in Convention}:
            problems.append(f"unknown convention {self.convention!r}")
        return problems

    def validate(self, timing_only: bool = False) -> "RunConfig":
        """
        Args:
            timing_only: Check only what `simulate` reads.

        Raises:
            InvalidSpecError: Naming every violated constraint.
        """
        problems = self.timing_violations() if timing_only else self.violations()
        if problems:
            raise InvalidSpecError(problems)
        return self


def _to_int(key: str, raw: str) -> int:
    # Accept underscores and 0x prefixes so 2^61-1 can be written readably
    try:
        return int(raw.strip().replace("_", ""), 0)
    except ValueError:
        raise InvalidSpecError([f"{key} must be an integer (got {raw!r})"])


def _to_float(key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise InvalidSpecError([f"{key} must be a number (got {raw!r})"])


def _to_dims(key: str, raw: str) -> Tuple[int, int, int]:
    try:
        return parse_dims(raw)
    except ValueError as exc:
        raise InvalidSpecError([str(exc)])


_PARSERS = {
    "prime": _to_int,
    "dims": _to_dims,
    "m": _to_int,
    "n": _to_int,
    "big_m": _to_int,
    "workers": _to_int,
    "l": _to_int,
    "desired": _to_int,
    "seed": _to_int,
    "trials": _to_int,
    "convention": lambda key, raw: raw.strip().lower(),
    "fig": _to_int,
    "out": lambda key, raw: raw.strip(),
    "gamma": _to_float,
    "mu": _to_float,
    "cap": _to_int,
}


def parse_config_values(values: Mapping[str, Optional[str]], source: str = "config") -> Dict[str, Any]:
    """
    Convert raw string values into typed RunConfig fields.

    Unknown keys are logged and skipped; keys without a value are ignored.

    Raises:
        InvalidSpecError: If a value cannot be parsed.
    """
    parsed: Dict[str, Any] = {}
    for raw_key, raw_value in values.items():
        key = raw_key.strip().lower().replace("-", "_")
        if key not in _PARSERS:
            logger.warning(f"Ignoring unknown key {raw_key!r} in {source}")
            continue
        if raw_value is None or raw_value.strip() == "":
            continue
        parsed[key] = _PARSERS[key](key, raw_value)
    return parsed


def read_config_file(path: str) -> Dict[str, Any]:
    """
    Read one `key = value` config file.

    Raises:
        InvalidSpecError: If the file is missing or a value is malformed.
    """
    config_path = Path(path)
    if not config_path.is_file():
        raise InvalidSpecError([f"config file not found: {path}"])
    logger.debug(f"Reading config from {config_path}")
    return parse_config_values(dotenv_values(config_path), source=str(config_path))


def load_config(
    config_path: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """
    Resolve a RunConfig from every layer.

    Args:
        config_path: File given with --config.
        overrides: Explicit flag values; None entries are skipped.
        environ: Environment to read PRIVCODE_CONFIG from (default: os.environ).

    Returns:
        The resolved config. It is not validated here.
    """
    environ = os.environ if environ is None else environ
    config = RunConfig()

    env_path = environ.get(CONFIG_ENV_VAR)
    if env_path:
        config = replace(config, **read_config_file(env_path))
    if config_path:
        config = replace(config, **read_config_file(config_path))
    if overrides:
        known = {f.name for f in fields(RunConfig)}
        explicit = {k: v for k, v in overrides.items() if k in known and v is not None}
        config = replace(config, **explicit)
    return config
