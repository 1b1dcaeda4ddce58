"""
Models Module
Pydantic models for process parameters, numeric settings and run configuration
"""
import os
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


ENV_PREFIX = "PDTP_"


# --- 1. Routing enums ---
class Branch(str, Enum):
    LOW = "low"                  # 0 < xi < 1 series
    HIGH = "high"                # xi > 1 series
    ORACLE_ONLY = "oracle-only"  # band around xi = 1


class Route(str, Enum):
    CLOSED_FORM = "closed-form"
    ORACLE = "oracle"
    AUTO = "auto"


class TailMode(str, Enum):
    STATE = "state"
    INTERARRIVAL = "interarrival"


# --- 2. Numeric settings ---
class NumericsSettings(BaseModel):
    """Every numeric knob of the library, overridable through PDTP_* variables"""
    model_config = ConfigDict(frozen=True)

    series_tol: float = Field(1e-14, gt=0)
    closed_form_abs_tol: float = Field(1e-12, gt=0)
    prabhakar_tol: float = Field(1e-12, gt=0)
    max_terms: int = Field(10_000, ge=1)
    cancellation_guard: float = Field(1e8, gt=1)
    extended_precision: bool = True
    mp_base_dps: int = Field(30, ge=15)
    mp_max_dps: int = Field(600, ge=30)
    oracle_band: float = Field(0.05, ge=0, lt=1)
    oracle_length: int = Field(128, ge=1)
    oracle_max_length: int = Field(4096, ge=1)
    eps_tail: float = Field(1e-6, gt=0, le=1e-3)
    sampler_max_table: int = Field(16384, ge=2)
    normalization_tol: float = Field(1e-8, gt=0)
    negative_clamp: float = Field(1e-12, ge=0)

    @classmethod
    def from_env(cls, environ: Optional[Dict[str, str]] = None) -> "NumericsSettings":
        """
        Build settings from PDTP_<FIELD> environment variables

        Args:
            environ: Mapping to read instead of os.environ

        Returns:
            Settings with every variable found applied over the defaults
        """
        source = os.environ if environ is None else environ
        overrides = {}
        for name in cls.model_fields:
            value = source.get(ENV_PREFIX + name.upper())
            if value is not None:
                overrides[name] = value
        return cls.model_validate(overrides)


DEFAULT_SETTINGS = NumericsSettings()


def resolve_settings(settings: Optional[NumericsSettings]) -> NumericsSettings:
    return DEFAULT_SETTINGS if settings is None else settings


# --- 3. Discrete process parameters ---
class PdtpParams(BaseModel):
    """Discrete-time process parameters (alpha, nu, xi)"""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(gt=0, le=1)
    nu: float = Field(gt=0)
    xi: float = Field(gt=0)

    def branch(self, band: float = DEFAULT_SETTINGS.oracle_band) -> Branch:
        """Series branch applying to xi, given the half-width of the oracle band"""
        if abs(self.xi - 1.0) <= band:
            return Branch.ORACLE_ONLY
        return Branch.LOW if self.xi < 1.0 else Branch.HIGH

    def with_nu(self, nu: float) -> "PdtpParams":
        return PdtpParams(alpha=self.alpha, nu=nu, xi=self.xi)

    def echo(self) -> Dict[str, float]:
        return {"alpha": self.alpha, "nu": self.nu, "xi": self.xi}


# --- 4. Continuous-limit parameters ---
class CtParams(BaseModel):
    """Continuous-time limit parameters (alpha, nu, xi0) plus an optional step h"""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(gt=0, le=1)
    nu: float = Field(gt=0)
    xi0: float = Field(gt=0)
    h: Optional[float] = Field(default=None, gt=0)

    def scaled_xi(self, h: Optional[float] = None) -> float:
        """Discrete time-scale xi(h) = xi0 * h**alpha"""
        step = self.h if h is None else h
        if step is None or step <= 0:
            raise ValueError("a positive step h is required to scale xi0")
        return self.xi0 * step ** self.alpha

    def discrete(self, h: Optional[float] = None) -> PdtpParams:
        return PdtpParams(alpha=self.alpha, nu=self.nu, xi=self.scaled_xi(h))

    def echo(self) -> Dict[str, Any]:
        data = {"alpha": self.alpha, "nu": self.nu, "xi0": self.xi0}
        if self.h is not None:
            data["h"] = self.h
        return data


# --- 5. Run configuration ---
COMMANDS = ("pmf", "states", "ct-states", "tail", "limit-probe", "walk", "simulate")
OUTPUT_FORMATS = ("csv", "json", "matrix")


class RunConfig(BaseModel):
    """One fully-resolved CLI invocation"""
    model_config = ConfigDict(frozen=True)

    command: str
    params: Optional[PdtpParams] = None
    ct: Optional[CtParams] = None
    t_values: List[int] = []
    n_values: List[int] = []
    t_grid: List[float] = []
    h_list: List[float] = []
    tail_mode: TailMode = TailMode.STATE
    route: Optional[Route] = None
    graph_path: Optional[str] = None
    graph_name: Optional[str] = None
    start: Optional[int] = None
    seed: int = Field(0, ge=0, lt=2 ** 64)
    walkers: int = Field(10_000, ge=1)
    threads: int = Field(1, ge=1)
    eps_tail: Optional[float] = Field(default=None, gt=0, le=1e-3)
    output: Optional[str] = None
    fmt: str = "csv"

    @model_validator(mode="after")
    def _check_command(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}; expected one of {', '.join(COMMANDS)}")
        if self.fmt not in OUTPUT_FORMATS:
            raise ValueError(f"unknown output format {self.fmt!r}")
        if self.fmt == "matrix":
            if self.command != "walk":
                raise ValueError("--format matrix is only available for 'walk'")
            if len(self.t_values) != 1 or self.start is not None:
                raise ValueError("--format matrix needs exactly one --t and no --start")
        needs_ct = self.command in ("ct-states", "limit-probe")
        if needs_ct and self.ct is None:
            raise ValueError(f"command {self.command!r} needs --alpha, --nu and --xi0")
        if not needs_ct and self.command != "tail" and self.params is None:
            raise ValueError(f"command {self.command!r} needs --alpha, --nu and --xi")
        if self.command == "tail" and self.params is None and self.ct is None:
            raise ValueError("command 'tail' needs either --xi or --xi0")
        return self

    def echo(self) -> List[Tuple[str, str]]:
        """
        Ordered key=value pairs reproducing this configuration

        Returns:
            List of (key, value) string pairs, flag spelling
        """
        pairs: List[Tuple[str, str]] = [("command", self.command)]
        if self.params is not None:
            pairs.extend((k, repr(v)) for k, v in self.params.echo().items())
        if self.ct is not None:
            pairs.extend((k, repr(v)) for k, v in self.ct.echo().items())
        if self.t_values:
            pairs.append(("t", ",".join(str(v) for v in self.t_values)))
        if self.n_values:
            pairs.append(("n", ",".join(str(v) for v in self.n_values)))
        if self.t_grid:
            pairs.append(("t-grid", ",".join(repr(v) for v in self.t_grid)))
        if self.h_list:
            pairs.append(("h-list", ",".join(repr(v) for v in self.h_list)))
        if self.command == "tail":
            pairs.append(("mode", self.tail_mode.value))
        if self.route is not None:
            pairs.append(("route", self.route.value))
        if self.graph_path is not None:
            pairs.append(("graph", self.graph_path))
        if self.graph_name is not None:
            pairs.append(("graph-name", self.graph_name))
        if self.start is not None:
            pairs.append(("start", str(self.start)))
        if self.command == "simulate":
            pairs.append(("seed", str(self.seed)))
            pairs.append(("walkers", str(self.walkers)))
        if self.eps_tail is not None:
            pairs.append(("eps-tail", repr(self.eps_tail)))
        return pairs
