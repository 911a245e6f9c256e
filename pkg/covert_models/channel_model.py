"""
Channel Model
Shared domain types for the covert PPM link: optical channel parameters,
session geometry, the secret-key container type and the covertness budget,
plus config-file ingestion and the bundled channel presets.
"""

import json
import logging
import math
import os
from typing import Any, Dict, List, NamedTuple, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError, ParameterRangeError, SessionGeometryError, require_nonnegative

logger = logging.getLogger(__name__)

TRANSMISSIVITY_TOL = 1e-12
MAX_FIELD_DEGREE = 16

PRESETS_PATH = os.path.join(os.path.dirname(__file__), "..", "models", "channel_presets.json")


class ChannelParams(BaseModel):
    """Optical channel seen by Bob and Willie.

    Mean photon numbers are per pulse (``nbar``, ``nbar_det_*``) or per mode
    (``nbar_T``, ``lambda_w``). Click probabilities are per mode.
    """

    model_config = ConfigDict(frozen=True)

    eta_b: float = Field(0.97, gt=0.0, le=1.0)
    eta_w: float = Field(0.03, ge=0.0, lt=1.0)
    nbar: float = Field(5.0, ge=0.0)
    nbar_T: float = Field(0.0, ge=0.0)
    lambda_w: float = Field(0.0, ge=0.0)
    p_D_b: float = Field(0.0, ge=0.0, lt=1.0)
    p_D_w: float = Field(0.0, ge=0.0, lt=1.0)
    nbar_det_b: float = Field(0.0, ge=0.0)
    nbar_det_w: float = Field(0.0, ge=0.0)

    @model_validator(mode="before")
    @classmethod
    def _fill_eta_w(cls, data: Any) -> Any:
        if isinstance(data, dict) and "eta_w" not in data and "eta_b" in data:
            data = dict(data)
            data["eta_w"] = 1.0 - float(data["eta_b"])
        return data

    @model_validator(mode="after")
    def _check_beamsplitter(self) -> "ChannelParams":
        if abs(self.eta_b + self.eta_w - 1.0) > TRANSMISSIVITY_TOL:
            raise ParameterRangeError(
                f"eta_b + eta_w must equal 1 (got {self.eta_b} + {self.eta_w})",
                code="TRANSMISSIVITY_SUM",
            )
        return self

    @classmethod
    def from_source(
        cls,
        nbar: float,
        eta_b: float,
        qe_b: float = 1.0,
        qe_w: float = 1.0,
        **kwargs: Any,
    ) -> "ChannelParams":
        """Build parameters from source-side quantities.

        Detected means fold the detector quantum efficiencies into the
        beamsplitter split: nbar_det_b = eta_b*qe_b*nbar and
        nbar_det_w = (1 - eta_b)*qe_w*nbar.
        """
        for name, value in (("qe_b", qe_b), ("qe_w", qe_w)):
            if not 0.0 <= value <= 1.0:
                raise ParameterRangeError(f"{name} must lie in [0, 1], got {value}")
        eta_w = 1.0 - eta_b
        return cls(
            nbar=nbar,
            eta_b=eta_b,
            eta_w=eta_w,
            nbar_det_b=eta_b * qe_b * nbar,
            nbar_det_w=eta_w * qe_w * nbar,
            **kwargs,
        )

    def with_overrides(self, **overrides: Any) -> "ChannelParams":
        data = self.model_dump()
        if "eta_b" in overrides and "eta_w" not in overrides:
            data.pop("eta_w")
        data.update(overrides)
        return ChannelParams(**data)


def _is_power_of_two(value: int) -> bool:
    return value > 0 and (value & (value - 1)) == 0


def check_session_geometry(n: int, Q: int, zeta: float, rs_n: int, rs_k: int) -> None:
    """Raise SessionGeometryError with a specific code on the first violated invariant"""
    if Q < 2:
        raise SessionGeometryError(f"Q must be >= 2, got {Q}", code="Q_TOO_SMALL")
    if not _is_power_of_two(Q) or Q > 2 ** MAX_FIELD_DEGREE:
        raise SessionGeometryError(
            f"Q must be a power of two up to 2^{MAX_FIELD_DEGREE}, got {Q}", code="Q_NOT_FIELD_SIZE"
        )
    if n <= 0 or n % Q != 0:
        raise SessionGeometryError(f"Q={Q} does not divide n={n}", code="Q_NOT_DIVIDING_N")
    if not (0.0 <= zeta <= 1.0) or math.isnan(zeta):
        raise SessionGeometryError(f"zeta must lie in [0, 1], got {zeta}", code="ZETA_OUT_OF_RANGE")
    if rs_n != Q - 1:
        raise SessionGeometryError(
            f"rs_n must equal Q-1={Q - 1}, got {rs_n}", code="RS_LENGTH_MISMATCH"
        )
    if not (1 <= rs_k < rs_n):
        raise SessionGeometryError(
            f"rs_k must satisfy 1 <= rs_k < {rs_n}, got {rs_k}", code="RS_DIMENSION_OUT_OF_RANGE"
        )


class PpmSession(BaseModel):
    """Session geometry: n modes grouped into n/Q frames, RS(rs_n, rs_k) over GF(Q)"""

    model_config = ConfigDict(frozen=True)

    n: int
    Q: int = 32
    zeta: float
    rs_n: int = 31
    rs_k: int = 15

    @model_validator(mode="after")
    def _check_geometry(self) -> "PpmSession":
        check_session_geometry(self.n, self.Q, self.zeta, self.rs_n, self.rs_k)
        return self

    @classmethod
    def for_code(cls, n: int, Q: int, zeta: float, rs_k: int = 15) -> "PpmSession":
        return cls(n=n, Q=Q, zeta=zeta, rs_n=Q - 1, rs_k=rs_k)

    @property
    def n_frames(self) -> int:
        return self.n // self.Q

    @property
    def field_degree(self) -> int:
        return self.Q.bit_length() - 1

    @property
    def bits_per_symbol(self) -> float:
        return math.log2(self.Q)


class CovertBudget(BaseModel):
    """Covertness slack epsilon and reliability slack delta"""

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(0.05, gt=0.0, lt=0.5)
    delta: float = Field(0.05, gt=0.0, lt=1.0)


def validate_session(session: PpmSession, params: ChannelParams) -> None:
    """Re-check every PpmSession and ChannelParams invariant.

    Models built through ``model_construct`` skip their validators, so every
    entry point that accepts caller-built objects goes through here.
    """
    check_session_geometry(session.n, session.Q, session.zeta, session.rs_n, session.rs_k)
    try:
        ChannelParams.model_validate(params.model_dump())
    except ValidationError as e:
        first = e.errors()[0]
        raise ParameterRangeError(f"{first['loc'][0] if first['loc'] else 'params'}: {first['msg']}")


class WillieClickProbs(NamedTuple):
    p_r: float
    p_s: float


def derive_click_probs(
    params: ChannelParams, zeta: float, click_model: str = "detected"
) -> WillieClickProbs:
    """Per-pulse click probability p_r and per-mode signal-or-dark click probability p_s at Willie.

    ``click_model="detected"`` uses the detected mean nbar_det_w;
    ``"raw"`` uses the channel form 1 - exp(-eta_w * nbar).
    """
    require_nonnegative("zeta", zeta)
    if zeta > 1.0:
        raise ParameterRangeError(f"zeta must be <= 1, got {zeta}")
    if click_model == "detected":
        mean = params.nbar_det_w
    elif click_model == "raw":
        mean = params.eta_w * params.nbar
    else:
        raise ConfigError(f"unknown click_model '{click_model}'", code="BAD_VALUE")
    p_r = float(-np.expm1(-require_nonnegative("mean detected photons", mean)))
    p_s = zeta * p_r * (1.0 - params.p_D_w) + params.p_D_w
    return WillieClickProbs(p_r=p_r, p_s=min(1.0, p_s))


def bob_pulse_click_prob(params: ChannelParams) -> float:
    return float(-np.expm1(-params.nbar_det_b))


def dark_click_probability(mean_noise: float, model: str = "poisson") -> float:
    """Per-mode click probability from a mean noise photon number.

    A threshold detector clicks on any photon: Poisson light gives
    1 - exp(-x), thermal light gives x/(1+x).
    """
    require_nonnegative("mean_noise", mean_noise)
    if model == "poisson":
        return float(-np.expm1(-mean_noise))
    if model == "thermal":
        return mean_noise / (1.0 + mean_noise)
    raise ConfigError(f"unknown dark-click model '{model}'", code="BAD_VALUE")


# Presets

def _read_presets() -> Dict[str, Any]:
    with open(PRESETS_PATH, "r") as f:
        return json.load(f)


def preset_names() -> List[str]:
    return list(_read_presets()["rows"].keys())


def load_preset(name: str, **overrides: Any) -> ChannelParams:
    """Channel parameters for a named row of models/channel_presets.json"""
    presets = _read_presets()
    rows = presets["rows"]
    if name not in rows:
        raise ConfigError(
            f"unknown preset '{name}', available: {', '.join(rows)}", code="UNKNOWN_PRESET"
        )
    values = dict(presets["source"])
    values.update({k: v for k, v in rows[name].items() if k in ChannelParams.model_fields})
    values.update(overrides)
    return ChannelParams(**values)


# Config ingestion

CONFIG_KEYS = (
    "eta_b", "nbar", "nbar_T", "lambda_w", "p_D_b", "p_D_w", "nbar_det_b", "nbar_det_w",
    "n", "Q", "zeta", "rs_k", "seed", "trials",
    "regime", "preset", "detector", "click_model", "alpha", "decode_bob",
)
INT_KEYS = ("Q", "rs_k", "seed", "trials")
CHANNEL_KEYS = ("eta_b", "nbar", "nbar_T", "lambda_w", "p_D_b", "p_D_w", "nbar_det_b", "nbar_det_w")

REGIME_PRESETS = {
    "careful": "careful",
    "careless": "careless",
    "fixed-0.003": "fixed-0.003",
    "fixed-0.008": "fixed-0.008",
    "explicit": "target",
}


def _parse_int(key: str, raw: Union[str, int, float]) -> int:
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected an integer, got '{raw}'", code="BAD_VALUE")
    if not value.is_integer():
        raise ConfigError(f"{key}: expected an integer, got '{raw}'", code="BAD_VALUE")
    return int(value)


class RunConfig(BaseModel):
    """Validated contents of a key=value config file"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    eta_b: Optional[float] = None
    nbar: Optional[float] = None
    nbar_T: Optional[float] = None
    lambda_w: Optional[float] = None
    p_D_b: Optional[float] = None
    p_D_w: Optional[float] = None
    nbar_det_b: Optional[float] = None
    nbar_det_w: Optional[float] = None
    n: List[int] = Field(default_factory=list)
    Q: int = Field(32, ge=2)
    zeta: Optional[float] = None
    rs_k: int = 15
    seed: int = 0
    trials: int = Field(1000, ge=1)
    regime: str = "careful"
    preset: Optional[str] = None
    detector: str = "llr"
    click_model: str = "detected"
    alpha: float = Field(0.05, gt=0.0, lt=1.0)
    decode_bob: bool = True

    @field_validator("regime")
    @classmethod
    def _known_regime(cls, value: str) -> str:
        if value not in REGIME_PRESETS:
            raise ValueError(f"regime must be one of {sorted(REGIME_PRESETS)}")
        return value

    @field_validator("detector")
    @classmethod
    def _known_detector(cls, value: str) -> str:
        if value not in ("llr", "spd", "count"):
            raise ValueError("detector must be one of llr, spd, count")
        return value

    @field_validator("click_model")
    @classmethod
    def _known_click_model(cls, value: str) -> str:
        if value not in ("detected", "raw"):
            raise ValueError("click_model must be detected or raw")
        return value

    def channel_params(self, regime: Optional[str] = None) -> ChannelParams:
        """Preset row (explicit, or the one matching the regime) overlaid with explicit keys"""
        explicit = {k: getattr(self, k) for k in CHANNEL_KEYS if getattr(self, k) is not None}
        preset = self.preset or REGIME_PRESETS[regime or self.regime]
        return load_preset(preset, **explicit)


def parse_config_text(text: str) -> Dict[str, str]:
    """Split key=value lines; '#' starts a comment. Unknown or repeated keys are errors."""
    values: Dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got '{line}'", code="MALFORMED_LINE")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(
                f"line {lineno}: unknown config key '{key}'", code="UNKNOWN_KEY"
            )
        if key in values:
            raise ConfigError(f"line {lineno}: key '{key}' given twice", code="MALFORMED_LINE")
        values[key] = raw
    return values


def build_run_config(values: Dict[str, Any]) -> RunConfig:
    data: Dict[str, Any] = {}
    for key, raw in values.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key '{key}'", code="UNKNOWN_KEY")
        if key == "n":
            items = raw if isinstance(raw, (list, tuple)) else str(raw).split(",")
            data["n"] = [_parse_int("n", item) for item in items if str(item).strip()]
        elif key in INT_KEYS:
            data[key] = _parse_int(key, raw)
        else:
            data[key] = raw
    try:
        return RunConfig(**data)
    except ValidationError as e:
        first = e.errors()[0]
        key = first["loc"][0] if first["loc"] else "config"
        raise ConfigError(f"{key}: {first['msg']}", code="BAD_VALUE")


def load_run_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Read a config file (optional) and apply overrides on top"""
    values: Dict[str, Any] = {}
    if path:
        try:
            with open(path, "r") as f:
                values.update(parse_config_text(f.read()))
        except OSError as e:
            raise ConfigError(f"cannot read config file {path}: {e}", code="CONFIG_UNREADABLE")
        logger.info(f"Loaded config from {path}")
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    return build_run_config(values)
