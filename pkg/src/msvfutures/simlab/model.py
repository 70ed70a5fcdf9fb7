"""Full multiscale model specification and its plain-text config format.

    dU = kappa (m - U) dt + eta(Y, Z) dW0
    dY = (m_y - Y)/eps dt + nu sqrt(2/eps) dW1
    dZ = delta kappa_z (m_z - Z) dt + sqrt(delta) nu_z dW2
    V  = exp(s(t) + U)

The slow factor is an OU lab fixture; its law is otherwise left open.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from ..errors import DomainError, ParseError

ETA_FLOOR_Z = 1e-6
VOL_MAPS = ("exp", "const")


def vol_map(kind: str, y, z):
    """eta(y, z); ``exp`` is z*e^y, ``const`` ignores y."""
    z = np.maximum(z, ETA_FLOOR_Z)
    if kind == "exp":
        return z * np.exp(y)
    if kind == "const":
        return z + 0.0 * np.asarray(y)
    raise DomainError(f"unknown vol map {kind!r}")


@dataclass(frozen=True)
class ModelSpec:
    kappa: float
    eps: float
    delta: float
    m: float = 0.0
    u0: float = 0.0
    m_y: float = 0.0
    nu: float = 0.5
    y0: float | None = None
    kappa_z: float = 1.0
    m_z: float = 0.3
    nu_z: float = 0.1
    z0: float = 0.3
    rho1: float = 0.0
    rho2: float = 0.0
    rho12: float = 0.0
    rate: float = 0.0
    vol: str = "exp"
    season_amp: float = 0.0
    season_phase: float = 0.0
    eta_cap: float = 50.0
    substeps: int = 50

    def __post_init__(self):
        for name in ("kappa", "eps", "delta", "nu"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive, got {v}")
        if self.nu_z < 0 or self.kappa_z < 0:
            raise DomainError("nu_z and kappa_z must be non-negative")
        if not self.z0 > 0:
            raise DomainError("z0 must be positive")
        r1, r2, r12 = self.rho1, self.rho2, self.rho12
        if max(abs(r1), abs(r2), abs(r12)) >= 1:
            raise DomainError("correlations must lie strictly inside (-1, 1)")
        if 1 + 2 * r1 * r2 * r12 - r1 ** 2 - r2 ** 2 - r12 ** 2 <= 0:
            raise DomainError("correlation matrix of (W0, W1, W2) is not positive definite")
        if self.vol not in VOL_MAPS:
            raise DomainError(f"vol must be one of {VOL_MAPS}")
        if self.eta_cap <= 1 or self.substeps < 1:
            raise DomainError("eta_cap must exceed 1 and substeps must be >= 1")

    @property
    def y_start(self) -> float:
        return self.m_y if self.y0 is None else self.y0

    @property
    def beta(self) -> float:
        return self.nu * np.sqrt(2.0)

    def eta(self, y, z):
        return vol_map(self.vol, y, z)

    def seasonality(self, t):
        return self.season_amp * np.sin(2 * np.pi * (np.asarray(t, dtype=float) + self.season_phase))

    def w0_loadings(self):
        """(a1, a2, a3) with W0 = a1 B1 + a2 B2 + a3 B3, W1 = B1, W2 = rho12 B1 + sqrt(1-rho12^2) B2."""
        a1 = self.rho1
        a2 = (self.rho2 - self.rho1 * self.rho12) / np.sqrt(1 - self.rho12 ** 2)
        a3 = np.sqrt(max(1 - a1 * a1 - a2 * a2, 0.0))
        return a1, a2, a3

    def with_scales(self, eps: float, delta: float) -> "ModelSpec":
        return replace(self, eps=eps, delta=delta)

    def to_config(self) -> str:
        lines = []
        for k, v in asdict(self).items():
            if v is None:
                continue
            lines.append(f"{k} = {v!r}" if not isinstance(v, str) else f"{k} = {v}")
        return "\n".join(lines) + "\n"


_FIELD_TYPES = {f.name: f.type for f in fields(ModelSpec)}


def _coerce(key, raw, lineno):
    t = _FIELD_TYPES[key]
    try:
        if key == "vol":
            return raw
        if key == "substeps":
            return int(raw)
        if raw.lower() == "none" and "None" in str(t):
            return None
        return float(raw)
    except ValueError:
        raise ParseError(f"bad value for {key}: {raw!r}", lineno) from None


def parse_config(text: str) -> tuple[ModelSpec, dict]:
    """Parse ``key = value`` lines. ModelSpec keys build the spec; other keys are returned as extras."""
    spec_kw, extras = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key = value, got {line!r}", lineno)
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in _FIELD_TYPES:
            spec_kw[key] = _coerce(key, raw, lineno)
        else:
            extras[key] = raw
    missing = [k for k in ("kappa", "eps", "delta") if k not in spec_kw]
    if missing:
        raise ParseError(f"missing required keys: {', '.join(missing)}", 0)
    return ModelSpec(**spec_kw), extras


def load_config(path) -> tuple[ModelSpec, dict]:
    return parse_config(Path(path).read_text())
