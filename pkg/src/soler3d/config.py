"""Run configuration: a flat ``key = value`` file with optional ``[section]`` headers.

Sections only group keys, except ``[sector]``, which may repeat and opens a
new sector each time. Comments start with ``#`` or ``;``.

Example::

    mass = 1
    power = 1
    omega = 0.9

    [grid]
    N = 400
    r_max = 40

    [sector]
    kind = ONE_FREQ
    ell = 1
    m = 0
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

from .errors import ConfigError, InvalidArgument
from .linops import BlockKind
from .profiles import NonlinearityModel
from .spectra import Sector

__all__ = ["RunConfig", "load_config", "parse_config"]

_FLOAT_KEYS = {"mass", "r_max", "omega", "omega_lo", "omega_hi", "tol_real", "tol_omega", "profile_tol", "strength"}
_INT_KEYS = {"power", "N", "ell_max", "workers"}
_STR_KEYS = {"field", "out"}
_SECTOR_KEYS = {"kind": str, "ell": int, "m": int, "nu": float}


@dataclass
class RunConfig:
    model: NonlinearityModel = field(default_factory=NonlinearityModel)
    N: int = 400
    r_max: float = 40.0
    sectors: list = field(default_factory=lambda: [Sector()])
    omega: float | None = None
    omega_range: tuple[float, float] | None = None
    tol_real: float = 1e-4
    tol_omega: float = 2e-3
    profile_tol: float = 1e-12
    ell_max: int = 3
    field_path: str | None = None
    out_dir: str | None = None
    workers: int = 1
    digest: str = ""

    def require_omega(self) -> float:
        if self.omega is None:
            raise ConfigError("required for this command", key="omega")
        return self.omega

    def require_range(self) -> tuple[float, float]:
        if self.omega_range is None:
            raise ConfigError("omega_lo and omega_hi are required for this command", key="omega_lo")
        return self.omega_range


def _convert(key: str, raw: str, kind):
    try:
        if kind is int:
            val = float(raw)
            if val != int(val):
                raise ValueError
            return int(val)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r} as {kind.__name__}", key=key) from None


def parse_config(text: str, base_dir: str | None = None) -> RunConfig:
    flat: dict[str, object] = {}
    sectors: list[dict] = []
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            if section == "sector":
                sectors.append({})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'", key=line)
        key, raw = (s.strip() for s in line.split("=", 1))
        if section == "sector":
            if key not in _SECTOR_KEYS:
                raise ConfigError("unknown sector key", key=f"sector.{key}")
            sectors[-1][key] = _convert(f"sector.{key}", raw, _SECTOR_KEYS[key])
            continue
        if key in _FLOAT_KEYS:
            flat[key] = _convert(key, raw, float)
        elif key in _INT_KEYS:
            flat[key] = _convert(key, raw, int)
        elif key in _STR_KEYS:
            flat[key] = raw
        else:
            raise ConfigError("unknown key", key=key)

    cfg = RunConfig()
    try:
        cfg.model = NonlinearityModel(
            mass=flat.get("mass", 1.0), power=flat.get("power", 1), strength=flat.get("strength", 1.0)
        )
    except InvalidArgument as exc:
        raise ConfigError(str(exc), key="mass" if "mass" in str(exc) else "power") from None
    cfg.N = flat.get("N", cfg.N)
    if cfg.N < 16:
        raise ConfigError("must be at least 16", key="N")
    cfg.r_max = flat.get("r_max", cfg.r_max)
    if cfg.r_max <= 0:
        raise ConfigError("must be positive", key="r_max")
    for key in ("tol_real", "tol_omega", "profile_tol"):
        if key in flat:
            if flat[key] <= 0:
                raise ConfigError("tolerances must be positive", key=key)
            setattr(cfg, key, flat[key])
    if "omega" in flat:
        w = flat["omega"]
        if not 0 < w < cfg.model.mass:
            raise ConfigError(f"must lie in (0, mass={cfg.model.mass})", key="omega")
        cfg.omega = w
    if ("omega_lo" in flat) != ("omega_hi" in flat):
        raise ConfigError("omega_lo and omega_hi must be given together", key="omega_lo" if "omega_lo" not in flat else "omega_hi")
    if "omega_lo" in flat:
        lo, hi = flat["omega_lo"], flat["omega_hi"]
        if not lo < hi:
            raise ConfigError(f"omega range needs lo < hi, got [{lo}, {hi}]", key="omega_lo")
        if not (0 < lo and hi < cfg.model.mass):
            raise ConfigError("omega range must lie in (0, mass)", key="omega_hi")
        cfg.omega_range = (lo, hi)
    cfg.ell_max = flat.get("ell_max", cfg.ell_max)
    if cfg.ell_max < 0:
        raise ConfigError("must be nonnegative", key="ell_max")
    cfg.workers = max(1, flat.get("workers", 1))
    if "field" in flat:
        path = flat["field"]
        cfg.field_path = path if base_dir is None or os.path.isabs(path) else os.path.join(base_dir, path)
    cfg.out_dir = flat.get("out")
    if sectors:
        cfg.sectors = []
        for i, s in enumerate(sectors):
            try:
                kind = BlockKind(s.get("kind", "ONE_FREQ").upper())
            except ValueError:
                raise ConfigError(f"unknown kind {s.get('kind')!r}", key=f"sector[{i}].kind") from None
            try:
                cfg.sectors.append(Sector(kind=kind, ell=s.get("ell", 0), m=s.get("m", 0), nu=s.get("nu", 0.0)))
            except InvalidArgument as exc:
                raise ConfigError(str(exc), key=f"sector[{i}].m") from None
    cfg.digest = hashlib.sha256(text.encode()).hexdigest()
    return cfg


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc.strerror}", key=str(path)) from None
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))
