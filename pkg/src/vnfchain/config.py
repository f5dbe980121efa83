"""System configuration and its TOML file format.

A one-BS system has queues 1..6, a two-BS system queues 1..11; queue 6 is
the core server in both. Example file::

    topology = "one_bs"
    p = 0.8
    alpha = 0.5
    mu = [0.5, 0.5, 0.5, 0.5, 0.5, 1.0]
    m = [10, 10, 10, 10, 10, 100]

``mu`` and ``m`` may also be tables keyed by queue number (``[mu] 1 = 0.5``).
For ``two_bs``, ``p`` and ``alpha`` are two-element lists and ``mu[6]`` is the
per-CPU service probability of the core.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Sequence

import tomli


class ConfigError(ValueError):
    pass


class Role(str, Enum):
    PROCESSING = "processing"
    TRANSMISSION = "transmission"


@dataclass(frozen=True)
class QueueId:
    index: int
    role: Role

    def __str__(self) -> str:
        return f"Q{self.index}"


_ONE_BS_ROLES = {1: Role.PROCESSING, 2: Role.TRANSMISSION, 3: Role.TRANSMISSION,
                 4: Role.PROCESSING, 5: Role.TRANSMISSION, 6: Role.PROCESSING}
_TWO_BS_ROLES = {**_ONE_BS_ROLES, 7: Role.PROCESSING, 8: Role.TRANSMISSION,
                 9: Role.TRANSMISSION, 10: Role.PROCESSING, 11: Role.TRANSMISSION}

TOPOLOGIES = ("one_bs", "two_bs")
CORE = 6


def queue_ids(topology: str) -> list[QueueId]:
    roles = _ONE_BS_ROLES if topology == "one_bs" else _TWO_BS_ROLES
    return [QueueId(i, r) for i, r in roles.items()]


@dataclass(frozen=True)
class SystemConfig:
    topology: str
    p: tuple[float, ...]
    alpha: tuple[float, ...]
    mu: Mapping[int, float]
    m: Mapping[int, int | None]
    core_infinite: bool = False
    n_cpus: int = 1

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(x) for x in _as_seq(self.p)))
        object.__setattr__(self, "alpha", tuple(float(x) for x in _as_seq(self.alpha)))
        object.__setattr__(self, "mu", {int(k): float(v) for k, v in _as_map(self.mu).items()})
        m = {int(k): (None if v is None else int(v)) for k, v in _as_map(self.m).items()}
        object.__setattr__(self, "m", m)
        self.validate()

    def validate(self) -> None:
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"topology must be one of {TOPOLOGIES}, got {self.topology!r}")
        n_bs = 1 if self.topology == "one_bs" else 2
        n_q = 6 if n_bs == 1 else 11
        if len(self.p) != n_bs or len(self.alpha) != n_bs:
            raise ConfigError(f"{self.topology} needs {n_bs} value(s) for p and alpha")
        for name, values in (("p", self.p), ("alpha", self.alpha)):
            for v in values:
                if not 0.0 <= v <= 1.0:
                    raise ConfigError(f"{name}={v!r} must lie in [0, 1]")
        expected = set(range(1, n_q + 1))
        if set(self.mu) != expected:
            raise ConfigError(f"mu must define queues {sorted(expected)}, got {sorted(self.mu)}")
        for q, v in self.mu.items():
            if not 0.0 < v <= 1.0:
                raise ConfigError(f"mu[{q}]={v!r} must lie in (0, 1]")
        m_expected = expected - ({CORE} if self.core_infinite else set())
        m_given = {q for q, v in self.m.items() if v is not None}
        if m_given != m_expected:
            raise ConfigError(f"m must define queues {sorted(m_expected)}, got {sorted(m_given)}")
        for q in m_expected:
            if self.m[q] < 1:
                raise ConfigError(f"m[{q}]={self.m[q]!r} must be a positive integer")
        if self.core_infinite:
            if self.topology != "one_bs":
                raise ConfigError("core_infinite is only available for one_bs")
            if self.m.get(CORE) is not None:
                raise ConfigError("core_infinite conflicts with a finite m[6]")
        elif self.m[CORE] < (2 if n_bs == 1 else 4):
            raise ConfigError(f"m[6]={self.m[CORE]} too small for the {self.topology} core")
        if self.n_cpus != n_bs:
            raise ConfigError(f"{self.topology} requires n_cpus={n_bs}")

    # convenience accessors -------------------------------------------------
    @property
    def queues(self) -> list[int]:
        return sorted(self.mu)

    @property
    def p1(self) -> float:
        return self.p[0]

    @property
    def p2(self) -> float:
        return self.p[1]

    def replace(self, **changes: Any) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def with_param(self, name: str, value: float) -> "SystemConfig":
        """Return a copy with one sweepable parameter changed.

        Names: ``p``, ``p1``, ``p2``, ``alpha`` (all stations), ``alpha1``,
        ``alpha2``, ``mu_<q>``, ``M_<q>``.
        """
        if name == "p" and self.topology == "one_bs":
            return self.replace(p=(value,))
        if name == "alpha":
            return self.replace(alpha=(value,) * len(self.alpha))
        if name in ("p1", "p2", "alpha1", "alpha2"):
            attr, k = name[:-1], int(name[-1]) - 1
            if k >= len(getattr(self, attr)):
                raise ConfigError(f"{name} not defined for {self.topology}")
            vals = list(getattr(self, attr))
            vals[k] = value
            return self.replace(**{attr: tuple(vals)})
        if name.startswith("mu_"):
            q = int(name[3:])
            if q not in self.mu:
                raise ConfigError(f"no queue {q}")
            return self.replace(mu={**self.mu, q: value})
        if name.startswith(("M_", "m_")):
            q = int(name[2:])
            if q not in self.mu:
                raise ConfigError(f"no queue {q}")
            return self.replace(m={**self.m, q: int(value)})
        raise ConfigError(f"unknown sweep axis {name!r}")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "topology": self.topology,
            "p": self.p[0] if len(self.p) == 1 else list(self.p),
            "alpha": self.alpha[0] if len(self.alpha) == 1 else list(self.alpha),
            "mu": {str(k): v for k, v in sorted(self.mu.items())},
            "m": {str(k): v for k, v in sorted(self.m.items()) if v is not None},
            "core_infinite": self.core_infinite,
            "n_cpus": self.n_cpus,
        }
        return out


def _as_seq(value: Any) -> Sequence[Any]:
    return (value,) if isinstance(value, (int, float)) else value


def _as_map(value: Any) -> Mapping[Any, Any]:
    if isinstance(value, Mapping):
        return value
    return {i + 1: v for i, v in enumerate(value)}


def one_bs(p: float, alpha: float, mu: Sequence[float] | Mapping[int, float],
           m: Sequence[int | None] | Mapping[int, int | None], core_infinite: bool = False) -> SystemConfig:
    m = dict(_as_map(m))
    if core_infinite:
        m.pop(CORE, None)
    return SystemConfig("one_bs", (p,), (alpha,), mu, m, core_infinite=core_infinite, n_cpus=1)


def two_bs(p1: float, p2: float, alpha1: float, alpha2: float,
           mu: Sequence[float] | Mapping[int, float],
           m: Sequence[int] | Mapping[int, int]) -> SystemConfig:
    return SystemConfig("two_bs", (p1, p2), (alpha1, alpha2), mu, m, n_cpus=2)


_ALLOWED_KEYS = {f.name for f in dataclasses.fields(SystemConfig)}


def config_from_dict(data: Mapping[str, Any]) -> SystemConfig:
    unknown = set(data) - _ALLOWED_KEYS
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    missing = {"topology", "p", "alpha", "mu", "m"} - set(data)
    if missing:
        raise ConfigError(f"missing config key(s): {', '.join(sorted(missing))}")
    data = dict(data)
    topology = data["topology"]
    data.setdefault("n_cpus", 2 if topology == "two_bs" else 1)
    for key in ("mu", "m"):
        if isinstance(data[key], Mapping):
            try:
                data[key] = {int(k): v for k, v in data[key].items()}
            except ValueError as exc:
                raise ConfigError(f"{key} table keys must be queue numbers") from exc
    if data.get("core_infinite") and not isinstance(data["m"], Mapping):
        m = _as_map(data["m"])
        data["m"] = {k: v for k, v in m.items() if k != CORE}
    try:
        return SystemConfig(**data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> SystemConfig:
    text = Path(path).read_text()
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        return config_from_dict(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def dump_config(cfg: SystemConfig) -> str:
    d = cfg.to_dict()
    lines = [f'topology = "{d["topology"]}"']
    for key in ("p", "alpha"):
        lines.append(f"{key} = {d[key]!r}")
    lines.append(f"core_infinite = {'true' if d['core_infinite'] else 'false'}")
    lines.append(f"n_cpus = {d['n_cpus']}")
    for key in ("mu", "m"):
        lines.append(f"\n[{key}]")
        lines.extend(f'"{k}" = {v!r}' for k, v in d[key].items())
    return "\n".join(lines) + "\n"
