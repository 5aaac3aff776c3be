"""Scenario configuration, cell topology and channel generation."""

import hashlib
import math
from dataclasses import dataclass, field, fields, replace
from functools import cached_property

import numpy as np

from .errors import ConfigError, InvalidPlacement
from .utility import UTILITY_KINDS, UtilitySpec

__all__ = [
    "PLACEMENTS",
    "ScenarioConfig",
    "Topology",
    "ChannelSet",
    "parse_config",
    "load_config",
    "scenario_streams",
    "hex_bs_positions",
    "generate_topology",
    "generate_channels",
    "pathloss_std",
    "candidate_bs",
]

PLACEMENTS = ("cell_edge_congested", "uniform", "explicit")
USER_ORDERS = ("round_robin", "random")
INIT_MODES = ("strongest", "random")

PATHLOSS_REF_M = 200.0
PATHLOSS_EXPONENT = 3.5
SHADOWING_STD_DB = 8.0

# Annulus radii as fractions of bs_spacing: [90, 100] m and [20, 100] m at 200 m.
EDGE_ANNULUS = (0.45, 0.5)
UNIFORM_ANNULUS = (0.1, 0.5)


def _as_tuple(value, length, cast, name):
    if isinstance(value, (int, float, np.integer, np.floating)):
        return tuple(cast(value) for _ in range(length))
    value = tuple(cast(v) for v in value)
    if len(value) == 1:
        return value * length
    if len(value) != length:
        raise ConfigError(f"{name} has {len(value)} entries, expected 1 or {length}")
    return value


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to build and solve one network instance.

    Scalars given for per-user or per-BS quantities are broadcast, so
    ``tx_antennas=2`` means every user has two antennas. ``power_budget=None``
    derives the budget from ``snr_db`` as ``10**(snr_db/10)``.
    """

    num_users: int = 16
    num_bs: int = 7
    tx_antennas: tuple = (2,)
    rx_antennas: tuple = (4,)
    power_budget: object = None
    noise_power: tuple = (1.0,)
    weights: tuple = (1.0,)
    utility_kind: str = "proportional_fair"
    rate_floor: float = 1e-8
    candidate_bs_limit: int = 3
    bs_spacing: float = 200.0
    user_placement: str = "cell_edge_congested"
    user_positions: tuple = ()
    snr_db: float = 30.0
    seed: int = 0
    bisection_eps: float = 1e-8
    convergence_eps: float = 1e-6
    max_sweeps: int = 500
    user_order: str = "round_robin"
    init: str = "strongest"

    def __post_init__(self):
        n, q = int(self.num_users), int(self.num_bs)
        if n < 1 or q < 1:
            raise ConfigError("num_users and num_bs must be positive")
        object.__setattr__(self, "num_users", n)
        object.__setattr__(self, "num_bs", q)
        object.__setattr__(self, "tx_antennas", _as_tuple(self.tx_antennas, n, int, "tx_antennas"))
        object.__setattr__(self, "rx_antennas", _as_tuple(self.rx_antennas, q, int, "rx_antennas"))
        object.__setattr__(self, "noise_power", _as_tuple(self.noise_power, q, float, "noise_power"))
        object.__setattr__(self, "weights", _as_tuple(self.weights, n, float, "weights"))
        if self.power_budget is not None:
            object.__setattr__(self, "power_budget", _as_tuple(self.power_budget, n, float, "power_budget"))
        self.validate()

    def validate(self):
        if min(self.tx_antennas) < 1 or min(self.rx_antennas) < 1:
            raise ConfigError("antenna counts must be positive")
        if max(self.tx_antennas) > min(self.rx_antennas):
            raise ConfigError("channels must be tall: every tx_antennas must be <= every rx_antennas")
        if min(self.noise_power) <= 0:
            raise ConfigError("noise_power must be positive")
        if min(self.weights) < 0:
            raise ConfigError("weights must be nonnegative")
        if self.power_budget is not None and min(self.power_budget) <= 0:
            raise ConfigError("power_budget must be positive")
        if self.utility_kind not in UTILITY_KINDS:
            raise ConfigError(f"utility_kind must be one of {UTILITY_KINDS}")
        if self.user_placement not in PLACEMENTS:
            raise ConfigError(f"user_placement must be one of {PLACEMENTS}")
        if self.user_order not in USER_ORDERS:
            raise ConfigError(f"user_order must be one of {USER_ORDERS}")
        if self.init not in INIT_MODES:
            raise ConfigError(f"init must be one of {INIT_MODES}")
        if not 0 <= self.candidate_bs_limit <= self.num_bs:
            raise ConfigError("candidate_bs_limit must lie in [0, num_bs]")
        if self.bs_spacing <= 0:
            raise ConfigError("bs_spacing must be positive")
        if self.bisection_eps <= 0 or self.convergence_eps <= 0 or self.max_sweeps < 1:
            raise ConfigError("tolerances must be positive")
        if self.rate_floor <= 0:
            raise ConfigError("rate_floor must be positive")

    @property
    def powers(self):
        if self.power_budget is not None:
            return np.array(self.power_budget, dtype=float)
        return np.full(self.num_users, 10.0 ** (self.snr_db / 10.0))

    @property
    def noise(self):
        return np.array(self.noise_power, dtype=float)

    def utility_specs(self):
        return [UtilitySpec(self.utility_kind, w, self.rate_floor) for w in self.weights]

    def with_snr(self, snr_db):
        """Copy with a new SNR; an explicit ``power_budget`` is dropped so the SNR takes effect."""
        return replace(self, snr_db=float(snr_db), power_budget=None)


# --------------------------------------------------------------------------
# key=value config files
# --------------------------------------------------------------------------

def _floats(text):
    return tuple(float(t) for t in text.split(",") if t.strip())


def _ints(text):
    return tuple(int(t) for t in text.split(",") if t.strip())


def _positions(text):
    out = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        xy = _floats(chunk)
        if len(xy) != 2:
            raise ConfigError(f"user_positions entry {chunk.strip()!r} is not an x,y pair")
        out.append(xy)
    return tuple(out)


_PARSERS = {
    "num_users": int,
    "num_bs": int,
    "tx_antennas": _ints,
    "rx_antennas": _ints,
    "power_budget": _floats,
    "noise_power": _floats,
    "weights": _floats,
    "utility_kind": str,
    "rate_floor": float,
    "candidate_bs_limit": int,
    "bs_spacing": float,
    "user_placement": str,
    "user_positions": _positions,
    "snr_db": float,
    "seed": int,
    "bisection_eps": float,
    "convergence_eps": float,
    "max_sweeps": int,
    "user_order": str,
    "init": str,
}
assert set(_PARSERS) == {f.name for f in fields(ScenarioConfig)}


def parse_config(text):
    """Parse flat ``key = value`` text into a :class:`ScenarioConfig`.

    Blank lines and ``#`` comments are ignored. Lists are comma separated;
    ``user_positions`` is ``x,y; x,y; ...``. Unknown or repeated keys raise
    :class:`ConfigError`.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    try:
        return ScenarioConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def scenario_streams(seed, trial=0):
    """Independent generators for one trial: topology, channels, order, init."""
    children = np.random.SeedSequence([int(seed), int(trial)]).spawn(4)
    names = ("topology", "channels", "order", "init")
    return {name: np.random.default_rng(child) for name, child in zip(names, children)}


# --------------------------------------------------------------------------
# topology
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Topology:
    bs_positions: np.ndarray
    user_positions: np.ndarray
    home_bs: np.ndarray = field(default=None)

    @property
    def distances(self):
        """``d[q, n]``: Euclidean distance between BS ``q`` and user ``n`` in meters."""
        diff = self.bs_positions[:, None, :] - self.user_positions[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])


def hex_bs_positions(num_bs, spacing):
    """Center BS plus up to six neighbours on a hexagonal ring at ``spacing``."""
    if num_bs > 7:
        raise ConfigError("the hexagonal layout supports at most 7 BSs")
    pos = [(0.0, 0.0)]
    for k in range(num_bs - 1):
        ang = math.pi / 3.0 * k
        pos.append((spacing * math.cos(ang), spacing * math.sin(ang)))
    return np.array(pos)


def _annulus_point(rng, center, r_lo, r_hi):
    r = math.sqrt(rng.uniform(r_lo * r_lo, r_hi * r_hi))
    ang = rng.uniform(0.0, 2.0 * math.pi)
    return center[0] + r * math.cos(ang), center[1] + r * math.sin(ang)


def generate_topology(cfg, rng):
    """Place BSs on the hexagonal layout and users per ``cfg.user_placement``.

    For the two random placements the first ``ceil(N/2)`` users belong to
    BS 0 (the hot spot) and the rest are spread round-robin over the other
    BSs. ``cell_edge_congested`` draws each user in the annulus
    ``[0.45, 0.5] * bs_spacing`` around its home BS, ``uniform`` in
    ``[0.1, 0.5] * bs_spacing``; both are uniform in area.
    """
    bs = hex_bs_positions(cfg.num_bs, cfg.bs_spacing)
    n_users = cfg.num_users

    if cfg.user_placement == "explicit":
        pts = cfg.user_positions
        if len(pts) != n_users or any(len(p) != 2 for p in pts):
            raise InvalidPlacement(f"explicit placement needs {n_users} (x, y) positions, got {len(pts)}")
        users = np.array(pts, dtype=float)
        if not np.all(np.isfinite(users)):
            raise InvalidPlacement("user positions must be finite")
        top = Topology(bs, users, None)
        d = top.distances
        if np.any(d <= 0):
            raise InvalidPlacement("a user coincides with a BS")
        return Topology(bs, users, np.argmin(d, axis=0))

    lo, hi = EDGE_ANNULUS if cfg.user_placement == "cell_edge_congested" else UNIFORM_ANNULUS
    lo, hi = lo * cfg.bs_spacing, hi * cfg.bs_spacing
    n_hot = math.ceil(n_users / 2)
    home = np.zeros(n_users, dtype=int)
    if cfg.num_bs > 1:
        home[n_hot:] = 1 + np.arange(n_users - n_hot) % (cfg.num_bs - 1)
    users = np.array([_annulus_point(rng, bs[h], lo, hi) for h in home])
    return Topology(bs, users, home)


# --------------------------------------------------------------------------
# channels
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelSet:
    """Channel matrices ``H[q][n]`` (``R_q x T_n``) and BS noise powers."""

    H: tuple
    noise: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "H", tuple(tuple(np.asarray(h, dtype=complex) for h in row) for row in self.H))
        object.__setattr__(self, "noise", np.asarray(self.noise, dtype=float))
        if len(self.noise) != len(self.H):
            raise ValueError("one noise power per BS is required")
        for row in self.H:
            if len(row) != len(self.H[0]):
                raise ValueError("every BS needs a channel to every user")
        for n in range(self.num_users):
            if len({self.H[q][n].shape[1] for q in range(self.num_bs)}) != 1:
                raise ValueError(f"user {n} has inconsistent antenna counts")
        for q in range(self.num_bs):
            if len({h.shape[0] for h in self.H[q]}) != 1:
                raise ValueError(f"BS {q} has inconsistent antenna counts")

    @property
    def num_bs(self):
        return len(self.H)

    @property
    def num_users(self):
        return len(self.H[0])

    def tx(self, n):
        return self.H[0][n].shape[1]

    def rx(self, q):
        return self.H[q][0].shape[0]

    @cached_property
    def stacked(self):
        """Per-BS arrays ``(N, R_q, T)`` when every user has the same ``T``, else None."""
        if len({self.tx(n) for n in range(self.num_users)}) != 1:
            return None
        return tuple(np.stack(row) for row in self.H)

    @cached_property
    def block(self):
        """Single ``(Q, N, R, T)`` array when all antenna counts agree, else None."""
        if self.stacked is None or len({self.rx(q) for q in range(self.num_bs)}) != 1:
            return None
        return np.stack(self.stacked)

    def digest(self):
        """SHA-256 over all channel entries and noise powers, for paired-run checks."""
        h = hashlib.sha256()
        for row in self.H:
            for mat in row:
                h.update(np.ascontiguousarray(mat).tobytes())
        h.update(self.noise.tobytes())
        return h.hexdigest()


def pathloss_std(distance, shadowing=1.0):
    """Per-entry channel standard deviation ``(200/d)**3.5 * L``."""
    return (PATHLOSS_REF_M / distance) ** PATHLOSS_EXPONENT * shadowing


def generate_channels(top, cfg, rng):
    """Draw i.i.d. ``CN(0, sigma_qn**2)`` entries with log-normal shadowing."""
    d = top.distances
    H = []
    for q in range(cfg.num_bs):
        row = []
        for n in range(cfg.num_users):
            shadow = 10.0 ** (rng.normal(0.0, SHADOWING_STD_DB) / 10.0)
            sigma = pathloss_std(d[q, n], shadow)
            shape = (cfg.rx_antennas[q], cfg.tx_antennas[n])
            z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
            row.append(sigma * z)
        H.append(row)
    return ChannelSet(H, cfg.noise)


def candidate_bs(ch, n, limit=0):
    """BS indices sorted by decreasing spectral norm of ``H[q][n]``.

    Ties go to the lower index. ``limit=0`` keeps every BS.
    """
    norms = [np.linalg.norm(ch.H[q][n], 2) for q in range(ch.num_bs)]
    order = sorted(range(ch.num_bs), key=lambda q: (-norms[q], q))
    return order[:limit] if limit else order
