"""3-SAT to max-sum-rate reduction gadget and its brute-force certificate.

A formula with ``N`` variables and ``M`` clauses becomes a single-antenna
network with ``3M + N`` BSs and ``M + 2N`` users:

* BS ``3m + i`` is clause BS ``c^i_m`` (the ``i``-th literal slot of clause
  ``m``); BS ``3M + n`` is variable BS ``x_n``.
* User ``m`` is clause user ``C_m``; users ``M + 2n`` and ``M + 2n + 1`` are
  the variable users ``X_n`` and ``~X_n``.
* ``C_m`` sees gain ``sqrt(7)`` at its three clause BSs. ``X_n`` and ``~X_n``
  both see ``sqrt(7)`` at ``x_n``; ``X_n`` additionally sees gain 1 at every
  slot holding the literal ``~X_n`` and ``~X_n`` at every slot holding ``X_n``.

With unit noise and unit power a lone user gets ``log2(1 + 7) = 3`` bits, and
the maximum sum rate reaches ``3(M + N)`` bits exactly when the formula is
satisfiable.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, TooLarge
from .network import ChannelSet

__all__ = [
    "STRONG_GAIN",
    "CROSS_GAIN",
    "MAX_USERS",
    "MAX_CONFIGS",
    "ThreeSatInstance",
    "parse_dimacs",
    "load_dimacs",
    "GadgetNetwork",
    "build_network",
    "BruteForceResult",
    "brute_force_max_sum_rate",
    "ReductionCheck",
    "check_reduction",
    "FrontierCheck",
    "frontier_value",
    "two_user_frontier_check",
    "format_verdict",
]

STRONG_GAIN = math.sqrt(7.0)
CROSS_GAIN = 1.0
MAX_USERS = 12
MAX_CONFIGS = 2**40
_BATCH = 1 << 15


@dataclass(frozen=True)
class ThreeSatInstance:
    """CNF formula with exactly three literals per clause.

    Literals are ``(var, negated)`` pairs with 0-based ``var``. A clause that
    repeats a literal is rejected unless ``allow_repeats`` is set; repeats
    are the only way to write short unsatisfiable formulas in 3-literal form.
    """

    num_vars: int
    clauses: tuple
    allow_repeats: bool = False

    def __post_init__(self):
        clauses = tuple(tuple((int(v), bool(neg)) for v, neg in c) for c in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        if self.num_vars < 1:
            raise ConfigError("a formula needs at least one variable")
        for k, clause in enumerate(clauses):
            if len(clause) != 3:
                raise ConfigError(f"clause {k} has {len(clause)} literals, expected 3")
            for v, _ in clause:
                if not 0 <= v < self.num_vars:
                    raise ConfigError(f"clause {k} uses variable {v} outside [0, {self.num_vars})")
            if not self.allow_repeats and len(set(clause)) < 3:
                raise ConfigError(f"clause {k} repeats a literal")

    @property
    def num_clauses(self):
        return len(self.clauses)

    def evaluate(self, assignment):
        """Truth value of the formula under ``assignment`` (sequence of bools)."""
        return all(any(assignment[v] != neg for v, neg in c) for c in self.clauses)

    def solve(self):
        """First satisfying assignment in lexicographic order, or None."""
        for bits in itertools.product((False, True), repeat=self.num_vars):
            if self.evaluate(bits):
                return bits
        return None


def parse_dimacs(text, allow_repeats=False):
    """Parse DIMACS CNF: ``c`` comments, a ``p cnf N M`` header, 0-terminated clauses."""
    header = None
    clauses, current = [], []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise ConfigError(f"bad header: {line!r}")
            header = (int(parts[2]), int(parts[3]))
            continue
        if header is None:
            raise ConfigError("clause before the 'p cnf' header")
        for tok in line.split():
            lit = int(tok)
            if lit == 0:
                clauses.append(tuple(current))
                current = []
            else:
                current.append((abs(lit) - 1, lit < 0))
    if header is None:
        raise ConfigError("missing 'p cnf N M' header")
    if current:
        raise ConfigError("last clause is not 0-terminated")
    if len(clauses) != header[1]:
        raise ConfigError(f"header announces {header[1]} clauses, found {len(clauses)}")
    return ThreeSatInstance(header[0], tuple(clauses), allow_repeats)


def load_dimacs(path, allow_repeats=False):
    with open(path, encoding="utf-8") as fh:
        return parse_dimacs(fh.read(), allow_repeats)


@dataclass(frozen=True)
class GadgetNetwork:
    """Scalar network built from a formula.

    ``gains[q, u]`` is the real channel coefficient from user ``u`` to BS
    ``q``; noise and power budgets are all one.
    """

    sat: ThreeSatInstance
    gains: np.ndarray
    noise: float = 1.0
    power: float = 1.0

    @property
    def num_bs(self):
        return self.gains.shape[0]

    @property
    def num_users(self):
        return self.gains.shape[1]

    def clause_bs(self, m, i):
        return 3 * m + i

    def variable_bs(self, n):
        return 3 * self.sat.num_clauses + n

    def clause_user(self, m):
        return m

    def variable_user(self, n, negated=False):
        return self.sat.num_clauses + 2 * n + int(negated)

    def is_clause_bs(self, q):
        return q < 3 * self.sat.num_clauses

    def is_variable_user(self, u):
        return u >= self.sat.num_clauses

    def user_name(self, u):
        m = self.sat.num_clauses
        if u < m:
            return f"C{u + 1}"
        n, neg = divmod(u - m, 2)
        return f"{'~' if neg else ''}X{n + 1}"

    def bs_name(self, q):
        m = self.sat.num_clauses
        if q < 3 * m:
            return f"c{q % 3 + 1}_{q // 3 + 1}"
        return f"x{q - 3 * m + 1}"

    def to_channel_set(self):
        """The same network as 1x1 complex channels, usable by the game solver."""
        h = [[np.array([[g]], dtype=complex) for g in row] for row in self.gains]
        return ChannelSet(h, np.full(self.num_bs, self.noise))


def build_network(sat):
    m, n = sat.num_clauses, sat.num_vars
    gains = np.zeros((3 * m + n, m + 2 * n))
    for k, clause in enumerate(sat.clauses):
        for i, (v, neg) in enumerate(clause):
            gains[3 * k + i, k] = STRONG_GAIN
            # the user for the opposite literal interferes on this slot
            gains[3 * k + i, m + 2 * v + int(not neg)] = CROSS_GAIN
    for v in range(n):
        gains[3 * m + v, m + 2 * v] = STRONG_GAIN
        gains[3 * m + v, m + 2 * v + 1] = STRONG_GAIN
    return GadgetNetwork(sat, gains)


@dataclass(frozen=True)
class BruteForceResult:
    """Exhaustive search outcome.

    ``config`` holds one ``(power, bs)`` pair per user, with ``bs = None``
    for silent users. ``optima`` lists every configuration within ``1e-9``
    bits of the maximum when requested.
    """

    max_rate_bits: float
    config: tuple
    num_configs: int
    optima: tuple = ()


def _user_options(net, levels):
    opts = []
    for u in range(net.num_users):
        bss = np.flatnonzero(net.gains[:, u])
        opts.append([(0.0, -1)] + [(p, int(q)) for p in levels if p > 0 for q in bss])
    return opts


def _batch_rates(net, powers, assoc):
    # powers, assoc: (K, U); silent users carry assoc -1 and zero power
    g2 = net.gains**2
    total = powers @ g2.T  # (K, Q) received power per BS
    safe = np.where(assoc < 0, 0, assoc)
    users = np.arange(net.num_users)
    signal = powers * g2[safe, users]
    interference = np.take_along_axis(total, safe, axis=1) - signal
    rate = np.log2(1.0 + signal / (net.noise + interference))
    return np.where(assoc < 0, 0.0, rate).sum(axis=1)


def brute_force_max_sum_rate(net, levels=(1.0,), keep_optima=False, tol=1e-9):
    """Maximum sum rate (bits) over on/off power and association choices.

    Each user is either silent or transmits at one of ``levels`` (fractions
    of the unit budget) to a BS it has a nonzero channel to; interference is
    treated as noise. ``levels=(0.25, 0.5, 0.75, 1.0)`` gives a 5-level grid
    for spot checks of the on/off restriction.

    Raises
    ------
    TooLarge
        More than 12 users or more than ``2**40`` configurations.
    """
    if net.num_users > MAX_USERS:
        raise TooLarge(f"{net.num_users} users exceed the limit of {MAX_USERS}")
    opts = _user_options(net, tuple(float(p) * net.power for p in levels))
    size = math.prod(len(o) for o in opts)
    if size > MAX_CONFIGS:
        raise TooLarge(f"{size} configurations exceed 2**40")
    p_tab = [np.array([p for p, _ in o]) for o in opts]
    a_tab = [np.array([q for _, q in o]) for o in opts]

    best, best_cfg, optima = -np.inf, None, []
    index_iter = itertools.product(*(range(len(o)) for o in opts))
    while True:
        chunk = np.array(list(itertools.islice(index_iter, _BATCH)), dtype=int)
        if chunk.size == 0:
            break
        chunk = chunk.reshape(-1, net.num_users)
        powers = np.stack([p_tab[u][chunk[:, u]] for u in range(net.num_users)], axis=1)
        assoc = np.stack([a_tab[u][chunk[:, u]] for u in range(net.num_users)], axis=1)
        rates = _batch_rates(net, powers, assoc)
        k = int(np.argmax(rates))
        if rates[k] > best + tol:
            best = float(rates[k])
            best_cfg = chunk[k]
            optima = []
        if keep_optima:
            optima.extend(chunk[rates >= best - tol])
    best_cfg = tuple(opts[u][i] for u, i in enumerate(best_cfg))
    config = tuple((p, None if q < 0 else q) for p, q in best_cfg)
    kept = ()
    if keep_optima:
        rows = np.array(optima)
        powers = np.stack([p_tab[u][rows[:, u]] for u in range(net.num_users)], axis=1)
        assoc = np.stack([a_tab[u][rows[:, u]] for u in range(net.num_users)], axis=1)
        final = rows[_batch_rates(net, powers, assoc) >= best - tol]
        kept = tuple(
            tuple((opts[u][i][0], None if opts[u][i][1] < 0 else opts[u][i][1]) for u, i in enumerate(r)) for r in final
        )
    return BruteForceResult(best, config, size, kept)


@dataclass(frozen=True)
class ReductionCheck:
    sat_decision: bool
    rate_matches: bool
    max_rate_bits: float
    target_bits: float
    assignment: tuple
    search: BruteForceResult


def check_reduction(sat, levels=(1.0,)):
    """Compare exhaustive satisfiability with the brute-force sum-rate test."""
    assignment = sat.solve()
    result = brute_force_max_sum_rate(build_network(sat), levels)
    target = 3.0 * (sat.num_clauses + sat.num_vars)
    reached = result.max_rate_bits >= target - 1e-9
    decision = assignment is not None
    return ReductionCheck(decision, reached == decision, result.max_rate_bits, target, assignment, result)


def frontier_value(p):
    """``(1 + 7/(1 + 7p)) (1 + p)``: two users sharing one strong BS, one at full power."""
    p = np.asarray(p, dtype=float)
    return (1.0 + 7.0 / (1.0 + 7.0 * p)) * (1.0 + p)


@dataclass(frozen=True)
class FrontierCheck:
    f0: float
    f1: float
    sup_interior: float
    argmin: float

    @property
    def holds(self):
        return self.f0 == 8.0 and self.f1 == 3.75 and self.sup_interior < 8.0


def two_user_frontier_check(step=1e-4):
    """Evaluate the two-user frontier on the grid ``(0, 1]`` with spacing ``step``."""
    grid = np.arange(1, int(round(1.0 / step)) + 1) * step
    vals = frontier_value(grid)
    return FrontierCheck(
        float(frontier_value(0.0)), float(frontier_value(1.0)), float(vals.max()), float(grid[np.argmin(vals)])
    )


def format_verdict(check, net=None):
    """One-line verdict followed by the achieving configuration and assignment."""
    status = "holds" if check.rate_matches else "FAILS"
    sat = "satisfiable" if check.sat_decision else "unsatisfiable"
    lines = [
        f"reduction {status}: formula {sat}, max sum rate {check.max_rate_bits:.9f} bits, "
        f"target {check.target_bits:g} bits"
    ]
    if check.assignment is not None:
        lines.append("assignment: " + " ".join(f"X{v + 1}={int(b)}" for v, b in enumerate(check.assignment)))
    if net is not None:
        parts = []
        for u, (p, q) in enumerate(check.search.config):
            parts.append(f"{net.user_name(u)}->{net.bs_name(q)}@{p:g}" if q is not None else f"{net.user_name(u)}:off")
        lines.append("configuration: " + " ".join(parts))
    return "\n".join(lines)
