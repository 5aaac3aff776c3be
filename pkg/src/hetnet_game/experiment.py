"""Monte-Carlo experiment driver and CSV outputs.

Each trial draws one topology and one channel realization; every requested
mode (and every SNR) runs on those same channels, so joint and fixed
association results are paired samples.
"""

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import game
from .errors import MaxSweepsExceeded
from .network import generate_channels, generate_topology, scenario_streams
from .rates import all_rates

__all__ = ["ModeResult", "TrialResult", "run_trial", "run_experiment", "emit_outputs", "empirical_cdf"]

log = logging.getLogger(__name__)

LN2 = float(np.log(2.0))


@dataclass
class ModeResult:
    mode: str
    rates: np.ndarray
    assoc: np.ndarray
    sum_utility: float
    sweeps: int
    converged: bool
    trace: game.GameTrace

    @property
    def sum_log_rate(self):
        return float(np.sum(np.log(np.maximum(self.rates, 1e-300))))

    @property
    def rates_bits(self):
        return self.rates / LN2


@dataclass
class TrialResult:
    snr_db: float
    trial: int
    channel_digest: str
    strongest: np.ndarray
    home_bs: np.ndarray
    modes: dict


def run_trial(cfg, trial, modes=("joint", "fixed")):
    """Run every mode in ``modes`` on one shared channel draw.

    A run that reaches ``max_sweeps`` is kept with ``converged = False``;
    its trace is still monotone and its state is the last iterate.
    """
    streams = scenario_streams(cfg.seed, trial)
    top = generate_topology(cfg, streams["topology"])
    ch = generate_channels(top, cfg, streams["channels"])
    strongest = np.array([c[0] for c in game.candidate_lists(cfg, ch)])
    out = {}
    for mode in modes:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, trial, 1 + game.MODES.index(mode)]))
        try:
            res = game.run(cfg, ch, mode, rng=rng)
            state, trace, sweeps, converged = res.state, res.trace, res.sweeps, True
        except MaxSweepsExceeded as exc:
            log.warning("trial %d, %s mode, %.4g dB: %s", trial, mode, cfg.snr_db, exc)
            state, trace, sweeps, converged = exc.state, exc.trace, cfg.max_sweeps, False
        rates = all_rates(state, ch)
        out[mode] = ModeResult(mode, rates, state.assoc.copy(), trace.records[-1].sum_utility, sweeps, converged, trace)
    return TrialResult(cfg.snr_db, trial, ch.digest(), strongest, top.home_bs.copy(), out)


def _run_job(args):
    cfg, trial, modes = args
    return run_trial(cfg, trial, modes)


def run_experiment(cfg, modes=("joint", "fixed"), trials=5, snr_list=None, jobs=1):
    """All (SNR, trial) combinations; results come back in a fixed order."""
    snrs = [cfg.snr_db] if snr_list is None else list(snr_list)
    work = [(cfg.with_snr(snr) if snr_list is not None else cfg, k, tuple(modes)) for snr in snrs for k in range(trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_job, work))
    return [_run_job(w) for w in work]


def empirical_cdf(values):
    """Sorted values and their empirical CDF ``k / n`` (last entry exactly 1)."""
    x = np.sort(np.asarray(values, dtype=float))
    n = x.size
    return x, np.arange(1, n + 1) / n


def _writer(path):
    fh = open(path, "w", newline="", encoding="utf-8")
    return fh, csv.writer(fh, lineterminator="\n")


def emit_outputs(results, out_dir):
    """Write run, rates, assoc, cdf, summary and trials CSV files to ``out_dir``."""
    if not results:
        raise ValueError("no results to write")
    os.makedirs(out_dir, exist_ok=True)
    modes = list(results[0].modes)

    fh, w = _writer(os.path.join(out_dir, "run.csv"))
    with fh:
        w.writerow(["snr_db", "trial", "mode", "iter", "user", "sum_utility_nats", "sum_utility_bits_equiv", "switches", "max_gap"])
        for r in results:
            for mode in modes:
                for row in r.modes[mode].trace.rows():
                    w.writerow([r.snr_db, r.trial, mode, *row])

    fh, w = _writer(os.path.join(out_dir, "rates.csv"))
    with fh:
        w.writerow(["snr_db", "trial", "user", *[f"rate_bits_{m}" for m in modes]])
        for r in results:
            for n in range(r.strongest.size):
                w.writerow([r.snr_db, r.trial, n, *[float(r.modes[m].rates_bits[n]) for m in modes]])

    fh, w = _writer(os.path.join(out_dir, "assoc.csv"))
    with fh:
        w.writerow(["snr_db", "trial", "user", "home_bs", "strongest_bs", *[f"final_bs_{m}" for m in modes], *[f"switched_{m}" for m in modes]])
        for r in results:
            for n in range(r.strongest.size):
                finals = [int(r.modes[m].assoc[n]) for m in modes]
                w.writerow(
                    [r.snr_db, r.trial, n, int(r.home_bs[n]), int(r.strongest[n]), *finals, *[int(f != r.strongest[n]) for f in finals]]
                )

    snrs = sorted({r.snr_db for r in results})
    fh, w = _writer(os.path.join(out_dir, "cdf.csv"))
    with fh:
        w.writerow(["snr_db", "mode", "rate_bits", "cdf"])
        for snr in snrs:
            for m in modes:
                vals = np.concatenate([r.modes[m].rates_bits for r in results if r.snr_db == snr])
                for x, p in zip(*empirical_cdf(vals)):
                    w.writerow([snr, m, float(x), float(p)])

    fh, w = _writer(os.path.join(out_dir, "summary.csv"))
    with fh:
        w.writerow(
            ["snr_db", "mode", "trials", "mean_user_rate_bits", "mean_sum_rate_bits", "mean_sum_log_rate",
             "mean_sum_utility", "mean_switches", "mean_sweeps", "converged_trials"]
        )
        for snr in snrs:
            for m in modes:
                rs = [r for r in results if r.snr_db == snr]
                mr = [r.modes[m] for r in rs]
                w.writerow([
                    snr,
                    m,
                    len(rs),
                    float(np.mean([x.rates_bits.mean() for x in mr])),
                    float(np.mean([x.rates_bits.sum() for x in mr])),
                    float(np.mean([x.sum_log_rate for x in mr])),
                    float(np.mean([x.sum_utility for x in mr])),
                    float(np.mean([np.sum(x.assoc != r.strongest) for x, r in zip(mr, rs)])),
                    float(np.mean([x.sweeps for x in mr])),
                    sum(x.converged for x in mr),
                ])

    fh, w = _writer(os.path.join(out_dir, "trials.csv"))
    with fh:
        w.writerow(["snr_db", "trial", "mode", "channel_sha256", "sweeps", "converged", "sum_utility_nats", "sum_log_rate"])
        for r in results:
            for m in modes:
                x = r.modes[m]
                w.writerow([r.snr_db, r.trial, m, r.channel_digest, x.sweeps, int(x.converged), x.sum_utility, x.sum_log_rate])
