"""Monte Carlo experiment harness.

Three experiment families:

* :func:`run_power_sweep` — transmit power vs SNR target for a set of
  methods, paired across methods (identical channel draws within a
  trial) so per-draw dominance properties are directly observable.
* :func:`run_ser` — symbol-error rate of a table-driven method under
  additive complex Gaussian noise, detecting with per-user rotation
  compensation.
* :func:`run_bench` — wall-clock comparison across methods/modulations
  (medians of repeated runs; only orderings and ratios are meaningful).

Determinism: every result is a pure function of (config, seed).  Trials
draw their generators from a splittable seed sequence, so results do not
depend on how trials are distributed over workers.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import beamform, channel, datavec, modem, oracle, slp, slpro
from .conic import Status

__all__ = [
    "METHODS",
    "ExperimentConfig",
    "ExperimentResult",
    "SerResult",
    "BenchResult",
    "run_power_sweep",
    "run_ser",
    "run_bench",
    "power_csv",
    "ser_csv",
    "bench_csv",
    "manifest",
]

log = logging.getLogger(__name__)

METHODS = ("OB", "SLP", "SLP-symmetry", "SLPRo", "SLPRo-symmetry")


# ----------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one experiment.

    ``constellations`` holds one scheme name per user (a single name is
    broadcast to all K users).  ``snr_db`` lists the per-user SINR
    targets in dB (gamma = 10^(snr/10)).  The channel is redrawn each
    trial: i.i.d. CN(0, channel_variance) entries, or rows drawn with an
    exponential transmit-side correlation of coefficient
    ``correlation``.  A ``fixed_channel`` overrides sampling entirely.
    """

    methods: tuple = ("OB", "SLP-symmetry", "SLPRo-symmetry")
    K: int = 2
    M: int = 2
    constellations: tuple = ("qpsk",)
    snr_db: tuple = (4.771212547196624,)
    channel_model: str = "iid"            # "iid" | "correlated"
    channel_variance: float = 1.0
    correlation: complex = 0.0
    trials: int = 1
    seed: int = 0
    sigma_z: float = 1.0
    eps: float = 1e-4                     # rotation-search certification
    node_cap: int = 10_000
    oracle_check: bool = False
    oracle_resolution_deg: float = 2.0
    scaling_shortcut: bool = True

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.snr_db:
            raise ValueError("snr_db must be nonempty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if self.channel_model not in ("iid", "correlated"):
            raise ValueError("channel_model must be 'iid' or 'correlated'")
        names = tuple(self.constellations)
        if len(names) == 1:
            names = names * self.K
        if len(names) != self.K:
            raise ValueError("need one constellation name per user")
        object.__setattr__(self, "constellations", names)
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "snr_db", tuple(self.snr_db))

    @property
    def gammas(self) -> np.ndarray:
        return 10.0 ** (np.asarray(self.snr_db) / 10.0)

    def constellation_objects(self) -> list:
        return [modem.constellation_from_name(n) for n in self.constellations]

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        a = complex(self.correlation)
        d["correlation"] = [a.real, a.imag]
        return json.dumps(d, indent=1, default=_json_default)

    @staticmethod
    def from_json(text: str) -> "ExperimentConfig":
        d = json.loads(text)
        if isinstance(d.get("correlation"), list):
            re_part, im_part = d["correlation"]
            d["correlation"] = complex(re_part, im_part)
        for key in ("methods", "constellations", "snr_db"):
            if key in d:
                d[key] = tuple(d[key])
        return ExperimentConfig(**d)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def manifest(config: ExperimentConfig, **extra) -> dict:
    """Everything needed to reproduce a run byte-for-byte (one worker)."""
    from . import __version__
    m = {"config": json.loads(config.to_json()),
         "package_version": __version__}
    m.update(extra)
    return m


# ----------------------------------------------------------------------
# power sweep
# ----------------------------------------------------------------------
@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trial_powers: dict                 # method -> (n_snr, n_ok) linear powers
    timings: dict                      # method -> mean seconds per trial
    failed_trials: int = 0

    def mean_power_db(self, method: str, snr_index: int) -> float:
        return 10.0 * math.log10(
            float(np.mean(self.trial_powers[method][snr_index])))

    def std_db(self, method: str, snr_index: int) -> float:
        return float(np.std(
            10.0 * np.log10(self.trial_powers[method][snr_index]), ddof=1)) \
            if self.trial_powers[method].shape[1] > 1 else 0.0

    @property
    def trial_count(self) -> int:
        first = next(iter(self.trial_powers.values()))
        return first.shape[1]


def _method_powers(method: str, H, cons, cfg: ExperimentConfig,
                   gammas: np.ndarray) -> np.ndarray:
    """Power per SNR target (linear) for one channel draw."""
    if method == "OB":
        out = np.empty(len(gammas))
        for i, g in enumerate(gammas):
            sol = beamform.optimal_beamforming(H, g, cfg.sigma_z)
            if sol.status is not Status.OPTIMAL:
                raise RuntimeError(f"OB solve failed: {sol.status.value}")
            out[i] = sol.total_power
        return out

    # Symbol-level methods: constraints scale as sqrt(gamma), so power
    # at gamma equals (gamma/gamma_0) times power at gamma_0 and one
    # solve per trial suffices (rotations are unaffected).
    def solve_at(g: float) -> float:
        if method == "SLP":
            dset = datavec.enumerate_all(cons)
            sol = slp.solve_block(H, dset, g, cfg.sigma_z)
            status, power = sol.status, sol.average_power
        elif method == "SLP-symmetry":
            sol, _ = slp.solve_block_reduced(H, cons, g, cfg.sigma_z)
            status, power = sol.status, sol.average_power
        else:
            rot = slpro.optimize_rotations(
                H, cons, g, cfg.sigma_z, eps=cfg.eps, node_cap=cfg.node_cap,
                use_symmetry=(method == "SLPRo-symmetry"))
            status, power = Status.OPTIMAL, rot.incumbent
        if status is not Status.OPTIMAL:
            raise RuntimeError(f"{method} solve failed: {status.value}")
        return power

    if cfg.scaling_shortcut:
        base = solve_at(gammas[0])
        return base * (gammas / gammas[0])
    return np.array([solve_at(g) for g in gammas])


def _draw_channel(cfg: ExperimentConfig, rng: np.random.Generator
                  ) -> np.ndarray:
    if cfg.channel_model == "correlated":
        H = channel.sample_correlated(cfg.K, cfg.M, cfg.correlation, rng=rng)
        return H * math.sqrt(cfg.channel_variance)
    return channel.sample_iid(cfg.K, cfg.M, variance=cfg.channel_variance,
                              rng=rng)


def _run_trial(cfg: ExperimentConfig, seed: np.random.SeedSequence,
               fixed_channel) -> dict | None:
    rng = np.random.default_rng(seed)
    H = (np.asarray(fixed_channel, dtype=complex)
         if fixed_channel is not None else _draw_channel(cfg, rng))
    cons = cfg.constellation_objects()
    gammas = cfg.gammas
    powers, secs = {}, {}
    try:
        for method in cfg.methods:
            t0 = time.perf_counter()
            powers[method] = _method_powers(method, H, cons, cfg, gammas)
            secs[method] = time.perf_counter() - t0
    except (RuntimeError, ValueError) as exc:
        log.warning("trial dropped: %s", exc)
        return None
    return {"powers": powers, "seconds": secs}


def run_power_sweep(config: ExperimentConfig, workers: int = 1,
                    fixed_channel=None) -> ExperimentResult:
    """Paired power-vs-SNR sweep.

    Each trial draws one channel shared by every method, runs each
    method at each SNR target, and records linear powers.  Failed trials
    (any method failing) are dropped whole to preserve pairing.
    """
    seeds = np.random.SeedSequence(config.seed).spawn(config.trials)
    args = [(config, s, fixed_channel) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_trial_star, args))
    else:
        rows = [_run_trial(*a) for a in args]

    kept = [r for r in rows if r is not None]
    if not kept:
        raise RuntimeError("every trial failed")
    trial_powers = {
        m: np.stack([r["powers"][m] for r in kept], axis=1)
        for m in config.methods
    }
    timings = {m: float(np.mean([r["seconds"][m] for r in kept]))
               for m in config.methods}
    result = ExperimentResult(config, trial_powers, timings,
                              failed_trials=len(rows) - len(kept))
    if config.oracle_check:
        _oracle_check(config, result, fixed_channel)
    return result


def _trial_star(a):
    return _run_trial(*a)


def _oracle_check(config: ExperimentConfig, result: ExperimentResult,
                  fixed_channel) -> None:
    """Optional sanity pass: grid oracle on the first trial's channel."""
    if not any(m.startswith("SLPRo") for m in config.methods):
        return
    seeds = np.random.SeedSequence(config.seed).spawn(1)
    rng = np.random.default_rng(seeds[0])
    H = (np.asarray(fixed_channel, dtype=complex)
         if fixed_channel is not None else _draw_channel(config, rng))
    res = oracle.grid_search(H, config.constellation_objects(),
                             float(config.gammas[0]), config.sigma_z,
                             resolution_deg=config.oracle_resolution_deg)
    method = next(m for m in config.methods if m.startswith("SLPRo"))
    mine = result.trial_powers[method][0, 0]
    log.info("oracle check: grid %.4f dB vs %s %.4f dB",
             res.power_db, method, 10 * math.log10(mine))


# ----------------------------------------------------------------------
# symbol error rate
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class SerResult:
    snr_db: tuple
    ser: np.ndarray           # symbol error rate per SNR
    sends: int                # detections counted per SNR entry


def run_ser(config: ExperimentConfig, method: str = "SLP-symmetry",
            noise_trials: int = 200, fixed_channel=None,
            noise_scale: float = 1.0) -> SerResult:
    """Empirical symbol-error rate of a table-driven method.

    One channel draw; for each SNR target the offline table is built,
    every table entry is transmitted ``noise_trials`` times under
    additive CN(0, (noise_scale * sigma_z)^2) noise, and each user
    detects after compensating its rotation.  ``noise_scale=0`` checks
    the noiseless placement (expected error rate: exactly zero).
    """
    if not (method.startswith("SLP") or method.startswith("SLPRo")):
        raise ValueError("SER needs a table-driven (symbol-level) method")
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    H = (np.asarray(fixed_channel, dtype=complex)
         if fixed_channel is not None else _draw_channel(config, rng))
    cons = config.constellation_objects()
    gammas = config.gammas
    rotate = method.startswith("SLPRo")

    sers = []
    sends = 0
    for g in gammas:
        table = slp.lookup_table(H, cons, float(g), config.sigma_z,
                                 rotate=rotate, eps=config.eps,
                                 node_cap=config.node_cap) if rotate else \
            slp.lookup_table(H, cons, float(g), config.sigma_z)
        theta = table["theta"]
        amp = config.sigma_z * np.sqrt(slp._per_user(float(g), config.K))
        errors = 0
        total = 0
        for key, x in table["entries"].items():
            nominal = H @ x
            for j in range(config.K):
                z = (rng.standard_normal(noise_trials)
                     + 1j * rng.standard_normal(noise_trials))
                y = nominal[j] + noise_scale * config.sigma_z / math.sqrt(2) * z
                for y_jt in y:
                    idx = cons[j].detect(y_jt, rotation=theta[j],
                                         scale=float(amp[j]))
                    errors += (idx != key[j])
                    total += 1
        sers.append(errors / total)
        sends = total
    return SerResult(tuple(config.snr_db), np.asarray(sers, dtype=float),
                     sends)


# ----------------------------------------------------------------------
# runtime benchmark
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class BenchResult:
    rows: tuple                # (method, modulation, median_seconds)

    def median(self, method: str, modulation: str) -> float:
        for m, mod, sec in self.rows:
            if m == method and mod == modulation:
                return sec
        raise KeyError((method, modulation))


def run_bench(config: ExperimentConfig, modulations=("qpsk", "8qam"),
              repeats: int = 3) -> BenchResult:
    """Median wall-clock seconds per (method, modulation).

    One channel draw shared by every cell.  Absolute numbers are
    machine-dependent; only orderings and ratios are meaningful.
    """
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    H = _draw_channel(config, rng)
    g = float(config.gammas[0])
    rows = []
    for name in modulations:
        cons = [modem.constellation_from_name(name)] * config.K
        for method in config.methods:
            cell_cfg = dataclasses.replace(config, constellations=(name,))
            # untimed warm-up so cold-start costs don't land on one cell
            _method_powers(method, H, cons, cell_cfg, np.array([g]))
            times = []
            for _ in range(repeats):
                t0 = time.perf_counter()
                _method_powers(method, H, cons, cell_cfg, np.array([g]))
                times.append(time.perf_counter() - t0)
            rows.append((method, name, float(np.median(times))))
    return BenchResult(tuple(rows))


# ----------------------------------------------------------------------
# CSV serialization
# ----------------------------------------------------------------------
def power_csv(result: ExperimentResult) -> str:
    lines = ["method,snr_db,mean_power_db,std_db,trials"]
    for m in result.config.methods:
        for i, snr in enumerate(result.config.snr_db):
            lines.append(f"{m},{snr:.6g},{result.mean_power_db(m, i):.6f},"
                         f"{result.std_db(m, i):.6f},{result.trial_count}")
    return "\n".join(lines) + "\n"


def ser_csv(result: SerResult, method: str) -> str:
    lines = ["method,snr_db,ser,sends"]
    for snr, s in zip(result.snr_db, result.ser):
        lines.append(f"{method},{snr:.6g},{s:.8f},{result.sends}")
    return "\n".join(lines) + "\n"


def bench_csv(result: BenchResult) -> str:
    lines = ["method,modulation,median_sec"]
    for m, mod, sec in result.rows:
        lines.append(f"{m},{mod},{sec:.6f}")
    return "\n".join(lines) + "\n"
