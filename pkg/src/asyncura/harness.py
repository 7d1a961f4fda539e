"""Monte Carlo harness: user drawing, one-slot trials, metrics and sweeps.

Per-trial randomness comes from ``SeedSequence(master_seed,
spawn_key=(trial,))``.  The key does not include the sweep point, so every
point of a sweep replays the same user draws (common random numbers), and
results do not depend on how trials are spread over worker processes.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Iterable

import numpy as np
from scipy.optimize import linear_sum_assignment

from .config import PhaseGrid, SystemConfig
from .ldpc import make_ldpc
from .phy import ActiveUser, draw_channel, simulate_data_symbol, simulate_pilot_symbol
from .receiver import ReceiverOutput, receive
from .tx import build_interleaver, encode_data, pilot_indices, split_message, tree_code

CSV_HEADER = ["point", "param", "trials", "nmse_db", "nmse_se", "pmd", "pfa", "bler", "to_err_mean", "fo_err_mean", "runtime_s"]


# metrics


def nmse(H_true, H_hat) -> float:
    """Channel NMSE after optimal one-to-one row alignment.

    True rows left without a partner count with their full energy, surplus
    estimated rows are ignored.  Defined as 0 when there are no true users.
    """
    H = np.atleast_2d(np.asarray(H_true, dtype=complex))
    K = H.shape[0] if H.size else 0
    if K == 0:
        return 0.0
    Hh = np.asarray(H_hat, dtype=complex).reshape(-1, H.shape[1])
    energy = np.sum(np.abs(H) ** 2, axis=1)
    # extra K columns stand for "unmatched" at the cost of the full row energy
    cost = np.empty((K, Hh.shape[0] + K))
    cost[:, : Hh.shape[0]] = np.sum(np.abs(H[:, None, :] - Hh[None, :, :]) ** 2, axis=2)
    cost[:, Hh.shape[0] :] = energy[:, None]
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum() / energy.sum())


def pmd_pfa(recovered: Iterable, truth: Iterable) -> tuple[float, float]:
    """Misdetection and false-alarm rates of a recovered message list.

    ``p_fa`` is 0 for an empty list, ``p_md`` is 0 without true messages.
    """
    rec = {np.asarray(m, dtype=np.uint8).tobytes() for m in recovered}
    true = [np.asarray(m, dtype=np.uint8).tobytes() for m in truth]
    p_md = sum(t not in rec for t in true) / len(true) if true else 0.0
    p_fa = len(rec - set(true)) / len(rec) if rec else 0.0
    return float(p_md), float(p_fa)


def ebn0_to_power(ebn0_db: float, cfg: SystemConfig) -> float:
    """Power per channel use giving the requested ``Eb/N0 = L P / (B N0)``."""
    return float(10 ** (ebn0_db / 10) * cfg.B * cfg.sigma_n2 / cfg.L)


# users and channel


@dataclass
class SlotTruth:
    users: list[ActiveUser]
    frames: list[Any]
    M: int

    @property
    def H(self) -> np.ndarray:
        if not self.users:
            return np.zeros((0, self.M), dtype=complex)
        return np.array([u.h for u in self.users], dtype=complex)

    def tfo_oracle(self):
        table: dict[tuple, tuple[int, float]] = {}
        for u in self.users:
            table.setdefault(tuple(u.segment_indices), (u.tau, u.eps))
        return table.get


def draw_users(cfg: SystemConfig, rng: np.random.Generator) -> SlotTruth:
    """Draw ``K_a`` users: payload, timing offset, frequency offset, channel.

    With ``collision_free`` a payload is redrawn until none of its four
    pilot indices is used by an earlier user in the same stage.  With
    ``fo_on_grid`` the frequency offset is picked from the receiver grid.
    """
    tree = tree_code(cfg.B_p, cfg.code_seed)
    code = make_ldpc(cfg.L_code, cfg.B_c, cfg.code_seed)
    q = PhaseGrid.from_config(cfg).q
    used = [set() for _ in range(cfg.T_p)]
    users, frames = [], []
    for _ in range(cfg.K_a):
        while True:
            payload = rng.integers(0, 2, size=cfg.B, dtype=np.uint8)
            split = split_message(payload, cfg)
            idx = pilot_indices(split, tree)
            if not cfg.collision_free or all(i not in u for i, u in zip(idx, used)):
                break
        for i, u in zip(idx, used):
            u.add(i)
        tau = int(rng.integers(1, cfg.D + 1))
        eps = float(rng.choice(q)) if cfg.fo_on_grid else float(rng.uniform(-cfg.eps_max, cfg.eps_max))
        h = draw_channel(rng, cfg.M, cfg.sigma_h2)
        users.append(ActiveUser(payload, tau, eps, h, idx))
        frames.append(encode_data(split.vc, build_interleaver(*idx, cfg.L_c, cfg.code_seed), code, cfg))
    return SlotTruth(users, frames, cfg.M)


def simulate_slot(truth: SlotTruth, cfg: SystemConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Received pilot ``(T_p, S, M)`` and data ``(T_d, S, M)`` observations."""
    users = truth.users
    Y_p = np.stack(
        [
            simulate_pilot_symbol(users, t, [u.segment_indices[t - 1] for u in users], cfg, rng, cfg.channel_mode)
            for t in range(1, cfg.T_p + 1)
        ]
    )
    sym = np.zeros((len(users), cfg.T_d, cfg.S), dtype=complex)
    for k, f in enumerate(truth.frames):
        sym[k] = f.blocks(cfg.T_d, cfg.S)
    Y_d = np.stack(
        [simulate_data_symbol(users, sym[:, j], cfg.T_p + 1 + j, cfg, rng, cfg.channel_mode) for j in range(cfg.T_d)]
    )
    return Y_p, Y_d


# trials


@dataclass
class TrialResult:
    seed: int
    trial: int
    K_a: int
    K_hat: int
    nmse: float
    nmse_coarse: float
    p_md: float
    p_fa: float
    bler: float
    tfo: list[dict] = field(default_factory=list)
    flags: tuple[str, ...] = ()
    runtime: float = 0.0
    trace: list[str] = field(default_factory=list, repr=False)

    @property
    def nmse_db(self) -> float:
        return 10 * math.log10(self.nmse) if self.nmse > 0 else -math.inf

    def record(self) -> dict:
        """JSON-ready per-trial record (no wall-clock time, no trace)."""
        d = {f.name: getattr(self, f.name) for f in fields(self) if f.name not in ("runtime", "trace")}
        d["flags"] = list(self.flags)
        return d


def trial_seed(master: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master), spawn_key=(int(trial),))


def _tfo_records(truth: SlotTruth, out: ReceiverOutput) -> list[dict]:
    first = {}
    for u in truth.users:
        first.setdefault(tuple(u.segment_indices), u)
    recs = []
    for d in out.users:
        u = first.get(tuple(d.path))
        if u is None:
            continue
        recs.append(
            {
                "path": list(d.path),
                "tau": u.tau,
                "eps": u.eps,
                "tau_coarse": d.recovered.tau_hat,
                "eps_coarse": d.recovered.eps_hat,
                "tau_hat": d.tau,
                "eps_hat": d.eps,
            }
        )
    return recs


def run_trial(cfg: SystemConfig, seed: int | None = None, trial: int = 0, keep_trace: bool = False) -> TrialResult:
    """One slot: draw users, transmit, receive, score.

    Deterministic in ``(cfg, seed, trial)``; ``seed`` defaults to
    ``cfg.seed``.
    """
    start = time.perf_counter()
    seed = cfg.seed if seed is None else int(seed)
    rng = np.random.default_rng(trial_seed(seed, trial))
    truth = draw_users(cfg, rng)
    Y_p, Y_d = simulate_slot(truth, cfg, rng)
    oracle = truth.tfo_oracle() if cfg.perfect_tfo else None
    trace: list[str] = []
    out = receive(Y_p, Y_d, cfg, tfo_oracle=oracle, trace=trace)

    flags = []
    if cfg.K_a == 0:
        flags.append("no_users")
    if out.degenerate:
        flags.append("empty_stage")
    if not out.users:
        flags.append("nothing_recovered")
    p_md, p_fa = pmd_pfa(out.messages(), [u.payload for u in truth.users])
    return TrialResult(
        seed=seed,
        trial=int(trial),
        K_a=cfg.K_a,
        K_hat=len(out.users),
        nmse=nmse(truth.H, out.H_final),
        nmse_coarse=nmse(truth.H, out.H_coarse),
        p_md=p_md,
        p_fa=p_fa,
        bler=min(1.0, p_md + p_fa),
        tfo=_tfo_records(truth, out),
        flags=tuple(flags),
        runtime=time.perf_counter() - start,
        trace=trace if keep_trace else [],
    )


# sweeps


def parse_sweep(spec: str | None) -> tuple[str | None, list[str]]:
    """``"param:v1,v2,..."`` into ``(param, [v1, v2, ...])``."""
    if not spec:
        return None, []
    if ":" not in spec:
        raise ValueError(f"sweep must look like param:v1,v2,... (got {spec!r})")
    name, values = spec.split(":", 1)
    vals = [v.strip() for v in values.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty sweep value list")
    return name.strip(), vals


def apply_sweep(cfg: SystemConfig, param: str, value: str) -> SystemConfig:
    """Config for one sweep point.

    ``ebn0_db`` and ``P_db`` set ``P_sym`` (the latter as ``10^(P/10)``,
    i.e. relative to ``sigma_n2 = 1``); any other name is a config field.
    """
    if param == "ebn0_db":
        return cfg.replace(P_sym=ebn0_to_power(float(value), cfg))
    if param == "P_db":
        return cfg.replace(P_sym=10 ** (float(value) / 10))
    names = {f.name: f for f in fields(SystemConfig)}
    if param not in names:
        raise ValueError(f"unknown sweep parameter {param!r}")
    current = getattr(cfg, param)
    if isinstance(current, bool):
        parsed: Any = value.lower() in ("1", "true", "yes")
    elif isinstance(current, int):
        parsed = int(value)
    elif isinstance(current, float):
        parsed = float(value)
    else:
        parsed = value
    return cfg.replace(**{param: parsed})


@dataclass
class PointSummary:
    point: int
    param: str
    trials: int
    nmse_db: float
    nmse_se: float
    pmd: float
    pfa: float
    bler: float
    to_err_mean: float
    fo_err_mean: float
    runtime_s: float | None = None

    def row(self) -> list[str]:
        f = lambda x: f"{x:.6e}"  # noqa: E731
        rt = "" if self.runtime_s is None else f"{self.runtime_s:.3f}"
        return [str(self.point), self.param, str(self.trials), f(self.nmse_db), f(self.nmse_se), f(self.pmd),
                f(self.pfa), f(self.bler), f(self.to_err_mean), f(self.fo_err_mean), rt]


def summarize(point: int, param: str, results: list[TrialResult], runtime: float | None = None) -> PointSummary:
    """Per-point means.  ``nmse_db`` is the dB value of the mean linear NMSE,
    ``nmse_se`` its delta-method standard error in dB."""
    n = len(results)
    v = np.array([r.nmse for r in results])
    mean = float(v.mean()) if n else 0.0
    se_lin = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    nmse_db = 10 * math.log10(mean) if mean > 0 else -math.inf
    nmse_se = 10 / math.log(10) * se_lin / mean if mean > 0 else 0.0
    recs = [t for r in results for t in r.tfo]
    to_err = float(np.mean([abs(t["tau_hat"] - t["tau"]) for t in recs])) if recs else math.nan
    fo_err = float(np.mean([abs(t["eps_hat"] - t["eps"]) for t in recs])) if recs else math.nan
    return PointSummary(
        point, param, n, nmse_db, nmse_se,
        float(np.mean([r.p_md for r in results])) if n else 0.0,
        float(np.mean([r.p_fa for r in results])) if n else 0.0,
        float(np.mean([r.bler for r in results])) if n else 0.0,
        to_err, fo_err, runtime,
    )


def _job(args) -> TrialResult:
    cfg, seed, trial, keep_trace = args
    return run_trial(cfg, seed, trial, keep_trace)


def monte_carlo(
    cfg: SystemConfig,
    sweep: str | None = None,
    trials: int = 1,
    workers: int = 1,
    seed: int | None = None,
    out: str | None = None,
    records: str | None = None,
    trace: str | None = None,
    timing: bool = False,
) -> list[PointSummary]:
    """Run ``trials`` trials at every sweep point and aggregate.

    Rows are written (and flushed) to ``out`` as soon as a point is done,
    in input order.  ``records`` receives one JSON line per trial, ``trace``
    the GB-CR2 trace of every trial.  ``runtime_s`` is only filled in with
    ``timing``, so that outputs stay byte-identical across runs.
    """
    param, values = parse_sweep(sweep)
    points = [(f"{param}={v}", apply_sweep(cfg, param, v)) for v in values] if param else [("-", cfg)]
    seed = cfg.seed if seed is None else int(seed)
    summaries = []
    files = {}
    try:
        if out:
            files["out"] = open(out, "w", newline="")
            writer = csv.writer(files["out"], lineterminator="\n")
            writer.writerow(CSV_HEADER)
            files["out"].flush()
        if records:
            files["records"] = open(records, "w")
        if trace:
            files["trace"] = open(trace, "w")
        pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
        try:
            for p, (label, pcfg) in enumerate(points):
                start = time.perf_counter()
                jobs = [(pcfg, seed, k, trace is not None) for k in range(trials)]
                if pool is None:
                    results = [_job(j) for j in jobs]
                else:
                    results = list(pool.map(_job, jobs, chunksize=max(1, trials // (4 * workers))))
                summary = summarize(p, label, results, time.perf_counter() - start if timing else None)
                summaries.append(summary)
                if "records" in files:
                    for r in results:
                        rec = r.record()
                        rec["point"] = p
                        files["records"].write(json.dumps(rec) + "\n")
                    files["records"].flush()
                if "trace" in files:
                    for r in results:
                        files["trace"].write(f"# point={p} trial={r.trial}\n")
                        files["trace"].writelines(line + "\n" for line in r.trace)
                    files["trace"].flush()
                if "out" in files:
                    writer.writerow(summary.row())
                    files["out"].flush()
        finally:
            if pool is not None:
                pool.shutdown(cancel_futures=True)
    finally:
        for fh in files.values():
            fh.close()
    return summaries


def summary_dict(s: PointSummary) -> dict:
    return asdict(s)
