"""Experiment families: false-positive/negative sweeps and grids, the
detection-rate study, Bell-pair idle tomography with TVD, random-circuit
fidelity, and the constant-period measure/reset baseline.

All experiments are deterministic given (config, seed): every grid point draws
its randomness from a SeedSequence substream spawned from the master seed.
Results carry 2x-standard-error uncertainties over the configured samples.

Angle conventions: ``theta``/``delta`` values in configs are per-qubit Bloch
rotation angles per crosstalk event; the synthetic-unitary generator rate is
half that. Coupling ratios (``ratio_alpha``, ``ratio_phi``) are quoted
relative to the single-qubit generator rate.
"""
from __future__ import annotations

import dataclasses
import hashlib
import itertools
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, channels, crosstalk, ops, protocol, sim


# ---------------------------------------------------------------------------
# Results, CSV, manifest


@dataclass(frozen=True)
class ResultRow:
    metric: str
    coords: tuple  # aligned with ExperimentResult.coord_names; None = not applicable
    value: float
    two_se: float
    n_samples: int

    def __post_init__(self):
        if not np.isfinite(self.value):
            raise ValueError(f"non-finite value for metric {self.metric!r}")
        if self.two_se < 0:
            raise ValueError("uncertainty must be nonnegative")
        object.__setattr__(self, "coords", tuple(self.coords))


@dataclass(frozen=True)
class ExperimentResult:
    coord_names: tuple
    rows: tuple
    config: dict
    seed: int | None = None
    wall_time_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coord_names", tuple(self.coord_names))
        object.__setattr__(self, "rows", tuple(self.rows))
        for r in self.rows:
            if len(r.coords) != len(self.coord_names):
                raise ValueError("row coordinates do not match coordinate names")


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def result_to_csv(result: ExperimentResult) -> str:
    lines = ["metric," + ",".join(result.coord_names) + ",value,two_se,n_samples"]
    for r in result.rows:
        cells = [r.metric] + [_fmt(c) for c in r.coords] + [
            _fmt(r.value),
            _fmt(r.two_se),
            str(r.n_samples),
        ]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=str).encode()).hexdigest()


def write_result(result: ExperimentResult, outdir, name: str) -> tuple:
    """Write ``<name>.csv`` (byte-stable for a fixed config and seed) and a
    ``<name>.manifest.json`` recording config, seed, hash, version, timing."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{name}.csv"
    with open(csv_path, "w", newline="\n") as fh:
        fh.write(result_to_csv(result))
    manifest = {
        "config": result.config,
        "seed": result.seed,
        "config_sha256": config_hash(result.config),
        "version": __version__,
        "wall_time_s": result.wall_time_s,
    }
    man_path = outdir / f"{name}.manifest.json"
    with open(man_path, "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, default=str)
        fh.write("\n")
    return csv_path, man_path


def mean_two_se(values) -> tuple:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), 0.0
    return float(v.mean()), float(2.0 * v.std(ddof=1) / np.sqrt(v.size))


def _sampled(p: float, shots: int | None, rng) -> float:
    """Exact probability, or its binomial shot estimate in sampled mode."""
    if shots is None:
        return p
    return float(rng.binomial(shots, min(max(p, 0.0), 1.0))) / shots


def _cfg_dict(cfg) -> dict:
    d = dataclasses.asdict(cfg)
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in d.items()}


# ---------------------------------------------------------------------------
# Schedule construction


def _layers_from_gatelist(gl: protocol.GateList, mark_cnot_crosstalk: bool = False) -> list:
    by_layer: dict = {}
    for g in gl.gates:
        by_layer.setdefault(g.layer, []).append(g)
    layers = []
    for li in sorted(by_layer):
        gates = tuple(by_layer[li])
        has_cnot = any(g.kind == "CNOT" for g in gates)
        layers.append(sim.Layer(gates=gates, gate_crosstalk=mark_cnot_crosstalk and has_cnot))
    return layers


def csmqc_frame_layers(
    plan: protocol.SpectatorPlan,
    window: int,
    pattern: sim.PerturbationPattern,
    idle_in_window: bool = False,
    dd: bool = False,
    cnot_crosstalk: bool = False,
) -> list:
    """Prep, detection-window, and inversion layers for one detector frame.

    Crosstalk events are confined to the detection window; prep/inversion
    layers optionally carry CNOT-induced crosstalk.
    """
    hit = set(pattern.layer_indices)
    layers = _layers_from_gatelist(protocol.mghz_prep_circuit(plan), cnot_crosstalk)
    dd_by_layer: dict = {}
    if dd:
        for g in protocol.dd_pulse_schedule(plan, window).gates:
            dd_by_layer.setdefault(g.layer, []).append(
                protocol.Gate(0, g.kind, g.qubits, g.params)
            )
    for w in range(window):
        layers.append(
            sim.Layer(gates=tuple(dd_by_layer.get(w, ())), idle=idle_in_window, crosstalk=w in hit)
        )
    layers.extend(_layers_from_gatelist(protocol.inversion_circuit(plan), cnot_crosstalk))
    return layers


def flag_probability(final_state: np.ndarray, flag_qubit: int) -> float:
    """P(flag = 1): probability of reading 1 on the detector's flag qubit
    (the spectator that received the initial Hadamard)."""
    probs = sim.measurement_probabilities(final_state, [flag_qubit])
    return probs.get("1", 0.0)


def _product_rotation(axes: np.ndarray, deltas) -> np.ndarray:
    """Tensor product of per-qubit axis rotations (one crosstalk event)."""
    deltas = np.broadcast_to(np.asarray(deltas, dtype=float), (axes.shape[0],))
    u = np.array([[1.0 + 0j]])
    for k, d in zip(axes, deltas):
        u = np.kron(u, ops.rotation_operator(k, d))
    return u


def _random_axes(n: int, rng) -> np.ndarray:
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


# ---------------------------------------------------------------------------
# False-positive sweep


@dataclass(frozen=True)
class FpSweepConfig:
    alphas: tuple  # idle ZZ angle per layer, radians
    n_spectators: tuple = (1, 2, 3, 4)
    T1: float = np.inf
    T2: float = np.inf
    dephase_time: float | None = None
    tau: float = 1.0
    samples: int = 50
    axes: str = "random"  # or "z"


def _fp_point(n: int, alpha: float, cfg: FpSweepConfig, rng) -> float:
    axes = _random_axes(n, rng) if cfg.axes == "random" else np.tile([0.0, 0.0, 1.0], (n, 1))
    plan = protocol.SpectatorPlan(tuple(range(n)), axes, np.full(n, np.pi / n), np.pi)
    idle = channels.IdleNoiseParams(
        T1=cfg.T1, T2=cfg.T2, tau=cfg.tau, alpha=alpha, dephase_time=cfg.dephase_time
    )
    pattern = sim.PerturbationPattern(0, ())
    layers = csmqc_frame_layers(plan, window=1, pattern=pattern, idle_in_window=True)
    schedule = sim.CircuitSchedule(n_qubits=n, layers=layers, idle=idle, engine="density")
    rho0 = np.zeros((2**n, 2**n), dtype=complex)
    rho0[0, 0] = 1.0
    return flag_probability(sim.evolve(schedule, rho0), plan.qubits[0])


def false_positive_sweep(cfg: FpSweepConfig, seed: int = 0, shots: int | None = None) -> ExperimentResult:
    """P(flag=1) with idle noise only, over (alpha, spectator count), plus a
    linear fit of the largest-alpha rate against the spectator count.

    ``shots`` switches from exact probabilities to binomial shot sampling.
    """
    t0 = time.perf_counter()
    ss = np.random.SeedSequence(seed)
    points = list(itertools.product(cfg.alphas, cfg.n_spectators))
    streams = ss.spawn(len(points))
    samples = cfg.samples if cfg.axes == "random" else 1
    rows = []
    asymptote = {}
    for (alpha, n), sub in zip(points, streams):
        rng = np.random.default_rng(sub)
        vals = [_sampled(_fp_point(n, alpha, cfg, rng), shots, rng) for _ in range(samples)]
        mean, se = mean_two_se(vals)
        rows.append(ResultRow("false_positive", (alpha, n), mean, se, samples))
        if alpha == max(cfg.alphas):
            asymptote[n] = mean
    ns = np.array(sorted(asymptote))
    ys = np.array([asymptote[n] for n in ns])
    if ns.size >= 2:
        slope, intercept = np.polyfit(ns, ys, 1)
        fitted = slope * ns + intercept
        sst = float(np.sum((ys - ys.mean()) ** 2))
        r2 = 1.0 if sst == 0 else 1.0 - float(np.sum((ys - fitted) ** 2)) / sst
        amax = max(cfg.alphas)
        rows.append(ResultRow("fp_fit_slope", (amax, None), float(slope), 0.0, len(ns)))
        rows.append(ResultRow("fp_fit_intercept", (amax, None), float(intercept), 0.0, len(ns)))
        rows.append(ResultRow("fp_fit_r2", (amax, None), r2, 0.0, len(ns)))
    return ExperimentResult(
        coord_names=("alpha", "n_spectators"),
        rows=tuple(rows),
        config=_cfg_dict(cfg),
        seed=seed,
        wall_time_s=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# False-negative sweep and grid


@dataclass(frozen=True)
class FnSweepConfig:
    theta: float  # per-qubit Bloch angle per event
    n_spectators: int = 4
    m_values: tuple = (1, 3, 5, 7)
    ratio_alpha: float = 0.0  # idle ZZ rate / single-qubit generator rate
    ratio_phi: float = 0.0  # pair generator rate / single-qubit generator rate
    window: int = 10
    samples: int = 50
    T1: float = np.inf
    T2: float = np.inf
    dephase_time: float | None = None
    tau: float = 1.0
    dd: bool = False


def _fn_point(cfg: FnSweepConfig, m: int, rng) -> float:
    """One sample of the false-negative probability P(flag=0)."""
    n = cfg.n_spectators
    theta_gen = cfg.theta / 2.0
    pairs = crosstalk.chain_pairs(n)
    single_axes, pair_axes = crosstalk.sample_random_axes(n, pairs, rng)
    spec = crosstalk.CrosstalkSpec(
        single_axes=single_axes,
        theta=theta_gen,
        phi=cfg.ratio_phi * theta_gen,
        pair_axes=pair_axes if cfg.ratio_phi > 0 else {},
        pair_topology=tuple(pairs) if cfg.ratio_phi > 0 else (),
    )
    event = crosstalk.synthetic_crosstalk_unitary(spec, n)
    plan = protocol.SpectatorPlan(tuple(range(n)), single_axes, np.full(n, cfg.theta), np.pi)
    pattern = sim.place_perturbations(cfg.window, m, rng)
    alpha = cfg.ratio_alpha * theta_gen
    decohering = np.isfinite(cfg.T1) or np.isfinite(
        cfg.T2 if cfg.dephase_time is None else cfg.dephase_time
    )
    idle = None
    if alpha > 0 or decohering:
        idle = channels.IdleNoiseParams(
            T1=cfg.T1, T2=cfg.T2, tau=cfg.tau, alpha=alpha, dephase_time=cfg.dephase_time
        )
    engine = "density" if decohering else "pure"
    layers = csmqc_frame_layers(
        plan, cfg.window, pattern, idle_in_window=idle is not None, dd=cfg.dd
    )
    schedule = sim.CircuitSchedule(
        n_qubits=n, layers=layers, crosstalk=event, idle=idle, engine=engine
    )
    if engine == "pure":
        state0 = ops.basis_state(n)
    else:
        state0 = np.zeros((2**n, 2**n), dtype=complex)
        state0[0, 0] = 1.0
    return 1.0 - flag_probability(sim.evolve(schedule, state0), plan.qubits[0])


def false_negative_sweep(cfg: FnSweepConfig, seed: int = 0, shots: int | None = None) -> ExperimentResult:
    """P(flag=0) versus event count m under random axes and placements."""
    t0 = time.perf_counter()
    streams = np.random.SeedSequence(seed).spawn(len(cfg.m_values))
    rows = []
    for m, sub in zip(cfg.m_values, streams):
        rng = np.random.default_rng(sub)
        vals = [_sampled(_fn_point(cfg, m, rng), shots, rng) for _ in range(cfg.samples)]
        mean, se = mean_two_se(vals)
        rows.append(ResultRow("false_negative", (m, None, None), mean, se, cfg.samples))
    return ExperimentResult(
        coord_names=("m", "ratio_alpha", "ratio_phi"),
        rows=tuple(rows),
        config=_cfg_dict(cfg),
        seed=seed,
        wall_time_s=time.perf_counter() - t0,
    )


def default_ratio_grid(n_points: int = 6) -> tuple:
    """Log-uniform coupling-ratio axis over [1e-4, 1e1]."""
    return tuple(float(x) for x in np.logspace(-4, 1, n_points))


def grid_false_negative(
    cfg: FnSweepConfig,
    ratio_alphas=None,
    ratio_phis=None,
    m: int | None = None,
    seed: int = 0,
    shots: int | None = None,
) -> ExperimentResult:
    """False-negative probability over a (ratio_alpha, ratio_phi) grid at a
    fixed event count."""
    t0 = time.perf_counter()
    ratio_alphas = default_ratio_grid() if ratio_alphas is None else tuple(ratio_alphas)
    ratio_phis = default_ratio_grid() if ratio_phis is None else tuple(ratio_phis)
    m = cfg.m_values[0] if m is None else m
    points = list(itertools.product(ratio_alphas, ratio_phis))
    streams = np.random.SeedSequence(seed).spawn(len(points))
    rows = []
    for (ra, rp), sub in zip(points, streams):
        rng = np.random.default_rng(sub)
        point_cfg = dataclasses.replace(cfg, ratio_alpha=ra, ratio_phi=rp)
        vals = [_sampled(_fn_point(point_cfg, m, rng), shots, rng) for _ in range(cfg.samples)]
        mean, se = mean_two_se(vals)
        rows.append(ResultRow("false_negative", (m, ra, rp), mean, se, cfg.samples))
    config = _cfg_dict(cfg)
    config.update({"grid_ratio_alphas": list(ratio_alphas), "grid_ratio_phis": list(ratio_phis), "grid_m": m})
    return ExperimentResult(
        coord_names=("m", "ratio_alpha", "ratio_phi"),
        rows=tuple(rows),
        config=config,
        seed=seed,
        wall_time_s=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Detection-rate experiment


def detection_rate_experiment(
    params,
    spectators,
    m_values,
    n_qubits: int | None = None,
    window: int = 8,
    target_delta: float = np.pi / 4,
    amplify_mode: str = "all",
    samples: int = 4,
    seed: int = 0,
) -> ExperimentResult:
    """Detection success versus event count for a multi-set layout whose
    events come from (possibly several) H/S/A parameter sets, amplified so
    each spectator rotates by ``target_delta`` per event.

    Prep/inversion CNOT layers carry the unamplified crosstalk. Spectator
    sets of decreasing size target total angles pi, pi/2, pi/4, ...; the set
    whose count class contains m defines ``detection_success`` at that m.
    """
    t0 = time.perf_counter()
    params_list = list(params) if isinstance(params, (list, tuple)) else [params]
    spectators = tuple(spectators)
    if n_qubits is None:
        n_qubits = 1 + max(
            max((t for e in p.entries for t in e.targets), default=0) for p in params_list
        )
    max_m = max(m_values)
    trial_results: dict = {}
    factors = []
    streams = np.random.SeedSequence(seed).spawn(len(params_list) * samples)
    si = 0
    for p in params_list:
        factor = crosstalk.calibrate_amplification(
            p, target_delta, spectators, n_qubits, mode=amplify_mode
        )
        factors.append(factor)
        amp = crosstalk.amplify_parameters(p, factor, amplify_mode)
        pure = crosstalk.is_hamiltonian_only(amp) and crosstalk.is_hamiltonian_only(p)
        if pure:
            event = crosstalk.hsa_event_unitary(amp, n_qubits)
            base_event = crosstalk.hsa_event_unitary(p, n_qubits)
        else:
            event = crosstalk.hsa_crosstalk_channel(amp, n_qubits)
            base_event = crosstalk.hsa_crosstalk_channel(p, n_qubits)
        axes = crosstalk.single_qubit_axes(amp, n_qubits)
        sets = []
        k = 1
        while k <= max_m and np.pi / k >= target_delta - 1e-12:
            plan = protocol.plan_spectators(
                [target_delta] * len(spectators),
                np.pi / k,
                axes=axes[list(spectators)],
                qubits=spectators,
            )
            sets.append((k, plan))
            k *= 2
        for _ in range(samples):
            rng = np.random.default_rng(streams[si])
            si += 1
            for m in m_values:
                pattern = sim.place_perturbations(window, m, rng)
                for k, plan in sets:
                    layers = csmqc_frame_layers(plan, window, pattern, cnot_crosstalk=True)
                    schedule = sim.CircuitSchedule(
                        n_qubits=n_qubits,
                        layers=layers,
                        crosstalk=event,
                        gate_crosstalk_channel=base_event,
                        engine="pure" if pure else "density",
                    )
                    if pure:
                        state0 = ops.basis_state(n_qubits)
                    else:
                        state0 = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
                        state0[0, 0] = 1.0
                    p1 = flag_probability(sim.evolve(schedule, state0), plan.qubits[0])
                    trial_results.setdefault((k, m), []).append(p1)
    rows = []
    class_of = {}
    ks = sorted({k for k, _ in trial_results})
    for k in ks:
        for c in protocol.count_class(k, max_m):
            class_of[c] = k
    for (k, m), vals in sorted(trial_results.items()):
        mean, se = mean_two_se(vals)
        rows.append(ResultRow("detection_rate", (k, m), mean, se, len(vals)))
        if class_of.get(m) == k:
            rows.append(ResultRow("detection_success", (None, m), mean, se, len(vals)))
    rows.append(ResultRow("amplification_factor", (None, None), float(np.mean(factors)), 0.0, len(factors)))
    config = {
        "n_qubits": n_qubits,
        "spectators": list(spectators),
        "m_values": list(m_values),
        "window": window,
        "target_delta": target_delta,
        "amplify_mode": amplify_mode,
        "samples": samples,
        "n_parameter_sets": len(params_list),
    }
    return ExperimentResult(
        coord_names=("set_k", "m"),
        rows=tuple(rows),
        config=config,
        seed=seed,
        wall_time_s=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Constant-period baseline


@dataclass(frozen=True)
class BaselineConfig:
    window: int
    period: int | None = None  # None -> optimize

    def __post_init__(self):
        if self.period is not None and not (1 <= self.period <= self.window):
            raise ValueError("period must lie in [1, window]")


def measurement_points(window: int, period: int) -> tuple:
    """Measure/reset layers: multiples of the period, plus the window end."""
    pts = [t for t in range(period, window + 1, period)]
    if not pts or pts[-1] != window:
        pts.append(window)
    return tuple(pts)


def baseline_no_flag_probability(pattern: sim.PerturbationPattern, window: int, period: int, delta: float) -> float:
    """P(every measurement reads 0) for a single spectator rotated by
    ``delta`` per event, measured and reset at the period points.

    Exact for coherent single-axis events: each inter-measurement segment
    accumulates angle c*delta (c events) and reads 0 with (1+cos(c*delta))/2;
    the reset restores the reference state, so segments are independent.
    """
    pts = measurement_points(window, period)
    prob = 1.0
    prev = 0
    for t in pts:
        c = sum(1 for i in pattern.layer_indices if prev <= i < t)
        prob *= (1.0 + np.cos(c * delta)) / 2.0
        prev = t
    return float(prob)


def optimal_reset_period(window: int, delta: float) -> int:
    """Period maximizing detection probability when every layer carries an
    event (the densest perturbation the window admits); ties -> shortest."""
    best_p, best_val = 1, -1.0
    for p in range(1, window + 1):
        dense = sim.PerturbationPattern(window, tuple(range(window)))
        val = 1.0 - baseline_no_flag_probability(dense, window, p, delta)
        if val > best_val + 1e-12:
            best_p, best_val = p, val
    return best_p


def constant_period_baseline(
    b: BaselineConfig,
    delta: float = np.pi / 4,
    m_values=(0, 1, 2, 3, 4, 5, 6, 7),
    samples: int = 50,
    seed: int = 0,
) -> ExperimentResult:
    """Detection probability of the measure/reset baseline versus event
    count, averaging over random event placements."""
    t0 = time.perf_counter()
    period = b.period if b.period is not None else optimal_reset_period(b.window, delta)
    streams = np.random.SeedSequence(seed).spawn(len(m_values))
    rows = [ResultRow("baseline_period", (None,), float(period), 0.0, 1)]
    for m, sub in zip(m_values, streams):
        rng = np.random.default_rng(sub)
        vals = []
        for _ in range(samples):
            pattern = sim.place_perturbations(b.window, m, rng)
            vals.append(1.0 - baseline_no_flag_probability(pattern, b.window, period, delta))
        mean, se = mean_two_se(vals)
        rows.append(ResultRow("baseline_detection", (m,), mean, se, samples))
    config = {"window": b.window, "period": period, "delta": delta, "m_values": list(m_values), "samples": samples}
    return ExperimentResult(
        coord_names=("m",),
        rows=tuple(rows),
        config=config,
        seed=seed,
        wall_time_s=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Metrics


def tvd(counts: dict, ideal_counts: dict) -> float:
    """Total variational distance between two outcome distributions; for a
    point-mass ideal this equals the non-ideal outcome fraction."""
    for dist in (counts, ideal_counts):
        total = sum(dist.values())
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"distribution not normalized (sums to {total})")
    keys = set(counts) | set(ideal_counts)
    return 0.5 * sum(abs(counts.get(k, 0.0) - ideal_counts.get(k, 0.0)) for k in keys)


def fidelity(rho: np.ndarray, rho_ideal: np.ndarray) -> float:
    """F = tr(rho rho_ideal); the standard fidelity when rho_ideal is pure."""
    val = np.trace(rho @ rho_ideal)
    if abs(val.imag) > 1e-9:
        raise ValueError("fidelity of non-Hermitian inputs")
    return float(val.real)


def pauli_labels(n: int):
    return ("".join(p) for p in itertools.product("IXYZ", repeat=n))


def qst_reconstruct(expectations: dict, n_qubits: int) -> np.ndarray:
    """State tomography reconstruction rho = sum_sigma tr(sigma rho) sigma / 2^n
    from a complete dictionary of Pauli-string expectations."""
    d = 2**n_qubits
    rho = np.zeros((d, d), dtype=complex)
    for label in pauli_labels(n_qubits):
        if label not in expectations:
            raise ValueError(f"missing Pauli expectation {label!r}")
        rho += expectations[label] * ops.pauli_string_matrix(label)
    return rho / d


# ---------------------------------------------------------------------------
# Bell-pair idle tomography


@dataclass(frozen=True)
class BellIdtConfig:
    n_spectators: int = 4
    delta: float = np.pi / 4  # spectator Bloch angle per event
    data_delta: float = np.pi / 4  # data-qubit Bloch angle per event
    baseline_delta: float = np.pi / 4
    window: int = 7
    m_values: tuple = (0, 1, 2, 3, 4, 5, 6, 7)
    trials: int = 12
    lam: float = 0.5  # perturbed-shot fraction
    baseline_period: int | None = None


def _detector_flag0(plan, window, pattern, event) -> float:
    layers = csmqc_frame_layers(plan, window, pattern)
    schedule = sim.CircuitSchedule(
        n_qubits=plan.n_spectators, layers=layers, crosstalk=event, engine="pure"
    )
    psi = sim.evolve(schedule, ops.basis_state(plan.n_spectators))
    return 1.0 - flag_probability(psi, 0)


def _filtered_tvd(lam: float, tvd_pert: float, p_keep_pert: float) -> float:
    """TVD conditioned on keeping the shot, mixing clean (always kept, TVD 0)
    and perturbed populations analytically."""
    kept = (1.0 - lam) + lam * p_keep_pert
    if kept <= 0:
        return 1.0
    return lam * p_keep_pert * tvd_pert / kept


def bell_idt_experiment(cfg: BellIdtConfig, seed: int = 0) -> ExperimentResult:
    """TVD of Bell-pair prepare/unprepare outcomes versus event count,
    unfiltered and filtered by the detector flag or the baseline flags."""
    t0 = time.perf_counter()
    n_s = cfg.n_spectators
    period = (
        cfg.baseline_period
        if cfg.baseline_period is not None
        else optimal_reset_period(cfg.window, cfg.baseline_delta)
    )
    bell = protocol.GateList((protocol.Gate(0, "H", (0,)), protocol.Gate(1, "CNOT", (0, 1))))
    unbell = protocol.GateList((protocol.Gate(0, "CNOT", (0, 1)), protocol.Gate(1, "H", (0,))))
    u_bell = protocol.circuit_unitary(bell, 2)
    u_unbell = protocol.circuit_unitary(unbell, 2)
    streams = np.random.SeedSequence(seed).spawn(cfg.trials)
    acc: dict = {m: {"unfiltered": [], "csmqc": [], "baseline": []} for m in cfg.m_values}
    for sub in streams:
        rng = np.random.default_rng(sub)
        spec_axes = _random_axes(n_s, rng)
        data_axes = _random_axes(2, rng)
        plan = protocol.SpectatorPlan(tuple(range(n_s)), spec_axes, np.full(n_s, cfg.delta), np.pi)
        spec_event = _product_rotation(spec_axes, cfg.delta)
        data_event = _product_rotation(data_axes, cfg.data_delta)
        for m in cfg.m_values:
            pattern = sim.place_perturbations(cfg.window, m, rng)
            # perturbed data branch (events commute with idling)
            psi = u_bell @ ops.basis_state(2)
            for _ in range(pattern.m):
                psi = data_event @ psi
            psi = u_unbell @ psi
            tvd_pert = 1.0 - sim.measurement_probabilities(psi, [0, 1]).get("00", 0.0)
            p_flag0 = _detector_flag0(plan, cfg.window, pattern, spec_event)
            p_noflag_b = baseline_no_flag_probability(
                pattern, cfg.window, period, cfg.baseline_delta
            )
            acc[m]["unfiltered"].append(cfg.lam * tvd_pert)
            acc[m]["csmqc"].append(_filtered_tvd(cfg.lam, tvd_pert, p_flag0))
            acc[m]["baseline"].append(_filtered_tvd(cfg.lam, tvd_pert, p_noflag_b))
    rows = [ResultRow("baseline_period", (None,), float(period), 0.0, 1)]
    for m in cfg.m_values:
        for name, key in (
            ("tvd_unfiltered", "unfiltered"),
            ("tvd_csmqc", "csmqc"),
            ("tvd_baseline", "baseline"),
        ):
            mean, se = mean_two_se(acc[m][key])
            rows.append(ResultRow(name, (m,), mean, se, cfg.trials))
    return ExperimentResult(
        coord_names=("m",),
        rows=tuple(rows),
        config=_cfg_dict(cfg),
        seed=seed,
        wall_time_s=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Random-circuit fidelity


@dataclass(frozen=True)
class RandomCircuitConfig:
    n_data: int = 2
    n_spectators: int = 4
    delta: float = np.pi / 4
    data_delta: float = np.pi / 4
    baseline_delta: float = np.pi / 4
    window: int = 7
    m_values: tuple = (0, 1, 2, 3, 4, 5, 6, 7)
    trials: int = 12
    lam: float = 0.5
    baseline_period: int | None = None


_SINGLE_GATES = {
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "S": np.diag([1.0, 1.0j]),
    "T": np.diag([1.0, np.exp(1j * np.pi / 4)]),
}
_CNOT_MAT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def random_data_circuit(n_data: int, depth: int, rng) -> list:
    """One random gate per layer from {H, S, T, CNOT}, as full unitaries."""
    layers = []
    for _ in range(depth):
        if n_data >= 2 and rng.random() < 0.4:
            pair = rng.choice(n_data, size=2, replace=False)
            layers.append(ops.expand_operator(_CNOT_MAT, [int(pair[0]), int(pair[1])], n_data))
        else:
            name = ("H", "S", "T")[rng.integers(3)]
            q = int(rng.integers(n_data))
            layers.append(ops.expand_operator(_SINGLE_GATES[name], [q], n_data))
    return layers


def random_circuit_experiment(cfg: RandomCircuitConfig, seed: int = 0) -> ExperimentResult:
    """Average data-qubit fidelity after a random {H,S,T,CNOT} circuit under
    sparse crosstalk, unfiltered and flag-filtered; data states are read back
    through full Pauli-basis tomography before computing tr(rho rho_ideal).

    Crosstalk events are applied before the coinciding data gate.
    """
    t0 = time.perf_counter()
    n_d = cfg.n_data
    period = (
        cfg.baseline_period
        if cfg.baseline_period is not None
        else optimal_reset_period(cfg.window, cfg.baseline_delta)
    )
    streams = np.random.SeedSequence(seed).spawn(cfg.trials)
    acc: dict = {m: {"unfiltered": [], "csmqc": [], "baseline": []} for m in cfg.m_values}
    labels = list(pauli_labels(n_d))
    paulis = {lb: ops.pauli_string_matrix(lb) for lb in labels}
    for sub in streams:
        rng = np.random.default_rng(sub)
        gates = random_data_circuit(n_d, cfg.window, rng)
        spec_axes = _random_axes(cfg.n_spectators, rng)
        data_axes = _random_axes(n_d, rng)
        plan = protocol.SpectatorPlan(
            tuple(range(cfg.n_spectators)), spec_axes, np.full(cfg.n_spectators, cfg.delta), np.pi
        )
        spec_event = _product_rotation(spec_axes, cfg.delta)
        data_event = _product_rotation(data_axes, cfg.data_delta)
        psi_ideal = ops.basis_state(n_d)
        for u in gates:
            psi_ideal = u @ psi_ideal
        rho_ideal = np.outer(psi_ideal, psi_ideal.conj())
        for m in cfg.m_values:
            pattern = sim.place_perturbations(cfg.window, m, rng)
            hit = set(pattern.layer_indices)
            psi = ops.basis_state(n_d)
            for li, u in enumerate(gates):
                if li in hit:
                    psi = data_event @ psi  # crosstalk precedes the coinciding gate
                psi = u @ psi
            rho_pert = np.outer(psi, psi.conj())
            p_flag0 = _detector_flag0(plan, cfg.window, pattern, spec_event)
            p_noflag_b = baseline_no_flag_probability(
                pattern, cfg.window, period, cfg.baseline_delta
            )
            for key, p_keep in (("unfiltered", 1.0), ("csmqc", p_flag0), ("baseline", p_noflag_b)):
                w_clean = 1.0 - cfg.lam
                w_pert = cfg.lam * p_keep
                mix = (w_clean * rho_ideal + w_pert * rho_pert) / (w_clean + w_pert)
                expect = {lb: float(np.real(np.trace(paulis[lb] @ mix))) for lb in labels}
                rho_rec = qst_reconstruct(expect, n_d)
                acc[m][key].append(fidelity(rho_rec, rho_ideal))
    rows = [ResultRow("baseline_period", (None,), float(period), 0.0, 1)]
    for m in cfg.m_values:
        for name, key in (
            ("fidelity_unfiltered", "unfiltered"),
            ("fidelity_csmqc", "csmqc"),
            ("fidelity_baseline", "baseline"),
        ):
            mean, se = mean_two_se(acc[m][key])
            rows.append(ResultRow(name, (m,), mean, se, cfg.trials))
    return ExperimentResult(
        coord_names=("m",),
        rows=tuple(rows),
        config=_cfg_dict(cfg),
        seed=seed,
        wall_time_s=time.perf_counter() - t0,
    )
