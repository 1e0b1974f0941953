"""Command-line entry point: parse a JSON run config, dispatch an experiment,
and write CSV results plus a JSON manifest.

Exit codes: 0 success, 1 configuration error, 2 numerical failure.

With ``--figures`` the report path additionally renders figures next to the
CSV when the companion plotting package (``csmqc-plots``) is installed.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import channels, characterize, crosstalk, experiments, ops, protocol, sim

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

SUBCOMMANDS = (
    "sweep-fp",
    "sweep-fn",
    "grid-fn",
    "detect-rate",
    "bell-idt",
    "random-circuit",
    "fit-axis",
    "validate",
    "plan",
)


class ConfigError(Exception):
    pass


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc


def _build_cfg(cls, doc: dict, **overrides):
    """Instantiate a config dataclass from a JSON dict, tupling lists."""
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(doc) - names
    if unknown:
        raise ConfigError(f"unknown config fields for {cls.__name__}: {sorted(unknown)}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in doc.items()}
    kwargs.update(overrides)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from exc


def _shots(args) -> int | None:
    if args.mode == "exact":
        return None
    if args.seed is None:
        raise ConfigError("sampled mode requires an explicit --seed")
    return args.shots


def _maybe_render(args, csv_path) -> None:
    if not args.figures:
        return
    try:
        from csmqc_plots import api as plots_api
    except ImportError:
        print("warning: csmqc-plots is not installed; skipping figure rendering", file=sys.stderr)
        return
    out = str(csv_path).removesuffix(".csv") + ".png"
    plots_api.render_auto(str(csv_path), out)
    print(f"wrote {out}")


def _finish(args, result, name: str) -> int:
    csv_path, man_path = experiments.write_result(result, args.out, name)
    print(f"wrote {csv_path}")
    print(f"wrote {man_path}")
    _maybe_render(args, csv_path)
    return EXIT_OK


def _cmd_sweep_fp(args) -> int:
    doc = _load_config(args.config)
    doc.setdefault("alphas", [1e-3, 1e-2, 5e-2])
    cfg = _build_cfg(experiments.FpSweepConfig, doc)
    result = experiments.false_positive_sweep(cfg, seed=args.seed or 0, shots=_shots(args))
    return _finish(args, result, "sweep_fp")


def _cmd_sweep_fn(args) -> int:
    doc = _load_config(args.config)
    doc.setdefault("theta", np.pi / 4)
    cfg = _build_cfg(experiments.FnSweepConfig, doc)
    result = experiments.false_negative_sweep(cfg, seed=args.seed or 0, shots=_shots(args))
    return _finish(args, result, "sweep_fn")


def _cmd_grid_fn(args) -> int:
    doc = _load_config(args.config)
    grid_alphas = doc.pop("grid_ratio_alphas", None)
    grid_phis = doc.pop("grid_ratio_phis", None)
    grid_m = doc.pop("grid_m", None)
    doc.setdefault("theta", np.pi / 4)
    doc.setdefault("m_values", [3])
    cfg = _build_cfg(experiments.FnSweepConfig, doc)
    result = experiments.grid_false_negative(
        cfg, ratio_alphas=grid_alphas, ratio_phis=grid_phis, m=grid_m,
        seed=args.seed or 0, shots=_shots(args),
    )
    return _finish(args, result, "grid_fn")


def _detect_rate_params(doc: dict) -> list:
    if "params_files" in doc:
        out = []
        for path in doc["params_files"]:
            with open(path) as fh:
                out.append(crosstalk.HsaParameterSet.from_json(fh.read()))
        return out
    synth = doc.get(
        "synthetic",
        {"n_qubits": 4, "single_coeff": 0.03, "pair_ratio": 0.15, "stochastic_coeff": 1e-4, "n_sets": 6},
    )
    n_sets = synth.pop("n_sets", 6)
    base_seed = synth.pop("seed", 0)
    return [
        crosstalk.synthetic_hsa_parameters(rng=np.random.default_rng(base_seed + i), **synth)
        for i in range(n_sets)
    ]


def _cmd_detect_rate(args) -> int:
    if args.mode != "exact":
        raise ConfigError("detect-rate supports exact mode only")
    doc = _load_config(args.config)
    params = _detect_rate_params(doc)
    result = experiments.detection_rate_experiment(
        params,
        spectators=tuple(doc.get("spectators", [0, 1, 2, 3])),
        m_values=tuple(doc.get("m_values", [0, 1, 2, 3, 4, 5, 6, 7])),
        n_qubits=doc.get("n_qubits"),
        window=doc.get("window", 8),
        target_delta=doc.get("target_delta", np.pi / 4),
        amplify_mode=doc.get("amplify_mode", "all"),
        samples=doc.get("samples", 4),
        seed=args.seed or 0,
    )
    return _finish(args, result, "detect_rate")


def _cmd_bell_idt(args) -> int:
    if args.mode != "exact":
        raise ConfigError("bell-idt supports exact mode only")
    cfg = _build_cfg(experiments.BellIdtConfig, _load_config(args.config))
    result = experiments.bell_idt_experiment(cfg, seed=args.seed or 0)
    return _finish(args, result, "bell_idt")


def _cmd_random_circuit(args) -> int:
    if args.mode != "exact":
        raise ConfigError("random-circuit supports exact mode only")
    cfg = _build_cfg(experiments.RandomCircuitConfig, _load_config(args.config))
    result = experiments.random_circuit_experiment(cfg, seed=args.seed or 0)
    return _finish(args, result, "random_circuit")


def _cmd_fit_axis(args) -> int:
    if args.input is None:
        raise ConfigError("fit-axis requires --input pointing to a Bloch CSV")
    points = characterize.read_bloch_csv(args.input)
    rows = []
    for q, pts in sorted(points.items()):
        if len(pts) < 3:
            raise ConfigError(f"qubit {q} has fewer than three Bloch points")
        fit = characterize.fit_rotation_axis(pts[:3])
        for name, val in (
            ("axis_x", fit.axis[0]),
            ("axis_y", fit.axis[1]),
            ("axis_z", fit.axis[2]),
            ("delta_per_gate", fit.delta),
            ("circumradius", fit.circumradius),
        ):
            rows.append(experiments.ResultRow(name, (q,), float(val), 0.0, len(pts)))
    result = experiments.ExperimentResult(
        coord_names=("qubit",),
        rows=tuple(rows),
        config={"input": str(args.input)},
        seed=args.seed,
    )
    return _finish(args, result, "fit_axis")


def _cmd_plan(args) -> int:
    if args.deltas is None:
        raise ConfigError("plan requires --deltas (comma-separated radians)")
    try:
        deltas = [float(x) for x in args.deltas.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --deltas: {exc}") from exc
    if not deltas:
        raise ConfigError("empty --deltas list")
    layout = protocol.multi_set_layout(args.max_count, deltas)
    doc = {
        "max_count": args.max_count,
        "sets": [
            {
                "target_angle": s.target_angle,
                "qubits": list(s.qubits),
                "deltas": s.deltas.tolist(),
                "total_angle": s.total_angle,
                "residual": s.residual,
                "count_class": list(c),
            }
            for s, c in zip(layout.sets, layout.count_classes)
        ],
        "frames": [list(map(list, f)) for f in layout.frames],
    }
    print(json.dumps(doc, indent=2))
    return EXIT_OK


def run_validation_suite(rng=None) -> list:
    """Self-check suite: channel CPTP properties, protocol identities, and
    closed-form agreement. Returns (name, passed, detail) rows."""
    rng = np.random.default_rng(0) if rng is None else rng
    checks = []

    def check(name, fn):
        try:
            detail = fn()
            checks.append((name, True, detail))
        except Exception as exc:  # noqa: BLE001 - report, don't crash
            checks.append((name, False, f"{type(exc).__name__}: {exc}"))

    def cptp_idle():
        p = channels.IdleNoiseParams(T1=60.0, T2=80.0, tau=1.0, alpha=0.02)
        rep = channels.cptp_check(channels.idle_channel_superop(p, 2))
        assert rep.min_choi_eigenvalue > -1e-9, rep
        assert rep.trace_residual < 1e-9, rep
        return f"min Choi eig {rep.min_choi_eigenvalue:.2e}"

    check("idle channel is CPTP", cptp_idle)

    def cptp_kraus():
        for ch in (channels.dephasing_channel(0.05, 2), channels.amplitude_damping_channel(0.1, 2)):
            rep = channels.cptp_check(ch)
            assert rep.completeness_residual < 1e-10, rep
        return "dephasing/damping complete"

    check("Kraus channels are trace preserving", cptp_kraus)

    def cosine_law():
        n = 2
        axes = _unit_rows(rng.normal(size=(n, 3)))
        deltas = rng.uniform(0.2, 0.8, size=n)
        plan = protocol.SpectatorPlan(tuple(range(n)), axes, deltas, np.pi)
        event = np.array([[1.0 + 0j]])
        for k, d in zip(axes, deltas):
            event = np.kron(event, ops.rotation_operator(k, d))
        worst = 0.0
        for m in range(5):
            pattern = sim.PerturbationPattern(m, tuple(range(m)))
            layers = experiments.csmqc_frame_layers(plan, max(m, 1), pattern)
            sched = sim.CircuitSchedule(n_qubits=n, layers=layers, crosstalk=event, engine="pure")
            p1 = experiments.flag_probability(sim.evolve(sched, ops.basis_state(n)), 0)
            worst = max(worst, abs(p1 - protocol.detection_probability(m, plan.total_angle)))
        assert worst < 1e-9, worst
        return f"max deviation {worst:.1e}"

    check("end-to-end cosine law", cosine_law)

    def stabilizer():
        n = 3
        axes = _unit_rows(rng.normal(size=(n, 3)))
        plan = protocol.SpectatorPlan(tuple(range(n)), axes, np.full(n, 0.3), np.pi)
        s = protocol.dd_stabilizer(plan)
        target = protocol.mghz_state(plan)
        assert np.linalg.norm(s @ target - target) < 1e-9
        u = np.array([[1.0 + 0j]])
        for k in axes:
            u = np.kron(u, protocol.axis_alignment_unitary(k))
        z = u @ ops.pauli_string_matrix("Z" * n) @ u.conj().T
        assert np.max(np.abs(s @ z + z @ s)) < 1e-10
        return "stabilizes and anticommutes"

    check("transformed stabilizer", stabilizer)

    def reduction():
        rho = ops.random_density(8, rng)
        u1 = ops.random_unitary(2, rng)
        q = 1
        full = ops.expand_operator(u1, [q], 3)
        lhs = np.trace(full @ rho)
        rhs = np.trace(u1 @ sim.partial_trace(rho, [q]))
        assert abs(lhs - rhs) < 1e-12
        return "local expectation reduces"

    check("local-operator reduction identity", reduction)

    def axis_fit():
        axis = _unit_rows(rng.normal(size=(1, 3)))[0]
        delta = 0.21
        psi = ops.random_state(2, rng)
        rho = np.outer(psi, psi.conj())
        u1 = ops.rotation_operator(axis, delta)
        pts = []
        for t in range(3):
            rho = u1 @ rho @ u1.conj().T
            pts.append(characterize.bloch_coordinates(rho, 0, step=t))
        fit = characterize.fit_rotation_axis(pts)
        assert abs(fit.delta - delta) < 1e-6
        assert np.arccos(np.clip(np.dot(fit.axis, axis), -1, 1)) < 1e-6
        return "axis and angle recovered"

    check("rotation-axis fit round trip", axis_fit)
    return checks


def _unit_rows(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _cmd_validate(args) -> int:
    checks = run_validation_suite()
    for name, passed, detail in checks:
        print(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(p for _, p, _ in checks) else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="csmqc", description=__doc__)
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--seed", type=int, default=None, help="master RNG seed")
    parser.add_argument("--out", default="results", help="output directory")
    parser.add_argument("--mode", choices=("exact", "sampled"), default="exact")
    parser.add_argument("--shots", type=int, default=2000, help="shots per sample (sampled mode)")
    parser.add_argument("--figures", action="store_true", help="render figures beside the CSV")
    parser.add_argument("--input", help="input CSV (fit-axis)")
    parser.add_argument("--deltas", help="comma-separated per-event angles (plan)")
    parser.add_argument("--max-count", type=int, default=1, help="largest event count to cover (plan)")
    return parser


_DISPATCH = {
    "sweep-fp": _cmd_sweep_fp,
    "sweep-fn": _cmd_sweep_fn,
    "grid-fn": _cmd_grid_fn,
    "detect-rate": _cmd_detect_rate,
    "bell-idt": _cmd_bell_idt,
    "random-circuit": _cmd_random_circuit,
    "fit-axis": _cmd_fit_axis,
    "validate": _cmd_validate,
    "plan": _cmd_plan,
}


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return _DISPATCH[args.subcommand](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, KeyError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
