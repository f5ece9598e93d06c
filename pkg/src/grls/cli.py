"""Command-line front end.

Subcommands: identify, solve, control, verify, bench. Configuration comes
from `key = value` files (JSON-style values) with flag overrides; every run
writes its effective configuration next to its outputs.

Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 verification
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from ._backend import available_backends, backend_name, get_kernel
from .behavior import behavior_dimension, save_estimate
from .control import (
    SYSTEM_REGISTRY,
    ControlConfig,
    LtiSystem,
    default_config,
    identify_offline,
    nominal_controller,
    receding_horizon,
)
from .errors import GrlsError
from .manifold import StiefelPoint, SubspaceBall, chordal_distance, random_stiefel
from .oracle import (
    GridSpec,
    brute_force_inner_max,
    dense_eig_crosscheck,
    fd_gradient,
    grid_cell_error,
)
from .solver import (
    RobustLsqProblem,
    SolverOptions,
    build_A,
    find_lambda,
    grad_x,
    solve,
    top_k_eigs,
    write_trace_csv,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_VERIFY = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def parse_config_file(path: Path) -> dict:
    """`key = value` lines; values parsed as JSON when possible, '#' comments."""
    out = {}
    for line_no, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


_CFG_FIELDS = {f.name for f in dataclasses.fields(ControlConfig)}


def build_setup(args) -> tuple[LtiSystem, ControlConfig, str]:
    """System + config from file and flag overrides."""
    raw = parse_config_file(Path(args.config)) if args.config else {}
    system_name = raw.pop("system", None) or getattr(args, "system", None)
    if all(key in raw for key in ("A", "B", "C", "D")):
        system = LtiSystem(A=raw.pop("A"), B=raw.pop("B"), C=raw.pop("C"), D=raw.pop("D"))
        cfg = ControlConfig()
        name = system_name or "custom"
    elif system_name:
        if system_name not in SYSTEM_REGISTRY:
            raise KeyError(f"unknown system {system_name!r}; have {sorted(SYSTEM_REGISTRY)}")
        system = SYSTEM_REGISTRY[system_name]()
        cfg = default_config(system_name)
        name = system_name
    else:
        raise KeyError("no system selected: pass --system or a config with system/A,B,C,D")
    for key, val in raw.items():
        if key not in _CFG_FIELDS:
            raise KeyError(f"unknown config key {key!r}")
        if key in ("x0", "w_ref_point", "weight_diag") and val is not None:
            val = tuple(val)
        cfg = dataclasses.replace(cfg, **{key: val})
    for flag in ("sigma", "gamma", "seed"):
        v = getattr(args, flag, None)
        if v is not None:
            cfg = dataclasses.replace(cfg, **{flag: v})
    if getattr(args, "rho_deg", None) is not None:
        cfg = dataclasses.replace(cfg, rho_deg=args.rho_deg)
    return system, cfg, name


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_config_echo(path: Path, cfg: ControlConfig, extra: dict) -> None:
    with open(path, "w") as fh:
        for key, val in {**cfg.as_dict(), **extra}.items():
            fh.write(f"{key} = {json.dumps(val) if not isinstance(val, str) else val}\n")


def cmd_identify(args) -> int:
    system, cfg, name = build_setup(args)
    out = _outdir(args)
    k = behavior_dimension(system.m, system.n_x, cfg.L)
    est, noise, data, rank, used_seed = identify_offline(
        system, cfg.L, k=k, T_data=cfg.T_data, sigma=cfg.sigma, seed=cfg.seed
    )
    save_estimate(est, out / "estimate.npz")
    np.savetxt(out / "singular_values.csv", est.singular_values, header="sigma", comments="")
    from .behavior import write_trajectory_csv

    write_trajectory_csv(data, out / "data.csv")
    _write_config_echo(out / "config.txt", cfg, {"system": name, "k": k, "seed_used": used_seed,
                                                 "normalizer": noise.normalizer})
    print(f"system {name}: identified k={k} subspace in R^{est.subspace.n_amb}")
    print(f"  excitation rank check: rank {rank} (expected {k}), seed {used_seed}")
    print(f"  noise normalizer (output RMS): {noise.normalizer:.6f}")
    print(f"  retained/discarded singular values: {est.singular_values[k-1]:.3e} / "
          f"{est.singular_values[k]:.3e}")
    print(f"  wrote {out}/estimate.npz")
    return EXIT_OK


def cmd_solve(args) -> int:
    system, cfg, name = build_setup(args)
    out = _outdir(args)
    k = behavior_dimension(system.m, system.n_x, cfg.L)
    est, noise, _, _, _ = identify_offline(
        system, cfg.L, k=k, T_data=cfg.T_data, sigma=cfg.sigma, seed=cfg.seed
    )
    from .control import assemble_problem, simulate

    warm = simulate(system, np.asarray(cfg.x0, dtype=float),
                    np.zeros((max(cfg.T_ini, 1), system.m)), noise)
    w_ini = warm.samples[: cfg.T_ini].reshape(-1)
    prob = assemble_problem(est, w_ini, cfg)
    opts = SolverOptions(alpha=cfg.alpha, tolx=cfg.tolx, max_iter=cfg.max_iter)
    t0 = time.perf_counter()
    res = solve(prob, opts)
    dt = time.perf_counter() - t0
    write_trace_csv(res, out / "trace.csv")
    np.savetxt(out / "solution.csv",
               np.column_stack([res.x_star, res.w_star]),
               header="x_star,w_star", delimiter=",", comments="")
    _write_config_echo(out / "config.txt", cfg, {"system": name})
    print(f"solved in {res.iterations} iterations ({dt:.2f}s), converged={res.converged}")
    print(f"  final cost {res.cost_trace[-1]:.6e}, gradnorm {res.gradnorm_trace[-1]:.3e}, "
          f"lambda* {res.inner.lambda_star:.6g}, boundary={res.inner.boundary}")
    print(f"  wrote {out}/trace.csv")
    return EXIT_OK


def _run_control_once(system, cfg, seed):
    k = behavior_dimension(system.m, system.n_x, cfg.L)
    cfg_seeded = dataclasses.replace(cfg, seed=seed)
    est, noise, _, _, _ = identify_offline(
        system, cfg.L, k=k, T_data=cfg.T_data, sigma=cfg.sigma, seed=seed
    )
    return receding_horizon(system, est, cfg_seeded, noise)


def cmd_control(args) -> int:
    system, cfg, name = build_setup(args)
    out = _outdir(args)
    repeat = args.repeat
    seeds = [cfg.seed + i for i in range(repeat)]
    k = behavior_dimension(system.m, system.n_x, cfg.L)

    est0, _, _, _, _ = identify_offline(
        system, cfg.L, k=k, T_data=cfg.T_data, sigma=0.0, seed=cfg.seed
    )
    nom = nominal_controller(system, est0, cfg)
    nom.to_csv(out / "nominal.csv")

    summaries = []
    for seed in seeds:
        log = _run_control_once(system, cfg, seed)
        tag = f"seed{seed}"
        log.to_csv(out / f"closed_loop_{tag}.csv")
        log.lambda_csv(out / f"lambda_{tag}.csv")
        err = np.abs(log.y - log.ref)
        half = log.t.size // 2
        summaries.append(
            dict(seed=seed,
                 terminal_error=float(err[-1].max()),
                 mean_lambda=float(log.lambda_star.mean()),
                 settle_step=int(np.argmax(np.all(err <= 0.15, axis=1))) + 1,
                 late_error=float(err[half:].max()))
        )
    _write_config_echo(out / "config.txt", cfg, {"system": name, "repeat": repeat})
    with open(out / "summary.json", "w") as fh:
        json.dump(summaries, fh, indent=2)
    print(f"nominal baseline: terminal |y - r| = "
          f"{float(np.abs(nom.y - nom.ref)[-1].max()):.4f}")
    for s in summaries:
        print(f"seed {s['seed']}: terminal error {s['terminal_error']:.4f}, "
              f"mean lambda* {s['mean_lambda']:.4g}, late max error {s['late_error']:.4f}")
    print(f"wrote {repeat} closed-loop runs to {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    """Brute-force verification sweep; exit 3 on any failure."""
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    checks = []

    def check(name, ok, detail=""):
        checks.append((name, bool(ok), detail))
        print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f"  ({detail})" if detail else ""))

    # closed-form inner maximization vs exhaustive grid
    worst_gap = 0.0
    for n in (2, 3):
        for _ in range(25):
            Yh = random_stiefel(n, 1, rng)
            prob = RobustLsqProblem(
                ball=SubspaceBall(Yh, float(np.sin(np.deg2rad(rng.uniform(5, 40))))),
                b=rng.standard_normal(n), M=np.arange(n), gamma=float(rng.choice([0.5, 4.0])),
            )
            x = rng.standard_normal(n)
            sol = find_lambda(build_A(x, prob), prob)
            grid = GridSpec(resolution=10000 if n == 2 else 100, dims=(n, 1))
            _, gmax = brute_force_inner_max(x, prob, grid)
            eps = grid_cell_error(x, prob, grid)
            worst_gap = max(worst_gap, gmax - sol.value)
            if not (sol.value >= gmax - 1e-3 and sol.value <= gmax + eps):
                check("inner maximization vs grid", False,
                      f"value {sol.value:.6f} vs grid {gmax:.6f} (cell bound {eps:.1e})")
                break
        else:
            continue
        break
    else:
        check("inner maximization vs grid", True, f"worst gap {worst_gap:.2e}")

    # gradient vs central differences (full selector: exactness domain)
    worst_rel = 0.0
    for _ in range(20):
        n = int(rng.integers(4, 9))
        Yh = random_stiefel(n, int(rng.integers(1, n)), rng)
        prob = RobustLsqProblem(ball=SubspaceBall(Yh, 0.3), b=rng.standard_normal(n),
                                M=np.arange(n), gamma=4.0)
        x = rng.standard_normal(n)
        sol = find_lambda(build_A(x, prob), prob)
        g = grad_x(x, sol.Y_star, prob)
        if args.fault_inject:
            g = -g
        fd = fd_gradient(lambda z: find_lambda(build_A(z, prob), prob).value, x, 1e-6)
        rel = float(np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))
        worst_rel = max(worst_rel, rel)
    check("outer gradient vs central differences", worst_rel <= 1e-5,
          f"worst rel err {worst_rel:.2e}")

    # structured eigensolver vs dense decomposition
    worst_d = 0.0
    for _ in range(30):
        n = int(rng.integers(5, 60))
        k = int(rng.integers(1, n))
        Yh = random_stiefel(n, k, rng)
        x, b = rng.standard_normal(n), rng.standard_normal(n)
        prob = RobustLsqProblem(ball=SubspaceBall(Yh, 0.3), b=b,
                                M=np.arange(int(rng.integers(0, n + 1))), gamma=4.0)
        d = dense_eig_crosscheck(build_A(x, prob), float(rng.uniform(0, 5)), Yh, k)
        worst_d = max(worst_d, d)
    check("structured vs dense eigenspaces", worst_d <= 1e-8, f"worst distance {worst_d:.2e}")

    # metric equivalence on random pairs
    from .manifold import gap_distance

    ok = True
    for (k, n) in ((1, 3), (2, 5), (3, 8)):
        for _ in range(300):
            Y1, Y2 = random_stiefel(n, k, rng), random_stiefel(n, k, rng)
            dc, dg = chordal_distance(Y1, Y2), gap_distance(Y1, Y2)
            if not (dg <= dc + 1e-12 and dc <= np.sqrt(k) * dg + 1e-12):
                ok = False
        check(f"metric equivalence Gr({k},{n})", ok)

    # complementary slackness sweep
    worst_slack = 0.0
    for _ in range(40):
        n = int(rng.integers(4, 10))
        k = int(rng.integers(1, n))
        Yh = random_stiefel(n, k, rng)
        prob = RobustLsqProblem(ball=SubspaceBall(Yh, float(rng.uniform(0.05, 0.6))),
                                b=rng.standard_normal(n),
                                M=np.arange(int(rng.integers(0, n + 1))), gamma=4.0)
        sol = find_lambda(build_A(rng.standard_normal(n), prob), prob)
        d = chordal_distance(sol.Y_star, Yh)
        worst_slack = max(worst_slack, abs(sol.lambda_star * (d**2 - prob.ball.radius**2)))
    check("complementary slackness", worst_slack <= 1e-5, f"worst residual {worst_slack:.2e}")

    report = {name: {"passed": ok, "detail": detail} for name, ok, detail in checks}
    if args.out:
        out = _outdir(args)
        with open(out / "verify_report.json", "w") as fh:
            json.dump(report, fh, indent=2)
        print(f"wrote {out}/verify_report.json")
    if all(ok for _, ok, _ in checks):
        print("all verification checks passed")
        return EXIT_OK
    print("verification FAILED")
    return EXIT_VERIFY


def cmd_bench(args) -> int:
    rng = np.random.default_rng(0)
    n, k = 70, 37
    Yh = StiefelPoint(np.vstack([np.eye(k), np.zeros((n - k, k))]))
    b = rng.standard_normal(n)
    b /= np.sqrt(np.mean(b**2))
    prob = RobustLsqProblem(ball=SubspaceBall(Yh, float(np.sin(np.pi / 8))), b=b,
                            M=np.arange(20), gamma=4.0)
    opts = SolverOptions(alpha=0.1, tolx=1e-4, max_iter=20000, profile=True)
    print(f"benchmark instance: n={n}, k={k}, gamma=4, rho=sin(pi/8), tolx=1e-4")
    print(f"active backend: {backend_name()} (available: {', '.join(available_backends())})")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        t0 = time.perf_counter()
        res = solve(prob, opts)
        wall = time.perf_counter() - t0
    per = wall / max(res.iterations, 1)
    print(f"full solve: {res.iterations} iterations, {wall:.3f}s wall "
          f"({1e3 * per:.2f} ms/iteration), converged={res.converged}")
    if res.timings:
        inner = res.timings.get("inner", 0.0)
        gradt = res.timings.get("gradient", 0.0)
        print(f"  breakdown: worst-case subspace {inner:.3f}s, gradient {gradt:.3f}s, "
              f"other {max(wall - inner - gradt, 0.0):.3f}s")

    # structured vs dense top-k at the larger experiment size
    n2, k2 = 140, 108
    Yh2 = random_stiefel(n2, k2, rng)
    x2, b2 = rng.standard_normal(n2), rng.standard_normal(n2)
    prob2 = RobustLsqProblem(ball=SubspaceBall(Yh2, 0.05), b=b2, M=np.arange(40), gamma=4.0)
    A2 = build_A(x2, prob2)
    from .oracle import dense_top_k

    reps = 20
    t0 = time.perf_counter()
    for _ in range(reps):
        top_k_eigs(A2, 1.0, Yh2, k2)
    t_struct = (time.perf_counter() - t0) / reps
    t0 = time.perf_counter()
    for _ in range(reps):
        dense_top_k(A2, 1.0, Yh2, k2)
    t_dense = (time.perf_counter() - t0) / reps
    print(f"top-k eigenspace at n={n2}, k={k2}: structured {1e3 * t_struct:.2f} ms vs "
          f"dense {1e3 * t_dense:.2f} ms ({t_dense / t_struct:.1f}x)")

    # kernel backend comparison on the multiplier search
    from ._inner import build_block

    block = build_block(A2.V, A2.C, Yh2.basis)
    lam_args = (block.r, k2, n2, prob2.ball.radius, 1e-8 * np.sqrt(k2),
                1.0 + block.trace_norm, 1e12 * max(1.0, block.trace_norm))
    for name in available_backends():
        kern = get_kernel(name)
        A2c = np.ascontiguousarray(block.A2)
        kern(A2c, *lam_args)  # warm
        t0 = time.perf_counter()
        for _ in range(50):
            lam, dist, status, _ = kern(A2c, *lam_args)
        dt = (time.perf_counter() - t0) / 50
        print(f"multiplier search [{name}]: {1e3 * dt:.3f} ms/call "
              f"(lambda {lam:.4g}, status {status})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _Parser(prog="grls", description=__doc__)
    parser.add_argument("--version", action="version", version=f"grls {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--system", choices=sorted(SYSTEM_REGISTRY),
                        help="built-in system registry entry")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--sigma", type=float, default=None)
    common.add_argument("--rho-deg", dest="rho_deg", type=float, default=None)
    common.add_argument("--gamma", type=float, default=None)

    sub.add_parser("identify", parents=[common], help="offline subspace identification")
    sub.add_parser("solve", parents=[common], help="one robust solve with trace export")
    p_control = sub.add_parser("control", parents=[common], help="closed-loop experiments")
    p_control.add_argument("--repeat", type=int, default=1, help="number of seeds")
    p_verify = sub.add_parser("verify", parents=[common], help="brute-force verification suite")
    p_verify.add_argument("--fault-inject", action="store_true",
                          help="flip the gradient sign to self-test the verifier")
    sub.add_parser("bench", parents=[common], help="timing benchmarks")

    args = parser.parse_args(argv)
    try:
        if args.command == "identify":
            return cmd_identify(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "control":
            return cmd_control(args)
        if args.command == "verify":
            return cmd_verify(args)
        if args.command == "bench":
            return cmd_bench(args)
        parser.error(f"unknown command {args.command!r}")
    except (KeyError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GrlsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
