"""Command line: ``sobolev-growth <command> [--config c.json] [--out dir]``.

Every command writes its outputs and a ``run_record.json`` into ``--out``.
Exit status is 0 when every check passes, 1 when a check fails and 2 when
the configuration is invalid.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import click
import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, dynamics, kernels, mourre, normalform, resonance
from .config import ConfigError, ExperimentConfig
from .fourier import FourierField, sobolev_norm
from .symbols import SymbolLattice, decay_slope, sym_g2

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunRecord:
    """What was run, on which inputs, and what it produced."""

    command: str
    config: dict
    input_hash: str
    version: str
    backend: str
    threads: int
    outputs: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    steps: int = 0

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @staticmethod
    def hash_inputs(command: str, config: dict) -> str:
        text = json.dumps({"command": command, "config": _jsonable(config), "version": __version__},
                          sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()

    def add_output(self, path: Path) -> None:
        self.outputs[path.name] = _sha256(path)

    def write(self, out: Path) -> Path:
        path = out / "run_record.json"
        _dump_json(path, {**asdict(self), "passed": self.passed})
        return path


# ---------------------------------------------------------------------------
# command bodies: each takes (cfg, out, record, threads) and fills record


def _initial_field(cfg: ExperimentConfig) -> FourierField:
    K = cfg.K
    if cfg.data == "wellprepared":
        return mourre.build_wellprepared(cfg.epsilon, cfg.theta, cfg.alpha, cfg.s, cfg.rho1, cfg.rho_m1,
                                         cfg.rho, K=K).field
    if cfg.data == "planewave":
        return FourierField.from_modes({cfg.planewave_mode: cfg.planewave_amplitude}, K)
    if cfg.data == "random":
        u = FourierField.random(K, np.random.default_rng(cfg.seed))
        return u * (cfg.random_norm / sobolev_norm(u, cfg.s0))
    if cfg.data == "zero":
        return FourierField.zeros(K)
    return FourierField.from_json(Path(cfg.data_file).read_text(), K)


def run_simulate(cfg: ExperimentConfig, out: Path, record: RunRecord, threads: int) -> dict:
    try:
        u0 = _initial_field(cfg)
    except mourre.WellPreparedError as exc:
        raise ConfigError(str(exc)) from exc
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot build initial data: {exc}") from exc
    T = cfg.T if cfg.T is not None else (cfg.T_max if cfg.data == "wellprepared" else 20.0)
    cfl = cfg.dt * cfg.K * sobolev_norm(u0, cfg.s0) ** 2
    if cfl > 0.5:
        raise ConfigError(f"violated: dt K ||u0||_s0^2 <= 0.5 (got {cfl:.4g})")
    traj = dynamics.integrate(cfg.equation, u0, cfg.alpha, cfg.dt, T, s=cfg.s, s0=cfg.s0, stride=cfg.stride)
    record.steps = int(round(T / cfg.dt))
    csv_path = out / "trajectory.csv"
    traj.to_csv(csv_path)
    record.add_output(csv_path)
    if cfg.snapshot_stride > 0:
        snap = out / "snapshots"
        snap.mkdir(exist_ok=True)
        for i in range(0, len(traj.states), cfg.snapshot_stride):
            p = snap / f"field_{i:06d}.json"
            p.write_text(traj.states[i].to_json())
            record.outputs[f"snapshots/{p.name}"] = _sha256(p)
    mass, mom = traj.column("mass"), traj.column("momentum")
    scale = max(mass[0], 1e-300)
    summary = {
        "T": T, "steps": record.steps, "aborted": traj.aborted,
        "mass_drift": float(np.max(np.abs(mass - mass[0])) / scale) if mass[0] > 0 else 0.0,
        "momentum_drift": float(np.max(np.abs(mom - mom[0])) / scale) if mass[0] > 0 else 0.0,
    }
    record.checks["finite"] = traj.aborted is None
    record.checks["conservation"] = summary["mass_drift"] <= 1e-8 and summary["momentum_drift"] <= 1e-8
    if cfg.data == "planewave":
        k, a = cfg.planewave_mode, cfg.planewave_amplitude
        # main: the cubic term shifts the frequency by -|a|^2 k; renormalized:
        # it is cancelled by the mass term and the momentum term adds +|a|^2 k
        sign = -1.0 if cfg.equation == "main" else 1.0
        omega = abs(k) ** cfg.alpha + sign * abs(a) ** 2 * k
        t_end = traj.times[-1]
        exact = FourierField.from_modes({k: a * np.exp(-1j * omega * t_end)}, cfg.K)
        err = sobolev_norm(traj.states[-1] - exact, 0) / sobolev_norm(exact, 0)
        summary["planewave_relative_error"] = err
        record.checks["exact_orbit"] = err <= 1e-7
    if cfg.data == "zero":
        record.checks["constant"] = all(not np.any(u.coeffs) for u in traj.states)
    if cfg.data == "wellprepared":
        hs = traj.column("Hs")
        factor = float(np.max(hs) / hs[0])
        boot = dynamics.bootstrap_check(traj, cfg.epsilon, cfg.theta, cfg.s0)
        summary["Hs_growth_factor"] = factor
        summary["bootstrap"] = asdict(boot)
        record.checks["Hs_growth_1.5"] = factor >= 1.5
    return summary


def run_effective(cfg: ExperimentConfig, out: Path, record: RunRecord, threads: int) -> dict:
    K = cfg.K_effective
    try:
        data = mourre.build_wellprepared(cfg.epsilon, cfg.theta, cfg.alpha, cfg.s, cfg.rho1, cfg.rho_m1,
                                         cfg.rho, K=K)
    except mourre.WellPreparedError as exc:
        raise ConfigError(str(exc)) from exc
    zm1 = 0.0 if cfg.control else cfg.zm1
    setup = mourre.build_setup(cfg.epsilon, cfg.theta, cfg.alpha, cfg.s, cfg.z1, zm1, K)
    result = mourre.growth_experiment(setup, data, cfg.effective_dt, cfg.T)
    record.steps = len(result.times) - 1
    csv_path, json_path = out / "growth.csv", out / "growth.json"
    result.to_csv(csv_path)
    summary = result.summary()
    summary["control"] = cfg.control
    _dump_json(json_path, summary)
    record.add_output(csv_path)
    record.add_output(json_path)
    if cfg.control:
        A = np.asarray(result.A)
        record.checks["flat_A"] = bool(np.max(np.abs(A - A[0])) <= 1e-12 * max(1.0, abs(A[0])))
    else:
        record.checks["growth"] = result.passed
    return summary


def _projection_residuals(J: int, alpha: float, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    table = resonance.x3_table(J)
    u = FourierField.random(J, rng).coeffs
    out = {}
    for n in (0, 1, 2):
        proj = resonance.project_cubic(table, resonance.selector_R(n, alpha)).evaluate(u, J)
        closed = resonance.proj_x3_closed_form(u, n, J)
        out[f"R{n}"] = float(np.max(np.abs(proj - closed)))
    return out


def _audit_one(args):
    J, alpha = args
    return resonance.audit_lower_bounds(J, alpha)


def run_resonance_audit(cfg: ExperimentConfig, out: Path, record: RunRecord, threads: int) -> dict:
    alphas = list(dict.fromkeys([cfg.alpha] + list(cfg.alpha_sweep)))
    jobs = [(cfg.J, a) for a in alphas]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
            reports = list(pool.map(_audit_one, jobs))
    else:
        reports = [_audit_one(j) for j in jobs]
    summary = {"audits": {}}
    for alpha, rep in zip(alphas, reports):
        path = out / f"audit_alpha_{alpha:g}.json"
        _dump_json(path, rep)
        record.add_output(path)
        summary["audits"][f"{alpha:g}"] = rep["min_bounds"]
        tag = f"alpha={alpha:g}"
        record.checks[f"{tag}: no class-1 resonances"] = rep["class1_resonances"] == 0
        record.checks[f"{tag}: class-2 resonances structural"] = rep["class2_nonstructural_resonances"] == 0
        record.checks[f"{tag}: class-1 gap >= 2^alpha - 1"] = rep["class1_bound_holds"]
        record.checks[f"{tag}: class-2 scaled gap positive"] = rep["class2_bound_positive"]
    proj = _projection_residuals(cfg.projection_J, cfg.alpha, cfg.seed)
    summary["projection_residuals"] = proj
    path = out / "projections.json"
    _dump_json(path, proj)
    record.add_output(path)
    record.checks["projection identities"] = max(proj.values()) <= 1e-13
    return summary


def _nf_field(cfg: ExperimentConfig) -> FourierField:
    modes = {int(k): complex(v[0], v[1]) for k, v in cfg.nf_field.items()}
    return FourierField.from_modes(modes, cfg.nf_K)


def run_normalform_verify(cfg: ExperimentConfig, out: Path, record: RunRecord, threads: int) -> dict:
    summary = {}
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(cfg.transport_fields):
        u = FourierField.random(cfg.transport_K, rng, support=cfg.transport_K // 4)
        u = u * (0.1 / sobolev_norm(u, 0))
        worst = max(worst, normalform.verify_transport_identity(u, cfg.alpha) / sobolev_norm(u, 0) ** 2)
    summary["transport_identity_relative"] = worst
    record.checks["transport homological identity"] = worst <= 1e-12

    u = _nf_field(cfg)
    lat = SymbolLattice.for_truncation(cfg.nf_K)
    rows = []
    summary["decay"] = {}
    for rho in cfg.nf_rho:
        if np.any(u.coeffs):
            _, r2 = sym_g2(u, cfg.alpha, rho, lat)
            sym_slope = decay_slope(r2, cfg.nf_K / 8, cfg.nf_K)
        else:
            sym_slope = float("-inf")
        rep = normalform.verify_block_diagonalization(u, cfg.alpha, rho)
        summary["decay"][f"{rho:g}"] = {
            "symbol_residual_slope": sym_slope, "block_slope": rep.slope,
            "baseline_slope": rep.baseline_slope,
            "baseline_xi_weighted_slope": rep.baseline_xi_weighted_slope,
            "richardson_error": rep.fit_error,
        }
        record.checks[f"rho={rho:g}: symbol residual slope <= -rho + 0.2"] = sym_slope <= -rho + 0.2
        record.checks[f"rho={rho:g}: block slope <= -0.7"] = rep.slope <= -0.7
        for c, n, b, bx in zip(rep.centers, rep.norms, rep.baseline_norms, rep.baseline_xi_norms):
            rows.append((rho, c, n, b, bx))
    path = out / "decay.csv"
    _write_csv(path, ["rho", "shell_center", "conjugated_norm", "baseline_norm", "baseline_xi_norm"], rows)
    record.add_output(path)

    strong = normalform.verify_strong_lambda(cfg.alpha, cfg.strong_K, seed=cfg.seed)
    summary["strong_lambda"] = asdict(strong)
    record.checks["strong Lambda normal form"] = strong.passed
    path = out / "normalform.json"
    _dump_json(path, summary)
    record.add_output(path)
    return summary


def _mourre_row(cfg: ExperimentConfig, eps: float) -> dict:
    R = mourre.radius(eps, cfg.theta, cfg.alpha)
    K = max(cfg.K, mourre.minimal_K(R))
    setup = mourre.build_setup(eps, cfg.theta, cfg.alpha, cfg.s, eps * cfg.rho1, eps * cfg.rho_m1, K)
    comm = mourre.check_positive_commutator(setup)
    upper = mourre.check_upper_bound(setup)
    return {"epsilon": eps, "R": R, "K": K, "min_gap": comm.min_gap, "C": comm.constant,
            "C_z": comm.constant_z, "hermitian_defect": comm.hermitian_defect,
            "upper_min_gap": upper.min_gap, "upper_C": upper.constant}


def run_mourre_check(cfg: ExperimentConfig, out: Path, record: RunRecord, threads: int) -> dict:
    row = _mourre_row(cfg, cfg.epsilon)
    sym = mourre.bracket_decomposition(cfg.z1, cfg.zm1, cfg.s, cfg.R)
    summary = {**row, "a1_min": sym.a1_min, "a2_min": sym.a2_min,
               "bracket_decomposition_defect": sym.decomposition_defect}
    record.checks["commutator constant C <= 100"] = row["C"] <= 100
    record.checks["commutator symmetric"] = row["hermitian_defect"] <= 1e-12
    record.checks["upper bound constant finite"] = math.isfinite(row["upper_C"])
    record.checks["a1 >= 0 pointwise"] = sym.a1_min >= -1e-13
    record.checks["a2 >= 0 pointwise"] = sym.a2_min >= -1e-13
    if cfg.epsilon_sweep:
        table = [_mourre_row(cfg, e) for e in cfg.epsilon_sweep]
        path = out / "constant_sweep.csv"
        cols = ["epsilon", "R", "K", "min_gap", "C", "C_z", "upper_C"]
        _write_csv(path, cols, [[r[c] for c in cols] for r in table])
        record.add_output(path)
        summary["sweep"] = table
    path = out / "mourre.json"
    _dump_json(path, summary)
    record.add_output(path)
    return summary


def run_make_data(cfg: ExperimentConfig, out: Path, record: RunRecord, threads: int) -> dict:
    try:
        data = mourre.build_wellprepared(cfg.epsilon, cfg.theta, cfg.alpha, cfg.s, cfg.rho1, cfg.rho_m1,
                                         cfg.rho, K=cfg.K)
    except mourre.WellPreparedError as exc:
        raise ConfigError(str(exc)) from exc
    path = out / "data.json"
    path.write_text(data.field.to_json() + "\n")
    record.add_output(path)
    summary = {"rho": data.rho, "N": data.N, "R": data.R, "nu0": data.nu0, "A0": data.A0,
               "A0_closed_form": data.A0_closed_form, "threshold": data.threshold}
    record.checks["A(0) > eps^(3 - 3 theta)"] = data.A0 > data.threshold
    return summary


RUNNERS = {
    "simulate": run_simulate,
    "effective": run_effective,
    "resonance-audit": run_resonance_audit,
    "normalform-verify": run_normalform_verify,
    "mourre-check": run_mourre_check,
    "make-data": run_make_data,
}


def execute(command: str, cfg: ExperimentConfig, out: Path, threads: int = 1) -> RunRecord:
    """Validate, run and record one command.  Raises :class:`ConfigError`."""
    cfg.validate(command)
    out.mkdir(parents=True, exist_ok=True)
    config = cfg.to_dict()
    record = RunRecord(command, config, RunRecord.hash_inputs(command, config), __version__,
                       kernels.BACKEND, threads)
    start = time.perf_counter()
    with threadpool_limits(limits=threads):
        summary = RUNNERS[command](cfg, out, record, threads)
    record.wall_clock = time.perf_counter() - start
    path = out / "summary.json"
    _dump_json(path, summary)
    record.add_output(path)
    record.write(out)
    return record


def _invoke(ctx_obj: dict, command: str) -> None:
    try:
        cfg = ExperimentConfig.load(ctx_obj["config"])
        if ctx_obj["seed"] is not None:
            cfg.seed = ctx_obj["seed"]
        record = execute(command, cfg, Path(ctx_obj["out"]), ctx_obj["threads"])
    except ConfigError as exc:
        click.echo(f"invalid configuration: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    for name, ok in record.checks.items():
        click.echo(f"{'PASS' if ok else 'FAIL'}  {name}")
    click.echo(f"outputs in {ctx_obj['out']} ({record.wall_clock:.2f} s)")
    sys.exit(EXIT_OK if record.passed else EXIT_CHECK_FAILED)


@click.group()
@click.option("--config", "config", type=click.Path(dir_okay=False), default=None,
              help="JSON configuration; omitted keys take the desk defaults.")
@click.option("--out", "out", type=click.Path(file_okay=False), default="runs/latest", show_default=True)
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True,
              help="BLAS threads and sweep workers.")
@click.option("--seed", type=int, default=None, help="Overrides the configuration seed.")
@click.version_option(__version__)
@click.pass_context
def main(ctx, config, out, threads, seed):
    """Numerical experiments on Sobolev norm growth for a fractional cubic equation."""
    ctx.obj = {"config": config, "out": out, "threads": threads, "seed": seed}


def _make_command(name: str, doc: str):
    @main.command(name, help=doc)
    @click.pass_obj
    def _cmd(obj):
        _invoke(obj, name)
    return _cmd


for _name, _doc in [
    ("simulate", "Integrate the full or renormalized equation and record monitors."),
    ("effective", "Run the effective-equation growth experiment."),
    ("resonance-audit", "Audit frequency gaps and the cubic projection identities."),
    ("normalform-verify", "Check homological identities, block-diagonal decay and the strong normal form."),
    ("mourre-check", "Positive-commutator and upper-bound eigenvalue reports."),
    ("make-data", "Write well-prepared initial data as a field JSON file."),
]:
    _make_command(_name, _doc)


if __name__ == "__main__":  # pragma: no cover
    main()
