#!/usr/bin/env python3
"""
Пакетная точка входа: oracle, solve-lens, solve-plateau, validate.

Каждая команда пишет report.json в каталог --out (с полной конфигурацией
в поле config) и возвращает код выхода:
0 успех, 1 провал проверок, 2 отказ решателя, 3 нарушено предусловие,
4 ошибка ввода-вывода или конфигурации.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from asymptotic_plateau import ExhaustionConfig, IdealDiskData, ensure_disk_data, exhaustion_solve, print_exhaustion
from config_loader import RunConfig, load_run_config, model_from_config
from continuation_solver import (
    ComparisonKind,
    HomotopySchedule,
    LensProblem,
    ScheduleKind,
    SolverConfig,
    boundary_ball_inclusion,
    cap_problem,
    contracting_schedule,
    equidistant_problem,
    equidistant_seed_schedule,
    k_ramp_schedule,
    make_lens_problem,
    maximum_principle_probe,
    print_state,
    solve_lens,
)
from immersed_surface import graph_embed
from ksurface_errors import ConfigError, ExitCode, KSurfaceError, PreconditionViolation, exit_code_for
from linearized_operator import assemble_L, dump_matrix_market
from mesh_io import export_surface, write_report
from model_surfaces import closed_sphere_surface
from validation_suite import oracle_rows, print_check, run_suite

Result = Tuple[ExitCode, Dict[str, Any]]


def print_run_banner(config: RunConfig) -> None:
    lines = [
        "=" * 72,
        f"  Команда:                  {config.command}",
        f"  Модель:                   {config.model_kind} (c = {config.c}, w_sign = {config.w_sign})",
        f"  k:                        {config.k}",
        f"  Измельчение сетки:        {config.refinement}",
        f"  Допуск Ньютона:           {config.tol:.1e}",
        f"  Каталог результатов:      {config.out}",
        "=" * 72,
    ]
    print("\n".join(lines), file=sys.stderr)


def solver_config(config: RunConfig) -> SolverConfig:
    return SolverConfig(tol=config.tol, max_newton=config.max_newton, threads=config.threads)


def build_lens_problem(config: RunConfig, model) -> LensProblem:
    if config.base_kind == "closed_sphere":
        return make_lens_problem(model, closed_sphere_surface(model, config.base_radius), config.k, config.margin)
    if config.base_kind == "equidistant_disk":
        return equidistant_problem(
            model, config.k, config.refinement, config.base_radius, config.base_extent, config.margin, config.threads
        )
    return cap_problem(model, config.k, config.refinement, config.base_radius, config.cap_angle, config.margin, config.threads)


def build_schedule(config: RunConfig, problem: LensProblem) -> HomotopySchedule:
    """Расписание из конфигурации; schedule_stages задают t (сжатие) или k (рампа)."""
    k = problem.k_target
    stages = list(config.schedule_stages)
    try:
        if config.schedule == ScheduleKind.EQUIDISTANT_SEED.value:
            return equidistant_seed_schedule(k)
        if config.schedule == ScheduleKind.K_RAMP.value:
            if stages:
                ts = np.linspace(1.0 / len(stages), 1.0, len(stages))
                return HomotopySchedule(ScheduleKind.K_RAMP, tuple((float(t), float(s)) for t, s in zip(ts, stages)))
            return k_ramp_schedule(0.5 * k, k)
        if problem.parametrization is None:
            raise ConfigError("сжатие диска требует параметризованной базы")
        if stages:
            return HomotopySchedule(ScheduleKind.CONTRACTING_DISK, tuple((float(t), k) for t in stages))
        return contracting_schedule(k)
    except ValueError as exc:
        if isinstance(exc, KSurfaceError):
            raise
        raise ConfigError(f"некорректное расписание: {exc}") from exc


def cmd_oracle(config: RunConfig, model) -> Result:
    rows = oracle_rows(model, config.refinement, config.threads)
    print(f"{'семейство':<12} {'r':>8} {'κ':>10} {'измерено':>10} {'отн. ошибка':>12}", file=sys.stderr)
    for row in rows:
        print(
            f"{row['family']:<12} {row['r']:>8.4f} {row['closed_form']:>10.6f} "
            f"{row['measured_mean']:>10.6f} {row['relative_error']:>12.3e}",
            file=sys.stderr,
        )
    return ExitCode.OK, {"rows": rows}


def cmd_solve_lens(config: RunConfig, model) -> Result:
    out = Path(config.out)
    problem = build_lens_problem(config, model)
    schedule = build_schedule(config, problem)
    graph, report = solve_lens(problem, solver_config(config), schedule, callback=print_state)
    surf = graph_embed(model, graph, threads=config.threads)
    result: Dict[str, Any] = {"solve": report.to_dict(), "hypothesis": problem.hypothesis.value}
    if model.closed_form:
        ball = boundary_ball_inclusion(model, surf)
        probe = maximum_principle_probe(model, surf, ComparisonKind.SPHERE)
        result["audits"] = {
            "boundary_ball": {"ok": ball.ok, "radius": ball.radius, "max_excess": ball.max_excess},
            "maximum_principle": {"ok": probe.ok, "contacts": probe.contacts, "violations": probe.violations},
        }
    extra = {"lam": graph.lam}
    try:
        assembly = assemble_L(model, surf, threads=config.threads)
        extra["J"] = assembly.J
        if config.dump_matrix:
            result["matrix"] = str(dump_matrix_market(assembly, out / "operator.mtx"))
    except PreconditionViolation as exc:
        result["operator_error"] = str(exc)
    obj, sidecar = export_surface(out, surf, "surface", extra, {"k": problem.k_target, "side": graph.side.value})
    result["files"] = [str(obj), str(sidecar)]
    return (ExitCode.OK if report.converged else ExitCode.SOLVER_FAILED), result


def cmd_solve_plateau(config: RunConfig, model) -> Result:
    out = Path(config.out)
    ensure_disk_data(config.ideal_kind)
    try:
        data = IdealDiskData(config.alpha, tuple(config.perturbation))
    except ValueError as exc:
        raise ConfigError(f"некорректные идеальные данные: {exc}") from exc
    exhaustion = ExhaustionConfig(
        refinement=config.refinement,
        max_stages=config.max_stages,
        tol=config.plateau_tol,
        probe_radius=config.probe_fraction,
        margin=config.margin,
        solver=solver_config(config),
    )
    surf, report = exhaustion_solve(model, data, config.k, exhaustion, callback=print_exhaustion)
    if not report.converged:
        print(f"[plateau] {report.last_error}", file=sys.stderr)
    if report.bounded is False:
        print(
            f"[plateau] высоты превышают границу δ(α_max, 0) на {report.max_bound_excess:.3e}",
            file=sys.stderr,
        )
    trace = write_report(out / "trace.json", {"stages": report.stages, "trace": report.to_dict()["trace"]})
    lam = report.final_solve.get("lam")
    extra = {"lam": np.asarray(lam)} if lam is not None else None
    obj, sidecar = export_surface(out, surf, "surface", extra, {"k": config.k, "alpha": config.alpha})
    result = {"plateau": report.to_dict(), "files": [str(obj), str(sidecar), str(trace)]}
    ok = report.converged and report.bounded is not False
    return (ExitCode.OK if ok else ExitCode.SOLVER_FAILED), result


def cmd_validate(config: RunConfig, model, only: Optional[Sequence[str]] = None) -> Result:
    summary = run_suite(config, model, only=only, callback=print_check)
    data = summary.to_dict()
    write_report(Path(config.out) / "validation.json", data)
    counts = data["counts"]
    print(f"[validate] pass {counts['pass']}, fail {counts['fail']}, skipped {counts['skipped']}", file=sys.stderr)
    return (ExitCode.OK if summary.passed else ExitCode.VALIDATION_FAILED), data


def error_payload(exc: BaseException) -> Dict[str, Any]:
    payload: Dict[str, Any] = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, PreconditionViolation):
        payload.update(precondition=exc.precondition, citation=exc.citation, details=exc.details)
    report = getattr(exc, "report", None)
    if report is not None and hasattr(report, "to_dict"):
        payload["report"] = report.to_dict()
    vertices = getattr(exc, "vertices", None)
    if vertices:
        payload["vertices"] = vertices
    return payload


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="k-поверхности в H³: оракулы, линзы, асимптотическая задача Плато")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("oracle", "solve-lens", "solve-plateau", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="файл key = value или YAML")
        p.add_argument("--refinement", type=int, default=None)
        p.add_argument("--k", type=float, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        if name == "solve-lens":
            p.add_argument("--dump-matrix", action="store_true", default=None)
        if name == "validate":
            p.add_argument("--only", action="append", default=None, help="имя проверки или группы")
    return parser


def run(config: RunConfig, only: Optional[Sequence[str]] = None) -> Result:
    model = model_from_config(config)
    if config.command == "oracle":
        return cmd_oracle(config, model)
    if config.command == "solve-lens":
        return cmd_solve_lens(config, model)
    if config.command == "solve-plateau":
        return cmd_solve_plateau(config, model)
    return cmd_validate(config, model, only)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {
        "command": args.command,
        "refinement": args.refinement,
        "k": args.k,
        "tol": args.tol,
        "out": args.out,
        "seed": args.seed,
        "threads": args.threads,
        "dump_matrix": getattr(args, "dump_matrix", None),
    }
    try:
        config = load_run_config(args.config, overrides)
    except ConfigError as exc:
        print(f"Ошибка конфигурации: {exc}", file=sys.stderr)
        return int(ExitCode.IO_OR_CONFIG)

    print_run_banner(config)
    report: Dict[str, Any] = {"command": config.command, "config": config.provenance()}
    try:
        code, result = run(config, getattr(args, "only", None))
        report["result"] = result
    except (KSurfaceError, OSError) as exc:
        code = exit_code_for(exc)
        report["error"] = error_payload(exc)
        print(f"Ошибка ({code.name}): {exc}", file=sys.stderr)
    report["exit_code"] = int(code)
    try:
        write_report(Path(config.out) / "report.json", report)
    except OSError as exc:
        print(f"Не удалось записать отчёт: {exc}", file=sys.stderr)
        return int(ExitCode.IO_OR_CONFIG)
    return int(code)


if __name__ == "__main__":
    raise SystemExit(main())
