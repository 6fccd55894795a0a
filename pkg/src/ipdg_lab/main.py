"""Точка входа командной строки ipdg-lab."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Sequence

from ipdg_lab import __version__
from ipdg_lab.core.analysis import (
    coercivity_constant,
    continuity_constant,
    infsup_gamma,
    norm_equivalence_constant,
    ritz_report,
    solve_poisson,
)
from ipdg_lab.core.forms import NormKind, assemble_norm_matrix, assemble_sip, csigma_threshold
from ipdg_lab.core.grading import (
    alpha_threshold,
    face_grading_bound,
    geometric_grading_sup,
    grading_report,
    k2_grading,
)
from ipdg_lab.core.linalg import DofLimitError
from ipdg_lab.core.mesh_builder import gen_geometric, gen_shishkin, gen_uniform
from ipdg_lab.core.problems import PROBLEMS, get_problem
from ipdg_lab.core.refinement import elements_touching, refine_nvb
from ipdg_lab.core.space import estimate_trace_inverse_constant, make_space
from ipdg_lab.core.study import (
    ERROR_COLUMNS,
    FAMILIES,
    MeshFamily,
    StudyAborted,
    fitted_rate,
    ratio_constant,
    run_study,
)
from ipdg_lab.models.mesh import Mesh
from ipdg_lab.models.report import StudyReport
from ipdg_lab.utils.formatting import parse_family
from ipdg_lab.utils.mesh_io import read_mesh, write_mesh
from ipdg_lab.utils.report_io import write_matrix_market, write_rate_plot, write_study_csv
from ipdg_lab.utils.settings import RunConfig
from ipdg_lab.utils.validators import validate_run_config

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2


def configure_logging(verbose: bool = False, log_file: str | None = None) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=LOG_FORMAT,
        force=True,
    )
    if log_file:
        handler = logging.FileHandler(log_file, encoding="utf-8")
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logging.getLogger().addHandler(handler)


def _mesh_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("mesh")
    group.add_argument("--family", help=f"One of {', '.join(FAMILIES)}, optionally with parameters, e.g. 'geometric(beta=0.8, N=6)'")
    group.add_argument("--mesh", "--mesh-path", dest="mesh_path", help="Mesh JSON file (overrides --family)")
    group.add_argument("--n", type=int, help="Cells per side of uniform and Shishkin meshes")
    group.add_argument("--beta", type=float, help="Geometric grading ratio in (0, 1)")
    group.add_argument("--levels", type=int, help="Geometric levels N (or NVB corner passes); study: number of levels")
    group.add_argument("--base-levels", type=int, help="Geometric levels N of the coarsest study mesh")
    group.add_argument("--corner-cells", type=int, help="Uniform cells in the geometric corner band")
    group.add_argument("--epsilon", type=float, help="Shishkin layer width parameter in (0, 1/4]")
    group.add_argument("--n0", type=int, help="Coarsest study resolution")
    group.add_argument("--corner-passes", type=int, help="Corner marking passes of the NVB study family")


def _discretisation_options(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("discretisation")
    group.add_argument("--k", type=int, help="Polynomial degree (1..8)")
    group.add_argument("--theta", type=float, help="1 symmetric, -1 non-symmetric, 0 incomplete")
    group.add_argument("--csigma", type=float, help="Penalty constant")
    group.add_argument("--penalty-exponent", type=float, help="Penalty exponent p in h^-p")
    group.add_argument("--problem", choices=sorted(PROBLEMS), help="Manufactured solution")
    group.add_argument("--layer-epsilon", type=float, help="Layer width of the 'layer' problem")
    group.add_argument("--tol", type=float, help="Target relative residual")
    group.add_argument("--accept-tol", type=float, help="Largest accepted relative residual")
    group.add_argument("--mtx-dir", help="Directory for MatrixMarket dumps")


def _output_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--verbose", action="store_true", default=None, help="Debug logging")
    parser.add_argument("--log-file", help="Also write the log to this file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ipdg-lab",
        description="Interior penalty dG for the Poisson problem on graded triangular meshes",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    mesh = commands.add_parser("mesh", help="Generate a mesh and print its grading report")
    _mesh_options(mesh)
    mesh.add_argument("--out", help="Write the mesh as JSON")
    _output_options(mesh)

    grading = commands.add_parser("grading", help="Print mesh grading and penalty thresholds")
    _mesh_options(grading)
    grading.add_argument("--k", type=int, help="Polynomial degree (1..8)")
    grading.add_argument("--csigma", type=float, help="Penalty constant")
    grading.add_argument("--cinv", type=float, help="Trace-inverse constant (estimated when omitted)")
    grading.add_argument("--ctilde", type=float, help="Constant of the admissible grading threshold")
    _output_options(grading)

    for name, text in (
        ("solve", "Solve a manufactured Poisson problem and report all errors"),
        ("ritz", "Ritz projection stability and quasi-optimality"),
        ("infsup", "Inf-sup, coercivity and continuity constants (dense)"),
    ):
        sub = commands.add_parser(name, help=text)
        _mesh_options(sub)
        _discretisation_options(sub)
        if name == "infsup":
            sub.add_argument("--coercivity", action="store_true", default=None, help="Also compute c0")
            sub.add_argument("--samples", type=int, help="Random pairs for the continuity check")
            sub.add_argument("--seed", type=int, help="Seed of the continuity sampling")
        _output_options(sub)

    study = commands.add_parser("study", help="Convergence study over refinement levels")
    _mesh_options(study)
    _discretisation_options(study)
    study.add_argument("--gamma", action="store_true", default=None, help="Add the inf-sup constant per level")
    study.add_argument("--coercivity", action="store_true", default=None, help="Add c0 per level")
    study.add_argument("--out", help="CSV output path")
    study.add_argument("--svg", help="SVG rate plot path")
    _output_options(study)
    return parser


def parse_config(argv: Sequence[str] | None = None) -> RunConfig:
    """Parse, apply family parameters and validate; raises ``ValueError`` on bad flags."""
    namespace = build_parser().parse_args(argv)
    config = RunConfig.from_namespace(namespace)
    kind, overrides = parse_family(config.family)
    # outside studies the geometric N is the mesh's own level count
    if config.command != "study" and "base_levels" in overrides:
        overrides["levels"] = overrides["base_levels"]
    config = replace(config, family=kind, **overrides)
    return validate_run_config(config)


def build_mesh(config: RunConfig) -> Mesh:
    if config.mesh_path:
        return read_mesh(config.mesh_path)
    if config.family == "uniform":
        return gen_uniform(config.n)
    if config.family == "geometric":
        return gen_geometric(config.beta, config.levels, config.corner_cells)
    if config.family == "shishkin":
        return gen_shishkin(config.epsilon, config.n)
    mesh = gen_uniform(config.n)
    for _ in range(config.levels):
        mesh = refine_nvb(mesh, elements_touching(mesh))
    return mesh


def _emit(lines: Sequence[str]) -> None:
    for line in lines:
        print(line)


def _dump_matrices(config: RunConfig, mesh: Mesh, kinds: Sequence[NormKind]) -> None:
    if not config.mtx_dir:
        return
    directory = Path(config.mtx_dir)
    cfg = config.penalty()
    space = make_space(mesh, config.k)
    write_matrix_market(assemble_sip(mesh, space, cfg), directory / "system.mtx", symmetric=cfg.symmetric)
    for kind in kinds:
        matrix = assemble_norm_matrix(kind, mesh, space, cfg)
        write_matrix_market(matrix, directory / f"norm_{kind.value}.mtx", symmetric=True)


def cmd_mesh(config: RunConfig) -> int:
    mesh = build_mesh(config)
    if config.out:
        write_mesh(mesh, config.out)
    _emit([repr(mesh), *grading_report(mesh).summary_lines()])
    return EXIT_OK


def cmd_grading(config: RunConfig) -> int:
    mesh = build_mesh(config)
    report = grading_report(mesh)
    cinv = config.cinv if config.cinv is not None else estimate_trace_inverse_constant(config.k)
    bounds = face_grading_bound(mesh)
    lines = [
        repr(mesh),
        *report.summary_lines(),
        f"k^2 grading (k={config.k}): {k2_grading(mesh, config.k):.6g}",
        f"face bound 2|[h^2]|/{{h^2}}: {float(bounds.max()) if bounds.size else 0.0:.6g}",
        f"cinv: {cinv:.6g}" + ("" if config.cinv is not None else " (estimated)"),
        f"csigma threshold: {csigma_threshold(config.k, cinv, report.cqu):.6g} (using {config.csigma:g})",
        f"alpha threshold: {alpha_threshold(config.k, config.csigma, cinv, report.cqu, config.ctilde):.6g}",
    ]
    if config.family == "geometric" and not config.mesh_path:
        lines.append(f"geometric grading bound: {geometric_grading_sup(config.beta):.6g}")
    _emit(lines)
    return EXIT_OK


def cmd_solve(config: RunConfig) -> int:
    mesh = build_mesh(config)
    problem = get_problem(config.problem, config.layer_epsilon)
    _, errors = solve_poisson(mesh, config.k, config.penalty(), problem, config.solver())
    _dump_matrices(config, mesh, ())
    _emit([f"problem: {problem.name}", f"k: {config.k}", *errors.summary_lines()])
    return EXIT_OK


def cmd_ritz(config: RunConfig) -> int:
    mesh = build_mesh(config)
    problem = get_problem(config.problem, config.layer_epsilon)
    report = ritz_report(problem, mesh, config.k, config.penalty(), config.solver())
    _dump_matrices(config, mesh, (NormKind.Z, NormKind.H2H))
    _emit([f"problem: {problem.name}", f"k: {config.k}", *report.summary_lines()])
    return EXIT_OK


def cmd_infsup(config: RunConfig) -> int:
    mesh = build_mesh(config)
    cfg = config.penalty()
    gamma = infsup_gamma(mesh, config.k, cfg)
    continuity = continuity_constant(mesh, config.k, cfg, config.samples, config.seed)
    lines = [
        repr(mesh),
        f"dofs: {make_space(mesh, config.k).ndofs}",
        f"gamma: {gamma:.6g}",
        f"continuity (sampled, {continuity.samples} pairs, seed {config.seed}): {continuity.sampled:.6g}",
        f"continuity (exact): {continuity.exact:.6g}" if continuity.exact is not None else "continuity (exact): skipped",
        f"norm equivalence |w|_Z/|w|_L2: {norm_equivalence_constant(mesh, config.k, cfg):.6g}",
    ]
    if config.coercivity:
        lines.append(f"c0: {coercivity_constant(mesh, config.k, cfg):.6g}")
    _dump_matrices(config, mesh, (NormKind.Z, NormKind.H2H))
    _emit(lines)
    return EXIT_OK


def study_family(config: RunConfig) -> MeshFamily:
    return MeshFamily(
        kind=config.family,
        n0=config.n0,
        beta=config.beta,
        base_levels=config.base_levels,
        corner_cells=config.corner_cells,
        epsilon=config.epsilon,
        corner_passes=config.corner_passes,
    )


def _write_study(config: RunConfig, report: StudyReport) -> None:
    if config.out and report.rows:
        write_study_csv(report, config.out)
    if config.svg and len(report.rows) >= 2:
        write_rate_plot(report, config.svg)


def cmd_study(config: RunConfig) -> int:
    if config.mesh_path:
        raise ValueError("A study needs a mesh family; --mesh is not supported for 'study'")
    problem = get_problem(config.problem, config.layer_epsilon)
    try:
        report = run_study(
            study_family(config),
            config.levels,
            config.k,
            config.penalty(),
            problem,
            config.solver(),
            with_gamma=config.gamma,
            with_c0=config.coercivity,
            flags=config.flag_items(),
        )
    except StudyAborted as exc:
        _write_study(config, exc.report)
        raise
    _write_study(config, report)
    lines = [f"family: {report.family}", f"k: {report.k}", f"problem: {report.problem}"]
    for row in report.rows:
        gamma = f", gamma={row.gamma:.4g}" if row.gamma is not None else ""
        lines.append(
            f"level {row.level}: h_max={row.h_max:.4g} alpha={row.alpha:.4g} dofs={row.dofs} "
            f"l2={row.errors.l2_error:.4e}{gamma}"
        )
    lines += [f"fitted rate {column}: {fitted_rate(report, column):.3f}" for column in ERROR_COLUMNS]
    lines += [
        f"max l2/local_seminorm: {ratio_constant(report, 'local_ratio'):.4g}",
        f"max l2/(best_l2+data_osc): {ratio_constant(report, 'oscillation_ratio'):.4g}",
        f"max l2/(local_seminorm+data_osc): {ratio_constant(report, 'local_oscillation_ratio'):.4g}",
    ]
    _emit(lines)
    return EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig], int]] = {
    "mesh": cmd_mesh,
    "grading": cmd_grading,
    "solve": cmd_solve,
    "ritz": cmd_ritz,
    "infsup": cmd_infsup,
    "study": cmd_study,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        config = parse_config(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, FileNotFoundError, PermissionError) as exc:
        configure_logging()
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    configure_logging(config.verbose, config.log_file)
    logger.info("ipdg-lab %s: %s", __version__, config.to_flags())
    try:
        result = COMMANDS[config.command](config)
    except DofLimitError as exc:
        # a size limit of the dense path, not a malformed request
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, FileNotFoundError, PermissionError) as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RuntimeError as exc:
        logger.exception("Numerical failure in '%s'", config.command)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    logger.info("Command '%s' finished", config.command)
    return result


if __name__ == "__main__":
    raise SystemExit(main())
