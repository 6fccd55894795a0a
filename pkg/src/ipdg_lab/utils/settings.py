"""Run configuration assembled from command-line flags."""
from __future__ import annotations

import argparse
from dataclasses import dataclass, fields, replace

from ..models.config import DEFAULT_CSIGMA, PenaltyConfig, SolverSettings

# Options that do not change any numerical output.
_OUTPUT_ONLY = {"command", "out", "svg", "mtx_dir", "log_file", "verbose"}


@dataclass
class RunConfig:
    """Все параметры, нужные командам CLI."""

    command: str = "solve"
    family: str = "uniform"
    mesh_path: str | None = None
    n: int = 8
    beta: float = 0.9
    levels: int = 4
    base_levels: int = 4
    corner_cells: int | None = None
    epsilon: float = 0.01
    n0: int = 4
    corner_passes: int = 3
    k: int = 1
    theta: float = 1.0
    csigma: float = DEFAULT_CSIGMA
    penalty_exponent: float = 1.0
    problem: str = "sinsin"
    layer_epsilon: float = 0.01
    tol: float = 1e-12
    accept_tol: float = 1e-10
    samples: int = 1000
    seed: int = 0
    gamma: bool = False
    coercivity: bool = False
    cinv: float | None = None
    ctilde: float = 1.0
    out: str | None = None
    svg: str | None = None
    mtx_dir: str | None = None
    log_file: str | None = None
    verbose: bool = False

    def clone(self) -> "RunConfig":
        return replace(self)

    @classmethod
    def from_namespace(cls, namespace: argparse.Namespace) -> "RunConfig":
        values = {f.name: getattr(namespace, f.name) for f in fields(cls) if hasattr(namespace, f.name)}
        return cls(**{key: value for key, value in values.items() if value is not None})

    def penalty(self) -> PenaltyConfig:
        return PenaltyConfig(
            csigma=self.csigma, theta=self.theta, penalty_exponent=self.penalty_exponent
        )

    def solver(self) -> SolverSettings:
        return SolverSettings(tol=self.tol, accept_tol=self.accept_tol)

    def flag_items(self) -> dict[str, object]:
        """Settings that influence results, skipping unset options."""
        items: dict[str, object] = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in _OUTPUT_ONLY or value is None or value is False:
                continue
            items[f.name] = repr(value) if isinstance(value, float) else value
        return items

    def to_flags(self) -> str:
        """Every setting that influences results, rendered as command-line flags."""
        parts = [self.command]
        for name, value in self.flag_items().items():
            flag = "--" + name.replace("_", "-")
            parts.append(flag if value is True else f"{flag} {value}")
        return " ".join(parts)
