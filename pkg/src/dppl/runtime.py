"""Run configuration shared by the evaluators and the implementing functions."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

from dppl.ode import OdeConfig


class RuntimeAbort(RuntimeError):
    """A run stopped for a reason the program is responsible for."""


@dataclass
class Runtime:
    ode: OdeConfig = field(default_factory=OdeConfig)
    # particles for the top-level distribution and for nested infer
    particles: int = 1000
    nested_particles: "int | None" = None
    seed: int = 0
    workers: int = 1
    engine: str = "machine"
    # pretty(model) -> EmpiricalDist; makes ⟦infer⟧ a function of its value
    infer_cache: dict = field(default_factory=dict, repr=False)
    cache_lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.particles < 1:
            raise ValueError("particles must be at least 1")
        if self.engine not in ("machine", "smallstep"):
            raise ValueError(f"unknown engine {self.engine!r}")

    @property
    def inner_particles(self) -> int:
        return self.nested_particles or self.particles
