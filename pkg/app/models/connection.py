import math
from dataclasses import dataclass, field, asdict
from typing import List, Optional


@dataclass(frozen=True)
class ConnectionRoot:
    """One connecting trajectory, i.e. one preimage of y under the shooting map."""
    launch_angle: float
    arrival_time: float
    residual: float
    jacobian_det: float

    @property
    def arc_length(self) -> float:
        return self.arrival_time

    def to_dict(self):
        return {
            'angle': self.launch_angle,
            't': self.arrival_time,
            'residual': self.residual,
            'jacobian_det': self.jacobian_det,
        }


@dataclass(frozen=True)
class CountOptions:
    """
    Grid, tolerance and Newton settings for counting connections.

    ``n_time`` and the dedupe radii default from T and ``n_angle`` when left
    as None (see ``resolved``).
    """
    n_angle: int = 720
    n_time: Optional[int] = None
    tol_pos: float = 1e-6
    dedupe_angle: Optional[float] = None
    dedupe_time: Optional[float] = None
    t_min: Optional[float] = None
    max_newton: int = 20
    step: float = 1e-3
    scan_step: float = 1e-2
    time_cell: float = 0.05
    allow_coincident: bool = False

    def resolved(self, T: float) -> 'CountOptions':
        """Fill defaults that depend on the horizon T."""
        t_min = self.t_min if self.t_min is not None else 10.0 * self.step
        n_time = self.n_time
        if n_time is None:
            n_time = max(8, int(math.ceil((T - t_min) / self.time_cell)) + 1)
        dedupe_angle = self.dedupe_angle
        if dedupe_angle is None:
            dedupe_angle = (2.0 * math.pi / self.n_angle) / 2.0
        dedupe_time = self.dedupe_time
        if dedupe_time is None:
            dedupe_time = 0.5 * max(T - t_min, 0.0) / max(n_time - 1, 1)
        return CountOptions(
            n_angle=self.n_angle, n_time=n_time, tol_pos=self.tol_pos,
            dedupe_angle=dedupe_angle, dedupe_time=dedupe_time, t_min=t_min,
            max_newton=self.max_newton, step=self.step, scan_step=self.scan_step,
            time_cell=self.time_cell, allow_coincident=self.allow_coincident,
        )

    def validate(self) -> List[str]:
        problems = []
        for name in ('n_angle', 'max_newton'):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        for name in ('tol_pos', 'step', 'scan_step', 'time_cell'):
            if not getattr(self, name) > 0:
                problems.append(f"{name} must be positive")
        if self.n_time is not None and self.n_time < 2:
            problems.append("n_time must be at least 2")
        if self.t_min is not None and self.t_min < 10.0 * self.step * (1 - 1e-12):
            problems.append("t_min must be at least 10 * step")
        return problems

    def to_dict(self):
        return asdict(self)


@dataclass
class CountFlags:
    """Reliability flags attached to a count."""
    suspected_multiplicity: bool = False
    continuum_degenerate: bool = False
    discarded_cells: int = 0
    singular_cells: int = 0

    def to_dict(self):
        return asdict(self)


@dataclass
class CountResult:
    """n_T(x, y) with the roots that realise it."""
    count: int
    roots: List[ConnectionRoot] = field(default_factory=list)
    flags: CountFlags = field(default_factory=CountFlags)

    @property
    def reliable(self) -> bool:
        return not self.flags.continuum_degenerate
