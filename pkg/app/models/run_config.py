from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Tuple

from app.models.connection import CountOptions


@dataclass
class RunConfig:
    """
    Validated experiment configuration.

    Produced by ``app.cli.config_parser.parse_config``; ``provenance`` maps each
    key to the line it came from (None for command-line flags and defaults).
    """
    kind: str
    s: float
    Lx: Optional[float] = None
    Ly: Optional[float] = None
    lambda_expr: Optional[str] = None
    b_expr: str = '1'
    command: Optional[str] = None
    seed: int = 0
    h: float = 1e-3
    T: Optional[float] = None
    T_list: List[float] = field(default_factory=list)
    T_max: Optional[float] = None
    n_theta: int = 1000
    n_pairs: int = 1000
    n_targets: int = 200
    n_angle: int = 720
    n_time: Optional[int] = None
    tol_pos: float = 1e-6
    t_min: Optional[float] = None
    max_newton: int = 20
    dedupe_angle: Optional[float] = None
    dedupe_time: Optional[float] = None
    allow_coincident: bool = False
    x: Optional[Tuple[float, float]] = None
    y: Optional[Tuple[float, float]] = None
    angle: float = 0.0
    renormalize: bool = True
    window_fraction: float = 0.5
    reference: Optional[float] = None
    workers: Optional[int] = None
    out: Optional[str] = None
    provenance: Dict[str, Optional[int]] = field(default_factory=dict, repr=False, compare=False)

    def count_options(self) -> CountOptions:
        """Counting options implied by this run."""
        return CountOptions(
            n_angle=self.n_angle,
            n_time=self.n_time,
            tol_pos=self.tol_pos,
            dedupe_angle=self.dedupe_angle,
            dedupe_time=self.dedupe_time,
            t_min=self.t_min,
            max_newton=self.max_newton,
            step=self.h,
            allow_coincident=self.allow_coincident,
        )

    def surface_dict(self):
        return {
            'kind': self.kind,
            'Lx': self.Lx,
            'Ly': self.Ly,
            'lambda': self.lambda_expr,
            'b': self.b_expr,
            's': self.s,
        }

    def to_dict(self):
        data = asdict(self)
        data.pop('provenance', None)
        return data
