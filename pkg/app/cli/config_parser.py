"""
Plain-text experiment configuration.

One ``key = value`` per line, ``#`` starts a comment. Every key has a matching
command-line flag; flag values override the file. Parsing collects every
problem before failing so a user can fix a document in one pass.
"""

import logging
import math
from typing import Callable, Dict, List, Mapping, NamedTuple, Optional, Tuple

from app.models.run_config import RunConfig
from app.models.surface import SurfaceKind
from app.services.expressions import parse_expression
from app.services.geometry import make_surface
from app.utils.config_exceptions import ConfigError, ConfigIssue
from app.utils.geometry_exceptions import ExpressionError, GeometryError

logger = logging.getLogger(__name__)

TRUE_WORDS = {'true', 'yes', '1', 'on'}
FALSE_WORDS = {'false', 'no', '0', 'off'}

COMMANDS = ('trajectory', 'det-growth', 'count', 'lemma-check', 'entropy-rate', 'fiber-check')


def _real(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("must be finite")
    return value


def _positive(text: str) -> float:
    value = _real(text)
    if value <= 0.0:
        raise ValueError("must be positive")
    return value


def _count(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise ValueError("must be a positive integer")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise ValueError("must be an unsigned 64-bit integer")
    return value


def _flag(text: str) -> bool:
    word = text.strip().lower()
    if word in TRUE_WORDS:
        return True
    if word in FALSE_WORDS:
        return False
    raise ValueError("expected true or false")


def _point(text: str) -> Tuple[float, float]:
    parts = [part.strip() for part in text.split(',')]
    if len(parts) != 2:
        raise ValueError("expected a point 'u, v'")
    return (_real(parts[0]), _real(parts[1]))


def _horizons(text: str) -> List[float]:
    values = [_positive(part.strip()) for part in text.split(',') if part.strip()]
    if not values:
        raise ValueError("expected a comma separated list of positive times")
    return sorted(values)


def _expression(text: str) -> str:
    parse_expression(text)
    return text.strip()


def _kind(text: str) -> str:
    return SurfaceKind(text.strip()).value


def _text(text: str) -> str:
    if not text.strip():
        raise ValueError("must not be empty")
    return text.strip()


class Key(NamedTuple):
    attribute: str
    convert: Callable[[str], object]
    help: str


SCHEMA: Dict[str, Key] = {
    'kind': Key('kind', _kind, "Surface: flat_torus, conformal_torus or hyperbolic_plane."),
    'Lx': Key('Lx', _positive, "Torus period in u."),
    'Ly': Key('Ly', _positive, "Torus period in v."),
    'lambda': Key('lambda_expr', _expression, "Conformal exponent lambda(u, v) (conformal_torus only)."),
    'b': Key('b_expr', _expression, "Magnetic profile b(u, v); default 1."),
    's': Key('s', _real, "Field strength."),
    'seed': Key('seed', _seed, "Root seed of every random stream; default 0."),
    'h': Key('h', _positive, "Integration step; default 1e-3."),
    'T': Key('T', _positive, "Time horizon."),
    'T_list': Key('T_list', _horizons, "Comma separated horizons for lemma-check."),
    'T_max': Key('T_max', _positive, "Longest horizon of the growth series."),
    'n_theta': Key('n_theta', _count, "Liouville samples (or launch angles)."),
    'n_pairs': Key('n_pairs', _count, "Endpoint pairs for the counting side."),
    'n_targets': Key('n_targets', _count, "Targets per base point for fiber-check."),
    'n_angle': Key('n_angle', _count, "Launch-angle grid size for shooting."),
    'n_time': Key('n_time', _count, "Time grid size for shooting."),
    'tol_pos': Key('tol_pos', _positive, "Position tolerance of a connection."),
    't_min': Key('t_min', _positive, "Shortest counted arrival time; at least 10 h."),
    'max_newton': Key('max_newton', _count, "Newton iteration cap."),
    'dedupe_angle': Key('dedupe_angle', _positive, "Angle radius for merging roots."),
    'dedupe_time': Key('dedupe_time', _positive, "Time radius for merging roots."),
    'allow_coincident': Key('allow_coincident', _flag, "Count even when x and y coincide."),
    'x': Key('x', _point, "Start point 'u, v'."),
    'y': Key('y', _point, "Target point 'u, v'."),
    'angle': Key('angle', _real, "Launch angle for trajectory and det-growth."),
    'renormalize': Key('renormalize', _flag, "Project back to the unit tangent bundle each step."),
    'window_fraction': Key('window_fraction', _positive, "Tail fraction of the T range used by growth fits."),
    'reference': Key('reference', _real, "Known entropy to compare the growth rate with."),
    'workers': Key('workers', _count, "Worker threads; default from MAGLAB_WORKERS."),
    'out': Key('out', _text, "Output directory."),
}

COMMAND_REQUIREMENTS: Dict[str, Tuple[str, ...]] = {
    'trajectory': ('T',),
    'det-growth': ('T',),
    'count': ('x', 'y', 'T'),
    'lemma-check': ('T_list',),
    'entropy-rate': (),
    'fiber-check': ('x', 'T'),
}

Entry = Tuple[str, Optional[int]]


def _read_lines(text: str, issues: List[ConfigIssue]) -> Dict[str, Entry]:
    entries: Dict[str, Entry] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            issues.append(ConfigIssue(number, line, "expected 'key = value'"))
            continue
        key, value = (part.strip() for part in line.split('=', 1))
        if key not in SCHEMA:
            issues.append(ConfigIssue(number, key, "unknown key"))
            continue
        if key in entries:
            issues.append(ConfigIssue(number, key, f"duplicate key (first set on line {entries[key][1]})"))
            continue
        entries[key] = (value.strip('"\''), number)
    return entries


def parse_config(text: str, overrides: Optional[Mapping[str, object]] = None,
                 command: Optional[str] = None) -> RunConfig:
    """
    Parse and validate a configuration document.

    Args:
        text: The key-value document.
        overrides: Flag values by config key; they replace file values and
            carry no line number.
        command: Subcommand whose required keys are checked as well.

    Raises:
        ConfigError: carrying every issue found, each with its line.
    """
    issues: List[ConfigIssue] = []
    entries = _read_lines(text or '', issues)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in SCHEMA:
            issues.append(ConfigIssue(None, key, "unknown key"))
            continue
        entries[key] = (value if isinstance(value, str) else _flag_text(value), None)

    values: Dict[str, object] = {}
    provenance: Dict[str, Optional[int]] = {}
    for key, (raw, line) in entries.items():
        entry = SCHEMA[key]
        try:
            values[entry.attribute] = entry.convert(raw)
            provenance[key] = line
        except ExpressionError as e:
            issues.append(ConfigIssue(line, key, str(e)))
        except ValueError as e:
            detail = str(e) if 'could not convert' not in str(e) and 'invalid literal' not in str(e) else ''
            message = f"cannot parse {raw!r}" + (f": {detail}" if detail else "")
            issues.append(ConfigIssue(line, key, message))

    def line_of(key: str) -> Optional[int]:
        return entries[key][1] if key in entries else None

    for key in ('kind', 's'):
        if key not in entries:
            issues.append(ConfigIssue(None, key, "missing required field"))

    kind = values.get('kind')
    if kind is not None:
        if kind == SurfaceKind.HYPERBOLIC_PLANE.value:
            for key in ('Lx', 'Ly'):
                if key in entries:
                    issues.append(ConfigIssue(line_of(key), key, "not allowed for hyperbolic_plane"))
        else:
            for key in ('Lx', 'Ly'):
                if key not in entries:
                    issues.append(ConfigIssue(None, key, f"missing required field for {kind}"))
        if kind == SurfaceKind.CONFORMAL_TORUS.value:
            if 'lambda' not in entries:
                issues.append(ConfigIssue(None, 'lambda', "missing required field for conformal_torus"))
        elif 'lambda' in entries:
            issues.append(ConfigIssue(line_of('lambda'), 'lambda', f"lambda not allowed for {kind}"))

    if command is not None:
        if command not in COMMANDS:
            issues.append(ConfigIssue(None, 'command', f"unknown subcommand {command!r}"))
        for key in COMMAND_REQUIREMENTS.get(command, ()):
            if key not in entries and not (key == 'T_list' and 'T' in entries):
                issues.append(ConfigIssue(None, key, f"missing required field for {command}"))

    window = values.get('window_fraction')
    if window is not None and window > 1.0:
        issues.append(ConfigIssue(line_of('window_fraction'), 'window_fraction', "must not exceed 1"))

    if not issues:
        _check_surface(values, line_of, issues)
    if not issues:
        config = RunConfig(**values, command=command, provenance=provenance)
        for problem in config.count_options().validate():
            key = problem.split(' ', 1)[0]
            issues.append(ConfigIssue(line_of(key), key, problem))
        if not issues:
            return config

    issues.sort(key=lambda issue: (issue.line is None, issue.line or 0, issue.key))
    raise ConfigError(issues)


def _check_surface(values: Dict[str, object], line_of, issues: List[ConfigIssue]) -> None:
    """Build the surface once so periodicity and domain problems surface here."""
    try:
        make_surface(values['kind'], values.get('Lx'), values.get('Ly'), values.get('lambda_expr'),
                     values.get('b_expr', '1'), values['s'])
    except GeometryError as e:
        key = 'b' if str(e).startswith('b ') else 'lambda' if 'lambda' in str(e) else 'kind'
        issues.append(ConfigIssue(line_of(key), key, str(e)))


def _flag_text(value: object) -> str:
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (tuple, list)):
        return ', '.join(str(item) for item in value)
    return str(value)