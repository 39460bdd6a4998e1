# scenarios/scenario.py

from dataclasses import asdict, dataclass, field, replace
from typing import Optional
import json
import logging
import math

from decouple import Csv, RepositoryEnv
from django.conf import settings
from django.core.exceptions import ValidationError

from beams.dynamics import DEFAULT_WIDTH_EVENT, TOL_RANGE
from beams.propagator import ReinitPolicy
from core.exceptions import UnknownPotential
from core.grid import Grid
from core.potentials import builtin
from frames.gabor import PERIODIZATION_TOL, GaborLattice
from scenarios.datum import DATUMS
from scenarios.presets import DEFAULTS, PRESETS, preset_values

logger = logging.getLogger(__name__)

BASELINES = ('none', 'no_reinit', 'unwindowed')


@dataclass(frozen=True)
class Scenario:
    """Everything a run needs; validated eagerly by `validate`"""

    name: str = 'custom'
    preset: Optional[str] = None
    L: int = DEFAULTS['L']
    hbar: float = DEFAULTS['hbar']
    a: int = DEFAULTS['a']
    M: int = DEFAULTS['M']
    potential: str = DEFAULTS['potential']
    potential_params: dict = field(default_factory=dict)
    datum: str = DEFAULTS['datum']
    datum_params: dict = field(default_factory=dict)
    eta: float = DEFAULTS['eta']
    T: float = DEFAULTS['T']
    reinit: str = DEFAULTS['reinit']
    output_times: tuple = ()
    reference_dt: float = DEFAULTS['reference_dt']
    tol: Optional[float] = DEFAULTS['tol']
    width_event: Optional[float] = DEFAULTS['width_event']
    baseline: str = DEFAULTS['baseline']
    probe_hbars: tuple = ()

    # ====================================================================
    # CONSTRUCTION
    # ====================================================================

    @classmethod
    def from_preset(cls, name, **overrides):
        try:
            values = preset_values(name)
        except KeyError as e:
            raise ValidationError({'preset': str(e.args[0])}) from None
        return cls._build({**values, **_drop_none(overrides)})

    @classmethod
    def from_config_file(cls, path, **overrides):
        """
        KEY=value scenario file. PRESET selects the base values, file keys
        override them and keyword overrides (CLI flags) override both.
        """
        repository = RepositoryEnv(str(path))
        values = dict(DEFAULTS)
        preset = _read(repository, 'PRESET', str)
        if preset:
            try:
                values = preset_values(preset)
            except KeyError as e:
                raise ValidationError({'preset': str(e.args[0])}) from None

        values.update(_read_file_values(repository))
        values.setdefault('name', preset or 'custom')
        logger.debug(f'Loaded scenario file {path} (base preset: {preset or "none"})')
        return cls._build({**values, **_drop_none(overrides)})

    @classmethod
    def _build(cls, values):
        values = dict(values)
        values['output_times'] = tuple(float(t) for t in values.get('output_times') or ())
        values['probe_hbars'] = tuple(float(h) for h in values.get('probe_hbars') or ())
        scenario = cls(**{k: v for k, v in values.items() if k in cls.__dataclass_fields__})
        scenario.validate()
        return scenario

    def with_changes(self, **changes):
        scenario = replace(self, **changes)
        scenario.validate()
        return scenario

    def rescaled(self, hbar):
        """
        Same experiment at a smaller hbar: L, a and M grow by the power of
        two closest to self.hbar / hbar so the frame resolves the finer scale.
        """
        factor = 2 ** max(0, round(math.log2(self.hbar / hbar)))
        return replace(self, hbar=hbar, L=self.L * factor, a=self.a * factor,
                       M=self.M * factor, probe_hbars=())

    # ====================================================================
    # VALIDATION
    # ====================================================================

    def validate(self):
        """Raise ValidationError with a field -> message dict on the first pass"""
        errors = {}

        if int(self.L) != self.L or self.L < 8 or self.L % 2:
            errors['L'] = f'L must be an even integer >= 8, got {self.L}'
        if not self.hbar > 0:
            errors['hbar'] = f'hbar must be positive, got {self.hbar}'
        elif math.exp(-1.0 / (8.0 * self.hbar)) >= PERIODIZATION_TOL:
            errors['hbar'] = f'window not numerically periodizable at hbar={self.hbar:.4g}'
        if self.a <= 0 or self.M <= 0 or self.L % self.a or self.L % self.M:
            errors['lattice'] = f'a={self.a} and M={self.M} must be positive divisors of L={self.L}'
        elif self.M <= self.a:
            errors['lattice'] = f'lattice is not oversampled: M={self.M} <= a={self.a}'

        try:
            builtin(self.potential, **self.potential_params)
        except UnknownPotential as e:
            errors['potential'] = str(e)
        except TypeError as e:
            errors['potential_params'] = str(e)

        if self.datum not in DATUMS:
            errors['datum'] = f'unknown datum {self.datum!r}; known: {", ".join(DATUMS)}'
        if self.eta < 0:
            errors['eta'] = f'eta must be non-negative, got {self.eta}'
        if not self.T > 0:
            errors['T'] = f'T must be positive, got {self.T}'
        try:
            ReinitPolicy.parse(self.reinit, default_width=self.event_width)
        except ValueError as e:
            errors['reinit'] = str(e)
        if any(t < 0 or t > self.T for t in self.output_times):
            errors['output_times'] = f'output times must lie in [0, {self.T}]'
        if not 0 < self.reference_dt <= self.T:
            errors['reference_dt'] = f'reference dt must lie in (0, T], got {self.reference_dt}'
        low, high = TOL_RANGE
        if self.tol is not None and not low <= self.tol <= high:
            errors['tol'] = f'tol must lie in [{low}, {high}], got {self.tol}'
        if self.width_event is not None and not 0 < self.width_event < 1:
            errors['width_event'] = f'width event threshold must lie in (0, 1), got {self.width_event}'
        if self.baseline not in BASELINES:
            errors['baseline'] = f'baseline must be one of {", ".join(BASELINES)}'
        if self.probe_hbars and len(self.probe_hbars) < 3:
            errors['probe_hbars'] = 'the order probe needs at least 3 hbar values'

        if errors:
            raise ValidationError(errors)

    # ====================================================================
    # DERIVED OBJECTS
    # ====================================================================

    @property
    def grid(self):
        return Grid(self.L)

    @property
    def lattice(self):
        return GaborLattice(self.a, self.M, self.L, self.hbar)

    @property
    def h(self):
        return 2.0 * math.pi * self.hbar

    def build_potential(self):
        return builtin(self.potential, **self.potential_params)

    @property
    def event_width(self):
        """Width threshold for event reinit: the scenario's own, else GAUSSBEAM['WIDTH_EVENT']"""
        if self.width_event is not None:
            return self.width_event
        return settings.GAUSSBEAM.get('WIDTH_EVENT', DEFAULT_WIDTH_EVENT)

    @property
    def reinit_policy(self):
        return ReinitPolicy.parse(self.reinit, default_width=self.event_width)

    def baseline_variant(self):
        """
        The comparison run named by `baseline`, or None when it would
        coincide with this scenario
        """
        if self.baseline == 'no_reinit' and self.reinit != 'none':
            return replace(self, name=f'{self.name}:no_reinit', reinit='none', baseline='none')
        if self.baseline == 'unwindowed' and self.datum == 'windowed':
            return replace(self, name=f'{self.name}:unwindowed', datum='cosh_phase',
                           datum_params={}, baseline='none')
        return None

    @property
    def times(self):
        """Output times, always including 0 and T"""
        return tuple(sorted({0.0, float(self.T), *self.output_times}))

    def as_dict(self):
        data = asdict(self)
        data['output_times'] = list(self.output_times)
        data['probe_hbars'] = list(self.probe_hbars)
        return data

    def __str__(self):
        return (f'{self.name}: V={self.potential}, datum={self.datum}, L={self.L}, '
                f'hbar={self.hbar:.6g}, eta={self.eta:g}, T={self.T:g}, reinit={self.reinit}')


# ========================================================================
# CONFIG FILE KEYS
# ========================================================================


def _read(repository, key, cast):
    # file values only; `key in repository` would also match os.environ
    if key not in repository.data:
        return None
    return cast(repository.data[key])


def _json(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ValidationError({'config': f'invalid JSON value {text!r}: {e}'}) from None


FILE_KEYS = {
    'NAME': ('name', str),
    'L': ('L', int),
    'HBAR': ('hbar', float),
    'A': ('a', int),
    'M': ('M', int),
    'POTENTIAL': ('potential', str),
    'POTENTIAL_PARAMS': ('potential_params', _json),
    'DATUM': ('datum', str),
    'DATUM_PARAMS': ('datum_params', _json),
    'ETA': ('eta', float),
    'T': ('T', float),
    'REINIT': ('reinit', str),
    'OUTPUT_TIMES': ('output_times', Csv(cast=float)),
    'REFERENCE_DT': ('reference_dt', float),
    'TOL': ('tol', float),
    'WIDTH_EVENT': ('width_event', float),
    'BASELINE': ('baseline', str),
    'PROBE_HBARS': ('probe_hbars', Csv(cast=float)),
}


def _read_file_values(repository):
    values = {}
    for key, (name, cast) in FILE_KEYS.items():
        try:
            value = _read(repository, key, cast)
        except ValueError as e:
            raise ValidationError({name: f'cannot parse {key}: {e}'}) from None
        if value is not None:
            values[name] = value
    # H is the lattice constant h = 2 pi hbar
    h = _read(repository, 'H', float)
    if h is not None:
        if 'hbar' in values:
            raise ValidationError({'hbar': 'give either HBAR or H, not both'})
        values['hbar'] = h / (2.0 * math.pi)
    return values


def _drop_none(values):
    return {k: v for k, v in values.items() if v is not None}


def known_presets():
    return sorted(PRESETS)
