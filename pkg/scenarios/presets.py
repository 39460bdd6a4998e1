# scenarios/presets.py

import math

# semiclassical parameter of the experiments, hbar = 1/(256 pi)
DEFAULT_HBAR = 1.0 / (256.0 * math.pi)

DEFAULTS = {
    'L': 1024,
    'hbar': DEFAULT_HBAR,
    'a': 32,
    'M': 256,
    'potential': 'well',
    'potential_params': {},
    'datum': 'cosh_phase',
    'datum_params': {},
    'eta': 0.01,
    'T': 1.0,
    'reinit': 'none',
    'output_times': (),
    'reference_dt': 1e-4,
    'tol': None,          # None: settings.GAUSSBEAM['ODE_TOL']
    'width_event': None,  # None: settings.GAUSSBEAM['WIDTH_EVENT']
    'baseline': 'none',
    'probe_hbars': (),
}


# ========================================================================
# PRESETS -- overrides on top of DEFAULTS
# ========================================================================


PRESETS = {
    'well': {},
    'well_windowed': {
        'datum': 'windowed',
        'datum_params': {'sigma': 200.0, 'center': 0.5},
        'baseline': 'unwindowed',
    },
    'hill': {
        'potential': 'hill',
        'T': 2.0,
        'reinit': 'uniform:8',
        'baseline': 'no_reinit',
    },
    'hill_shifted': {
        'potential': 'hill',
        'datum': 'shifted',
        'T': 2.0,
    },
    'hill_event': {
        'potential': 'hill',
        'T': 2.0,
        'reinit': 'event:0.2',
        'baseline': 'no_reinit',
    },
    'hill_well': {
        'potential': 'hill_well',
        'T': 2.0,
        'reinit': 'uniform:8',
        'baseline': 'no_reinit',
    },
    'free': {
        'potential': 'free',
        'T': 0.5,
    },
    'order_probe': {
        'T': 0.5,
        'eta': 1e-4,
        'probe_hbars': (1.0 / (512.0 * math.pi), 1.0 / (1024.0 * math.pi),
                        1.0 / (2048.0 * math.pi)),
    },
}


def preset_values(name):
    """DEFAULTS merged with the named preset; KeyError for unknown names"""
    if name not in PRESETS:
        raise KeyError(f'unknown preset {name!r}; known: {", ".join(sorted(PRESETS))}')
    return {**DEFAULTS, **PRESETS[name], 'name': name, 'preset': name}
