# scenarios/utils_export.py
"""Run artifacts on disk and the plot-data series served by the JSON views"""

from pathlib import Path
import logging

import numpy as np

logger = logging.getLogger(__name__)

PLOT_POINTS = 256


def time_label(t):
    return f'{t:g}'


def write_signal(signal, out_dir, prefix, t):
    path = Path(out_dir) / f'{prefix}_t{time_label(t)}.csv'
    signal.to_csv(path)
    return path


def write_coefficients(coefficients, out_dir, segment):
    path = Path(out_dir) / f'coeffs_seg{segment}.csv'
    coefficients.to_csv(path)
    return path


def format_value(value):
    if isinstance(value, float):
        return f'{value:.10g}'
    if isinstance(value, (list, tuple)):
        return ', '.join(format_value(v) for v in value)
    return str(value)


def write_summary(summary, out_dir):
    """One `key: value` line per entry, in insertion order"""
    path = Path(out_dir) / 'summary.txt'
    lines = [f'{key}: {format_value(value)}' for key, value in summary.items()]
    path.write_text('\n'.join(lines) + '\n')
    return path


def read_summary(path):
    summary = {}
    for line in Path(path).read_text().splitlines():
        key, sep, value = line.partition(': ')
        if sep:
            summary[key] = value
    return summary


def plot_series(signal, points=PLOT_POINTS):
    """Evenly strided samples of x, |u|, Re u, Im u for plotting"""
    stride = max(1, signal.grid.L // points)
    values = signal.values[::stride]
    return {
        'x': np.round(signal.grid.points[::stride], 8).tolist(),
        'abs': np.abs(values).tolist(),
        'real': values.real.tolist(),
        'imag': values.imag.tolist(),
    }
