"""
Visualizer - log-log charts of study results
Static SVG through matplotlib for files that must be byte-identical across
runs, and an interactive plotly HTML report
"""

import io
import logging

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
import plotly.graph_objects as go

from core.errors import NonPositiveMean, TooFewRows
import config

logger = logging.getLogger(__name__)

# Deterministic SVG: fixed id salt, text kept as text, no timestamps
SVG_STYLE = {
    'svg.hashsalt': config.SVG_HASH_SALT,
    'svg.fonttype': 'none',
    'path.simplify': False,
}


def _check_rows(rows):
    if len(rows) == 0:
        raise TooFewRows("nothing to plot")
    means = np.array([row.mean for row in rows], dtype=float)
    if np.any(means <= 0):
        raise NonPositiveMean("log-log plots need positive means")
    ns = np.array([row.n for row in rows], dtype=float)
    ses = np.array([row.se for row in rows], dtype=float)
    return ns, means, ses


def _fitted_line(ns, slope_fit):
    grid = np.array([ns.min(), ns.max()])
    return grid, np.exp(slope_fit.intercept) * grid ** slope_fit.slope


def slope_label(slope_fit):
    return f"slope = {slope_fit.slope:.3f} ± {slope_fit.stderr:.3f}"


def render_svg_plot(rows, slope_fit, path, ylabel="mean error"):
    """
    Log-log scatter of (n, mean) with +/- 2 se error bars

    Args:
        rows: StudyRow list with positive means
        slope_fit: optional SlopeFit drawn as a line and annotated
        path: output .svg path
        ylabel: y axis label
    """
    ns, means, ses = _check_rows(rows)
    # Error bars stay on the positive half-line under the log axis
    lower = np.minimum(2.0 * ses, means * (1.0 - 1e-9))

    with matplotlib.rc_context(SVG_STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        ax.errorbar(ns, means, yerr=[lower, 2.0 * ses], fmt='o', color='#1f77b4',
                    ecolor='#7f7f7f', capsize=3, label='mean ± 2 se')
        if slope_fit is not None:
            grid, line = _fitted_line(ns, slope_fit)
            ax.plot(grid, line, '-', color='#d62728', label='least-squares fit')
            ax.annotate(slope_label(slope_fit), xy=(0.05, 0.08), xycoords='axes fraction')
        ax.set_xscale('log')
        ax.set_yscale('log')
        ax.set_xlabel('n')
        ax.set_ylabel(ylabel)
        ax.legend(loc='upper right')
        fig.tight_layout()

        buffer = io.StringIO()
        fig.savefig(buffer, format='svg', metadata={'Date': None})
        plt.close(fig)

    # Drop the XML prolog and doctype so the file starts at the root element
    text = buffer.getvalue()
    text = text[text.index('<svg'):]
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        f.write(text)
    logger.info(f"Wrote SVG plot to {path}")


def create_report_figure(rows, slope_fit=None, title="Convergence study"):
    """Interactive plotly figure of the same chart"""
    ns, means, ses = _check_rows(rows)
    fig = go.Figure()
    fig.add_trace(go.Scatter(
        x=ns, y=means, mode='markers', name='mean ± 2 se',
        error_y=dict(type='data', array=2.0 * ses, visible=True),
    ))
    if slope_fit is not None:
        grid, line = _fitted_line(ns, slope_fit)
        fig.add_trace(go.Scatter(x=grid, y=line, mode='lines', name=slope_label(slope_fit)))
    fig.update_xaxes(type='log', title='n')
    fig.update_yaxes(type='log', title='mean error')
    fig.update_layout(title=title)
    return fig


def render_html_report(rows, slope_fit, path):
    create_report_figure(rows, slope_fit).write_html(path, include_plotlyjs='cdn')
    logger.info(f"Wrote HTML report to {path}")
