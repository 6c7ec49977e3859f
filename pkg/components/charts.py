"""
Chart components for sensor analysis.
Plotly figures for SNR curves, dynamic range, histogram fits, response curves and fusion convergence.
"""

from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import plotly.graph_objects as go

from utils.sensor_stats import pz_density

PALETTE = ['#667eea', '#e74c3c', '#2ecc71', '#f39c12', '#764ba2', '#16a085', '#7f8c8d']
TITLE_FONT = {'size': 20, 'color': '#2c3e50', 'family': 'Arial, sans-serif'}


def _plottable(values: np.ndarray) -> list:
    """-inf and NaN become gaps in the trace."""
    values = np.asarray(values, dtype=np.float64)
    return [float(v) if np.isfinite(v) else None for v in values]


def _apply_layout(fig: go.Figure, title: str, x_title: str, y_title: str, log_x: bool = True) -> go.Figure:
    fig.update_layout(
        title={'text': title, 'font': TITLE_FONT},
        xaxis_title=x_title,
        yaxis_title=y_title,
        height=550,
        template='plotly_white',
        hovermode='x unified',
        plot_bgcolor='#f8f9fa',
        legend=dict(
            orientation="h",
            yanchor="bottom",
            y=1.02,
            xanchor="right",
            x=1,
            bgcolor='rgba(255,255,255,0.9)',
            bordercolor='#ddd',
            borderwidth=1
        ),
        margin=dict(l=80, r=40, t=80, b=60)
    )
    fig.update_xaxes(type='log' if log_x else 'linear', gridcolor='rgba(0,0,0,0.05)', showline=True)
    fig.update_yaxes(gridcolor='rgba(0,0,0,0.05)', showline=True)
    return fig


def create_snr_curve_figure(curves: Sequence, labels: Optional[Sequence[str]] = None,
                            title: str = "Exposure-referred SNR", threshold_db: Optional[float] = 0.0):
    """
    Overlay of SNR curves on a log abscissa.

    Args:
        curves: sequence - SnrCurve objects
        labels: sequence - Legend entry per curve
        title: str - Figure title
        threshold_db: float - Draws a dashed threshold line when given

    Returns:
        go.Figure
    """
    fig = go.Figure()
    labels = labels or [f"curve {i + 1}" for i in range(len(curves))]

    for i, (curve, label) in enumerate(zip(curves, labels)):
        fig.add_trace(go.Scatter(
            x=curve.abscissa,
            y=_plottable(curve.snr_db),
            mode='lines',
            name=label,
            line=dict(color=PALETTE[i % len(PALETTE)], width=2),
        ))

    if threshold_db is not None:
        fig.add_hline(y=threshold_db, line_dash="dash", line_color="rgba(44,62,80,0.4)")

    kind = curves[0].kind if curves else 'flux'
    x_title = {'flux': "Flux λ (photons/s)", 'theta': "θ (electrons/frame)", 'frames': "Frames N"}.get(kind, kind)
    return _apply_layout(fig, title, x_title, "SNR (dB)", log_x=True)


def create_dynamic_range_figure(curve, report, title: str = "Dynamic range"):
    """SNR curve with the dynamic range band shaded between floor and ceiling."""
    fig = create_snr_curve_figure([curve], labels=["SNR"], title=title, threshold_db=report.threshold_db)
    if report.has_range:
        fig.add_vrect(
            x0=report.floor, x1=report.ceiling,
            fillcolor="rgba(46,204,113,0.15)", line_width=0, layer="below",
            annotation_text=f"{report.range_db:.1f} dB", annotation_position="top left",
        )
    return fig


def create_histogram_fit_figure(fit, read_noise: float, title: str = "Photon counting histogram"):
    """
    Empirical reading density against the fitted Poisson-Gaussian density.

    Args:
        fit: HistogramFit
        read_noise: float - σ_read used by the fit
    """
    fine = np.linspace(fit.centers[0], fit.centers[-1], 2000)
    fig = go.Figure()
    fig.add_trace(go.Bar(x=fit.centers, y=fit.density, name="Measured",
                         marker_color='rgba(102,126,234,0.6)'))
    fig.add_trace(go.Scatter(x=fine, y=pz_density(fine, fit.theta, read_noise), mode='lines',
                             name=f"Model θ = {fit.theta:.3f}", line=dict(color=PALETTE[1], width=2)))
    fig.update_layout(bargap=0)
    return _apply_layout(fig, title, "Reading (electrons)", "Density", log_x=False)


def create_response_curve_figure(theta: np.ndarray, responses: Sequence[np.ndarray],
                                 labels: Sequence[str], title: str = "Sensor response"):
    """Expected output against exposure for several sensors."""
    fig = go.Figure()
    for i, (response, label) in enumerate(zip(responses, labels)):
        fig.add_trace(go.Scatter(x=theta, y=_plottable(response), mode='lines', name=label,
                                 line=dict(color=PALETTE[i % len(PALETTE)], width=2)))
    return _apply_layout(fig, title, "θ (electrons/frame)", "Expected output", log_x=True)


def create_convergence_figure(history: Sequence[float], tolerance: Optional[float] = None,
                              title: str = "Fusion convergence"):
    """Relative λ̂ change per re-weighting step, log scale."""
    steps = list(range(2, len(history) + 2))
    fig = go.Figure()
    fig.add_trace(go.Scatter(x=steps, y=_plottable(history), mode='lines+markers', name="Relative change",
                             line=dict(color=PALETTE[0], width=2)))
    if tolerance is not None:
        fig.add_hline(y=tolerance, line_dash="dash", line_color=PALETTE[1])
    fig = _apply_layout(fig, title, "Iteration", "‖Δλ̂‖ / ‖λ̂‖", log_x=False)
    fig.update_yaxes(type='log')
    return fig


def save_figure(fig: go.Figure, path) -> Path:
    """Write a standalone HTML file."""
    path = Path(path)
    fig.write_html(str(path), include_plotlyjs='cdn', full_html=True)
    return path
