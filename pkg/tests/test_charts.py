"""Tests for the plotly chart components."""

import numpy as np
import plotly.graph_objects as go

from components.charts import (TITLE_FONT, create_convergence_figure, create_dynamic_range_figure,
                               create_histogram_fit_figure, create_response_curve_figure,
                               create_snr_curve_figure, save_figure)
from utils.analysis import DynamicRangeReport, SnrCurve, histogram_fit
from utils.qis_simulator import simulate_photon_counting_readings
from utils.sensor_stats import SensorParams, response_curve


def _curve():
    return SnrCurve(np.array([1.0, 10.0, 100.0]), np.array([-np.inf, 5.0, 2.0]))


class TestSnrCurveFigure:

    def test_gaps_for_infinite_values(self):
        fig = create_snr_curve_figure([_curve()], labels=['jot'])
        assert isinstance(fig, go.Figure)
        assert fig.data[0].name == 'jot'
        assert fig.data[0].y[0] is None
        assert fig.layout.xaxis.type == 'log'
        assert fig.layout.title.font.size == TITLE_FONT['size']

    def test_default_labels(self):
        fig = create_snr_curve_figure([_curve(), _curve()], threshold_db=None)
        assert [trace.name for trace in fig.data] == ['curve 1', 'curve 2']
        assert len(fig.layout.shapes) == 0


class TestDynamicRangeFigure:

    def test_band_drawn(self):
        report = DynamicRangeReport(floor=3.0, ceiling=80.0, range_db=28.5)
        fig = create_dynamic_range_figure(_curve(), report)
        assert len(fig.layout.shapes) == 2
        assert '28.5 dB' in fig.layout.annotations[0].text

    def test_no_band_without_range(self):
        report = DynamicRangeReport(floor=float('nan'), ceiling=float('nan'), range_db=0.0, has_range=False)
        assert len(create_dynamic_range_figure(_curve(), report).layout.shapes) == 1


class TestOtherFigures:

    def test_histogram_fit(self):
        fit = histogram_fit(simulate_photon_counting_readings(1.0, 0.25, 5000, seed=8), 0.25)
        fig = create_histogram_fit_figure(fit, 0.25)
        assert [trace.type for trace in fig.data] == ['bar', 'scatter']
        assert fig.layout.xaxis.type == 'linear'

    def test_response_curves(self):
        theta = np.geomspace(0.01, 100, 50)
        responses = [response_curve(theta, SensorParams(level)) for level in (1, 3)]
        fig = create_response_curve_figure(theta, responses, ['1-bit', '2-bit'])
        assert len(fig.data) == 2

    def test_convergence(self):
        fig = create_convergence_figure([1e-1, 1e-3, 1e-7], tolerance=1e-6)
        assert list(fig.data[0].x) == [2, 3, 4]
        assert fig.layout.yaxis.type == 'log'

    def test_save_figure(self, tmp_path):
        path = save_figure(create_convergence_figure([0.5]), tmp_path / 'figure.html')
        assert path.exists()
        assert '<html>' in path.read_text()
