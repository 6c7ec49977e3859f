"""End-to-end tests of the qis-hdr command line."""

import json

import numpy as np
import pytest

from app import build_parser, main
from commands.manifest import RunManifest, manifest_path
from data.loader import read_curve_csv, read_pfm, read_stack
from data.writer import write_pfm, write_samples_csv
from utils.qis_simulator import simulate_photon_counting_readings

SIMULATE_ARGS = ['simulate', '--uniform', '500', '--size', '8x6', '--exposures', '1ms:20,100us:20',
                 '--bits', '3', '--read-noise', '0.25', '--dark', '0']


def _last_json(capsys) -> dict:
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


@pytest.fixture
def stack_path(tmp_path):
    path = tmp_path / 'stack.qis'
    assert main(SIMULATE_ARGS + ['--seed', '7', '--out', str(path)]) == 0
    return path


class TestParser:

    def test_every_subcommand_registered(self):
        choices = build_parser()._subparsers._group_actions[0].choices
        assert set(choices) == {'simulate', 'fuse', 'snr', 'dr', 'histfit', 'eval', 'replay'}

    def test_missing_required_flag(self):
        with pytest.raises(SystemExit) as info:
            main(['simulate'])
        assert info.value.code == 2


class TestSimulateCommand:

    def test_writes_stack_and_manifest(self, tmp_path, capsys):
        stack_path = tmp_path / 'stack.qis'
        assert main(SIMULATE_ARGS + ['--seed', '7', '--out', str(stack_path)]) == 0
        stack = read_stack(stack_path)
        assert stack.params.clip_level == 7
        assert [g.frames for g in stack.schedule.groups] == [20, 20]
        assert stack.height == 6 and stack.width == 8

        manifest = RunManifest.load(manifest_path(stack_path))
        assert manifest.subcommand == 'simulate'
        assert manifest.seed == 7
        assert manifest.parameters['sensor']['clip_level'] == 7
        assert 'group 1:' in capsys.readouterr().out

    def test_generated_seed_is_recorded(self, tmp_path):
        out = tmp_path / 'auto.qis'
        assert main(SIMULATE_ARGS + ['--out', str(out)]) == 0
        manifest = RunManifest.load(manifest_path(out))
        assert manifest.argv[-2:] == ['--seed', str(manifest.seed)]

    def test_oversampling_scales_frames(self, tmp_path):
        out = tmp_path / 'over.qis'
        assert main(SIMULATE_ARGS + ['--seed', '1', '--oversampling', '2', '--out', str(out)]) == 0
        assert read_stack(out).schedule.total_frames == 160

    def test_scene_from_pfm(self, tmp_path):
        scene = write_pfm(tmp_path / 'scene.pfm', np.full((3, 5), 200.0))
        out = tmp_path / 'scene.qis'
        assert main(['simulate', '--scene', str(scene), '--exposures', '1ms:4', '--seed', '3',
                     '--out', str(out)]) == 0
        assert read_stack(out).width == 5

    def test_bad_schedule_is_a_usage_error(self, tmp_path, capsys):
        status = main(['simulate', '--uniform', '1', '--exposures', '1ms:0', '--out', str(tmp_path / 'x.qis')])
        assert status == 2
        assert 'error:' in capsys.readouterr().err


class TestReplayCommand:

    def test_reproduces_identical_bytes(self, stack_path):
        original = stack_path.read_bytes()
        stack_path.unlink()
        assert main(['replay', '--manifest', str(manifest_path(stack_path))]) == 0
        assert stack_path.read_bytes() == original

    def test_invalid_manifest(self, tmp_path):
        path = tmp_path / 'broken.manifest.json'
        path.write_text('{"parameters": {}}')
        assert main(['replay', '--manifest', str(path)]) == 3


class TestFuseCommand:

    def test_fuse_with_truth_and_weights(self, tmp_path, stack_path, capsys):
        truth = write_pfm(tmp_path / 'truth.pfm', np.full((6, 8), 500.0))
        out = tmp_path / 'hdr.pfm'
        capsys.readouterr()
        status = main(['fuse', '--stack', str(stack_path), '--out', str(out), '--truth', str(truth),
                       '--weights-out', str(tmp_path / 'hdr'), '--plot', str(tmp_path / 'conv.html')])
        assert status == 0

        summary = _last_json(capsys)
        assert summary['method'] == 'proposed'
        assert 1 <= summary['iterations'] <= 10
        assert summary['lmse'] < 0.1
        assert summary['degenerate_pixels'] == 0
        assert read_pfm(out).flux.shape == (6, 8)
        assert (tmp_path / 'hdr_w1.pfm').exists() and (tmp_path / 'hdr_w2.pfm').exists()
        assert (tmp_path / 'conv.html').exists()
        assert manifest_path(out).exists()

    @pytest.mark.parametrize('method', ['equal', 'cis'])
    def test_baseline_methods(self, tmp_path, stack_path, method, capsys):
        out = tmp_path / f'{method}.pfm'
        assert main(['fuse', '--stack', str(stack_path), '--out', str(out), '--method', method]) == 0
        assert np.all(np.isfinite(read_pfm(out).flux))
        assert _last_json(capsys)['degenerate_pixels'] == 0

    def test_missing_stack_is_an_io_error(self, tmp_path):
        assert main(['fuse', '--stack', str(tmp_path / 'none.qis'), '--out', str(tmp_path / 'o.pfm')]) == 3

    def test_corrupt_stack(self, tmp_path, stack_path, capsys):
        stack_path.write_bytes(stack_path.read_bytes()[:-1])
        assert main(['fuse', '--stack', str(stack_path), '--out', str(tmp_path / 'o.pfm')]) == 3
        assert 'truncated' in capsys.readouterr().err


class TestSnrCommand:

    def test_single_curve(self, tmp_path):
        out = tmp_path / 'curve.csv'
        assert main(['snr', '--exposures', '1ms:100', '--grid', '1:1e6:50', '--out', str(out)]) == 0
        curve = read_curve_csv(out)
        assert len(curve) == 50
        assert manifest_path(out).exists()

    def test_per_exposure_files(self, tmp_path):
        out = tmp_path / 'curve.csv'
        assert main(['snr', '--exposures', '1ms:10,10us:10', '--grid', '1:1e6:20', '--per-exposure',
                     '--out', str(out), '--plot', str(tmp_path / 'snr.html')]) == 0
        assert (tmp_path / 'curve_e1.csv').exists() and (tmp_path / 'curve_e2.csv').exists()
        assert (tmp_path / 'snr.html').exists()

    @pytest.mark.parametrize('extra', [[], ['--cis']])
    def test_response_figure(self, tmp_path, extra):
        out = tmp_path / 'curve.csv'
        response = tmp_path / 'response.html'
        assert main(['snr', '--exposures', '1ms:10', '--grid', '1:1e6:20', '--out', str(out),
                     '--response', str(response)] + extra) == 0
        assert 'Sensor response' in response.read_text(encoding='utf-8')
        assert str(response) in RunManifest.load(manifest_path(out)).outputs

    def test_bad_grid(self, tmp_path):
        assert main(['snr', '--exposures', '1ms:1', '--grid', '10:1:5', '--out', str(tmp_path / 'c.csv')]) == 2


class TestDrCommand:

    def test_cis_baseline(self, capsys):
        assert main(['dr', '--cis', '--exposures', '1s:1', '--grid', '0.1:1e5:3073']) == 0
        report = _last_json(capsys)
        assert report['range_db'] == pytest.approx(63.9, abs=0.5)
        assert report['has_range'] is True

    def test_from_curve_file(self, tmp_path, capsys):
        curve = tmp_path / 'curve.csv'
        main(['snr', '--exposures', '1s:4000', '--preset', 'qis_1bit', '--dark', '0',
              '--grid', '1e-4:1e3:3585', '--out', str(curve)])
        out = tmp_path / 'dr.csv'
        capsys.readouterr()
        assert main(['dr', '--curve', str(curve), '--out', str(out), '--plot', str(tmp_path / 'dr.html')]) == 0
        assert _last_json(capsys)['range_db'] == pytest.approx(74.5, abs=1.5)
        assert out.read_text().startswith('floor,ceiling,range_db')
        assert RunManifest.load(manifest_path(out)).inputs == [str(curve)]

    def test_requires_schedule_without_curve(self):
        assert main(['dr']) == 2


class TestHistfitCommand:

    def test_fit(self, tmp_path, capsys):
        samples = write_samples_csv(simulate_photon_counting_readings(1.48, 0.25, 20_000, seed=5),
                                    tmp_path / 'samples.csv')
        out = tmp_path / 'fit.json'
        assert main(['histfit', '--samples', str(samples), '--read-noise', '0.25', '--dt', '1ms',
                     '--out', str(out)]) == 0
        result = _last_json(capsys)
        assert result['flux'] == pytest.approx(1480.0, rel=0.1)
        assert json.loads(out.read_text())['samples'] == 20_000

    def test_degenerate_samples(self, tmp_path):
        samples = write_samples_csv(np.zeros(2000), tmp_path / 'zeros.csv')
        assert main(['histfit', '--samples', str(samples), '--read-noise', '0.25']) == 4


class TestEvalCommand:

    def test_one_decade(self, tmp_path, capsys):
        truth = write_pfm(tmp_path / 'truth.pfm', np.full((4, 4), 100.0))
        estimate = write_pfm(tmp_path / 'estimate.pfm', np.full((4, 4), 1000.0))
        assert main(['eval', '--estimate', str(estimate), '--truth', str(truth)]) == 0
        assert _last_json(capsys)['lmse'] == pytest.approx(1.0, rel=1e-3)
