import numpy as np
import pytest

from conftest import make_frame
from hitomi import formats, radiometry
from hitomi.errors import BoundsError, DegenerateWhitePlate, ShapeError
from hitomi.formats import MultibandFrame
from hitomi.radiometry import WbCoefficients, apply_wb, compute_wb, extract_spectrum


def constant_band_frame(levels, width=6, height=5):
    data = np.stack([np.full((height, width), v, np.float32) for v in levels])
    return MultibandFrame(data, formats.DEFAULT_BAND_CENTERS_NM, formats.DEFAULT_BAND_FWHM_NM)


class TestComputeWb:
    def test_already_flat(self):
        frame = constant_band_frame([0.5, 0.5, 0.5, 0.5])
        wb = compute_wb(frame, (0, 0, 6, 5))
        assert np.allclose(wb.gains, 1.0)
        assert wb.reference_target == pytest.approx(0.5)

    def test_target_over_mean_arithmetic(self):
        # means (0.5, 1.0, 0.75, 0.6) -> target 0.7125
        frame = constant_band_frame([0.5, 1.0, 0.75, 0.6])
        wb = compute_wb(frame, (1, 1, 3, 2))
        assert wb.reference_target == pytest.approx(0.7125, rel=1e-6)
        assert np.allclose(wb.gains, [1.425, 0.7125, 0.95, 1.1875], rtol=1e-6)

    def test_zero_band_degenerate(self):
        frame = constant_band_frame([0.5, 0.0, 0.75, 0.6])
        with pytest.raises(DegenerateWhitePlate):
            compute_wb(frame, (0, 0, 6, 5))

    def test_region_bounds_checked(self):
        frame = constant_band_frame([0.5, 0.5, 0.5, 0.5])
        with pytest.raises(BoundsError):
            compute_wb(frame, (3, 0, 6, 5))
        with pytest.raises(BoundsError):
            compute_wb(frame, (0, 0, 0, 5))


class TestApplyWb:
    def test_identity(self):
        rng = np.random.default_rng(0)
        frame = make_frame(rng)
        out = apply_wb(frame, WbCoefficients.identity(4))
        assert np.array_equal(out.data, frame.data)

    def test_scalar_scaling(self):
        frame = constant_band_frame([0.2, 0.2, 0.2, 0.2])
        out = apply_wb(frame, WbCoefficients(np.full(4, 2.0), 0.4))
        assert np.allclose(out.data, 0.4)

    def test_band_count_mismatch(self):
        rng = np.random.default_rng(1)
        frame = make_frame(rng, bands=3)
        with pytest.raises(ShapeError):
            apply_wb(frame, WbCoefficients.identity(4))

    def test_composition_flattens_region(self):
        frame = constant_band_frame([0.5, 1.0, 0.75, 0.6])
        wb = compute_wb(frame, (0, 0, 6, 5))
        out = apply_wb(frame, wb)
        means = out.data[:, :, :].mean(axis=(1, 2), dtype=np.float64)
        assert np.allclose(means, 0.7125, rtol=1e-6)

    def test_metadata_preserved(self):
        rng = np.random.default_rng(2)
        frame = make_frame(rng)
        out = apply_wb(frame, WbCoefficients(np.array([1.5, 0.5, 2.0, 1.0]), 1.0))
        assert np.array_equal(out.band_centers_nm, frame.band_centers_nm)
        assert (out.width, out.height) == (frame.width, frame.height)


class TestProperties:
    def test_flatness_over_random_frames(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            frame = make_frame(
                rng,
                width=int(rng.integers(4, 24)),
                height=int(rng.integers(4, 24)),
                scale=float(rng.uniform(0.05, 4.0)),
            )
            w = int(rng.integers(1, frame.width + 1))
            h = int(rng.integers(1, frame.height + 1))
            x = int(rng.integers(0, frame.width - w + 1))
            y = int(rng.integers(0, frame.height - h + 1))
            wb = compute_wb(frame, (x, y, w, h))
            out = apply_wb(frame, wb)
            means = out.data[:, y : y + h, x : x + w].mean(axis=(1, 2), dtype=np.float64)
            spread = (means.max() - means.min()) / means.mean()
            assert spread < 1e-6

    def test_apply_is_linear_in_frame(self):
        rng = np.random.default_rng(4)
        frame = make_frame(rng)
        wb = WbCoefficients(np.array([1.3, 0.7, 1.1, 0.9]), 1.0)
        doubled = MultibandFrame(frame.data * 2, frame.band_centers_nm, frame.band_fwhm_nm)
        # power-of-two scale keeps float32 arithmetic exact
        assert np.array_equal(apply_wb(doubled, wb).data, apply_wb(frame, wb).data * 2)

    def test_exposure_scale_invariance(self):
        # target = mean of band means, so a global exposure scale cancels out
        # of every gain and lands entirely in the target level
        rng = np.random.default_rng(5)
        frame = make_frame(rng, scale=0.5)
        alpha = 4.0
        scaled = MultibandFrame(frame.data * alpha, frame.band_centers_nm, frame.band_fwhm_nm)
        wb = compute_wb(frame, (0, 0, frame.width, frame.height))
        wb_scaled = compute_wb(scaled, (0, 0, frame.width, frame.height))
        assert np.allclose(wb_scaled.gains, wb.gains, rtol=1e-6)
        assert wb_scaled.reference_target == pytest.approx(wb.reference_target * alpha, rel=1e-6)
        # flatness of the corrected region is unaffected by the exposure scale
        corrected = apply_wb(scaled, wb_scaled)
        means = corrected.data.mean(axis=(1, 2), dtype=np.float64)
        assert (means.max() - means.min()) / means.mean() < 1e-6


class TestExtractSpectrum:
    def test_constant_frame(self):
        frame = constant_band_frame([0.3, 0.3, 0.3, 0.3])
        assert np.allclose(extract_spectrum(frame, 2, 3), 0.3)

    def test_distinct_constant_planes(self):
        frame = constant_band_frame([10, 20, 30, 40])
        assert extract_spectrum(frame, 0, 0).tolist() == [10.0, 20.0, 30.0, 40.0]
        assert extract_spectrum(frame, 5, 4).tolist() == [10.0, 20.0, 30.0, 40.0]

    def test_out_of_bounds(self):
        frame = constant_band_frame([1, 1, 1, 1])
        with pytest.raises(BoundsError):
            extract_spectrum(frame, frame.width, 0)
        with pytest.raises(BoundsError):
            extract_spectrum(frame, 0, -1)


class TestSidecar:
    def test_round_trip(self, tmp_path):
        wb = WbCoefficients(np.array([1.425, 0.7125, 0.95, 1.1875]), 0.7125)
        p = tmp_path / "wb.json"
        radiometry.save_wb(wb, p)
        back = radiometry.load_wb(p)
        assert np.array_equal(back.gains, wb.gains)
        assert back.reference_target == wb.reference_target
