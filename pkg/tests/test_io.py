"""File IO tests: gamma handling, calibration persistence, view stacks."""

import json

import numpy as np
import pytest

from plenokit.core import CalibModel, CentroidGrid, ViewStack
from plenokit import io as pio


class TestGamma:
    def test_srgb_round_trip(self, rng):
        x = rng.random((32, 32))
        assert np.allclose(pio.srgb_decode(pio.srgb_encode(x)), x, atol=1e-12)

    def test_reference_value(self):
        assert pio.srgb_encode(np.array(0.5)) == pytest.approx(0.735357, abs=1e-5)

    def test_linear_segment(self):
        x = np.array(0.001)
        assert pio.srgb_encode(x) == pytest.approx(12.92 * 0.001)


class TestImages:
    def test_png_round_trip_8bit(self, tmp_path, rng):
        img = rng.random((16, 16, 3))
        p = pio.save_image(tmp_path / "a.png", img)
        back = pio.load_image(p)
        assert back.shape == img.shape
        # half a code step through the sRGB slope (up to ~2.4x in highlights)
        assert np.abs(back - img).max() < 1.3 / 255

    def test_tiff_round_trip_16bit_linear(self, tmp_path, rng):
        img = rng.random((16, 16, 3))
        p = pio.save_image(tmp_path / "a.tiff", img, bit_depth=16, encode_srgb=False)
        back = pio.load_image(p, assume_srgb=False)
        assert np.abs(back - img).max() < 1.0 / 65535

    def test_16bit_rgb_png_redirects_to_tiff(self, tmp_path, rng):
        p = pio.save_image(tmp_path / "a.png", rng.random((8, 8, 3)), bit_depth=16,
                           encode_srgb=False)
        assert p.suffix == ".tiff"

    def test_16bit_gray_png_supported(self, tmp_path, rng):
        p = pio.save_image(tmp_path / "a.png", rng.random((8, 8)), bit_depth=16,
                           encode_srgb=False)
        assert p.suffix == ".png"
        assert pio.load_image(p, assume_srgb=False).shape == (8, 8)

    def test_clamps_at_export_only(self, tmp_path):
        img = np.array([[-0.5, 1.5]])
        p = pio.save_image(tmp_path / "c.png", img, encode_srgb=False)
        back = pio.load_image(p, assume_srgb=False)
        assert back.min() == 0.0 and back.max() == 1.0

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            pio.load_image(tmp_path / "absent.png")


class TestCalibPersistence:
    def _model(self):
        entries = np.stack(np.meshgrid(np.arange(3) * 10.0 + 5, np.arange(4) * 10.0 + 5,
                                       indexing="ij"), axis=-1)
        return CalibModel(pitch=9, packing="hexagonal", counts=(3, 4),
                          homography=np.array([[9.0, 0.1, 5], [0, 9.0, 5], [0, 0, 1.0]]),
                          rotation=0.01, fit_residual=0.02,
                          grid=CentroidGrid(entries, packing="hexagonal", hex_row_phase=1))

    def test_round_trip(self, tmp_path):
        model = self._model()
        p = pio.save_calib(tmp_path / "c.json", model)
        back = pio.load_calib(p)
        assert back.pitch == model.pitch
        assert back.packing == model.packing
        assert back.counts == model.counts
        assert np.allclose(back.homography, model.homography)
        assert back.rotation == model.rotation
        assert back.grid.hex_row_phase == 1
        assert np.allclose(back.grid.entries, model.grid.entries)

    def test_schema_and_keys(self, tmp_path):
        p = pio.save_calib(tmp_path / "c.json", self._model())
        d = json.loads(p.read_text())
        assert d["schema"] == 1
        assert set(d) == {"schema", "pitch", "packing", "J", "H", "homography",
                          "rotation_rad", "hex_row_phase", "centroids", "fit_residual"}
        assert len(d["homography"]) == 9 and d["homography"][8] == 1.0

    def test_deterministic_bytes(self, tmp_path):
        a = pio.save_calib(tmp_path / "a.json", self._model()).read_bytes()
        b = pio.save_calib(tmp_path / "b.json", self._model()).read_bytes()
        assert a == b

    def test_unknown_schema_rejected(self, tmp_path):
        p = pio.save_calib(tmp_path / "c.json", self._model())
        d = json.loads(p.read_text())
        d["schema"] = 99
        p.write_text(json.dumps(d))
        with pytest.raises(ValueError):
            pio.load_calib(p)


class TestViewStackIO:
    def test_round_trip_lossless_field(self, tmp_path, rng):
        vs = ViewStack(rng.random((3, 3, 6, 7, 3)).astype(np.float32).astype(np.float64))
        info = pio.save_viewstack(tmp_path / "views", vs)
        back = pio.load_viewstack(info["dir"])
        assert np.array_equal(back.views, vs.views)

    def test_view_files_signed_names(self, tmp_path, rng):
        vs = ViewStack(rng.random((3, 3, 4, 4, 1)))
        pio.save_viewstack(tmp_path / "views", vs)
        assert (tmp_path / "views" / "view_-1_-1.png").exists()
        assert (tmp_path / "views" / "view_0_0.png").exists()
        assert (tmp_path / "views" / "view_1_1.png").exists()

    def test_stitched_layout(self, tmp_path, rng):
        vs = ViewStack(rng.random((3, 3, 4, 5, 1)))
        stitched = pio.stitch_views(vs)
        assert stitched.shape == (12, 15, 1)
        assert np.array_equal(stitched[4:8, 5:10, 0], vs.views[1, 1, :, :, 0])
