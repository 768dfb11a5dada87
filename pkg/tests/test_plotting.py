import numpy as np
import pytest

from mmgn.analysis import snapshot_pod
from mmgn.metrics import compute_metrics
from mmgn.plotting import (
    encode_pgm,
    heatmap_pixels,
    plot_loss_history,
    plot_metric_frames,
    plot_nmse,
    plot_pod_energy,
    plot_reconstruction,
    render_heatmap,
)

GOLDEN_2x3 = b"P5\n3 2\n255\n" + bytes([0, 51, 102, 153, 204, 255])


def test_golden_bytes(tmp_path):
    slice2d = np.arange(6.0).reshape(2, 3) * 0.4 - 1.0
    blob = render_heatmap(slice2d, tmp_path / "a.pgm")
    assert blob == GOLDEN_2x3
    assert (tmp_path / "a.pgm").read_bytes() == GOLDEN_2x3
    assert render_heatmap(slice2d, tmp_path / "b.pgm") == blob


def test_header_uses_width_then_height():
    assert encode_pgm(np.zeros((4, 7), np.uint8)).startswith(b"P5\n7 4\n255\n")
    assert len(encode_pgm(np.zeros((4, 7), np.uint8))) == len(b"P5\n7 4\n255\n") + 28


def test_zero_error_is_black():
    assert not heatmap_pixels(np.zeros((3, 5)), "abs-error").any()


def test_abs_error_ignores_sign_and_zero_maps_to_black():
    px = heatmap_pixels(np.array([[-2.0, 0.0], [1.0, 2.0]]), "abs-error")
    np.testing.assert_array_equal(px, [[255, 0], [128, 255]])


@pytest.mark.parametrize("mode", ["value", "abs-error"])
def test_single_maximal_pixel(mode):
    a = np.full((6, 6), 0.25)
    a[0, 0] = 0.0
    a[4, 2] = 3.0
    px = heatmap_pixels(a, mode)
    assert np.count_nonzero(px == 255) == 1
    assert px[4, 2] == 255


@pytest.mark.parametrize("mode", ["value", "abs-error"])
def test_constant_slice_is_gray(mode):
    assert np.all(heatmap_pixels(np.full((2, 3), -4.5), mode) == 128)


def test_value_mode_maps_min_to_black():
    px = heatmap_pixels(np.array([[5.0, 7.0, 6.0]]))
    np.testing.assert_array_equal(px, [[0, 255, 128]])


@pytest.mark.parametrize("bad", [np.zeros(3), np.zeros((0, 2)), np.array([[np.nan, 1.0]])])
def test_bad_slices(bad):
    with pytest.raises(ValueError):
        heatmap_pixels(bad)


def test_unknown_mode():
    with pytest.raises(ValueError):
        heatmap_pixels(np.ones((2, 2)), "log")


def test_figures_are_written(tmp_path):
    rng = np.random.default_rng(0)
    truth = rng.normal(size=(4, 8, 8))
    reports = {"a": compute_metrics(truth, truth + 0.1), "b": compute_metrics(truth, truth * 0.5)}
    plot_loss_history([(0, 1.0, 1e-3), (1, 0.5, 9.9e-4)], tmp_path / "loss.png")
    plot_pod_energy(snapshot_pod(truth), tmp_path / "pod.png")
    plot_metric_frames(reports, tmp_path / "frames.png")
    plot_nmse([3.0, 1.0, 2.0], tmp_path / "nmse.svg", title="d_z=3")
    plot_reconstruction(truth[0], truth[0] + 0.1, tmp_path / "recon.pdf")
    assert (tmp_path / "loss.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert (tmp_path / "recon.pdf").read_bytes()[:4] == b"%PDF"
    assert b"<svg" in (tmp_path / "nmse.svg").read_bytes()
    for name in ("pod.png", "frames.png"):
        assert (tmp_path / name).stat().st_size > 1000


def test_png_renders_are_repeatable(tmp_path):
    history = [(e, 1.0 / (e + 1), 1e-3 * 0.99 ** e) for e in range(10)]
    plot_loss_history(history, tmp_path / "a.png")
    plot_loss_history(history, tmp_path / "b.png")
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
