import numpy as np
import pytest

from fundus_eval import (
    CropBox,
    GradeRecord,
    InvalidBox,
    InvariantError,
    NoFundusDetected,
    crop_resize,
    detect_fundus_square,
    gen_fundus_image,
    resize_bicubic,
    run_preprocess,
)
from fundus_eval.preprocessing import (
    LUMA_WEIGHTS,
    encode_png,
    extract_square,
    find_image_file,
)


def luma_mask(img):
    return (img.astype(float) @ LUMA_WEIGHTS) > 10


def disk_mask(width, height, radius):
    cx, cy = width // 2, height // 2
    yy, xx = np.ogrid[:height, :width]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= radius ** 2


class TestDetect:
    def test_disk_geometry(self):
        img = gen_fundus_image(1000, 800, 390, seed=1)
        box = detect_fundus_square(img)
        assert abs(box.side - 780) <= 2
        # centered on the disk at (500, 400)
        assert abs(box.x + box.side / 2 - 500) <= 2
        assert abs(box.y + box.side / 2 - 400) <= 2

    def test_all_black(self):
        with pytest.raises(NoFundusDetected):
            detect_fundus_square(np.zeros((200, 300, 3), np.uint8))

    def test_idempotence_on_tight_crop(self):
        img = gen_fundus_image(900, 900, 440, seed=2)
        first = detect_fundus_square(img)
        crop = extract_square(img, first)
        second = detect_fundus_square(crop)
        assert abs(second.side - min(crop.shape[:2])) <= 2

    def test_annotation_not_part_of_component(self):
        plain = detect_fundus_square(gen_fundus_image(1000, 800, 390, seed=3))
        annotated = detect_fundus_square(
            gen_fundus_image(1000, 800, 390, annotation=True, seed=3))
        assert (annotated.x, annotated.y, annotated.side) == (plain.x, plain.y, plain.side)

    def test_rejects_bad_arrays(self):
        with pytest.raises(InvariantError):
            detect_fundus_square(np.zeros((100, 100), np.uint8))
        with pytest.raises(InvariantError):
            detect_fundus_square(np.zeros((8, 100, 3), np.uint8))


class TestExtractSquare:
    def test_pads_black_when_square_exceeds_frame(self):
        # wide disk touching top and bottom edges: tight square is wider
        # than the frame is tall
        img = gen_fundus_image(1000, 700, 349, seed=4)
        box = detect_fundus_square(img)
        square = extract_square(img, box)
        assert square.shape[0] == square.shape[1] == box.side
        retained = luma_mask(square).sum()
        total = luma_mask(img).sum()
        assert retained == total  # nothing of the disk is lost

    def test_invalid_box(self):
        img = gen_fundus_image(200, 200, 80, seed=5)
        with pytest.raises(InvalidBox):
            extract_square(img, CropBox(x=500, y=0, side=64))
        with pytest.raises(InvariantError):
            CropBox(x=0, y=0, side=4)


class TestResize:
    def test_constant_stays_constant(self):
        for value in (0, 113, 255):
            img = np.full((70, 70, 3), value, np.uint8)
            for side in (16, 64, 150):
                out = resize_bicubic(img, side)
                assert out.shape == (side, side, 3)
                assert (out == value).all()

    def test_shape_contract(self):
        img = gen_fundus_image(780, 780, 380, seed=6)
        out = resize_bicubic(img, 512)
        assert out.shape == (512, 512, 3)

    def test_identity_size_is_exact(self):
        rng = np.random.default_rng(7)
        img = rng.integers(0, 256, (64, 64, 3)).astype(np.uint8)
        assert (resize_bicubic(img, 64) == img).all()

    def test_disk_radius_scales(self):
        img = gen_fundus_image(800, 800, 390, seed=8)
        box = detect_fundus_square(img)
        for target in (256, 512, 1024):
            out = crop_resize(img, box, target)
            measured = np.sqrt(luma_mask(out).sum() / np.pi)
            expected = 390 * target / box.side
            assert abs(measured - expected) <= 2.0

    def test_deterministic(self):
        img = gen_fundus_image(500, 400, 190, seed=9)
        box = detect_fundus_square(img)
        a = crop_resize(img, box, 299)
        b = crop_resize(img, box, 299)
        assert (a == b).all()


class TestRetention:
    def test_disk_pixels_survive_crop(self):
        for seed in range(3):
            img = gen_fundus_image(1000, 800, 390, annotation=True, seed=seed)
            box = detect_fundus_square(img)
            square = extract_square(img, box)
            disk = disk_mask(1000, 800, 390)
            retained = luma_mask(square).sum()
            assert retained >= 0.995 * disk.sum()

    def test_annotation_contributes_nothing(self):
        img = gen_fundus_image(1000, 800, 390, annotation=True, seed=11)
        plain = gen_fundus_image(1000, 800, 390, annotation=False, seed=11)
        box = detect_fundus_square(img)
        assert (extract_square(img, box) == extract_square(plain, box)).all()


def _write_population(tmp_path, n=3, size=(250, 200), radius=90, black=()):
    images_dir = tmp_path / "raw"
    images_dir.mkdir(exist_ok=True)
    records = []
    for k in range(n):
        rec = GradeRecord(f"img{k:02d}", f"p{k:02d}", "L", "fovea", True, 0, 0)
        records.append(rec)
        if k in black:
            img = np.zeros((size[1], size[0], 3), np.uint8)
        else:
            img = gen_fundus_image(size[0], size[1], radius, seed=100 + k)
        (images_dir / f"{rec.image_id}.png").write_bytes(encode_png(img))
    return records, images_dir


class TestRunPreprocess:
    def test_batch_counts(self, tmp_path):
        records, images_dir = _write_population(tmp_path, n=3)
        report = run_preprocess(records, images_dir, (64, 128), tmp_path / "out")
        assert len(report.processed) == 3 and not report.failed
        assert report.per_size_counts == {64: 3, 128: 3}
        assert report.written == 6
        for size in (64, 128):
            for k in range(3):
                assert (tmp_path / "out" / str(size) / f"img{k:02d}.png").is_file()

    def test_black_image_collected_not_fatal(self, tmp_path):
        records, images_dir = _write_population(tmp_path, n=3, black=(1,))
        report = run_preprocess(records, images_dir, (64,), tmp_path / "out")
        assert len(report.processed) == 2
        assert len(report.failed) == 1
        assert report.failed[0]["image_id"] == "img01"
        assert "NoFundusDetected" in report.failed[0]["error"]

    def test_missing_file_collected(self, tmp_path):
        records, images_dir = _write_population(tmp_path, n=2)
        records.append(GradeRecord("ghost", "p9", "L", "fovea", True, 0, 0))
        report = run_preprocess(records, images_dir, (64,), tmp_path / "out")
        assert len(report.failed) == 1
        assert report.failed[0]["image_id"] == "ghost"

    def test_idempotent_rerun(self, tmp_path):
        records, images_dir = _write_population(tmp_path, n=2)
        first = run_preprocess(records, images_dir, (64, 128), tmp_path / "out")
        assert first.written == 4 and first.rewritten == 0
        second = run_preprocess(records, images_dir, (64, 128), tmp_path / "out")
        assert second.written == 0 and second.rewritten == 0
        assert second.skipped_identical == 4

    def test_bytes_independent_of_jobs(self, tmp_path):
        records, images_dir = _write_population(tmp_path, n=4)
        run_preprocess(records, images_dir, (64, 96), tmp_path / "one", jobs=1)
        run_preprocess(records, images_dir, (64, 96), tmp_path / "four", jobs=4)
        for size in (64, 96):
            for k in range(4):
                a = (tmp_path / "one" / str(size) / f"img{k:02d}.png").read_bytes()
                b = (tmp_path / "four" / str(size) / f"img{k:02d}.png").read_bytes()
                assert a == b

    def test_report_json_shape(self, tmp_path):
        import json
        records, images_dir = _write_population(tmp_path, n=1)
        report = run_preprocess(records, images_dir, (64,), tmp_path / "out")
        payload = json.loads(report.to_json())
        assert set(payload) == {"processed", "failed", "per_size_counts",
                                "written", "rewritten", "skipped_identical"}

    def test_size_validation(self, tmp_path):
        records, images_dir = _write_population(tmp_path, n=1)
        with pytest.raises(InvariantError):
            run_preprocess(records, images_dir, (8,), tmp_path / "out")
        with pytest.raises(InvariantError):
            run_preprocess(records, images_dir, (), tmp_path / "out")

    def test_find_image_file_extensions(self, tmp_path):
        (tmp_path / "x.jpeg").write_bytes(b"")
        assert find_image_file(tmp_path, "x").name == "x.jpeg"
        assert find_image_file(tmp_path, "y") is None
