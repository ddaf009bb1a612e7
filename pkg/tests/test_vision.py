"""Unit tests for droplet segmentation and scoring."""

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.vision import (
    DropletImage,
    SegmentationResult,
    SegOpts,
    boundary_pixels,
    droplet_geometry,
    geom_loss,
    score,
    segment,
    xor_count,
    yield_loss,
)
from src.utils.errors import DegenerateRegionError, InvalidCountMaxError
from tests.painters import (
    blank,
    coords_of,
    disk_mask,
    ellipse_mask,
    five_disks,
    oracle_circle_xor,
    oracle_geom_loss,
    paint,
    paint_disks,
    rectangle_mask,
)


def seg_from_masks(shape, masks) -> SegmentationResult:
    labels = np.zeros(shape, dtype=np.int32)
    for i, m in enumerate(masks, start=1):
        labels[m] = i
    return SegmentationResult(labels=labels, regions=[coords_of(m) for m in masks])


class TestDropletImage:
    """Test cases for the image type."""

    def test_minimum_size(self):
        """Test images below 16x16 are rejected."""
        with pytest.raises(ValueError):
            DropletImage(np.zeros((15, 64), dtype=np.uint8))

    def test_grayscale_only(self):
        """Test 3-channel arrays are rejected."""
        with pytest.raises(ValueError):
            DropletImage(np.zeros((32, 32, 3), dtype=np.uint8))

    def test_pixels_read_only(self):
        """Test pixels cannot be modified after construction."""
        image = blank(32, 32)
        with pytest.raises(ValueError):
            image.pixels[0, 0] = 1


class TestSegment:
    """Test cases for segment."""

    def test_five_disks(self):
        """Test five disjoint disks give five regions of the painted size."""
        image, masks = five_disks()
        seg = segment(image)
        assert seg.droplet_count == 5
        painted = sorted(int(m.sum()) for m in masks)
        found = sorted(seg.areas.tolist())
        for a, b in zip(painted, found):
            assert abs(a - b) <= 0.05 * a

    def test_black_image(self):
        """Test an all-black image has no droplets."""
        assert segment(blank(64, 64)).droplet_count == 0

    def test_low_contrast_is_empty(self):
        """Test sensor noise alone is not segmented."""
        rng = np.random.default_rng(0)
        noise = np.clip(rng.normal(60, 4, (128, 128)), 0, 255).astype(np.uint8)
        assert segment(DropletImage(noise)).droplet_count == 0

    def test_overlapping_circles_split(self):
        """Test two circles overlapping by 30% of the radius are split in two."""
        radius = 20
        image, _ = paint_disks((100, 140), [(50, 50), (50, 50 + 2 * radius - 0.3 * radius)], radius)
        seg = segment(image)
        assert seg.droplet_count == 2

    def test_polarity_dark_droplets(self):
        """Test dark droplets on a bright background are found too."""
        image, _ = five_disks()
        inverted = DropletImage(255 - image.pixels)
        assert segment(inverted).droplet_count == 5

    def test_min_area_drops_specks(self):
        """Test regions below min_area are dropped."""
        mask = disk_mask((100, 100), (30, 30), 12) | rectangle_mask((100, 100), (80, 80), 4, 4)
        seg = segment(paint(mask), SegOpts(min_area=20, opening_iterations=0))
        assert seg.droplet_count == 1

    def test_labels_match_regions(self):
        """Test label image and region list agree."""
        image, _ = five_disks()
        seg = segment(image)
        for i, region in enumerate(seg.regions, start=1):
            assert np.all(seg.labels[region[:, 0], region[:, 1]] == i)
        assert seg.background_pixels == seg.total_pixels - int(seg.areas.sum())

    def test_deterministic(self):
        """Test identical inputs give identical labels."""
        image, _ = five_disks()
        np.testing.assert_array_equal(segment(image).labels, segment(image).labels)

    def test_noisy_stripe_is_one_region(self):
        """Test a full-width stripe with ragged edges stays a single region."""
        rng = np.random.default_rng(4)
        pixels = np.full((128, 512), 60.0)
        pixels[45:83] = 180.0
        pixels[44] = pixels[83] = 120.0
        pixels = np.clip(np.rint(pixels + rng.normal(0.0, 4.0, pixels.shape)), 0, 255).astype(np.uint8)
        assert segment(DropletImage(pixels)).droplet_count == 1

    def test_seg_opts_validation(self):
        """Test marker_frac must lie strictly inside (0, 1)."""
        with pytest.raises(ValidationError):
            SegOpts(marker_frac=1.0)


class TestDropletGeometry:
    """Test cases for chord measurement and the fitted circle."""

    def test_disk_maps_to_itself(self):
        """Test a rasterized disk of radius 20 has both chords 40 and matches its circle."""
        region = coords_of(disk_mask((64, 64), (32, 32), 20))
        geometry = droplet_geometry(region)
        assert geometry.r_major == pytest.approx(40, abs=1)
        assert geometry.r_minor == pytest.approx(40, abs=1)
        assert xor_count(region, geometry.circle_pixels) <= 0.03 * len(region)

    def test_ellipse_chords(self):
        """Test a 40x20 ellipse has chords of 40 and 20."""
        region = coords_of(ellipse_mask((64, 64), (32, 32), 10, 20))
        geometry = droplet_geometry(region)
        assert geometry.r_major == pytest.approx(40, abs=1)
        assert geometry.r_minor == pytest.approx(20, abs=1)

    def test_two_by_two_block(self):
        """Test a 2x2 block is measured along its diagonals."""
        geometry = droplet_geometry(np.array([[0, 0], [0, 1], [1, 0], [1, 1]]))
        assert geometry.r_major == pytest.approx(np.sqrt(2))
        assert geometry.r_minor == pytest.approx(np.sqrt(2))

    def test_area_two_is_degenerate(self):
        """Test regions under 3 px raise DegenerateRegionError."""
        with pytest.raises(DegenerateRegionError):
            droplet_geometry(np.array([[0, 0], [0, 1]]))

    def test_straight_line_has_zero_width(self):
        """Test a one-pixel-wide line keeps its major chord and has no minor chord."""
        geometry = droplet_geometry(np.array([[0, c] for c in range(10)]))
        assert geometry.r_major == 9.0
        assert geometry.r_minor == 0.0
        assert geometry.centroid == (0.0, 4.5)
        assert geometry.circle_radius == pytest.approx(2.25)

    def test_matches_oracle_chords(self):
        """Test chords match the nested-loop oracle."""
        region = coords_of(ellipse_mask((64, 64), (31.3, 30.7), 9, 17))
        geometry = droplet_geometry(region)
        mismatch, r_major, r_minor = oracle_circle_xor([tuple(p) for p in region])
        assert geometry.r_major == r_major
        assert geometry.r_minor == r_minor
        assert xor_count(region, geometry.circle_pixels) == mismatch

    def test_boundary_of_square(self):
        """Test the boundary of a 3x3 square is its 8 outer pixels."""
        square = np.array([[r, c] for r in range(3) for c in range(3)])
        edge = boundary_pixels(square)
        assert len(edge) == 8
        assert [1, 1] not in edge.tolist()


class TestLosses:
    """Test cases for geometry and yield losses."""

    def test_perfect_disks(self):
        """Test disks score a near-zero geometry loss."""
        image, _ = five_disks()
        assert geom_loss(segment(image)) <= 0.05

    def test_ellipse_worse_than_disk(self):
        """Test an aspect-2 ellipse scores a higher geometry loss than a disk of similar area."""
        ellipse = paint(ellipse_mask((80, 120), (40, 60), 12, 24))
        disk = paint(disk_mask((80, 120), (40, 60), 17))
        assert geom_loss(segment(ellipse)) > geom_loss(segment(disk)) + 0.2

    @pytest.mark.parametrize("count_max", [5, 50])
    def test_upsampling_barely_changes_loss(self, count_max):
        """Test doubling the resolution moves the loss by less than 0.05."""
        image, _ = five_disks()
        doubled = DropletImage(np.kron(image.pixels, np.ones((2, 2), dtype=np.uint8)))
        a = score(image, count_max=count_max).loss
        b = score(doubled, count_max=count_max).loss
        assert abs(a - b) < 0.05

    def test_no_droplets(self):
        """Test no droplets is the worst geometry."""
        assert geom_loss(segment(blank())) == 1.0

    def test_rectangle_matches_oracle(self):
        """Test a 40x20 rectangle scores exactly what the pixel oracle counts."""
        image = paint(rectangle_mask((80, 100), (30, 30), 20, 40))
        seg = segment(image)
        assert seg.droplet_count == 1
        assert geom_loss(seg) == pytest.approx(oracle_geom_loss(seg.regions), abs=1e-12)

    def test_degenerate_region_counts_fully(self):
        """Test a degenerate region adds its whole area to the mismatch."""
        shape = (32, 32)
        line = np.zeros(shape, dtype=bool)
        line[5, 2:4] = True
        disk = disk_mask(shape, (20, 20), 6)
        seg = seg_from_masks(shape, [disk, line])
        disk_only = seg_from_masks(shape, [disk])
        expected = (geom_loss(disk_only) * disk.sum() + line.sum()) / (disk.sum() + line.sum())
        assert geom_loss(seg) == pytest.approx(expected)

    def test_yield_full_coverage(self):
        """Test full coverage with count_max droplets gives zero yield loss."""
        shape = (20, 20)
        masks = [np.zeros(shape, dtype=bool) for _ in range(4)]
        masks[0][:10, :10] = True
        masks[1][:10, 10:] = True
        masks[2][10:, :10] = True
        masks[3][10:, 10:] = True
        assert yield_loss(seg_from_masks(shape, masks), 4) == 0.0

    def test_yield_arithmetic(self):
        """Test one 400 px droplet on 100x100 with count_max 10."""
        mask = rectangle_mask((100, 100), (10, 10), 20, 20)
        assert yield_loss(seg_from_masks((100, 100), [mask]), 10) == pytest.approx(0.93)

    def test_yield_empty(self):
        """Test no droplets is the worst yield."""
        assert yield_loss(segment(blank()), 50) == 1.0

    def test_yield_counts_capped(self):
        """Test more droplets than count_max do not go negative."""
        image, _ = five_disks()
        assert yield_loss(segment(image), 2) >= 0.0

    def test_invalid_count_max(self):
        """Test count_max < 1 raises InvalidCountMaxError."""
        with pytest.raises(InvalidCountMaxError):
            yield_loss(segment(blank()), 0)


class TestScore:
    """Test cases for score."""

    def test_blank_image(self):
        """Test a blank image scores 1.0."""
        result = score(blank())
        assert result.loss == 1.0
        assert result.droplet_count == 0

    def test_loss_is_mean(self):
        """Test the combined loss is the mean of its components."""
        image, _ = five_disks()
        result = score(image, count_max=10)
        assert result.loss == (result.geom_loss + result.yield_loss) / 2.0
        assert 0.0 <= result.loss <= 1.0

    def test_droplet_statistics(self):
        """Test mean diameter and spread of equal disks."""
        image, _ = five_disks()
        result = score(image)
        assert result.droplet_count == 5
        assert result.mean_diameter_px == pytest.approx(32, rel=0.05)
        assert result.diameter_cv < 0.05

    def test_deterministic(self):
        """Test identical images score bit-identically."""
        image, _ = five_disks()
        a, b = score(image), score(image)
        assert (a.loss, a.geom_loss, a.yield_loss) == (b.loss, b.geom_loss, b.yield_loss)
