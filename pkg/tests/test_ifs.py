import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from models.binary_image import BinaryImage
from models.errors import DataError, DimensionMismatchError, NotContractiveError
from models.ifs import AffineMap, AnnealSchedule
from services import ifs_service
from services.image_metrics import hamming_distance, image_hausdorff
from utils.rng import spawn_seeds

IDENTITY = AffineMap(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
SWAP = AffineMap(0.0, 1.0, 0.0, 1.0, 0.0, 0.0)


def _single_map(c=0.1, f=0.2, scale=0.5):
    return ifs_service.validate_ifs([AffineMap(scale, 0.0, c, 0.0, scale, f)])


class TestAffineMaps:
    def test_identity(self):
        assert ifs_service.apply_map(IDENTITY, (2.0, 3.0)) == (2.0, 3.0)

    def test_half_scale(self):
        assert ifs_service.apply_map(AffineMap(0.5, 0, 0, 0, 0.5, 0), (2.0, 4.0)) == (1.0, 2.0)

    def test_matches_direct_arithmetic(self, rng):
        a, b, c, d, e, f = rng.normal(size=6)
        x, y = rng.normal(size=2)
        m = AffineMap(a, b, c, d, e, f)
        assert ifs_service.apply_map(m, (x, y)) == (a * x + b * y + c, d * x + e * y + f)

    def test_vectorized_agrees(self, rng):
        m = AffineMap(*rng.normal(size=6))
        points = rng.normal(size=(20, 2))
        expected = [ifs_service.apply_map(m, tuple(p)) for p in points]
        np.testing.assert_allclose(ifs_service.apply_map_points(m, points), expected, rtol=1e-14, atol=1e-14)

    def test_non_finite_rejected(self):
        with pytest.raises(DataError):
            AffineMap(float("nan"), 0, 0, 0, 0.5, 0)


class TestContraction:
    def test_scaled_identity(self):
        assert ifs_service.contraction_factor(AffineMap(0.5, 0, 0, 0, 0.5, 0)) == pytest.approx(0.5)

    def test_swap_is_isometry(self):
        assert ifs_service.contraction_factor(SWAP) == pytest.approx(1.0)

    def test_shear_matches_angular_scan(self):
        shear = AffineMap(1.0, 1.0, 0.0, 0.0, 1.0, 0.0)
        angles = np.linspace(0.0, np.pi, 200001)
        directions = np.column_stack([np.cos(angles), np.sin(angles)])
        oracle = np.max(np.linalg.norm(directions @ shear.linear.T, axis=1))
        assert ifs_service.contraction_factor(shear) == pytest.approx(oracle, rel=1e-8)
        assert ifs_service.contraction_factor(shear) == pytest.approx((1 + math.sqrt(5)) / 2)

    def test_factor_bounds_point_distances(self, rng):
        for _ in range(20):
            m = AffineMap(*rng.uniform(-1, 1, size=6))
            factor = ifs_service.contraction_factor(m)
            p, q = rng.normal(size=(1000, 2)), rng.normal(size=(1000, 2))
            mapped = np.linalg.norm(ifs_service.apply_map_points(m, p) - ifs_service.apply_map_points(m, q), axis=1)
            assert np.all(mapped <= factor * np.linalg.norm(p - q, axis=1) + 1e-12)

    def test_validate_takes_max_factor(self):
        system = ifs_service.validate_ifs([
            AffineMap(0.3, 0, 0, 0, 0.3, 0),
            AffineMap(0.7, 0, 0.2, 0, 0.7, 0.1),
        ])
        assert system.s == pytest.approx(0.7)
        assert ifs_service.sierpinski_system().s == pytest.approx(0.5)

    def test_swap_is_not_contractive(self):
        with pytest.raises(NotContractiveError) as info:
            ifs_service.validate_ifs([AffineMap(0.5, 0, 0, 0, 0.5, 0), SWAP])
        assert info.value.index == 1

    def test_empty_system(self):
        with pytest.raises(DataError):
            ifs_service.validate_ifs([])

    def test_fixed_point(self):
        assert ifs_service.fixed_point(AffineMap(0.5, 0, 0.1, 0, 0.5, 0.2)) == pytest.approx((0.2, 0.4))


class TestChaosGame:
    def test_fixed_points_are_set(self, sierpinski):
        image = ifs_service.chaos_game(sierpinski, 50_000, 100, None, 64, 64, seed=3)
        for m in sierpinski.maps:
            x, y = ifs_service.fixed_point(m)
            mask = ifs_service.points_to_raster(np.array([[x, y]]), ifs_service.UNIT_VIEWPORT, 64, 64)
            assert np.all(image.pixels[mask])

    def test_single_map_gives_single_pixel(self):
        image = ifs_service.chaos_game(_single_map(), 1000, 100, None, 64, 64, seed=1)
        assert image.set_count == 1
        assert image.pixels[38, 12]

    def test_deterministic_by_seed(self, sierpinski):
        first = ifs_service.chaos_game(sierpinski, 5000, 10, None, 32, 32, seed=42)
        second = ifs_service.chaos_game(sierpinski, 5000, 10, None, 32, 32, seed=42)
        assert first == second

    def test_agrees_with_union_iteration(self, sierpinski, sierpinski_image_64):
        image = ifs_service.chaos_game(sierpinski, 30_000, 100, None, 64, 64, seed=5)
        assert hamming_distance(image, sierpinski_image_64) <= 0.01

    def test_independent_of_seed(self, sierpinski):
        first = ifs_service.chaos_game(sierpinski, 30_000, 100, None, 64, 64, seed=1)
        second = ifs_service.chaos_game(sierpinski, 30_000, 100, None, 64, 64, seed=2)
        assert hamming_distance(first, second) <= 0.01

    @pytest.mark.slow
    def test_agrees_with_union_iteration_at_256(self, sierpinski):
        chaos = ifs_service.chaos_game(sierpinski, 200_000, 100, None, 256, 256, seed=0)
        union = ifs_service.render_attractor(sierpinski, 256, 256)
        assert hamming_distance(chaos, union) <= 0.01

    def test_weighted_maps(self, sierpinski):
        image = ifs_service.chaos_game(sierpinski, 20_000, 100, None, 32, 32, seed=9, weights=[1, 1, 2])
        assert image.set_count > 0
        with pytest.raises(DataError):
            ifs_service.chaos_game(sierpinski, 100, 10, None, 8, 8, seed=0, weights=[1, 1])

    def test_burn_in_must_be_below_iterations(self, sierpinski):
        with pytest.raises(DataError):
            ifs_service.chaos_game(sierpinski, 100, 100, None, 8, 8, seed=0)

    def test_degenerate_viewport(self, sierpinski):
        with pytest.raises(DataError):
            ifs_service.chaos_game(sierpinski, 100, 10, (0.0, 0.0, 0.0, 1.0), 8, 8, seed=0)

    def test_fern_stays_in_its_viewport(self):
        system, viewport = ifs_service.REFERENCE_SYSTEMS["fern"]
        image = ifs_service.chaos_game(system(), 20_000, 100, viewport, 64, 64, seed=0)
        assert image.set_count > 100


class TestUnionIteration:
    def test_attractor_is_fixed(self, sierpinski, sierpinski_image_64):
        following = ifs_service.hutchinson_step(sierpinski, sierpinski_image_64)
        assert hamming_distance(following, sierpinski_image_64) <= 0.005

    @pytest.mark.parametrize("steps", [1, 2, 4, 6, 8])
    def test_area_scales_by_three_quarters(self, sierpinski, steps):
        full = BinaryImage.blank(256, 256, fill=True)
        image = ifs_service.deterministic_attractor(sierpinski, full, steps)
        assert image.set_count == round(256 * 256 * 0.75 ** steps)

    def test_area_saturates_at_raster_resolution(self, sierpinski):
        full = BinaryImage.blank(256, 256, fill=True)
        image = ifs_service.deterministic_attractor(sierpinski, full, 12)
        assert image.set_count == 3 ** 8

    def test_single_map_halves_diameter(self):
        system = _single_map(0.25, 0.25)
        for steps in range(1, 7):
            image = ifs_service.deterministic_attractor(system, BinaryImage.blank(64, 64, fill=True), steps)
            side = 64 // 2 ** steps
            assert image.set_count == side * side
        assert image.pixels[32, 32]

    def test_iterations_must_be_positive(self, sierpinski):
        with pytest.raises(DataError):
            ifs_service.deterministic_attractor(sierpinski, BinaryImage.blank(4, 4), 0)


class TestCollageAndAcceptance:
    @pytest.mark.parametrize("eps,s,expected", [(0.01, 0.5, 0.02), (0.0, 0.3, 0.0), (0.64, 0.5, 1.28)])
    def test_collage_bound(self, eps, s, expected):
        assert ifs_service.collage_bound(eps, s) == pytest.approx(expected)

    @pytest.mark.parametrize("s", [0.0, 1.0, 1.5])
    def test_collage_bound_rejects_factor(self, s):
        with pytest.raises(DataError):
            ifs_service.collage_bound(0.1, s)

    def test_collage_distance_of_true_system(self, sierpinski, sierpinski_image_64):
        assert ifs_service.collage_distance(sierpinski, sierpinski_image_64) == 0.0

    @pytest.mark.parametrize("first_map", [
        AffineMap(0.5, 0.0, 0.0, 0.0, 0.5, 0.0),
        AffineMap(0.45, 0.0, 0.0, 0.0, 0.45, 0.0),
    ], ids=["exact", "shrunk"])
    def test_attractor_within_collage_bound(self, sierpinski, first_map):
        target = ifs_service.render_attractor(sierpinski, 256, 256)
        system = ifs_service.validate_ifs((first_map,) + tuple(sierpinski.maps[1:]))
        eps = ifs_service.collage_distance(system, target, metric="hausdorff")
        attractor = ifs_service.render_attractor(system, 256, 256)
        assert image_hausdorff(attractor, target) <= ifs_service.collage_bound(eps, system.s) + 0.01
        if first_map != sierpinski.maps[0]:
            assert eps > 0.0

    def test_acceptance_closed_forms(self):
        assert ifs_service.acceptance_probability(0.0, 5.0) == 0.5
        assert ifs_service.acceptance_probability(math.log(3.0), 1.0) == pytest.approx(0.25)
        assert ifs_service.acceptance_probability(1e6, 1.0) == 0.0
        assert ifs_service.acceptance_probability(-1e6, 1.0) == 1.0

    @settings(max_examples=300, deadline=None)
    @given(
        delta=st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
        beta=st.floats(min_value=1e-3, max_value=1e4, allow_nan=False),
    )
    def test_acceptance_is_complementary(self, delta, beta):
        p = ifs_service.acceptance_probability(delta, beta)
        q = ifs_service.acceptance_probability(-delta, beta)
        assert 0.0 <= p <= 1.0
        assert p + q == 1.0

    def test_acceptance_decreasing(self):
        deltas = np.linspace(-5, 5, 101)
        probs = [ifs_service.acceptance_probability(d, 2.0) for d in deltas]
        assert all(b <= a for a, b in zip(probs, probs[1:]))

    def test_acceptance_needs_positive_beta(self):
        with pytest.raises(DataError):
            ifs_service.acceptance_probability(0.1, 0.0)


class TestInverseSearch:
    def test_warm_start_stays_at_optimum(self, sierpinski, sierpinski_image_64):
        schedule = AnnealSchedule(sweeps=20, seed=1)
        result = ifs_service.inverse_search(sierpinski_image_64, 3, schedule, init=sierpinski)
        assert result.trace[0] == 0.0
        assert result.best_delta <= 0.05
        assert np.all(np.diff(result.best_trace) <= 0)
        assert result.trace.size == result.best_trace.size == 21

    def test_cold_start_best_trace_non_increasing(self, sierpinski_image_64):
        result = ifs_service.inverse_search(sierpinski_image_64, 3, AnnealSchedule(sweeps=30, seed=7))
        assert np.all(np.diff(result.best_trace) <= 0)
        assert result.best_delta == result.best_trace[-1] <= result.trace[0]
        assert result.accepted + result.rejected == 30 * 18
        assert result.system.s < 1.0

    @pytest.mark.slow
    def test_cold_start_long_run(self, sierpinski_image_64, record_property):
        result = ifs_service.inverse_search(sierpinski_image_64, 3, AnnealSchedule(sweeps=10_000, seed=3))
        assert np.all(np.diff(result.best_trace) <= 0)
        assert 0.0 <= result.best_delta <= result.trace[0]
        assert result.accepted + result.rejected == 10_000 * 18
        record_property("best_delta", result.best_delta)
        record_property("below_0_64", bool(result.best_delta < 0.64))

    def test_identical_seeds_are_bit_identical(self, sierpinski_image_64):
        schedule = AnnealSchedule(sweeps=15, seed=11)
        first = ifs_service.inverse_search(sierpinski_image_64, 2, schedule)
        second = ifs_service.inverse_search(sierpinski_image_64, 2, schedule)
        assert np.array_equal(first.trace, second.trace)
        assert first.system == second.system

    def test_single_map_target(self):
        target = ifs_service.render_attractor(_single_map(), 32, 32)
        result = ifs_service.inverse_search(target, 1, AnnealSchedule(sweeps=200, seed=2))
        assert result.best_delta < 0.1

    def test_hausdorff_metric(self, sierpinski, sierpinski_image_64):
        result = ifs_service.inverse_search(
            sierpinski_image_64, 3, AnnealSchedule(sweeps=5, seed=0), init=sierpinski, metric="hausdorff"
        )
        assert result.best_delta == 0.0

    def test_rejects_bad_arguments(self, sierpinski_image_64):
        schedule = AnnealSchedule(sweeps=1)
        with pytest.raises(DataError):
            ifs_service.inverse_search(BinaryImage.blank(8, 8), 1, schedule)
        with pytest.raises(DataError):
            ifs_service.inverse_search(sierpinski_image_64, 0, schedule)
        with pytest.raises(DimensionMismatchError):
            ifs_service.inverse_search(sierpinski_image_64, 2, schedule, init=[0.1] * 6)
        with pytest.raises(DataError):
            ifs_service.inverse_search(sierpinski_image_64, 1, schedule, metric="manhattan")

    def test_multi_chain_keeps_best(self, sierpinski_image_64):
        schedule = AnnealSchedule(sweeps=10, seed=0)
        seeds = spawn_seeds(3, 3)
        best = ifs_service.multi_chain_search(sierpinski_image_64, 2, schedule, seeds, threads=3)
        singles = [
            ifs_service.inverse_search(sierpinski_image_64, 2, AnnealSchedule(sweeps=10, seed=s)) for s in seeds
        ]
        assert best.best_delta == min(r.best_delta for r in singles)
        assert best.seed == min(singles, key=lambda r: r.best_delta).seed

    def test_block_search_skips_empty_tiles(self):
        pixels = np.zeros((30, 40), dtype=bool)
        pixels[2:12, 3:15] = True
        results = ifs_service.block_inverse_search(BinaryImage(pixels), 20, 1, AnnealSchedule(sweeps=3, seed=4))
        assert len(results) == 4
        assert results[0] is not None
        assert results[1:] == [None, None, None]
        rendered = ifs_service.render_blocks([r and r.system for r in results], 20, 40, 30)
        assert rendered.shape == (30, 40)
        assert not rendered.pixels[20:, :].any()


class TestPayload:
    def test_round_trip(self, sierpinski):
        payload = ifs_service.systems_to_payload([sierpinski, None])
        assert len(payload) == 4 + 18 * 8 + 4
        systems = ifs_service.systems_from_payload(payload)
        assert systems[1] is None
        assert systems[0] == sierpinski

    def test_truncated(self, sierpinski):
        with pytest.raises(DataError):
            ifs_service.systems_from_payload(ifs_service.systems_to_payload([sierpinski])[:-8])

    def test_non_contractive_payload(self):
        payload = ifs_service.systems_to_payload([_single_map()])
        coeffs = np.frombuffer(payload, dtype="<f8", offset=4).copy()
        coeffs[0] = 2.0
        with pytest.raises(NotContractiveError):
            ifs_service.systems_from_payload(payload[:4] + coeffs.astype("<f8").tobytes())
