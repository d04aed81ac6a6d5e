import numpy as np
import pytest

from models.codebook import Codebook, LearningSchedule
from models.errors import DataError, DimensionMismatchError
from services import vector_quantizer_service as vq
from utils.rng import make_rng


def _clusters(rng, centers, sigma, per_cluster=200):
    centers = np.asarray(centers, dtype=float)
    return np.vstack([rng.normal(c, sigma, size=(per_cluster, centers.shape[1])) for c in centers])


class TestWinner:
    def test_nearest(self):
        assert vq.winner(Codebook([[0.0], [1.0]]), [0.2]) == 0

    def test_ties_are_uniform(self):
        codebook = Codebook([[0.0], [1.0]])
        rng = make_rng(17)
        picks = [vq.winner(codebook, [0.5], rng) for _ in range(10_000)]
        assert set(picks) == {0, 1}
        assert np.mean(picks) == pytest.approx(0.5, abs=0.05)

    def test_tie_without_rng_takes_lowest(self):
        assert vq.winner(Codebook([[1.0], [-1.0]]), [0.0]) == 0

    def test_matches_brute_force(self, rng):
        codebook = Codebook(rng.normal(size=(32, 8)))
        for v in rng.normal(size=(200, 8)):
            expected = min(range(32), key=lambda i: float(np.sum((v - codebook.weights[i]) ** 2)))
            assert vq.winner(codebook, v) == expected

    def test_duplicate_loser_does_not_change_winner(self, rng):
        weights = rng.normal(size=(6, 3))
        v = rng.normal(size=3)
        index = vq.winner(Codebook(weights), v)
        loser = (index + 1) % 6
        extended = Codebook(np.vstack([weights, weights[loser]]))
        assert vq.winner(extended, v) == index

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            vq.winner(Codebook([[0.0, 1.0]]), [0.1, 0.2, 0.3])


class TestOnlineUpdate:
    def test_winner_moves_halfway(self):
        updated = vq.online_update(Codebook([[0.0], [5.0]]), [1.0], 0.5)
        assert updated.weights[0, 0] == 0.5
        assert updated.weights[1, 0] == 5.0

    def test_small_eta_bound(self, rng):
        codebook = Codebook(rng.normal(size=(4, 3)))
        v = rng.normal(size=3)
        updated = vq.online_update(codebook, v, 1e-9)
        index = vq.winner(codebook, v)
        moved = np.linalg.norm(updated.weights - codebook.weights)
        assert moved <= 1e-9 * np.linalg.norm(v - codebook.weights[index]) + 1e-15

    def test_only_the_winner_changes(self, rng):
        codebook = Codebook(rng.normal(size=(10, 4)))
        v = rng.normal(size=4)
        updated = vq.online_update(codebook, v, 0.3)
        changed = np.flatnonzero(np.any(updated.weights != codebook.weights, axis=1))
        assert changed.tolist() == [vq.winner(codebook, v)]

    @pytest.mark.parametrize("eta", [0.0, -0.1, 1.5])
    def test_eta_range(self, eta):
        with pytest.raises(DataError):
            vq.online_update(Codebook([[0.0]]), [1.0], eta)

    def test_neighbourhood_moves_chain_neighbours(self):
        codebook = Codebook([[0.0], [2.0], [4.0], [6.0]])
        updated = vq.online_update(codebook, [0.5], 0.5, radius=1.0)
        moves = np.abs(updated.weights[:, 0] - codebook.weights[:, 0])
        assert moves[0] == pytest.approx(0.25)
        assert moves[1] > moves[2] > moves[3] > 0.0


class TestVoronoi:
    def test_single_codeword_takes_everything(self, rng):
        cells = vq.voronoi_assign(Codebook([[0.3, 0.3]]), rng.random((50, 2)))
        assert len(cells) == 1
        assert cells[0].tolist() == list(range(50))

    def test_clusters_become_cells(self, rng):
        data = _clusters(rng, [[0.1], [0.9]], 0.01, per_cluster=40)
        cells = vq.voronoi_assign(Codebook([[0.1], [0.9]]), data)
        assert cells[0].tolist() == list(range(40))
        assert cells[1].tolist() == list(range(40, 80))

    def test_cells_partition_and_agree_with_winner(self, rng):
        codebook = Codebook(rng.random((7, 3)))
        data = rng.random((300, 3))
        cells = vq.voronoi_assign(codebook, data)
        combined = np.concatenate(cells)
        assert np.array_equal(np.sort(combined), np.arange(300))
        for index, cell in enumerate(cells):
            assert all(vq.winner(codebook, data[j]) == index for j in cell)

    def test_assign_uses_tie_draws(self):
        codebook = Codebook([[0.0], [1.0]])
        labels = vq.assign(codebook, np.full(1000, 0.5), make_rng(3))
        assert 0 < labels.sum() < 1000


class TestDistortion:
    def test_zero_when_data_are_codewords(self, rng):
        data = rng.random((12, 4))
        assert vq.distortion(Codebook(data), data) == 0.0

    def test_two_points_one_codeword(self):
        assert vq.distortion(Codebook([[0.5]]), [0.0, 1.0]) == pytest.approx(0.5)

    def test_matches_resummation(self, rng):
        codebook = Codebook(rng.random((5, 3)))
        data = rng.random((80, 3))
        expected = sum(min(float(np.sum((v - w) ** 2)) for w in codebook.weights) for v in data)
        assert vq.distortion(codebook, data) == pytest.approx(expected, rel=1e-10)


class TestBatchStep:
    def test_cell_means_are_fixed(self, rng):
        data = _clusters(rng, [[0.1], [0.9]], 0.01)
        means = np.array([[data[:200].mean()], [data[200:].mean()]])
        stepped = vq.batch_step(Codebook(means), data, 1.0)
        np.testing.assert_allclose(stepped.weights, means, rtol=0, atol=1e-12)

    def test_single_codeword_jumps_to_mean(self, rng):
        data = rng.random((100, 2))
        stepped = vq.batch_step(Codebook([[5.0, -5.0]]), data, 1.0)
        np.testing.assert_allclose(stepped.weights[0], data.mean(axis=0), atol=1e-12)

    def test_empty_cell_stays(self):
        stepped = vq.batch_step(Codebook([[0.0], [10.0]]), [0.1, 0.2], 1.0)
        assert stepped.weights[1, 0] == 10.0

    @pytest.mark.parametrize("eta", [0.3, 1.0])
    def test_distortion_non_increasing(self, rng, eta):
        data = rng.random((400, 2))
        codebook = vq.initial_codebook(data, 8, rng)
        previous = vq.distortion(codebook, data)
        for _ in range(100):
            codebook = vq.batch_step(codebook, data, eta)
            current = vq.distortion(codebook, data)
            assert current <= previous * (1 + 1e-12)
            previous = current

    def test_eta_positive(self):
        with pytest.raises(DataError):
            vq.batch_step(Codebook([[0.0]]), [1.0], 0.0)


class TestTraining:
    def test_schedule_decreases(self):
        schedule = LearningSchedule(max_steps=1000)
        assert schedule.decay_tau == 100.0
        etas = [schedule.eta(n) for n in range(0, 1000, 50)]
        assert all(b < a for a, b in zip(etas, etas[1:]))
        with pytest.raises(DataError):
            LearningSchedule(eta0=1.5)

    @pytest.mark.parametrize("d", [1, 3])
    def test_single_codeword_converges_to_mean(self, rng, d):
        data = rng.normal(0.3, 0.05, size=(500, d))
        schedule = LearningSchedule(max_steps=50_000, eta0=1.0, tau=1.0, seed=2)
        codebook = vq.train(data, 1, schedule)
        np.testing.assert_allclose(codebook.weights[0], data.mean(axis=0), atol=1e-3)

    def test_two_clusters(self, rng):
        data = _clusters(rng, [[0.1], [0.9]], 0.01)
        codebook = vq.train(data, 2, LearningSchedule(max_steps=5000, seed=4, init="plusplus"))
        assert sorted(codebook.weights[:, 0]) == pytest.approx([0.1, 0.9], abs=0.05)

    def test_deterministic_by_seed(self, rng):
        data = rng.random((100, 2))
        schedule = LearningSchedule(max_steps=500, seed=6)
        assert vq.train(data, 4, schedule) == vq.train(data, 4, schedule)

    def test_neighbourhood_mode_trains(self, rng):
        data = rng.random((200, 1))
        codebook = vq.train(data, 5, LearningSchedule(max_steps=2000, seed=1, radius0=1.5))
        assert vq.distortion(codebook, data) < vq.distortion(Codebook([[0.5]] * 5), data)

    def test_sample_init_draws_data_points(self, rng):
        data = rng.random((20, 2))
        codebook = vq.initial_codebook(data, 5, make_rng(0))
        assert all(any(np.array_equal(w, v) for v in data) for w in codebook.weights)
        assert len({tuple(w) for w in codebook.weights}) == 5
        assert vq.initial_codebook(data[:3], 6, make_rng(0)).m == 6

    @pytest.mark.slow
    def test_four_clusters_near_restart_oracle(self, rng):
        data = _clusters(rng, [[0, 0], [0, 1], [1, 0], [1, 1]], 0.02, per_cluster=100)
        schedule = LearningSchedule(max_steps=2000, seed=10, init="plusplus")
        oracle, scores = vq.multi_restart_train(data, 4, schedule, restarts=50, threads=4)
        single = vq.train(data, 4, schedule)
        assert len(scores) == 50
        assert vq.distortion(oracle, data) == min(scores)
        assert vq.distortion(single, data) <= 1.1 * min(scores)

    def test_restarts_independent_of_threads(self, rng):
        data = rng.random((60, 2))
        schedule = LearningSchedule(max_steps=300, seed=5)
        serial = vq.multi_restart_train(data, 3, schedule, restarts=4, threads=1)
        parallel = vq.multi_restart_train(data, 3, schedule, restarts=4, threads=4)
        assert serial[0] == parallel[0]
        assert serial[1] == parallel[1]


class TestQuantizeImage:
    def test_lossless_with_every_block(self, rng):
        blocks = (rng.random((30, 16)) < 0.5).astype(float)
        indices, reconstruction, ratio = vq.quantize_image(blocks, Codebook(np.unique(blocks, axis=0)))
        assert np.array_equal(reconstruction, blocks > 0.5)
        assert ratio == pytest.approx(16 / vq.index_bits(np.unique(blocks, axis=0).shape[0]))
        assert indices.shape == (30,)

    def test_single_codeword(self, rng):
        blocks = (rng.random((10, 9)) < 0.5).astype(float)
        indices, reconstruction, ratio = vq.quantize_image(blocks, Codebook([np.full(9, 0.7)]))
        assert not indices.any()
        assert reconstruction.all()
        assert ratio == 9.0

    def test_error_equals_mean_cell_distortion(self, rng):
        blocks = (rng.random((200, 16)) < 0.4).astype(float)
        codebook = Codebook(blocks[rng.choice(200, size=16, replace=False)])
        _, reconstruction, _ = vq.quantize_image(blocks, codebook)
        expected = vq.distortion(codebook, blocks) / blocks.size
        assert vq.reconstruction_error(blocks, reconstruction) == pytest.approx(expected, rel=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            vq.quantize_image(np.zeros((3, 4)), Codebook(np.zeros((2, 5))))


class TestPacking:
    @pytest.mark.parametrize("m,bits", [(1, 1), (2, 1), (3, 2), (16, 4), (17, 5), (256, 8)])
    def test_index_bits(self, m, bits):
        assert vq.index_bits(m) == bits

    def test_msb_first(self):
        assert vq.pack_indices([1, 0, 3], 2) == bytes([0b01001100])
        assert vq.unpack_indices(bytes([0b01001100]), 3, 2).tolist() == [1, 0, 3]

    def test_index_too_wide(self):
        with pytest.raises(DataError):
            vq.pack_indices([4], 2)

    def test_wrong_stream_length(self):
        with pytest.raises(DataError):
            vq.unpack_indices(b"\x00\x00", 3, 2)

    def test_payload_round_trip(self, rng):
        codebook = Codebook(rng.random((5, 4)))
        indices = rng.integers(5, size=37)
        restored, restored_indices = vq.codebook_from_payload(vq.codebook_to_payload(codebook, indices))
        assert restored == codebook
        assert np.array_equal(restored_indices, indices)

    def test_payload_index_out_of_range(self):
        payload = vq.codebook_to_payload(Codebook(np.zeros((3, 1))), [0, 1, 2])
        body = bytearray(payload)
        body[-1] |= 0b00001100
        with pytest.raises(DataError):
            vq.codebook_from_payload(bytes(body))
