import numpy as np
import pytest

from poksvd.model import Dictionary, PhaseMatrix, SparseCode, apply_phased_dictionary
from poksvd.pipeline import random_dictionary
from poksvd.pursuit import (
    PursuitConfig,
    po_omp,
    po_omp_batch,
    refine_support,
    select_best_atom,
)


def random_complex(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def planted_frame(rng, D, support, gain_range=(0.5, 2.0)):
    gains = np.zeros(D.num_atoms)
    pm = PhaseMatrix(bins=D.bins)
    for k in support:
        gains[k] = rng.uniform(*gain_range)
        pm.columns[k] = np.exp(2j * np.pi * rng.uniform(size=D.bins))
    code = SparseCode(gains=gains, support=list(support))
    return apply_phased_dictionary(D, pm, code), code, pm


class TestSelectBestAtom:
    def test_derived_score_is_summed_bin_correlation(self):
        rng = np.random.default_rng(0)
        D = random_dictionary(rng, channels=2, bins=4, num_atoms=6)
        r = random_complex(rng, 8)
        k, gain, column = select_best_atom(r, D)

        blocks = D.blocks()
        scores = np.zeros(6)
        for j in range(6):
            for f in range(4):
                b = np.vdot(blocks[f, :, j], r.reshape(4, 2)[f])
                scores[j] += abs(b)
        assert k == int(np.argmax(scores))
        assert gain == pytest.approx(scores[k], abs=1e-10)
        assert np.allclose(np.abs(column), 1.0, atol=1e-12)

    def test_phase_column_aligns_residual(self):
        # with the returned phases every bin correlation becomes real >= 0
        rng = np.random.default_rng(1)
        D = random_dictionary(rng, channels=2, bins=4, num_atoms=3)
        r = random_complex(rng, 8)
        k, _, column = select_best_atom(r, D)
        blocks = D.blocks()
        for f in range(4):
            b = np.vdot(blocks[f, :, k], r.reshape(4, 2)[f])
            aligned = np.conj(column[f]) * b
            assert aligned.real == pytest.approx(abs(b), abs=1e-10)
            assert aligned.imag == pytest.approx(0.0, abs=1e-10)

    def test_planted_single_atom_is_found(self):
        rng = np.random.default_rng(2)
        for trial in range(20):
            D = random_dictionary(rng, channels=2, bins=8, num_atoms=6, max_coherence=0.6)
            y, code, _ = planted_frame(rng, D, [trial % 6])
            k, gain, _ = select_best_atom(y, D)
            assert k == trial % 6
            assert gain == pytest.approx(code.gains[k], rel=1e-10)

    def test_excluded_atoms_are_skipped(self):
        rng = np.random.default_rng(3)
        D = random_dictionary(rng, channels=2, bins=4, num_atoms=3)
        y, _, _ = planted_frame(rng, D, [1])
        k, _, _ = select_best_atom(y, D, excluded={1})
        assert k != 1
        with pytest.raises(ValueError, match="no candidate"):
            select_best_atom(y, D, excluded={0, 1, 2})

    def test_classic_mode_uses_full_vector_correlation(self):
        rng = np.random.default_rng(4)
        D = random_dictionary(rng, channels=2, bins=4, num_atoms=5)
        r = random_complex(rng, 8)
        cfg = PursuitConfig(phase_optimization=False)
        k, gain, column = select_best_atom(r, D, cfg=cfg)
        b = D.atoms.conj().T @ r
        assert k == int(np.argmax(np.abs(b)))
        assert gain == pytest.approx(abs(b[k]), abs=1e-12)
        assert np.all(column == column[0])  # constant across bins

    def test_literal_selection_rule_is_available(self):
        rng = np.random.default_rng(5)
        D = random_dictionary(rng, channels=2, bins=4, num_atoms=5)
        r = random_complex(rng, 8)
        cfg = PursuitConfig(selection_rule="literal")
        k, gain, _ = select_best_atom(r, D, cfg=cfg)
        blocks = D.blocks()
        B = np.einsum("fmk,fm->fk", blocks.conj(), r.reshape(4, 2))
        scores = np.abs((B / np.abs(B)).sum(axis=0))
        assert k == int(np.argmax(scores))
        assert gain == pytest.approx(scores[k], abs=1e-10)


class TestRefineSupport:
    def test_exact_fit_on_planted_support(self):
        rng = np.random.default_rng(6)
        D = random_dictionary(rng, channels=2, bins=8, num_atoms=6, max_coherence=0.6)
        y, code, pm = planted_frame(rng, D, [0, 3])
        cfg = PursuitConfig(s_max=2, tau=1e-12, epsilon=1e-9, max_refine_iters=500)
        # start from deliberately wrong phases
        cols = [np.ones(8, dtype=complex), np.ones(8, dtype=complex)]
        gains, cols, r = refine_support(y, D, [0, 3], cols, cfg)
        assert np.linalg.norm(r) < 1e-8
        assert gains[0] == pytest.approx(code.gains[0], abs=1e-6)
        assert gains[1] == pytest.approx(code.gains[3], abs=1e-6)

    def test_residual_norm_monotone_over_sweeps(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            D = random_dictionary(rng, channels=2, bins=6, num_atoms=5)
            y = random_complex(rng, 12)
            cols = [np.ones(6, dtype=complex)] * 2
            norms = []
            for cap in range(1, 8):
                cfg = PursuitConfig(s_max=2, tau=0, epsilon=1e-12, max_refine_iters=cap)
                _, _, r = refine_support(y, D, [0, 2], cols, cfg)
                norms.append(np.linalg.norm(r))
            for a, b in zip(norms, norms[1:]):
                assert b <= a + 1e-12

    def test_empty_support_rejected(self):
        rng = np.random.default_rng(8)
        D = random_dictionary(rng, channels=2, bins=4, num_atoms=3)
        with pytest.raises(ValueError, match="empty support"):
            refine_support(np.ones(8, dtype=complex), D, [], [], PursuitConfig())


class TestPoOmp:
    def test_recovers_planted_two_atom_frames(self):
        rng = np.random.default_rng(9)
        D = random_dictionary(rng, channels=2, bins=16, num_atoms=8, max_coherence=0.5)
        cfg = PursuitConfig(s_max=2, tau=1e-10, epsilon=1e-8, max_refine_iters=200)
        hits = 0
        for _ in range(20):
            support = sorted(rng.choice(8, size=2, replace=False).tolist())
            y, code, _ = planted_frame(rng, D, support)
            res = po_omp(y, D, cfg)
            if sorted(res.code.support) == support and res.residual_norm < 1e-8:
                hits += 1
        assert hits >= 16

    def test_reconstruction_plus_residual_is_input(self):
        rng = np.random.default_rng(10)
        D = random_dictionary(rng, channels=2, bins=8, num_atoms=6)
        y = random_complex(rng, 16)
        res = po_omp(y, D, PursuitConfig(s_max=3))
        rebuilt = apply_phased_dictionary(D, res.phases, res.code)
        assert np.allclose(rebuilt + res.residual, y, atol=1e-10)
        assert res.residual_norm == pytest.approx(np.linalg.norm(res.residual), abs=1e-12)

    def test_residual_nonincreasing_in_greedy_steps(self):
        rng = np.random.default_rng(11)
        D = random_dictionary(rng, channels=2, bins=8, num_atoms=6)
        y = random_complex(rng, 16)
        prev = np.linalg.norm(y)
        for s in range(1, 4):
            res = po_omp(y, D, PursuitConfig(s_max=s, tau=0))
            assert res.residual_norm <= prev + 1e-12
            prev = res.residual_norm

    def test_gains_are_nonnegative_and_support_sized(self):
        rng = np.random.default_rng(12)
        D = random_dictionary(rng, channels=2, bins=8, num_atoms=6)
        y = random_complex(rng, 16)
        res = po_omp(y, D, PursuitConfig(s_max=3))
        assert len(res.code.support) <= 3
        assert np.all(res.code.gains >= 0)
        for k in range(6):
            if k not in res.code.support:
                assert res.code.gains[k] == 0

    def test_zero_frame_gives_empty_support(self):
        rng = np.random.default_rng(13)
        D = random_dictionary(rng, channels=2, bins=4, num_atoms=3)
        res = po_omp(np.zeros(8, dtype=complex), D, PursuitConfig(s_max=2, tau=1e-8))
        assert res.code.support == []
        assert res.residual_norm == 0

    def test_frame_length_mismatch_rejected(self):
        rng = np.random.default_rng(14)
        D = random_dictionary(rng, channels=2, bins=4, num_atoms=3)
        with pytest.raises(ValueError, match="does not match"):
            po_omp(np.ones(7, dtype=complex), D)

    def test_classic_mode_matches_reference_omp(self):
        # with phase optimization off the pursuit must be plain OMP with a
        # complex gain folded into a constant phase column
        rng = np.random.default_rng(15)
        D = random_dictionary(rng, channels=1, bins=8, num_atoms=6)
        A = D.atoms
        cfg = PursuitConfig(s_max=3, tau=1e-10, epsilon=1e-8, phase_optimization=False)
        for _ in range(10):
            y = random_complex(rng, 8)
            res = po_omp(y, D, cfg)

            r = y.copy()
            support = []
            x = np.zeros(0, dtype=complex)
            for _ in range(3):
                scores = np.abs(A.conj().T @ r)
                scores[support] = -1
                k = int(np.argmax(scores))
                if scores[k] <= 0:
                    break
                support.append(k)
                x, *_ = np.linalg.lstsq(A[:, support], y, rcond=None)
                r = y - A[:, support] @ x
            assert res.code.support == support
            for j, k in enumerate(support):
                folded = res.code.gains[k] * res.phases.column(k)[0]
                assert folded == pytest.approx(x[j], abs=1e-8)
            assert res.residual_norm == pytest.approx(np.linalg.norm(r), abs=1e-8)


class TestBatchConsistency:
    def test_batch_equals_per_frame(self):
        rng = np.random.default_rng(16)
        D = random_dictionary(rng, channels=2, bins=8, num_atoms=6, max_coherence=0.7)
        Y = random_complex(rng, 16, 30)
        cfg = PursuitConfig(s_max=2, tau=1e-8, epsilon=1e-6, max_refine_iters=100)
        batch = po_omp_batch(Y, D, cfg)
        assert len(batch) == 30
        for t in range(30):
            single = po_omp(Y[:, t], D, cfg)
            assert batch[t].code.support == single.code.support
            assert np.allclose(batch[t].code.gains, single.code.gains, atol=1e-9)
            assert np.allclose(batch[t].residual, single.residual, atol=1e-9)

    def test_bad_frame_matrix_rejected(self):
        rng = np.random.default_rng(17)
        D = random_dictionary(rng, channels=2, bins=4, num_atoms=3)
        with pytest.raises(ValueError, match="frame matrix"):
            po_omp_batch(np.zeros((7, 3)), D)


class TestConfigValidation:
    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            PursuitConfig(s_max=0)
        with pytest.raises(ValueError):
            PursuitConfig(tau=-1)
        with pytest.raises(ValueError):
            PursuitConfig(epsilon=0)
        with pytest.raises(ValueError):
            PursuitConfig(selection_rule="other")
