"""Phase-optimized K-SVD: alternating frame-wise PO-OMP and sequential
per-atom rank-1 updates with closed-form phase refinement.

A new sparse code replaces a frame's previous one only if it does not
increase that frame's residual (external inference), which together with
the exact per-atom minimizations makes the training objective monotone.
With ``phase_optimization`` off the loop is classic K-SVD.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .linalg import PowerIterationError, dominant_singular_triple
from .model import (
    Dictionary,
    PhaseMatrix,
    SparseCode,
    apply_phased_dictionary,
    normalize_atom,
    normalize_atom_global,
)
from .pursuit import PursuitConfig, po_omp_batch

log = logging.getLogger(__name__)


@dataclass
class LearningConfig:
    num_atoms: int = 40
    pursuit: PursuitConfig = field(default_factory=PursuitConfig)
    epsilon_outer: float = 1e-3
    epsilon_atom: float = 1e-3
    max_outer_iters: int = 50
    max_atom_iters: int = 20
    seed: int = 0
    external_inference: bool = True
    # near-duplicate atoms trap the alternation in local minima; pairs with
    # phase-invariant overlap above this get a tentative replacement that is
    # kept only if the objective does not increase (0 disables)
    dedupe_coherence: float = 0.8

    def __post_init__(self):
        if self.num_atoms < 1:
            raise ValueError("num_atoms must be >= 1")
        for name in ("epsilon_outer", "epsilon_atom"):
            v = getattr(self, name)
            if not (0 < v < 1):
                raise ValueError("%s must lie in (0, 1)" % name)
        if self.max_outer_iters < 1 or self.max_atom_iters < 1:
            raise ValueError("iteration caps must be >= 1")


@dataclass
class TrainedModel:
    dictionary: Dictionary
    codes: list[SparseCode]
    phases: list[PhaseMatrix]
    objective_trace: list[float]


def init_dictionary(Y, channels, num_atoms, seed, phase_optimization=True):
    """Seed the dictionary with K distinct nonzero frames of Y, normalized.

    Y is an (M*F, T) frame matrix.  Sampling is without replacement from
    the nonzero-norm frames via a seeded RNG, so identical inputs give
    identical dictionaries.
    """
    Y = np.asarray(Y, dtype=np.complex128)
    norms = np.linalg.norm(Y, axis=0)
    candidates = np.flatnonzero(norms > 0)
    if candidates.size < num_atoms:
        raise ValueError(
            "insufficient training data: %d nonzero frames < K = %d"
            % (candidates.size, num_atoms)
        )
    rng = np.random.default_rng(seed)
    picks = rng.choice(candidates, size=num_atoms, replace=False)
    atoms = np.empty((Y.shape[0], num_atoms), dtype=np.complex128)
    for i, t in enumerate(picks):
        if phase_optimization:
            atoms[:, i] = normalize_atom(Y[:, t], channels)[0]
        else:
            atoms[:, i] = normalize_atom_global(Y[:, t])[0]
    bins = Y.shape[0] // channels
    return Dictionary(channels=channels, bins=bins, atoms=atoms)


def _reconstruction(D, code, phase):
    return apply_phased_dictionary(D, phase, code)


def compute_atom_residual(Y, D, codes, phases, k):
    """E_k: the data minus every atom's contribution except atom k's.

    Column t is y_t - sum_{j != k} x_{jt} (phase-corrected atom j),
    equivalently the full residual plus atom k's own contribution.
    """
    Y = np.asarray(Y, dtype=np.complex128)
    E = np.empty_like(Y)
    blocks = D.blocks()
    for t in range(Y.shape[1]):
        code, ph = codes[t], phases[t]
        col = Y[:, t].copy()
        for j in code.support:
            if j == k:
                continue
            col -= code.gains[j] * (ph.column(j)[:, None] * blocks[:, :, j]).ravel()
        E[:, t] = col
    return E


def _restricted_objective(A_rot, d, x):
    return float(np.linalg.norm(A_rot - np.outer(d, x)))


def update_atom(E_k, support_frames, d_k, x_row, phase_rows, cfg, channels):
    """Rank-1 update of one atom over the frames that use it.

    E_k is (M*F, T); support_frames lists the frames with nonzero
    activation; phase_rows is (F, len(support_frames)).  Alternates the
    dominant-SVD step (phases frozen) with closed-form per-(f, t) phase
    updates until the restricted objective stalls.  The nonzero support is
    preserved exactly.

    Returns (d_k', x_values', phase_rows'); x_values' are the nonnegative
    gains for the support frames only.
    """
    if len(support_frames) == 0:
        raise ValueError("empty support")
    A0 = np.asarray(E_k)[:, support_frames]
    if np.linalg.norm(A0) == 0:
        raise ValueError("restricted residual is zero")
    F = phase_rows.shape[0]
    M = channels
    Tk = len(support_frames)
    phase_rows = phase_rows.copy()
    phase_opt = cfg.pursuit.phase_optimization

    d = d_k.copy()
    x = np.abs(np.asarray(x_row, dtype=float))
    prev_obj = None
    for _ in range(cfg.max_atom_iters):
        # (a) phases frozen: conjugate-rotate columns, take the top triple
        A_rot = (A0.reshape(F, M, Tk) * phase_rows.conj()[:, None, :]).reshape(F * M, Tk)
        try:
            triple = dominant_singular_triple(A_rot, tol=1e-12, max_iter=10000)
        except PowerIterationError as err:
            triple = err.last_triple
        u, sigma, v = triple.left, triple.sigma, triple.right
        x_c = sigma * v.conj()  # column t of the rank-1 fit is u * x_c[t]

        # re-gauge the atom; rotations are absorbed into the phase rows
        if phase_opt:
            d, row_phases, _ = normalize_atom(u, channels)
            phase_rows = phase_rows * row_phases.conj()[:, None]
        else:
            d, g_phase, _ = normalize_atom_global(u)
            phase_rows = phase_rows * np.conj(g_phase)

        # fold complex frame gains to nonnegative reals
        x = np.abs(x_c)
        psi = np.where(x > 0, x_c / np.where(x > 0, x, 1.0), 1.0 + 0.0j)
        phase_rows = phase_rows * psi[None, :]

        # (b) closed-form per-(f, t) phase update on the support
        if phase_opt:
            Eb = A0.reshape(F, M, Tk)
            db = d.reshape(F, M)
            w = np.einsum("fm,fmt->ft", db.conj(), Eb) * x[None, :]
            absw = np.abs(w)
            phase_rows = np.where(absw > 0, w / np.where(absw > 0, absw, 1.0), phase_rows)

        A_rot = (A0.reshape(F, M, Tk) * phase_rows.conj()[:, None, :]).reshape(F * M, Tk)
        obj = _restricted_objective(A_rot, d, x)
        if not phase_opt:
            break
        if prev_obj is not None and abs(prev_obj - obj) < cfg.epsilon_atom * max(prev_obj, 1e-300):
            break
        prev_obj = obj
    return d, x, phase_rows


def po_ksvd(Y, channels, cfg, progress=None):
    """Train a phase-optimized dictionary from example frames.

    Y is an (M*F, T) complex frame matrix (use Spectrogram.frame_matrix()).
    Returns a TrainedModel whose objective_trace records the summed squared
    reconstruction error after each outer iteration.

    ``progress(iteration, objective, atoms_replaced)`` is called once per
    outer iteration when given; the same record is logged at INFO level.
    """
    Y = np.asarray(Y, dtype=np.complex128)
    mf, T = Y.shape
    K = cfg.num_atoms
    if T < K:
        raise ValueError("insufficient training data: T = %d < K = %d" % (T, K))
    phase_opt = cfg.pursuit.phase_optimization
    D = init_dictionary(Y, channels, K, cfg.seed, phase_opt)
    F = D.bins

    codes = [SparseCode(gains=np.zeros(K), support=[]) for _ in range(T)]
    phases = [PhaseMatrix(bins=F) for _ in range(T)]
    R = Y.copy()  # running residual, one column per frame

    def replacement_atom(frame):
        if phase_opt:
            return normalize_atom(Y[:, frame], channels)[0]
        return normalize_atom_global(Y[:, frame])[0]

    def coding_pass():
        for t, res in enumerate(po_omp_batch(Y, D, cfg.pursuit)):
            if cfg.external_inference and res.residual_norm > np.linalg.norm(R[:, t]):
                continue
            codes[t] = res.code
            phases[t] = res.phases
            R[:, t] = res.residual

    def update_pass():
        replaced = 0
        blocks = D.blocks()
        for k in range(K):
            frames_k = [t for t in range(T) if codes[t].gains[k] > 0]
            if not frames_k:
                worst = int(np.argmax(np.linalg.norm(R, axis=0)))
                if np.linalg.norm(Y[:, worst]) > 0:
                    D.atoms[:, k] = replacement_atom(worst)
                    blocks = D.blocks()
                    replaced += 1
                continue
            # E_k restricted = residual plus atom k's current contribution
            contrib = np.stack(
                [
                    codes[t].gains[k] * (phases[t].column(k)[:, None] * blocks[:, :, k]).ravel()
                    for t in frames_k
                ],
                axis=1,
            )
            E_sub = R[:, frames_k] + contrib
            if np.linalg.norm(E_sub) == 0:
                continue
            phase_rows = np.stack([phases[t].column(k) for t in frames_k], axis=1)
            x_old = np.array([codes[t].gains[k] for t in frames_k])
            d_new, x_new, phase_rows_new = update_atom(
                E_sub, list(range(len(frames_k))), D.atoms[:, k], x_old, phase_rows, cfg, channels
            )
            D.atoms[:, k] = d_new
            blocks = D.blocks()
            for i, t in enumerate(frames_k):
                codes[t].gains[k] = x_new[i]
                phases[t].columns[k] = phase_rows_new[:, i]
                R[:, t] = E_sub[:, i] - x_new[i] * (
                    phase_rows_new[:, i][:, None] * blocks[:, :, k]
                ).ravel()
        return replaced

    def dedupe_pass():
        """Replace one atom of each near-duplicate pair with the worst frame.

        The caller re-runs coding and updates afterwards and keeps the
        result only if the objective did not increase, so this cannot break
        the monotone trace.  Returns the number of atoms replaced.
        """
        blocks = D.blocks()
        G = np.abs(np.einsum("fmj,fmk->fjk", blocks.conj(), blocks)).sum(axis=0)
        np.fill_diagonal(G, 0.0)
        usage = np.array([sum(codes[t].gains[k] ** 2 for t in range(T)) for k in range(K)])
        frame_err = np.linalg.norm(R, axis=0)
        replaced = 0
        done = set()
        for j in range(K):
            for k in range(j + 1, K):
                if G[j, k] <= cfg.dedupe_coherence or j in done or k in done:
                    continue
                drop = k if usage[k] <= usage[j] else j
                worst = int(np.argmax(frame_err))
                if np.linalg.norm(Y[:, worst]) == 0:
                    continue
                blk = D.blocks()[:, :, drop]
                for t in range(T):
                    if codes[t].gains[drop] > 0:
                        R[:, t] += codes[t].gains[drop] * (
                            phases[t].column(drop)[:, None] * blk
                        ).ravel()
                        codes[t].gains[drop] = 0.0
                        codes[t].support.remove(drop)
                        phases[t].columns.pop(drop, None)
                D.atoms[:, drop] = replacement_atom(worst)
                frame_err = np.linalg.norm(R, axis=0)
                done.update((j, k))
                replaced += 1
        return replaced

    trace: list[float] = []
    for it in range(cfg.max_outer_iters):
        coding_pass()
        atoms_replaced = update_pass()
        objective = float(np.sum(np.abs(R) ** 2))

        if cfg.dedupe_coherence > 0 and objective > 0:
            blocks = D.blocks()
            G = np.abs(np.einsum("fmj,fmk->fjk", blocks.conj(), blocks)).sum(axis=0)
            np.fill_diagonal(G, 0.0)
            if G.max() > cfg.dedupe_coherence:
                saved = (
                    D.copy(),
                    [SparseCode(gains=c.gains.copy(), support=list(c.support)) for c in codes],
                    [p.copy() for p in phases],
                    R.copy(),
                )
                replaced = dedupe_pass()
                if replaced:
                    coding_pass()
                    atoms_replaced += update_pass() + replaced
                    retry = float(np.sum(np.abs(R) ** 2))
                    if retry <= objective:
                        objective = retry
                    else:
                        D, codes, phases, R[:] = saved[0], saved[1], saved[2], saved[3]

        trace.append(objective)
        log.info("iteration=%d objective=%.12e atoms_replaced=%d", it + 1, objective, atoms_replaced)
        if progress is not None:
            progress(it + 1, objective, atoms_replaced)
        if len(trace) > 1:
            prev = trace[-2]
            if prev == 0 or abs(prev - objective) < cfg.epsilon_outer * prev:
                break

    return TrainedModel(dictionary=D, codes=codes, phases=phases, objective_trace=trace)
