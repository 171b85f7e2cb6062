"""Greedy phase-optimized sparse coding of one frame (PO-OMP).

Each outer step selects the atom whose per-bin phase-rotated copy best
matches the residual, then alternately refines all gains (least squares on
the phase-corrected sub-dictionary) and all phase columns (closed-form
per-bin updates, accepted only when they do not increase the residual).

With ``phase_optimization`` off the same loop degenerates to classic OMP:
phase columns are constant across bins and only absorb the complex phase
of the least-squares gains, which on real data reduces to a sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import diagnostics, least_squares_solve
from .model import CodingResult, PhaseMatrix, SparseCode


@dataclass
class PursuitConfig:
    s_max: int = 3
    tau: float = 1e-4  # absolute residual-norm stop
    epsilon: float = 1e-3  # relative residual-change stop for refinement
    max_refine_iters: int = 100
    phase_optimization: bool = True
    selection_rule: str = "derived"  # "derived" or "literal"

    def __post_init__(self):
        if self.s_max < 1:
            raise ValueError("s_max must be >= 1")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")
        if not (0 < self.epsilon < 1):
            raise ValueError("epsilon must lie in (0, 1)")
        if self.selection_rule not in ("derived", "literal"):
            raise ValueError("selection_rule must be 'derived' or 'literal'")


def _bin_correlations(residual, D):
    """b_{fk} = <r_f | d_{fk}> = d_{fk}^H r_f, shape (F, K)."""
    R = residual.reshape(D.bins, D.channels)
    return np.einsum("fmk,fm->fk", D.blocks().conj(), R)


def select_best_atom(residual, D, excluded=frozenset(), cfg=None):
    """Pick the atom best matching the residual under optimal per-bin phases.

    Returns (k, gain, phase_column).  The derived score sum_f |b_{fk}| is
    both the selection criterion and the optimal single-atom gain for
    unit-norm atoms; the literal alternative |sum_f b/|b|| is available via
    ``cfg.selection_rule``.  A zero best score means the residual is
    orthogonal to every candidate; the caller treats gain 0 as a stop.
    """
    cfg = cfg or PursuitConfig()
    B = _bin_correlations(residual, D)
    K = D.num_atoms
    if not cfg.phase_optimization:
        # classic OMP: full-vector correlation, constant phase column
        b = D.atoms.conj().T @ residual
        scores = np.abs(b)
    elif cfg.selection_rule == "literal":
        absB = np.abs(B)
        U = np.where(absB > 0, B / np.where(absB > 0, absB, 1.0), 0.0)
        scores = np.abs(U.sum(axis=0))
    else:
        scores = np.abs(B).sum(axis=0)

    mask = np.zeros(K, dtype=bool)
    for k in excluded:
        mask[k] = True
    if mask.all():
        raise ValueError("no candidate atoms left")
    scores = np.where(mask, -1.0, scores)
    k = int(np.argmax(scores))  # argmax breaks ties by lowest index
    gain = float(max(scores[k], 0.0))

    if not cfg.phase_optimization:
        bk = b[k]
        phi = bk / np.abs(bk) if bk != 0 else 1.0 + 0.0j
        column = np.full(D.bins, phi, dtype=np.complex128)
    else:
        col = B[:, k]
        absc = np.abs(col)
        column = np.where(absc > 0, col / np.where(absc > 0, absc, 1.0), 1.0 + 0.0j)
        column = column.astype(np.complex128)
    return k, gain, column


def refine_support(y, D, support, columns, cfg):
    """Alternating gain / phase refinement over a fixed support.

    columns is a list of length-F phase columns, one per support atom, in
    support order.  Returns (gains, columns, residual); ||r||_2 is
    non-increasing across every alternation step.
    """
    if not support:
        raise ValueError("empty support")
    F, M = D.bins, D.channels
    s = len(support)
    ab = D.blocks()[:, :, support]  # (F, M, s)
    bin_sq = np.einsum("fms,fms->fs", ab.conj(), ab).real  # per-bin block norms
    cols = np.stack(columns, axis=1).astype(np.complex128)  # (F, s)
    gains = np.zeros(s)
    r = y.copy()
    norm_y = float(np.linalg.norm(y))
    accept_slack = 1e-15 * norm_y**2
    prev_norm = None
    for sweep in range(cfg.max_refine_iters):
        # (a) gains on the phase-corrected sub-dictionary; folding the
        # complex solution into the phase columns leaves sub @ z invariant
        sub = (cols[:, None, :] * ab).reshape(F * M, s)
        z = least_squares_solve(sub, y)
        gains = np.abs(z)
        u = np.where(gains > 0, z / np.where(gains > 0, gains, 1.0), 1.0 + 0.0j)
        cols = cols * u[None, :]
        r = y - sub @ z
        R = r.reshape(F, M)

        if cfg.phase_optimization:
            for j in range(s):
                if gains[j] == 0:
                    continue
                dk = ab[:, :, j]  # (F, M)
                b = np.einsum("fm,fm->f", dk.conj(), R)
                # exact per-bin minimizer: the ||d_f||^2 weight matters
                # whenever the bin blocks are not unit-norm
                z_f = b + cols[:, j] * gains[j] * bin_sq[:, j]
                absz = np.abs(z_f)
                phi_new = np.where(absz > 0, z_f / np.where(absz > 0, absz, 1.0), cols[:, j])
                delta = gains[j] * (cols[:, j] - phi_new)  # residual shift per bin
                R_new = R + delta[:, None] * dk
                # guard: a bin's new phase is kept only if it does not
                # increase the residual
                accept = (
                    np.einsum("fm,fm->f", R_new, R_new.conj()).real
                    <= np.einsum("fm,fm->f", R, R.conj()).real + accept_slack
                )
                R[accept] = R_new[accept]
                cols[:, j] = np.where(accept, phi_new, cols[:, j])
            r = R.ravel()

        norm = float(np.linalg.norm(r))
        if norm <= max(cfg.tau, 1e-14 * norm_y):
            break
        if prev_norm is not None:
            if prev_norm == 0 or abs(prev_norm - norm) < cfg.epsilon * prev_norm:
                break
        prev_norm = norm
    else:
        diagnostics.refine_cap_hits += 1
    return gains, [cols[:, j].copy() for j in range(s)], r


def _batch_scores(R3, blocks, atoms, cfg):
    """Selection scores for a batch of residuals; R3 is (F, M, T)."""
    if not cfg.phase_optimization:
        b_full = atoms.conj().T @ R3.reshape(-1, R3.shape[2])  # (K, T)
        return np.abs(b_full), b_full
    B = np.einsum("fmk,fmt->fkt", blocks.conj(), R3)  # (F, K, T)
    if cfg.selection_rule == "literal":
        absB = np.abs(B)
        U = np.where(absB > 0, B / np.where(absB > 0, absB, 1.0), 0.0)
        return np.abs(U.sum(axis=0)), B
    return np.abs(B).sum(axis=0), B


def _batch_refine(Y, blocks, supp, cols, cfg, work):
    """Lockstep gain/phase alternation for the frames flagged in ``work``.

    Y (MF, T), supp (s, T), cols (F, s, T).  Operates in place on copies
    and returns (gains (T, s), cols, R (MF, T)); frames outside ``work``
    are left untouched (their returned entries are zeros / inputs).
    """
    F, M, _ = blocks.shape
    s, T = supp.shape
    gains = np.zeros((T, s))
    R = Y.copy()
    cols = cols.copy()
    norms_y = np.linalg.norm(Y, axis=0)
    active = work.copy()
    idx_all = np.arange(T)
    prev_norm = np.full(T, -1.0)
    for sweep in range(cfg.max_refine_iters):
        idx = idx_all[active]
        if idx.size == 0:
            break
        Yw = Y[:, idx]
        sw = supp[:, idx]  # (s, Tw)
        cw = cols[:, :, idx]  # (F, s, Tw)
        bg = blocks[:, :, sw]  # (F, M, s, Tw)
        bin_sq = np.einsum("fmst,fmst->fst", bg.conj(), bg).real  # (F, s, Tw)

        # (a) batched least squares on the phase-corrected sub-dictionaries
        sub = (cw[:, None, :, :] * bg).reshape(F * M, s, idx.size)
        G = np.einsum("ait,ajt->tij", sub.conj(), sub)
        rhs = np.einsum("ait,at->ti", sub.conj(), Yw)
        try:
            z = np.linalg.solve(G, rhs[..., None])[..., 0]  # (Tw, s)
        except np.linalg.LinAlgError:
            z = np.stack([least_squares_solve(sub[:, :, t], Yw[:, t]) for t in range(idx.size)])
        g = np.abs(z)
        u = np.where(g > 0, z / np.where(g > 0, g, 1.0), 1.0 + 0.0j)
        cw = cw * u.T[None, :, :]
        Rw = Yw - np.einsum("ast,ts->at", sub, z)

        if cfg.phase_optimization:
            R3 = Rw.reshape(F, M, idx.size)
            slack = 1e-15 * norms_y[idx] ** 2
            for j in range(s):
                dk = bg[:, :, j, :]  # (F, M, Tw)
                b = np.einsum("fmt,fmt->ft", dk.conj(), R3)
                z_f = b + cw[:, j, :] * g[None, :, j] * bin_sq[:, j, :]
                absz = np.abs(z_f)
                phi_new = np.where(absz > 0, z_f / np.where(absz > 0, absz, 1.0), cw[:, j, :])
                delta = (cw[:, j, :] - phi_new) * g[None, :, j]
                R_new = R3 + delta[:, None, :] * dk
                accept = (
                    np.einsum("fmt,fmt->ft", R_new, R_new.conj()).real
                    <= np.einsum("fmt,fmt->ft", R3, R3.conj()).real + slack[None, :]
                ) & (g[None, :, j] > 0)
                R3 = np.where(accept[:, None, :], R_new, R3)
                cw[:, j, :] = np.where(accept, phi_new, cw[:, j, :])
            Rw = R3.reshape(F * M, idx.size)

        gains[idx, :] = g
        cols[:, :, idx] = cw
        R[:, idx] = Rw

        norm = np.linalg.norm(Rw, axis=0)
        done = norm <= np.maximum(cfg.tau, 1e-14 * norms_y[idx])
        pv = prev_norm[idx]
        done |= (pv >= 0) & ((pv == 0) | (np.abs(pv - norm) < cfg.epsilon * np.where(pv > 0, pv, 1.0)))
        prev_norm[idx] = norm
        still = active[idx]
        still[done] = False
        active[idx] = still
    else:
        diagnostics.refine_cap_hits += int(active.sum())
    return gains, cols, R


def po_omp_batch(Y, D, cfg=None):
    """PO-OMP over many frames in lockstep; returns one CodingResult per
    column of Y.  Identical in outcome to running po_omp frame by frame,
    but the selection, least-squares and phase sweeps are batched."""
    cfg = cfg or PursuitConfig()
    Y = np.asarray(Y, dtype=np.complex128)
    mf = D.channels * D.bins
    if Y.ndim != 2 or Y.shape[0] != mf:
        raise ValueError("frame matrix must be (M*F, T) with M*F = %d" % mf)
    F, M = D.bins, D.channels
    T = Y.shape[1]
    blocks = D.blocks()
    K = D.num_atoms

    supp = np.zeros((0, T), dtype=int)
    cols = np.zeros((F, 0, T), dtype=np.complex128)
    gains = np.zeros((T, 0))
    R = Y.copy()
    norms = np.linalg.norm(R, axis=0)
    supp_len = np.zeros(T, dtype=int)
    greedy = np.ones(T, dtype=bool)

    for i in range(cfg.s_max):
        active = greedy & (norms > cfg.tau)
        if not active.any():
            break
        scores, B = _batch_scores(R.reshape(F, M, T), blocks, D.atoms, cfg)
        for l in range(i):
            scores[supp[l], np.arange(T)] = -1.0
        k_sel = np.argmax(scores, axis=0)
        g_sel = scores[k_sel, np.arange(T)]
        grow = active & (g_sel > 0)
        greedy &= grow  # zero best score ends that frame's pursuit
        if not grow.any():
            break

        if cfg.phase_optimization:
            colB = B[:, k_sel, np.arange(T)]  # (F, T)
            absc = np.abs(colB)
            new_col = np.where(absc > 0, colB / np.where(absc > 0, absc, 1.0), 1.0 + 0.0j)
        else:
            bk = B[k_sel, np.arange(T)]
            phi = np.where(np.abs(bk) > 0, bk / np.where(np.abs(bk) > 0, np.abs(bk), 1.0), 1.0 + 0.0j)
            new_col = np.broadcast_to(phi[None, :], (F, T)).copy()

        supp = np.vstack([supp, k_sel[None, :]])
        cols = np.concatenate([cols, new_col[:, None, :]], axis=1)
        supp_len[grow] = i + 1

        new_gains, new_cols, new_R = _batch_refine(Y, blocks, supp, cols, cfg, grow)
        gains = np.concatenate([gains, np.zeros((T, 1))], axis=1)
        gains[grow] = new_gains[grow]
        cols[:, :, grow] = new_cols[:, :, grow]
        R[:, grow] = new_R[:, grow]
        norms = np.linalg.norm(R, axis=0)

    results = []
    for t in range(T):
        n = supp_len[t]
        support = [int(supp[l, t]) for l in range(n)]
        full = np.zeros(K)
        phase = PhaseMatrix(bins=F)
        for l, k in enumerate(support):
            full[k] = gains[t, l]
            phase.columns[k] = cols[:, l, t].copy()
        code = SparseCode(gains=full, support=support)
        results.append(
            CodingResult(
                code=code,
                phases=phase,
                residual=R[:, t].copy(),
                residual_norm=float(np.linalg.norm(R[:, t])),
            )
        )
    return results


def po_omp(y, D, cfg=None):
    """Phase-optimized orthogonal matching pursuit for one frame.

    Greedy loop: select the best remaining atom on the current residual,
    append it, refine all gains and phases; stop at s_max atoms, when
    ||r||_2 <= tau, or when the residual is orthogonal to every atom.
    """
    cfg = cfg or PursuitConfig()
    y = np.asarray(y, dtype=np.complex128)
    if y.shape != (D.channels * D.bins,):
        raise ValueError(
            "frame length %d does not match dictionary M*F = %d"
            % (y.size, D.channels * D.bins)
        )
    return po_omp_batch(y[:, None], D, cfg)[0]
