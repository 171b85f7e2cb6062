"""Core model types: dictionary of multichannel atoms, per-frame phase
corrections and sparse activations, plus the phase-corrected synthesis.

An atom of length M*F decomposes into F per-bin channel blocks d_f of
length M.  The stored gauge makes every atom unit-norm with a real
nonnegative first-channel entry in each bin; phases and activations absorb
the rotations, leaving every reconstruction unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ATOM_NORM_TOL = 1e-10


@dataclass
class Dictionary:
    """K unit-norm complex atoms over M channels and F bins.

    atoms has shape (M*F, K); row f*M + m is channel m of bin f.
    """

    channels: int
    bins: int
    atoms: np.ndarray

    @property
    def num_atoms(self):
        return self.atoms.shape[1]

    def blocks(self):
        """Atoms reshaped to (F, M, K) per-bin channel blocks."""
        return self.atoms.reshape(self.bins, self.channels, self.num_atoms)

    def validate(self, tol=ATOM_NORM_TOL):
        norms = np.linalg.norm(self.atoms, axis=0)
        if not np.allclose(norms, 1.0, atol=tol):
            raise ValueError("dictionary atoms are not unit-norm")

    def copy(self):
        return Dictionary(self.channels, self.bins, self.atoms.copy())


@dataclass
class PhaseMatrix:
    """Per-frame unit-modulus phase corrections, defined only on the support.

    Stored as a mapping from atom index to its length-F phase column.
    """

    bins: int
    columns: dict[int, np.ndarray] = field(default_factory=dict)

    def column(self, k):
        try:
            return self.columns[k]
        except KeyError:
            raise ValueError("no phase column for atom %d (off support)" % k)

    def copy(self):
        return PhaseMatrix(self.bins, {k: c.copy() for k, c in self.columns.items()})


@dataclass
class SparseCode:
    """Nonnegative activation vector with an ordered support list."""

    gains: np.ndarray  # length K, zeros off support
    support: list[int] = field(default_factory=list)

    def copy(self):
        return SparseCode(self.gains.copy(), list(self.support))


@dataclass
class CodingResult:
    """Output bundle of one frame's pursuit."""

    code: SparseCode
    phases: PhaseMatrix
    residual: np.ndarray
    residual_norm: float


def apply_phased_dictionary(D, phases, code):
    """Reconstruct sum_k x_k * [phi_{1k} d_{1k}; ...; phi_{Fk} d_{Fk}].

    Only support atoms contribute; a missing phase column on the support is
    a contract violation.
    """
    out = np.zeros(D.channels * D.bins, dtype=np.complex128)
    blocks = D.blocks()
    for k in code.support:
        x = code.gains[k]
        col = phases.column(k)
        out += x * (col[:, None] * blocks[:, :, k]).ravel()
    return out


def normalize_atom(atom, channels):
    """Normalize an atom to the storage gauge.

    Returns (atom', row_phases, gain) with atom' unit-norm, every bin's
    first-channel entry real >= 0, gain = ||atom||, and row_phases the
    applied per-bin rotations: atom'_f = row_phases[f] * atom_f / gain.
    Callers absorb conj(row_phases) into phase columns to keep products
    unchanged.

    Bins whose first-channel entry is zero are rotated to make the
    largest-magnitude channel real-positive; an all-zero bin gets rotation 1.
    """
    atom = np.asarray(atom, dtype=np.complex128)
    if atom.ndim != 1 or atom.size % channels != 0:
        raise ValueError("atom length must be a multiple of the channel count")
    gain = float(np.linalg.norm(atom))
    if gain == 0.0:
        raise ValueError("degenerate atom: zero norm")
    bins = atom.size // channels
    blocks = (atom / gain).reshape(bins, channels)
    row_phases = np.ones(bins, dtype=np.complex128)
    for f in range(bins):
        ref = blocks[f, 0]
        if ref == 0:
            m = int(np.argmax(np.abs(blocks[f])))
            ref = blocks[f, m]
            if ref == 0:
                continue
        row_phases[f] = np.abs(ref) / ref
    normalized = (row_phases[:, None] * blocks).ravel()
    return normalized, row_phases, gain


def normalize_atom_global(atom):
    """Normalize with a single global rotation (phase-blind baseline gauge).

    The largest-magnitude entry is made real-positive.  Returns
    (atom', phase, gain) with atom' = phase * atom / gain.
    """
    atom = np.asarray(atom, dtype=np.complex128)
    gain = float(np.linalg.norm(atom))
    if gain == 0.0:
        raise ValueError("degenerate atom: zero norm")
    unit = atom / gain
    ref = unit[int(np.argmax(np.abs(unit)))]
    phase = np.abs(ref) / ref if ref != 0 else 1.0 + 0.0j
    return phase * unit, complex(phase), gain
