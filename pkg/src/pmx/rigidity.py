"""Which Hermitian generators keep every valid process inside the allowed span.

An infinitesimal conjugation ``W -> W - i lam [H, W]`` preserves validity for
all valid ``W`` exactly when ``[H, T]`` stays inside the allowed span for
every allowed term ``T``, i.e. when ``Tr([H, T] F) = 0`` for every pair of an
allowed term ``T`` and a forbidden term ``F``.  By cyclicity this functional
is ``Tr(H [T, F])``: each constraint row is the coefficient vector of one
commutator of basis terms.  Commutators of Hermitian terms are
anti-Hermitian, so the rows are purely imaginary and the system is real
after dividing out ``i``.

The kernel of the stacked system, restricted to traceless Hermitian
operators, is computed by singular value decomposition after pruning
identically zero rows and deduplicating parallel ones.  For qubit factors
every ``Tr(sigma_a sigma_b sigma_c)`` has a single compatible first index,
so each row touches exactly one coefficient and the deduplicated system
stays small; the code does not rely on that and handles wider rows too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .hs_algebra import build_su_basis, from_coefficient_tensor
from .operator_core import SpaceLayout
from .process_space import ProcessMatrix, allowed_mask, project_valid_matrix, validate

__all__ = [
    "MAX_CONSTRAINT_PATTERNS",
    "ConstraintSystem",
    "RigidityReport",
    "build_constraints",
    "generator_kernel",
    "single_body_patterns",
    "verify_rigidity",
]

# pattern-pair count grows with the square of the term count; this caps the
# build at five qubit-sized factors
MAX_CONSTRAINT_PATTERNS = 1024

_ROW_PRUNE_TOL = 1e-12


@dataclass(frozen=True)
class ConstraintSystem:
    """The linear system ``Tr(H [T, F]) = 0`` over traceless Hermitian H.

    ``rows`` stacks one real row per surviving (allowed, forbidden) pair in
    pattern-coefficient coordinates (identity pattern included as an always
    empty column); ``pairs[r]`` holds the indices of row ``r``'s terms into
    ``valid_terms`` and ``forbidden_terms``.  ``pair_count`` is the number
    of pairs before identically zero rows were dropped.
    """

    layout: SpaceLayout
    valid_terms: tuple[tuple[int, ...], ...]
    forbidden_terms: tuple[tuple[int, ...], ...]
    rows: scipy.sparse.csr_matrix
    pairs: np.ndarray
    pair_count: int


def _triple_trace_tensor(d: int) -> np.ndarray:
    s = build_su_basis(d).elements
    return np.einsum("aij,bjk,cki->abc", s, s, s)


def build_constraints(layout: SpaceLayout) -> ConstraintSystem:
    """Rows ``H -> Tr([H, T] F)`` for all allowed ``T``, forbidden ``F``.

    Zero rows are dropped; the surviving rows keep their pair bookkeeping.
    """
    qdims = tuple(d * d for d in layout.dims)
    total = math.prod(qdims)
    if total > MAX_CONSTRAINT_PATTERNS:
        raise ValueError(
            f"layout has {total} basis patterns, giving {total * total} "
            f"constraint pairs; build_constraints caps the pattern count at "
            f"{MAX_CONSTRAINT_PATTERNS}"
        )
    mask = allowed_mask(layout).reshape(-1)
    all_patterns = [
        tuple(int(v) for v in np.unravel_index(k, qdims)) for k in range(total)
    ]
    valid_idx = np.flatnonzero(mask)
    forb_idx = np.flatnonzero(~mask)
    valid_terms = tuple(all_patterns[k] for k in valid_idx)
    forbidden_terms = tuple(all_patterns[k] for k in forb_idx)
    triples = [_triple_trace_tensor(d) for d in layout.dims]

    fidx = np.unravel_index(forb_idx, qdims)
    n_forb = forb_idx.size
    blocks = []
    kept_pairs = []
    for t_pos, t_pat in enumerate(valid_terms if n_forb else ()):
        # row(F)[u] = prod_k Tr(s_u s_T s_F) - prod_k Tr(s_T s_u s_F),
        # accumulated factor by factor on the forbidden columns only
        left = np.ones((1, n_forb), dtype=complex)
        right = np.ones((1, n_forb), dtype=complex)
        for m, t, fk in zip(triples, t_pat, fidx):
            left = (left[:, None, :] * m[:, t, fk][None, :, :]).reshape(-1, n_forb)
            right = (right[:, None, :] * m[t][:, fk][None, :, :]).reshape(-1, n_forb)
        rows_t = (left - right).T.imag
        keep = np.abs(rows_t).max(axis=1) > _ROW_PRUNE_TOL
        if not keep.any():
            continue
        blocks.append(scipy.sparse.csr_matrix(rows_t[keep]))
        for f_pos in np.flatnonzero(keep):
            kept_pairs.append((t_pos, int(f_pos)))

    if blocks:
        rows = scipy.sparse.vstack(blocks, format="csr")
        pairs = np.array(kept_pairs, dtype=int)
    else:
        rows = scipy.sparse.csr_matrix((0, total))
        pairs = np.zeros((0, 2), dtype=int)
    return ConstraintSystem(
        layout,
        valid_terms,
        forbidden_terms,
        rows,
        pairs,
        len(valid_terms) * len(forbidden_terms),
    )


def _deduplicate_rows(rows: scipy.sparse.csr_matrix) -> np.ndarray:
    """Keep one representative per direction; parallel rows are redundant."""
    seen = {}
    for r in range(rows.shape[0]):
        start, stop = rows.indptr[r], rows.indptr[r + 1]
        cols = rows.indices[start:stop]
        data = rows.data[start:stop]
        lead = data[np.argmax(np.abs(data))]
        key = (tuple(cols), tuple(np.round(data / lead, 10)))
        if key not in seen:
            seen[key] = (cols, data / lead)
    out = np.zeros((len(seen), rows.shape[1]))
    for k, (cols, data) in enumerate(seen.values()):
        out[k, cols] = data
    return out


def generator_kernel(
    system: ConstraintSystem, threshold: float = 1e-9
) -> np.ndarray:
    """Orthonormal basis of traceless Hermitian generators killing all rows.

    Returns an array of shape ``(kernel_dim, total_patterns)`` of real
    coefficient vectors over the product-term basis (identity coefficient
    fixed at zero).  Singular values at or below ``threshold`` times the
    largest one count as zero.
    """
    qdims = tuple(d * d for d in system.layout.dims)
    total = math.prod(qdims)
    cols = np.arange(1, total)  # drop the identity pattern
    dense = _deduplicate_rows(system.rows)[:, cols]
    if dense.shape[0] == 0:
        basis = np.eye(total - 1)
    else:
        _, svals, vt = np.linalg.svd(dense, full_matrices=True)
        rank = int(np.sum(svals > threshold * svals[0]))
        basis = vt[rank:]
    out = np.zeros((basis.shape[0], total))
    out[:, cols] = basis
    return out


def single_body_patterns(layout: SpaceLayout) -> list[tuple[int, ...]]:
    """Patterns nontrivial on exactly one factor, in flat-index order."""
    qdims = tuple(d * d for d in layout.dims)
    out = []
    for k, q in enumerate(qdims):
        for a in range(1, q):
            pat = [0] * len(qdims)
            pat[k] = a
            out.append(tuple(pat))
    out.sort(key=lambda p: np.ravel_multi_index(p, qdims))
    return out


@dataclass(frozen=True)
class RigidityReport:
    """Outcome of comparing the generator kernel with the single-body span."""

    kernel_dim: int
    single_body_dim: int
    kernel_in_span_residual: float
    span_in_kernel_residual: float
    conjugation_ok: bool
    tolerance: float

    @property
    def spans_match(self) -> bool:
        return (
            self.kernel_dim == self.single_body_dim
            and self.kernel_in_span_residual <= self.tolerance
            and self.span_in_kernel_residual <= self.tolerance
        )

    @property
    def passed(self) -> bool:
        return self.spans_match and self.conjugation_ok


def _sample_valid(rng: np.random.Generator, layout: SpaceLayout) -> ProcessMatrix:
    g = rng.standard_normal((layout.dim,) * 2) + 1j * rng.standard_normal(
        (layout.dim,) * 2
    )
    x = project_valid_matrix(g + g.conj().T, layout)
    lo = float(np.linalg.eigvalsh(x)[0])
    x = x + (abs(lo) + 0.1) * np.eye(layout.dim)
    return ProcessMatrix(layout, x * (layout.d_out / np.trace(x).real))


def _reference_processes(layout: SpaceLayout) -> list[ProcessMatrix]:
    from .process_space import (
        bipartite_qubit_layout,
        cj_of_unitary,
        memory_channel,
        shared_state,
        w_ocb,
    )

    rng = np.random.default_rng(1905)
    out = [
        ProcessMatrix(layout, np.eye(layout.dim) * (layout.d_out / layout.dim))
    ]
    if layout == bipartite_qubit_layout():
        out += [
            w_ocb(),
            shared_state(np.eye(4) / 4),
            memory_channel(np.eye(2) / 2, cj_of_unitary(np.eye(2))),
        ]
    else:
        out += [_sample_valid(rng, layout) for _ in range(3)]
    return out


def verify_rigidity(
    layout: SpaceLayout, tol: float = 1e-8, samples: int = 5, seed: int = 7
) -> RigidityReport:
    """Check that the generator kernel is exactly the single-body span.

    Compares dimensions and mutual projection residuals, then spot-checks
    that conjugating reference valid processes by ``exp(-i lam H)`` for
    random kernel elements ``H`` keeps them valid at ``lam in {0.3, 1.0}``.
    """
    system = build_constraints(layout)
    kernel = generator_kernel(system)
    qdims = tuple(d * d for d in layout.dims)
    sb = single_body_patterns(layout)
    sb_basis = np.zeros((len(sb), math.prod(qdims)))
    for k, pat in enumerate(sb):
        sb_basis[k, np.ravel_multi_index(pat, qdims)] = 1.0

    def span_residual(vectors, basis):
        if vectors.shape[0] == 0:
            return 0.0
        proj = vectors @ basis.T @ basis
        return float(np.linalg.norm(vectors - proj, axis=1).max())

    rng = np.random.default_rng(seed)
    processes = _reference_processes(layout)
    conj_ok = True
    for _ in range(samples):
        if kernel.shape[0] == 0:
            break
        coeff = rng.standard_normal(kernel.shape[0])
        h_coeffs = (coeff / np.linalg.norm(coeff)) @ kernel
        h = from_coefficient_tensor(h_coeffs.reshape(qdims), layout.dims)
        for lam in (0.3, 1.0):
            u = scipy.linalg.expm(-1j * lam * h)
            for w in processes:
                moved = ProcessMatrix(layout, u @ w.matrix @ u.conj().T)
                if not validate(moved).valid:
                    conj_ok = False

    return RigidityReport(
        kernel_dim=kernel.shape[0],
        single_body_dim=len(sb),
        kernel_in_span_residual=span_residual(kernel, sb_basis),
        span_in_kernel_residual=span_residual(sb_basis, kernel),
        conjugation_ok=conj_ok,
        tolerance=tol,
    )
