"""Generator-kernel computation against brute-force and hand oracles."""

import dataclasses
from functools import lru_cache

import numpy as np
import pytest
import scipy.linalg

from pmx.hs_algebra import (
    batch_coefficient_tensors,
    batch_from_coefficient_tensors,
    coefficient_tensor,
    from_coefficient_tensor,
    product_term,
)
from pmx.operator_core import SpaceLayout, max_norm
from pmx.process_space import (
    ProcessMatrix,
    allowed_mask,
    bipartite_qubit_layout,
    project_valid_matrix,
    quantum_switch,
    single_party_layout,
    switch_layout,
    validate,
    w_ll,
    w_ocb,
)
from pmx.rigidity import (
    build_constraints,
    generator_kernel,
    single_body_patterns,
    verify_rigidity,
)

BIP = bipartite_qubit_layout()

TRIPARTITE_ONE_SINK = SpaceLayout.build(
    [("A_I", 2), ("B_I", 2), ("C_I", 2), ("A_O", 2), ("B_O", 2)],
    [("A", ["A_I"], ["A_O"]), ("B", ["B_I"], ["B_O"]), ("C", ["C_I"], [])],
)


@lru_cache(maxsize=None)
def cached_system(layout):
    return build_constraints(layout)


@lru_cache(maxsize=None)
def cached_kernel(layout):
    return generator_kernel(cached_system(layout))


@pytest.fixture(scope="module")
def bip_system():
    return cached_system(BIP)


@pytest.fixture(scope="module")
def bip_kernel():
    return cached_kernel(BIP)


def random_hermitian(rng, d):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return g + g.conj().T


def random_valid_process(rng, layout):
    x = project_valid_matrix(random_hermitian(rng, layout.dim), layout)
    lo = float(np.linalg.eigvalsh(x)[0])
    x = x + (abs(lo) + 0.1) * np.eye(layout.dim)
    w = ProcessMatrix(layout, x * (layout.d_out / np.trace(x).real))
    assert validate(w).valid
    return w


def indicator_basis(patterns, layout):
    qdims = tuple(d * d for d in layout.dims)
    out = np.zeros((len(patterns), int(np.prod(qdims))))
    for k, pat in enumerate(patterns):
        out[k, np.ravel_multi_index(pat, qdims)] = 1.0
    return out


class TestConstraintSystem:
    def test_bipartite_term_partition(self, bip_system):
        assert len(bip_system.valid_terms) == 88
        assert len(bip_system.forbidden_terms) == 168
        assert bip_system.pair_count == 88 * 168 == 14784
        assert set(bip_system.valid_terms).isdisjoint(bip_system.forbidden_terms)
        assert len(bip_system.valid_terms) + len(bip_system.forbidden_terms) == 256

    def test_identity_term_rows_all_pruned(self, bip_system):
        ident = bip_system.valid_terms.index((0, 0, 0, 0))
        assert ident not in set(bip_system.pairs[:, 0])

    def test_stored_rows_match_direct_functional(self, bip_system):
        # Tr([H,T]F) = Tr(H [T,F]), anti-Hermitian commutator, so each
        # stored row equals 2^4 times the imaginary part of the
        # coefficient tensor of [T, F]
        rng = np.random.default_rng(3)
        rows = bip_system.rows
        for r in rng.choice(rows.shape[0], size=6, replace=False):
            t = product_term(bip_system.valid_terms[bip_system.pairs[r, 0]], BIP)
            f = product_term(bip_system.forbidden_terms[bip_system.pairs[r, 1]], BIP)
            direct = coefficient_tensor(t @ f - f @ t, BIP).reshape(-1)
            stored = rows[r].toarray().ravel()
            assert np.abs(direct.real).max() <= 1e-12
            np.testing.assert_allclose(stored, 16 * direct.imag, atol=1e-10)

    def test_row_for_nonzero_pair_is_commutator_functional(self, bip_system):
        # a hand-picked pair: T = x on A_I, F = z on A_I with x on A_O
        t_pat, f_pat = (1, 0, 0, 0), (3, 0, 1, 0)
        t_idx = bip_system.valid_terms.index(t_pat)
        f_idx = bip_system.forbidden_terms.index(f_pat)
        hit = np.flatnonzero(
            (bip_system.pairs[:, 0] == t_idx) & (bip_system.pairs[:, 1] == f_idx)
        )
        assert hit.size == 1
        row = bip_system.rows[int(hit[0])].toarray().ravel()
        # [x, z] = -2i y, so the functional pins the y on A_I, x on A_O term
        expect = np.zeros(256)
        expect[np.ravel_multi_index((2, 0, 1, 0), (4, 4, 4, 4))] = 1.0
        assert np.abs(row).max() > 0
        np.testing.assert_allclose(np.abs(row) / np.abs(row).max(), expect, atol=1e-12)

    def test_size_guard_rejects_switch_layout(self):
        with pytest.raises(ValueError, match="pattern"):
            build_constraints(switch_layout())


class TestGeneratorKernel:
    def test_bipartite_kernel_dimension(self, bip_kernel):
        assert bip_kernel.shape[0] == 12

    def test_kernel_rows_orthonormal_and_traceless(self, bip_kernel):
        np.testing.assert_allclose(
            bip_kernel @ bip_kernel.T, np.eye(12), atol=1e-12
        )
        assert np.abs(bip_kernel[:, 0]).max() == 0.0

    def test_single_body_x_on_a_input_in_kernel(self, bip_kernel):
        v = indicator_basis([(1, 0, 0, 0)], BIP)[0]
        resid = v - bip_kernel.T @ (bip_kernel @ v)
        assert np.linalg.norm(resid) <= 1e-9

    def test_two_body_zz_on_inputs_not_in_kernel(self, bip_kernel):
        v = indicator_basis([(3, 3, 0, 0)], BIP)[0]
        proj = bip_kernel.T @ (bip_kernel @ v)
        assert np.linalg.norm(proj) <= 1e-9

    def test_kernel_commutators_stay_in_allowed_span(self, bip_system, bip_kernel):
        qdims = tuple(d * d for d in BIP.dims)
        gone = ~allowed_mask(BIP)[None]
        terms = np.stack([product_term(p, BIP) for p in bip_system.valid_terms])
        for coeffs in bip_kernel:
            h = from_coefficient_tensor(coeffs.reshape(qdims), BIP.dims)
            comm = np.matmul(h, terms) - np.matmul(terms, h)
            c = batch_coefficient_tensors(comm, BIP)
            # P(comm) - comm is minus the forbidden part of the expansion
            resid = batch_from_coefficient_tensors(np.where(gone, c, 0.0), BIP)
            assert np.abs(resid).max() <= 1e-9

    def test_brute_force_svd_agrees(self, bip_system, bip_kernel):
        # independent route: stack Tr(H [T, F]) rows from dense commutators
        forb = np.stack(
            [product_term(p, BIP) for p in bip_system.forbidden_terms]
        )
        rows = []
        for t_pat in bip_system.valid_terms:
            t = product_term(t_pat, BIP)
            comm = np.matmul(t, forb) - np.matmul(forb, t)
            rows.append(batch_coefficient_tensors(comm, BIP).reshape(-1, 256).imag)
        stacked = np.vstack(rows)
        assert stacked.shape == (14784, 256)
        system = stacked[:, 1:]  # drop the identity coordinate
        assert system.shape[1] == 255
        _, svals, vt = np.linalg.svd(system, full_matrices=False)
        rank = int(np.sum(svals > 1e-9 * svals[0]))
        assert 255 - rank == 12
        brute = np.zeros((255 - rank, 256))
        brute[:, 1:] = vt[rank:]
        # mutual projection: same 12-dim subspace as generator_kernel
        resid1 = brute - brute @ bip_kernel.T @ bip_kernel
        resid2 = bip_kernel - bip_kernel @ brute.T @ brute
        assert np.linalg.norm(resid1, axis=1).max() <= 1e-8
        assert np.linalg.norm(resid2, axis=1).max() <= 1e-8

    def test_single_party_kernel_is_both_single_body_sets(self):
        layout = single_party_layout()
        kern = cached_kernel(layout)
        assert kern.shape[0] == 6
        sb = indicator_basis(single_body_patterns(layout), layout)
        assert sb.shape[0] == 6
        np.testing.assert_allclose(
            sb - sb @ kern.T @ kern, np.zeros_like(sb), atol=1e-9
        )

    def test_tripartite_one_sink_kernel_dimension(self):
        kern = cached_kernel(TRIPARTITE_ONE_SINK)
        assert kern.shape[0] == 15 == 3 * 5

    def test_trivial_factor_contributes_nothing(self):
        layout = SpaceLayout.build(
            [("A_I", 2), ("A_O", 1)], [("A", ["A_I"], ["A_O"])]
        )
        kern = generator_kernel(build_constraints(layout))
        assert kern.shape[0] == 3
        assert len(single_body_patterns(layout)) == 3

    def test_row_order_does_not_change_kernel(self, bip_system, bip_kernel):
        rng = np.random.default_rng(11)
        perm = rng.permutation(bip_system.rows.shape[0])
        shuffled = bip_system.rows[perm]
        other = dataclasses.replace(
            bip_system, rows=shuffled.tocsr(), pairs=bip_system.pairs[perm]
        )
        kern2 = generator_kernel(other)
        assert kern2.shape == bip_kernel.shape
        resid = bip_kernel - bip_kernel @ kern2.T @ kern2
        assert np.linalg.norm(resid, axis=1).max() <= 1e-9

    def test_rebuild_is_deterministic(self, bip_system):
        again = build_constraints(BIP)
        assert (again.rows != bip_system.rows).nnz == 0
        np.testing.assert_array_equal(again.pairs, bip_system.pairs)


class TestSoundnessAndCompleteness:
    def test_kernel_flow_preserves_validity_of_random_processes(self, bip_kernel):
        rng = np.random.default_rng(21)
        qdims = tuple(d * d for d in BIP.dims)
        for _ in range(20):
            w = random_valid_process(rng, BIP)
            coeffs = rng.standard_normal(12) @ bip_kernel
            h = from_coefficient_tensor(coeffs.reshape(qdims), BIP.dims)
            c = h @ w.matrix - w.matrix @ h
            assert max_norm(project_valid_matrix(c, BIP) - c) <= 1e-9
            u = scipy.linalg.expm(-0.7j * h / max(1.0, max_norm(h)))
            moved = ProcessMatrix(BIP, u @ w.matrix @ u.conj().T)
            assert validate(moved).valid

    @pytest.mark.parametrize(
        "layout", [BIP, single_party_layout(), TRIPARTITE_ONE_SINK],
        ids=["bipartite", "single-party", "tripartite-one-sink"],
    )
    def test_kernel_dim_is_three_per_qubit_factor(self, layout):
        kern = cached_kernel(layout)
        expect = 3 * sum(1 for d in layout.dims if d == 2)
        assert kern.shape[0] == expect


class TestVerifyRigidity:
    def test_bipartite_report_passes(self):
        rep = verify_rigidity(BIP)
        assert rep.passed
        assert rep.spans_match
        assert rep.kernel_dim == rep.single_body_dim == 12
        assert rep.kernel_in_span_residual <= 1e-8
        assert rep.span_in_kernel_residual <= 1e-8
        assert rep.conjugation_ok

    def test_single_party_report_passes(self):
        rep = verify_rigidity(single_party_layout())
        assert rep.passed
        assert rep.kernel_dim == 6

    def test_tripartite_report_passes(self):
        rep = verify_rigidity(TRIPARTITE_ONE_SINK)
        assert rep.passed
        assert rep.kernel_dim == 15


class TestConjugationVerdicts:
    def test_single_body_flow_keeps_switch_valid(self):
        layout = switch_layout()
        rng = np.random.default_rng(5)
        sw = quantum_switch()
        h = np.zeros((layout.dim, layout.dim), dtype=complex)
        for pat in [(1, 0, 0, 0, 0, 0), (0, 0, 3, 0, 0, 0), (0, 0, 0, 0, 0, 2)]:
            h = h + rng.standard_normal() * product_term(pat, layout)
        for lam in (0.3, 1.0):
            u = scipy.linalg.expm(-1j * lam * h)
            moved = ProcessMatrix(layout, u @ sw.matrix @ u.conj().T)
            assert validate(moved).valid

    def test_single_body_flow_keeps_loop_invalid(self):
        layout = w_ll().layout
        h = product_term((2, 0), layout) + 0.5 * product_term((0, 1), layout)
        for lam in (0.3, 1.0):
            u = scipy.linalg.expm(-1j * lam * h)
            moved = ProcessMatrix(layout, u @ w_ll().matrix @ u.conj().T)
            report = validate(moved)
            assert not report.valid
            assert not report.condition("subspace").passed

    def test_ocb_process_verdict_stable_under_kernel_flow(self):
        kern = cached_kernel(BIP)
        qdims = tuple(d * d for d in BIP.dims)
        rng = np.random.default_rng(9)
        for _ in range(5):
            coeffs = rng.standard_normal(12) @ kern
            h = from_coefficient_tensor(coeffs.reshape(qdims), BIP.dims)
            for lam in (0.3, 1.0):
                u = scipy.linalg.expm(-1j * lam * h)
                moved = ProcessMatrix(BIP, u @ w_ocb().matrix @ u.conj().T)
                assert validate(moved).valid
