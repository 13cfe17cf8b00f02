"""Support-intersection and linear-independence extremality criteria."""

import numpy as np
import pytest

from pmx.extremality import (
    dariano_test,
    is_extremal,
    non_reachability_report,
    subspace_pair,
    support_intersection_dim,
    support_rank,
)
from pmx.hs_algebra import coefficient_tensor
from pmx.operator_core import tensor
from pmx.process_space import (
    ProcessMatrix,
    bipartite_qubit_layout,
    cj_of_unitary,
    memory_channel,
    quantum_switch,
    validate,
    w_ll,
    w_ocb,
)

BIP = bipartite_qubit_layout()

X = np.array([[0.0, 1.0], [1.0, 0.0]])


def identity_channel(direction="a_to_b", rho=None):
    rho = np.eye(2) / 2 if rho is None else rho
    return memory_channel(rho, cj_of_unitary(np.eye(2)), direction)


def random_local_unitary(rng, dims):
    blocks = []
    for d in dims:
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        q, r = np.linalg.qr(g)
        blocks.append(q * (np.diagonal(r) / np.abs(np.diagonal(r))))
    return tensor(*blocks)


class TestSubspacePair:
    def test_projectors_idempotent_and_symmetric(self):
        pair = subspace_pair(w_ocb())
        for p in (pair.p_t, pair.p_v):
            assert np.abs(p @ p - p).max() <= 1e-10
            assert np.abs(p - p.T).max() <= 1e-10

    def test_ranks_for_ocb_process(self):
        pair = subspace_pair(w_ocb())
        assert pair.dims == (64, 88)
        assert int(round(np.trace(pair.p_t))) == 64
        assert int(round(np.trace(pair.p_v))) == 88

    def test_valid_span_projector_is_term_mask(self):
        pair = subspace_pair(w_ocb())
        diag = np.diagonal(pair.p_v)
        assert set(np.round(diag, 12)) <= {0.0, 1.0}
        assert int(diag.sum()) == 88


class TestSupportIntersection:
    def test_ocb_process_dimension_one(self):
        assert support_intersection_dim(w_ocb()) == 1

    def test_ocb_process_is_rank_eight(self):
        assert support_rank(w_ocb()) == 8
        vals = np.linalg.eigvalsh(w_ocb().matrix)
        np.testing.assert_allclose(vals[:8], 0.0, atol=1e-9)
        np.testing.assert_allclose(vals[8:], 0.5, atol=1e-9)

    def test_maximally_mixed_full_valid_span(self):
        mixed = ProcessMatrix(BIP, np.eye(16) / 4)
        assert support_intersection_dim(mixed) == 88

    def test_switch_rank_one_forces_dimension_one(self):
        sw = quantum_switch()
        assert support_rank(sw) == 1
        assert support_intersection_dim(sw) == 1

    def test_rejects_invalid_process(self):
        with pytest.raises(ValueError, match="valid"):
            support_intersection_dim(w_ll())

    def test_invariant_under_local_unitaries(self):
        rng = np.random.default_rng(17)
        processes = [w_ocb(), ProcessMatrix(BIP, np.eye(16) / 4), identity_channel()]
        expected = [support_intersection_dim(w) for w in processes]
        for _ in range(5):
            u = random_local_unitary(rng, BIP.dims)
            for w, dim in zip(processes, expected):
                moved = ProcessMatrix(BIP, u @ w.matrix @ u.conj().T)
                assert validate(moved).valid
                assert support_intersection_dim(moved) == dim


class TestIsExtremal:
    def test_ocb_process_extremal_with_certificate(self):
        cert = is_extremal(w_ocb())
        assert bool(cert)
        assert cert.extremal
        assert cert.intersection_dim == 1
        assert cert.support_rank == 8

    def test_switch_extremal(self):
        assert is_extremal(quantum_switch()).extremal

    def test_two_way_channel_mixture_not_extremal(self):
        ab, ba = identity_channel("a_to_b"), identity_channel("b_to_a")
        mix = ProcessMatrix(BIP, (ab.matrix + ba.matrix) / 2)
        cert = is_extremal(mix)
        assert not cert
        assert cert.intersection_dim > 1
        # both decomposition members sit inside the intersection
        pair = subspace_pair(mix)
        for member in (ab, ba):
            v = coefficient_tensor(member.matrix, BIP).reshape(-1).real
            assert np.abs(pair.p_t @ v - v).max() <= 1e-9
            assert np.abs(pair.p_v @ v - v).max() <= 1e-9

    def test_mixed_input_identity_channel_not_extremal(self):
        cert = is_extremal(identity_channel())
        assert not cert.extremal
        assert cert.intersection_dim == 4

    def test_pure_input_unitary_channel_extremal(self):
        w = identity_channel(rho=np.diag([1.0, 0.0]))
        cert = is_extremal(w)
        assert cert.extremal
        assert cert.support_rank == 2


class TestDarianoTest:
    def test_rank_eight_witness_counts(self):
        cjm = (cj_of_unitary(np.eye(2)) + cj_of_unitary(X)) / 2
        w = memory_channel(np.eye(2) / 2, cjm)
        assert support_rank(w) == 8
        rep = dariano_test(w)
        assert rep.support_card == 64
        assert rep.order_card == 204 == 3 * 4 * 4 * 4 + 3 * 4
        assert rep.total == 268
        assert rep.space_dim == 256
        assert rep.total > rep.space_dim
        assert not rep.independent

    def test_identity_channel_counts_and_verdict(self):
        rep = dariano_test(identity_channel())
        assert rep.support_card == 16
        assert rep.order_card == 204
        assert rep.total == 220
        assert not rep.independent
        assert rep.rank < rep.total

    def test_pure_input_channel_independent(self):
        rep = dariano_test(identity_channel(rho=np.diag([1.0, 0.0])))
        assert rep.support_card == 4
        assert rep.total == 208
        assert rep.independent
        assert rep.rank == 208

    def test_agreement_with_intersection_criterion(self):
        cases = [
            identity_channel(),
            identity_channel(rho=np.diag([1.0, 0.0])),
            identity_channel(rho=np.diag([0.9, 0.1])),
        ]
        for w in cases:
            assert dariano_test(w).independent == is_extremal(w).extremal

    def test_b_to_a_direction(self):
        cjm = (cj_of_unitary(np.eye(2)) + cj_of_unitary(X)) / 2
        w = memory_channel(np.eye(2) / 2, cjm, "b_to_a")
        rep = dariano_test(w, "b_to_a")
        assert rep.total == 268
        assert not rep.independent

    def test_rejects_process_without_stated_order(self):
        with pytest.raises(ValueError, match="causally ordered"):
            dariano_test(w_ocb())
        with pytest.raises(ValueError, match="causally ordered"):
            dariano_test(identity_channel(), "b_to_a")

    def test_rejects_unknown_direction(self):
        with pytest.raises(ValueError, match="direction"):
            dariano_test(identity_channel(), "sideways")


class TestNonReachability:
    def test_report_chain(self):
        rep = non_reachability_report()
        assert rep.passed
        assert rep.rank == 8
        assert rep.extremal
        assert rep.intersection_dim == 1
        assert rep.space_dim == 256
        for branch in (rep.a_to_b, rep.b_to_a):
            assert branch.total == 268 > rep.space_dim
            assert not branch.independent
        assert "rank-8" in rep.verdict
