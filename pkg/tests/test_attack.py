import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_attack, random_density
from pingpong_qkd.attack import (
    ANCILLA_DIM,
    ANCILLA_INDEX,
    ENCODINGS,
    ONE,
    QUTRIT,
    VAC,
    ZERO,
    AttackParams,
    EffectiveForwardStats,
    apply_encoding,
    effective_matrices,
    encoded_states,
    eve_entropy_oracle,
    forward_kraus,
    joint_state_after_forward,
    kraus_completeness_error,
    travel_marginal,
)
from pingpong_qkd.errors import DegenerateChannelError, InvalidParameterError
from pingpong_qkd.qmath import basis, binary_entropy, dag, projector, tensor


def anc(branch, sym):
    return basis(ANCILLA_DIM, ANCILLA_INDEX[branch, sym])


def ket(sym):
    return basis(QUTRIT, sym)


class TestAttackParams:
    def test_row_sum_checked(self):
        with pytest.raises(InvalidParameterError, match="row 0"):
            AttackParams(0.5, 0.5, 0.1, 0.0, 0.0, 1.0)
        with pytest.raises(InvalidParameterError, match="row 1"):
            AttackParams(0.0, 1.0, 0.0, 0.2, 0.0, 1.0)

    def test_probability_range(self):
        with pytest.raises(InvalidParameterError, match="p01"):
            AttackParams(0.5, 0.7, -0.2, 0.0, 0.0, 1.0)

    def test_json_round_trip(self, rng):
        p = random_attack(rng)
        d = p.to_dict()
        assert list(d) == ["p0v", "p00", "p01", "p1v", "p10", "p11"]
        assert AttackParams.from_dict(d) == p

    def test_missing_key(self):
        with pytest.raises(InvalidParameterError, match="p11"):
            AttackParams.from_dict({"p0v": 0, "p00": 1, "p01": 0, "p1v": 0, "p10": 0})

    def test_effective_stats(self, rng):
        for _ in range(50):
            p = random_attack(rng, min_eta=0.01)
            s = EffectiveForwardStats.from_params(p)
            assert abs(s.p00_prime + s.p01_prime - 1) <= 1e-10
            assert abs(s.p10_prime + s.p11_prime - 1) <= 1e-10
            assert abs(s.p00_prime * s.eta_fwd - p.p00) <= 1e-10
            assert abs(s.p01_prime * s.eta_fwd - p.p01) <= 1e-10
            assert abs(s.p10_prime * s.eta_fwd_1 - p.p10) <= 1e-10

    def test_effective_stats_dead_branch(self):
        s = EffectiveForwardStats.from_params(AttackParams(1.0, 0.0, 0.0, 0.0, 0.0, 1.0))
        assert s.p01_prime is None
        with pytest.raises(DegenerateChannelError):
            s.flip_prime(0)
        assert s.flip_prime(1) == 0.0


class TestEncodings:
    def test_labels_and_bits(self):
        assert {k: v.key_bit for k, v in ENCODINGS.items()} == {"I0": 0, "I1": 0, "Y0": 1, "Y1": 1}

    @pytest.mark.parametrize("label", list(ENCODINGS))
    def test_unitary_diagonal_vacuum_fixed(self, label):
        m = ENCODINGS[label].matrix
        np.testing.assert_array_equal(m @ dag(m), np.eye(3))
        np.testing.assert_array_equal(m, np.diag(np.diag(m)))
        assert m[0, 0] == 1

    def test_commute(self):
        for a, b in itertools.combinations(ENCODINGS.values(), 2):
            np.testing.assert_array_equal(a.matrix @ b.matrix, b.matrix @ a.matrix)

    def test_same_bit_pairs_differ_by_sign_on_qubit(self):
        q = slice(1, 3)
        np.testing.assert_array_equal(ENCODINGS["I1"].matrix[q, q], -ENCODINGS["I0"].matrix[q, q])
        np.testing.assert_array_equal(ENCODINGS["Y1"].matrix[q, q], -ENCODINGS["Y0"].matrix[q, q])

    def test_phase_randomization(self, rng):
        for _ in range(20):
            rho = random_density(rng, 3)
            for a, b in (("I0", "I1"), ("Y0", "Y1")):
                ua, ub = ENCODINGS[a].matrix, ENCODINGS[b].matrix
                avg = 0.5 * (ua @ rho @ dag(ua) + ub @ rho @ dag(ub))
                assert np.max(np.abs(avg[0, 1:])) <= 1e-12
                assert np.max(np.abs(avg[1:, 0])) <= 1e-12


class TestForwardKraus:
    def test_identity_attack(self):
        ops = forward_kraus(AttackParams.identity())
        nonzero = [k for k in ops if np.any(k)]
        assert len(nonzero) == 2
        np.testing.assert_array_equal(nonzero[0], np.outer(ket(ZERO), basis(2, 0)))
        np.testing.assert_array_equal(nonzero[1], np.outer(ket(ONE), basis(2, 1)))

    @pytest.mark.parametrize("ancilla", ["orthonormal", "coherent"])
    def test_pure_loss_outputs_vacuum(self, ancilla, rng):
        ops = forward_kraus(AttackParams.pure_loss(), ancilla)
        rho = random_density(rng, 2)
        out = sum(k @ rho @ dag(k) for k in ops)
        np.testing.assert_allclose(out, projector(ket(VAC)), atol=1e-15)

    @pytest.mark.parametrize("ancilla", ["orthonormal", "coherent"])
    def test_completeness(self, ancilla, rng):
        for _ in range(100):
            ops = forward_kraus(random_attack(rng), ancilla)
            assert kraus_completeness_error(ops) <= 1e-12

    def test_coherent_identity_preserves_coherence(self):
        ops = forward_kraus(AttackParams.identity(), "coherent")
        rho = projector(np.array([1, 1]) / np.sqrt(2))
        out = sum(k @ rho @ dag(k) for k in ops)
        assert out[1, 2] == pytest.approx(0.5)

    def test_unknown_geometry(self):
        with pytest.raises(InvalidParameterError):
            forward_kraus(AttackParams.identity(), "weird")

    def test_invalid_params_rejected(self):
        with pytest.raises(InvalidParameterError):
            forward_kraus(AttackParams(0.2, 0.2, 0.2, 0.0, 0.0, 1.0))


class TestJointState:
    def test_identity_attack(self):
        rho = joint_state_after_forward(AttackParams.identity())
        expected = 0.5 * tensor(projector(ket(ZERO)), projector(anc(0, ZERO))) + 0.5 * tensor(
            projector(ket(ONE)), projector(anc(1, ONE))
        )
        np.testing.assert_allclose(rho.matrix, expected, atol=1e-15)
        assert rho.factor_dims == (3, 6)

    def test_unit_trace_and_marginal(self, rng):
        for _ in range(50):
            p = random_attack(rng)
            rho = joint_state_after_forward(p)
            assert abs(np.trace(rho.matrix) - 1) <= 1e-10
            diag = np.diag(travel_marginal(p).matrix).real
            expected = [(p.p0v + p.p1v) / 2, (p.p00 + p.p10) / 2, (p.p01 + p.p11) / 2]
            np.testing.assert_allclose(diag, expected, atol=1e-12)


class TestEncodedStates:
    def test_identity_branch0_bit0(self):
        rho0, _ = encoded_states(AttackParams.identity(), 0)
        expected = tensor(projector(ket(ZERO)), projector(anc(0, ZERO)))
        np.testing.assert_allclose(rho0.matrix, expected, atol=1e-15)

    def test_normalized(self, rng):
        for _ in range(30):
            p = random_attack(rng)
            for b in (0, 1):
                for r in encoded_states(p, b):
                    assert abs(np.trace(r.matrix) - 1) <= 1e-10

    def test_matches_closed_form(self, rng):
        for _ in range(30):
            p = random_attack(rng)
            rho0, rho1 = encoded_states(p, 0)
            vac = p.p0v * projector(np.kron(ket(VAC), anc(0, VAC)))
            plus = np.sqrt(p.p00) * np.kron(ket(ZERO), anc(0, ZERO)) + np.sqrt(p.p01) * np.kron(ket(ONE), anc(0, ONE))
            minus = np.sqrt(p.p00) * np.kron(ket(ZERO), anc(0, ZERO)) - np.sqrt(p.p01) * np.kron(ket(ONE), anc(0, ONE))
            np.testing.assert_allclose(rho0.matrix, vac + projector(plus), atol=1e-12)
            np.testing.assert_allclose(rho1.matrix, vac + projector(minus), atol=1e-12)
            qubit = tensor(np.diag([0, 1, 1]), np.eye(ANCILLA_DIM))
            np.testing.assert_allclose(qubit @ rho0.matrix @ qubit, projector(plus), atol=1e-12)

    def test_no_vacuum_coherence(self, rng):
        p = random_attack(rng)
        vac = tensor(projector(ket(VAC)), np.eye(ANCILLA_DIM))
        qubit = np.eye(18) - vac
        for b in (0, 1):
            for r in encoded_states(p, b):
                assert np.max(np.abs(vac @ r.matrix @ qubit)) <= 1e-12


class TestEffectiveMatrices:
    def test_symmetric_flip(self):
        _, r0, r1, r = effective_matrices(AttackParams(0.2, 0.4, 0.4, 0.0, 0.0, 1.0), 0)
        np.testing.assert_allclose(r0, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)
        np.testing.assert_allclose(r, np.eye(2) / 2, atol=1e-15)

    def test_error_free(self):
        _, r0, r1, _ = effective_matrices(AttackParams(0.3, 0.7, 0.0, 0.0, 0.0, 1.0), 0)
        np.testing.assert_array_equal(r0, np.diag([1, 0]))
        np.testing.assert_array_equal(r1, np.diag([1, 0]))

    def test_dead_branch(self):
        with pytest.raises(DegenerateChannelError):
            effective_matrices(AttackParams.pure_loss(), 1)

    def test_matches_projected_encoded_states(self, rng):
        for _ in range(30):
            p = random_attack(rng, min_eta=0.05)
            for b in (0, 1):
                _, r0, r1, r = effective_matrices(p, b)
                assert np.max(np.abs(r - np.diag(np.diag(r)))) <= 1e-12
                e0, e1 = encoded_states(p, b)
                # coordinates of the two non-vacuum basis vectors in travel ⊗ ancilla
                cols = [np.kron(ket(ZERO), anc(b, ZERO)), np.kron(ket(ONE), anc(b, ONE))]
                v = np.array(cols).T
                eta = p.efficiency(b)
                for eff, full in ((r0, e0), (r1, e1)):
                    np.testing.assert_allclose(dag(v) @ full.matrix @ v / eta, eff, atol=1e-10)
                avg = dag(v) @ (0.5 * e0.matrix + 0.5 * e1.matrix) @ v / eta
                np.testing.assert_allclose(avg, r, atol=1e-10)


class TestEntropyOracle:
    def test_error_free_branch(self):
        assert eve_entropy_oracle(AttackParams(0.3, 0.7, 0.0, 0.1, 0.0, 0.9), 0) == pytest.approx(1.0, abs=1e-12)

    def test_fully_flipped(self):
        assert eve_entropy_oracle(AttackParams(0.0, 0.5, 0.5, 0.0, 0.0, 1.0), 0) == pytest.approx(0.0, abs=1e-12)

    def test_dead_branch(self):
        with pytest.raises(DegenerateChannelError):
            eve_entropy_oracle(AttackParams.pure_loss(), 0)

    def test_matches_closed_form(self, rng):
        for _ in range(100):
            p = random_attack(rng, min_eta=0.05)
            s = EffectiveForwardStats.from_params(p)
            for b in (0, 1):
                assert abs(eve_entropy_oracle(p, b) - (1 - binary_entropy(s.flip_prime(b)))) <= 1e-9

    @given(
        st.floats(0.01, 1.0), st.floats(0.0, 1.0), st.floats(0.01, 1.0), st.floats(0.0, 1.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_property(self, eta0, f0, eta1, f1):
        p = AttackParams(1 - eta0, eta0 * (1 - f0), eta0 * f0, 1 - eta1, eta1 * f1, eta1 * (1 - f1))
        s = EffectiveForwardStats.from_params(p)
        for b in (0, 1):
            assert abs(eve_entropy_oracle(p, b) - (1 - binary_entropy(s.flip_prime(b)))) <= 1e-9


def test_apply_encoding_acts_on_travel_only(rng):
    rho = random_density(rng, 18)
    u = tensor(ENCODINGS["Y0"].matrix, np.eye(ANCILLA_DIM))
    np.testing.assert_allclose(apply_encoding(rho, "Y0"), u @ rho @ dag(u), atol=1e-15)
