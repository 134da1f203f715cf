"""Tests for the coupled norm descriptors, layouts and evaluators."""

import numpy as np
import pytest

from coupled_completion.norms import (
    InvalidDescriptorError,
    NormDescriptor,
    decomposition_value,
    dual_norm_latent_type,
    dual_norm_overlapped_upper,
    evaluate,
    evaluate_overlapped,
    format_descriptor,
    layout,
    parse_descriptor,
    validate,
)
from coupled_completion.prox import trace_norm
from coupled_completion.tensor_ops import concat_mode1, fold, unfold


def rank1_mode2_tensor(dims, seed=0):
    """Tensor whose mode-2 unfolding is rank one."""
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(dims[1])
    v = rng.standard_normal(dims[0] * dims[2])
    return fold(np.outer(u, v), 2, dims)


class TestValidate:
    @pytest.mark.parametrize(
        "tags",
        [
            ("O", "O", "O"),
            ("L", "L", "L"),
            ("S", "S", "S"),
            ("L", "O", "O"),
            ("O", "L", "O"),
            ("O", "O", "L"),
            ("S", "O", "O"),
            ("O", "S", "O"),
            ("O", "O", "S"),
        ],
    )
    def test_accepts_valid(self, tags):
        validate(NormDescriptor(1, tags))

    @pytest.mark.parametrize(
        "tags",
        [("L", "L", "O"), ("S", "S", "O"), ("L", "S", "O"), ("S", "L", "O")],
    )
    def test_rejects_two_latent_one_overlapped(self, tags):
        with pytest.raises(InvalidDescriptorError):
            validate(NormDescriptor(1, tags))

    def test_rejects_single_overlapped_mode(self):
        with pytest.raises(InvalidDescriptorError, match="at least two"):
            validate(NormDescriptor(1, ("O", "L", "L")))

    def test_rejects_two_dashes(self):
        with pytest.raises(InvalidDescriptorError):
            NormDescriptor(1, ("L", "-", "-"))
            validate(NormDescriptor(1, ("L", "-", "-")))

    def test_dash_patterns(self):
        validate(NormDescriptor(1, ("O", "O", "-")))
        validate(NormDescriptor(1, ("L", "S", "-")))
        with pytest.raises(InvalidDescriptorError):
            validate(NormDescriptor(1, ("O", "L", "-")))

    def test_coupled_mode_must_be_regularized(self):
        with pytest.raises(InvalidDescriptorError, match="coupled mode"):
            validate(NormDescriptor(3, ("O", "O", "-")))

    def test_bad_tags_rejected_at_construction(self):
        with pytest.raises(InvalidDescriptorError):
            NormDescriptor(1, ("O", "O", "X"))
        with pytest.raises(InvalidDescriptorError):
            NormDescriptor(4, ("O", "O", "O"))


class TestLayout:
    def test_all_overlapped(self):
        lay = layout(NormDescriptor(1, ("O", "O", "O")), (4, 5, 6))
        assert lay.n_components == 1
        assert lay.components == (((1, 1.0), (2, 1.0), (3, 1.0)),)
        assert lay.coupled_component == 0

    def test_mixed_scaled_first_mode(self):
        lay = layout(NormDescriptor(1, ("S", "O", "O")), (4, 5, 6))
        assert lay.n_components == 2
        # the overlapped group covers modes 2 and 3 at unit scale
        assert lay.components[0] == ((2, 1.0), (3, 1.0))
        # the scaled singleton owns mode 1 with scale 1/sqrt(n1) and the coupling
        assert lay.components[1] == ((1, 1.0 / 2.0),)
        assert lay.coupled_component == 1

    def test_mixed_scaled_second_mode(self):
        lay = layout(NormDescriptor(1, ("O", "S", "O")), (4, 5, 6))
        assert lay.n_components == 2
        assert lay.components[0] == ((1, 1.0), (3, 1.0))
        assert lay.components[1] == ((2, 1.0 / np.sqrt(5)),)
        # the overlapped component regularizes the coupled mode, so it owns M
        assert lay.coupled_component == 0

    def test_all_latent(self):
        lay = layout(NormDescriptor(2, ("L", "L", "L")), (4, 5, 6))
        assert lay.n_components == 3
        assert all(len(c) == 1 for c in lay.components)
        assert lay.coupled_component == lay.owner[2]

    def test_scaled_uses_dimension(self):
        lay = layout(NormDescriptor(1, ("S", "S", "S")), (9, 16, 25))
        scales = {mode: scale for (mode, scale), in lay.components}
        assert scales == {1: 1 / 3, 2: 1 / 4, 3: 1 / 5}


class TestParseFormat:
    @pytest.mark.parametrize(
        "text",
        ["1:(O,O,O)", "1:(S,O,O)", "2:(L,L,L)", "3:(O,O,S)", "1,3:(O,S,O)"],
    )
    def test_roundtrip(self, text):
        assert format_descriptor(parse_descriptor(text)) == text

    def test_whitespace_tolerant(self):
        d = parse_descriptor(" 1 : ( O , S , O ) ")
        assert d.tags == ("O", "S", "O")

    @pytest.mark.parametrize("text", ["", "O,O,O", "4:(O,O,O)", "1:(O,O)", "1:(L,L,O)"])
    def test_rejects_malformed(self, text):
        with pytest.raises(InvalidDescriptorError):
            parse_descriptor(text)


class TestEvaluateOverlapped:
    def test_zero(self):
        d = NormDescriptor(1, ("O", "O", "O"))
        assert evaluate_overlapped(np.zeros((3, 3, 3)), np.zeros((3, 2)), d) == 0.0

    def test_rank_one_matrix_only(self):
        d = NormDescriptor(1, ("O", "O", "O"))
        M = 2.0 * np.outer(np.eye(3)[:, 0], np.eye(2)[:, 0])
        val = evaluate_overlapped(np.zeros((3, 3, 3)), M, d)
        assert val == pytest.approx(2.0, abs=1e-10)

    def test_per_term_oracle(self):
        rng = np.random.default_rng(0)
        T = rng.standard_normal((4, 4, 4))
        M = rng.standard_normal((4, 3))
        d = NormDescriptor(1, ("O", "O", "O"))

        def tn_eig(X):
            # Gram matrix on the smaller side keeps sqrt(eigenvalue) accurate
            G = X @ X.T if X.shape[0] <= X.shape[1] else X.T @ X
            return float(np.sqrt(np.maximum(np.linalg.eigvalsh(G), 0.0)).sum())

        expected = (
            tn_eig(concat_mode1(unfold(T, 1), M))
            + tn_eig(unfold(T, 2))
            + tn_eig(unfold(T, 3))
        )
        assert evaluate_overlapped(T, M, d) == pytest.approx(expected, abs=1e-8)

    def test_rejects_non_overlapped(self):
        with pytest.raises(InvalidDescriptorError):
            evaluate_overlapped(
                np.zeros((2, 2, 2)), np.zeros((2, 2)), NormDescriptor(1, ("L", "L", "L"))
            )


class TestEvaluate:
    def test_latent_zero(self):
        d = NormDescriptor(1, ("L", "L", "L"))
        assert evaluate(np.zeros((3, 3, 3)), np.zeros((3, 2)), d) == pytest.approx(
            0.0, abs=1e-9
        )

    def test_latent_upper_bounded_by_single_assignment(self):
        T = rank1_mode2_tensor((4, 4, 4), seed=1)
        M = np.zeros((4, 0))
        d = NormDescriptor(1, ("L", "L", "L"))
        val = evaluate(T, M, d, tol=1e-6)
        assert val <= trace_norm(unfold(T, 2)) + 1e-5

    def test_scaling_equivalence_on_cubic_dims(self):
        rng = np.random.default_rng(2)
        T = rng.standard_normal((4, 4, 4))
        M = np.zeros((4, 0))
        lll = evaluate(T, M, NormDescriptor(1, ("L", "L", "L")), tol=1e-7)
        sss = evaluate(T, M, NormDescriptor(1, ("S", "S", "S")), tol=1e-7)
        assert sss == pytest.approx(lll / 2.0, rel=1e-4)

    def test_delegates_all_overlapped(self):
        rng = np.random.default_rng(3)
        T = rng.standard_normal((3, 4, 5))
        M = rng.standard_normal((3, 2))
        d = NormDescriptor(1, ("O", "O", "O"))
        assert evaluate(T, M, d) == evaluate_overlapped(T, M, d)

    def test_below_every_single_assignment_decomposition(self):
        rng = np.random.default_rng(4)
        T = rng.standard_normal((3, 3, 3))
        M = rng.standard_normal((3, 2))
        d = NormDescriptor(1, ("S", "O", "O"))
        lay = layout(d, T.shape)
        val = evaluate(T, M, d, tol=1e-6)
        # assign the whole tensor to either component, zero to the other
        for c in range(lay.n_components):
            comps = [T if i == c else np.zeros_like(T) for i in range(lay.n_components)]
            assert val <= decomposition_value(comps, lay, M) + 1e-4

    def test_absolute_homogeneity(self):
        rng = np.random.default_rng(5)
        T = rng.standard_normal((3, 3, 3))
        M = rng.standard_normal((3, 2))
        d = NormDescriptor(1, ("L", "L", "L"))
        base = evaluate(T, M, d, tol=1e-7)
        scaled = evaluate(-2.5 * T, -2.5 * M, d, tol=1e-7)
        assert scaled == pytest.approx(2.5 * base, rel=1e-4)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(6)
        d = NormDescriptor(1, ("S", "S", "S"))
        for _ in range(3):
            T1, T2 = rng.standard_normal((2, 3, 3, 3))
            M1 = rng.standard_normal((3, 2))
            M2 = rng.standard_normal((3, 2))
            lhs = evaluate(T1 + T2, M1 + M2, d, tol=1e-7)
            rhs = evaluate(T1, M1, d, tol=1e-7) + evaluate(T2, M2, d, tol=1e-7)
            assert lhs <= rhs + 1e-3


class TestDualNorms:
    def test_latent_identity_matrix(self):
        d = NormDescriptor(1, ("L", "L", "L"))
        assert dual_norm_latent_type(np.zeros((3, 3, 3)), np.eye(3), d) == pytest.approx(
            1.0, abs=1e-12
        )

    def test_latent_zero(self):
        d = NormDescriptor(1, ("S", "S", "S"))
        assert dual_norm_latent_type(np.zeros((3, 3, 3)), np.zeros((3, 2)), d) == 0.0

    def test_scaled_weights(self):
        rng = np.random.default_rng(7)
        T = rng.standard_normal((4, 9, 16))
        M = rng.standard_normal((4, 2))
        d = NormDescriptor(1, ("S", "S", "S"))
        from coupled_completion.prox import spectral_norm

        expected = max(
            2.0 * spectral_norm(concat_mode1(unfold(T, 1), M)),
            3.0 * spectral_norm(unfold(T, 2)),
            4.0 * spectral_norm(unfold(T, 3)),
        )
        assert dual_norm_latent_type(T, M, d) == pytest.approx(expected, abs=1e-10)

    def test_rejects_mixed(self):
        with pytest.raises(InvalidDescriptorError):
            dual_norm_latent_type(
                np.zeros((2, 2, 2)), np.zeros((2, 2)), NormDescriptor(1, ("S", "O", "O"))
            )

    def test_hoelder_latent(self):
        rng = np.random.default_rng(8)
        d = NormDescriptor(1, ("L", "L", "L"))
        for _ in range(100):
            T = rng.standard_normal((3, 3, 3))
            M = rng.standard_normal((3, 2))
            T2 = rng.standard_normal((3, 3, 3))
            M2 = rng.standard_normal((3, 2))
            ip = abs(float(np.sum(T * T2) + np.sum(M * M2)))
            primal = evaluate(T, M, d, tol=1e-5)
            dual = dual_norm_latent_type(T2, M2, d)
            assert ip <= primal * dual * (1 + 1e-6) + 1e-9

    def test_overlapped_upper_zero(self):
        assert dual_norm_overlapped_upper(np.zeros((2, 2, 2)), np.zeros((2, 1))) == 0.0

    def test_overlapped_upper_constructed(self):
        # diagonal-like tensor: all unfoldings share the same spectrum
        T = np.zeros((3, 3, 3))
        for i in range(3):
            T[i, i, i] = 5.0
        val = dual_norm_overlapped_upper(T, np.zeros((3, 0)))
        assert val == pytest.approx(5.0, abs=1e-10)

    def test_overlapped_upper_dominates_sampled_ratio(self):
        rng = np.random.default_rng(9)
        T = rng.standard_normal((3, 3, 3))
        M = rng.standard_normal((3, 2))
        upper = dual_norm_overlapped_upper(T, M)
        d = NormDescriptor(1, ("O", "O", "O"))
        best = 0.0
        for _ in range(10_000):
            S = rng.standard_normal((3, 3, 3))
            N = rng.standard_normal((3, 2))
            denom = evaluate_overlapped(S, N, d)
            best = max(best, (np.sum(T * S) + np.sum(M * N)) / denom)
        assert upper >= best
