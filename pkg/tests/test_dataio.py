import io

import numpy as np
import pytest

from fuvalkit.dataio import (
    ParseError,
    SyntheticMode,
    SyntheticSpec,
    gen_synthetic,
    parse_libsvm,
    serialize_libsvm,
)
from fuvalkit.problems import LossKind, objective


class TestParseLibsvm:
    def test_basic_two_class(self):
        text = "+1 1:0.5 3:2.0\n-1 2:1.5\n"
        problem = parse_libsvm(text)
        assert problem.n == 2
        assert problem.dim == 3
        assert problem.examples[0].label == 1.0
        assert problem.examples[1].label == -1.0
        np.testing.assert_array_equal(problem.examples[0].indices, [1, 3])
        np.testing.assert_allclose(problem.examples[0].values, [0.5, 2.0])

    def test_smaller_raw_label_maps_to_minus_one(self):
        problem = parse_libsvm("2 1:1\n4 1:1\n")
        assert problem.examples[0].label == -1.0
        assert problem.examples[1].label == 1.0

    def test_comments_and_blank_lines_skipped(self):
        text = "# header comment\n\n+1 1:1.0  # trailing\n\n-1 1:2.0\n"
        problem = parse_libsvm(text)
        assert problem.n == 2

    def test_accepts_file_object(self):
        problem = parse_libsvm(io.StringIO("+1 1:1\n-1 2:1\n"))
        assert problem.n == 2

    def test_dim_override(self):
        problem = parse_libsvm("+1 1:1\n-1 2:1\n", dim=10)
        assert problem.dim == 10

    def test_least_squares_labels_kept_verbatim(self):
        problem = parse_libsvm("0.25 1:1\n-3.5 1:2\n", loss_kind=LossKind.LEAST_SQUARES)
        assert [e.label for e in problem.examples] == [0.25, -3.5]

    def test_nonincreasing_index_rejected_with_line_number(self):
        with pytest.raises(ParseError) as exc:
            parse_libsvm("+1 1:1\n-1 3:1 2:1\n")
        assert exc.value.line_no == 2

    def test_bad_label_rejected(self):
        with pytest.raises(ParseError) as exc:
            parse_libsvm("abc 1:1\n")
        assert exc.value.line_no == 1

    def test_bad_feature_token_rejected(self):
        with pytest.raises(ParseError):
            parse_libsvm("+1 1:x\n")
        with pytest.raises(ParseError):
            parse_libsvm("+1 1\n")

    def test_three_labels_rejected_for_logistic(self):
        with pytest.raises(ParseError):
            parse_libsvm("1 1:1\n2 1:1\n3 1:1\n")

    def test_empty_input_rejected(self):
        with pytest.raises(ParseError):
            parse_libsvm("# only a comment\n")

    def test_duplicate_index_rejected(self):
        with pytest.raises(ParseError):
            parse_libsvm("+1 2:1 2:3\n")


class TestRoundTrip:
    @pytest.mark.parametrize(
        "mode,kind",
        [
            (SyntheticMode.INTERPOLATING, LossKind.LEAST_SQUARES),
            (SyntheticMode.LOGISTIC, LossKind.LOGISTIC),
        ],
    )
    def test_serialize_parse_round_trip(self, mode, kind):
        problem, _ = gen_synthetic(SyntheticSpec(n=8, d=5, seed=42, mode=mode))
        text = serialize_libsvm(problem)
        back = parse_libsvm(text, loss_kind=kind, dim=problem.dim)
        assert back.n == problem.n
        for a, b in zip(problem.examples, back.examples):
            assert a.label == b.label
            np.testing.assert_array_equal(a.indices, b.indices)
            np.testing.assert_array_equal(a.values, b.values)


class TestGenSynthetic:
    def test_same_seed_same_problem(self):
        spec = SyntheticSpec(n=10, d=4, seed=5, mode=SyntheticMode.NOISY_LEAST_SQUARES, noise_std=0.3)
        p1, _ = gen_synthetic(spec)
        p2, _ = gen_synthetic(spec)
        assert serialize_libsvm(p1) == serialize_libsvm(p2)

    def test_different_seed_different_problem(self):
        base = dict(n=10, d=4, mode=SyntheticMode.INTERPOLATING)
        p1, _ = gen_synthetic(SyntheticSpec(seed=1, **base))
        p2, _ = gen_synthetic(SyntheticSpec(seed=2, **base))
        assert serialize_libsvm(p1) != serialize_libsvm(p2)

    def test_interpolating_known_optimum(self):
        problem, w_star = gen_synthetic(SyntheticSpec(n=20, d=5, seed=9))
        assert w_star is not None
        assert objective(problem, w_star) <= 1e-16

    def test_noisy_mode_has_no_known_optimum(self):
        problem, w_star = gen_synthetic(
            SyntheticSpec(n=20, d=5, seed=9, mode=SyntheticMode.NOISY_LEAST_SQUARES, noise_std=0.5)
        )
        assert w_star is None
        assert problem.loss_kind is LossKind.LEAST_SQUARES

    def test_logistic_mode_labels_and_kind(self):
        problem, w_star = gen_synthetic(
            SyntheticSpec(n=50, d=5, seed=3, mode=SyntheticMode.LOGISTIC)
        )
        assert w_star is None
        assert problem.loss_kind is LossKind.LOGISTIC
        assert set(e.label for e in problem.examples) <= {-1.0, 1.0}

    def test_invalid_spec_rejected(self):
        with pytest.raises(ValueError):
            SyntheticSpec(n=0, d=4, seed=1)
        with pytest.raises(ValueError):
            SyntheticSpec(n=4, d=4, seed=1, noise_std=-1.0)
