"""
Tests for gradient attacks and adversarial-set construction
"""

import numpy as np
import pytest

from config.constants import AttackKind, DatasetSplit
from core.attacks import bim, build_adversarial_set, fgsm, lp_norm, pgd, run_attack
from core.network import zero_network
from data.models import AttackSpec, LabeledImage
from tests.conftest import constant_dataset
from utils.exceptions import AttackExhaustedError, InvalidConfigError, InvalidInputShapeError


class TestLpNorm:
    """Test perturbation norms"""

    def test_known_values(self):
        """Test L0, L2 and Linf of a simple difference"""
        x = np.zeros((2, 2, 1))
        x_adv = np.array([[[3.0], [0.0]], [[-4.0], [0.0]]])
        assert lp_norm(x, x_adv, 0) == 2.0
        assert lp_norm(x, x_adv, 2) == pytest.approx(5.0)
        assert lp_norm(x, x_adv, np.inf) == 4.0
        assert lp_norm(x, x_adv, "inf") == 4.0

    def test_identical_images(self):
        """Test all norms are 0 without a perturbation"""
        x = np.random.default_rng(0).random((3, 3, 3))
        assert lp_norm(x, x, 0) == lp_norm(x, x, 2) == lp_norm(x, x, np.inf) == 0.0

    def test_errors(self):
        """Test shape mismatches and unknown orders"""
        with pytest.raises(InvalidInputShapeError):
            lp_norm(np.zeros((2, 2)), np.zeros((3, 3)), 2)
        with pytest.raises(ValueError):
            lp_norm(np.zeros(2), np.zeros(2), 1)


class TestSingleAttacks:
    """Test FGSM, BIM and PGD on a linear classifier"""

    def test_fgsm_fools_at_large_epsilon(self, small_linear_net, bright_image):
        """Test eps = 0.55 pushes every pixel to 0.05 and flips the label"""
        example = fgsm(small_linear_net, bright_image, 0.55)
        assert example is not None
        assert example.predicted_label == 1
        assert example.true_label == 0
        assert np.allclose(example.perturbed, 0.05, atol=1e-6)
        assert example.linf == pytest.approx(0.55, abs=1e-6)
        assert example.l0 == 16

    def test_fgsm_fails_at_small_epsilon(self, small_linear_net, bright_image):
        """Test eps = 0.1 is not enough"""
        assert fgsm(small_linear_net, bright_image, 0.1) is None

    def test_zero_gradient_never_fools(self):
        """Test a uniform-output network is never fooled"""
        net = zero_network((4, 4, 1), num_classes=2)
        img = LabeledImage(pixels=np.full((4, 4, 1), 0.5, dtype=np.float32), label=0)
        assert net.predict(img.pixels) == 0
        assert fgsm(net, img, 0.9) is None

    def test_misclassified_input_skipped(self, small_linear_net, bright_image):
        """Test an already wrong prediction returns None"""
        wrong = LabeledImage(pixels=bright_image.pixels, label=1)
        assert fgsm(small_linear_net, wrong, 0.55) is None
        assert bim(small_linear_net, wrong, 0.55, 5) is None

    def test_fgsm_equals_one_step_bim(self, small_linear_net, bright_image):
        """Test FGSM is BIM with one full step"""
        a = fgsm(small_linear_net, bright_image, 0.55)
        b = bim(small_linear_net, bright_image, 0.55, 1, step_size=0.55)
        assert np.array_equal(a.perturbed, b.perturbed)

    @pytest.mark.parametrize("kind", [AttackKind.BIM, AttackKind.PGD])
    def test_iterative_stays_in_ball(self, small_linear_net, bright_image, kind):
        """Test iterative attacks respect the eps-ball and [0, 1]"""
        spec = AttackSpec(kind=kind, epsilon=0.55, iterations=20, seed=4)
        example = run_attack(small_linear_net, bright_image, spec)
        assert example is not None
        assert example.linf <= 0.55 + 1e-6
        assert example.perturbed.min() >= 0.0 and example.perturbed.max() <= 1.0

    def test_pgd_without_random_start_is_bim(self, small_linear_net, bright_image):
        """Test PGD from the clean image matches BIM"""
        a = pgd(small_linear_net, bright_image, 0.55, 10, step_size=0.1, random_start=False)
        b = bim(small_linear_net, bright_image, 0.55, 10, step_size=0.1)
        assert np.array_equal(a.perturbed, b.perturbed)

    def test_pgd_deterministic(self, small_linear_net, bright_image):
        """Test the random start depends only on the seed"""
        a = pgd(small_linear_net, bright_image, 0.55, 10, seed=7)
        b = pgd(small_linear_net, bright_image, 0.55, 10, seed=7)
        assert np.array_equal(a.perturbed, b.perturbed)
        assert a.seed == 7


class TestAttackSpec:
    """Test attack hyperparameter validation"""

    def test_defaults(self):
        """Test default step sizes and random start"""
        assert AttackSpec(AttackKind.FGSM, 0.3).step_size == 0.3
        assert AttackSpec(AttackKind.BIM, 0.03, 50).step_size == pytest.approx(0.0015)
        pgd_spec = AttackSpec(AttackKind.PGD, 0.03, 50)
        assert pgd_spec.step_size == pytest.approx(0.012)
        assert pgd_spec.random_start
        assert not AttackSpec(AttackKind.BIM, 0.03, 50).random_start

    def test_invalid(self):
        """Test bad epsilons, iterations and steps are rejected"""
        with pytest.raises(InvalidConfigError):
            AttackSpec(AttackKind.FGSM, 0.0)
        with pytest.raises(InvalidConfigError):
            AttackSpec(AttackKind.BIM, 0.1, 0)
        with pytest.raises(InvalidConfigError):
            AttackSpec(AttackKind.PGD, 0.1, 10, step_size=0.2)

    def test_dict_round_trip(self):
        """Test to_dict / from_dict keep every field"""
        spec = AttackSpec(AttackKind.PGD, 0.05, 30, random_start=False, seed=3)
        assert AttackSpec.from_dict(spec.to_dict()) == spec


class TestBuildAdversarialSet:
    """Test collecting n successful examples"""

    def test_collects_n(self, small_linear_net):
        """Test exactly n fooled examples are returned"""
        ds = constant_dataset(30, 153, 0)
        examples = build_adversarial_set(small_linear_net, ds, AttackSpec(AttackKind.FGSM, 0.55), 10, seed=0)
        assert len(examples) == 10
        assert all(e.predicted_label != e.true_label for e in examples)
        assert len({e.original.index for e in examples}) == 10

    def test_invalid_n(self, small_linear_net):
        """Test n must be positive"""
        ds = constant_dataset(5, 153, 0)
        with pytest.raises(InvalidConfigError):
            build_adversarial_set(small_linear_net, ds, AttackSpec(AttackKind.FGSM, 0.55), 0, seed=0)

    def test_exhausted(self, small_linear_net):
        """Test an attack that never succeeds raises"""
        ds = constant_dataset(20, 153, 0)
        with pytest.raises(AttackExhaustedError):
            build_adversarial_set(small_linear_net, ds, AttackSpec(AttackKind.FGSM, 0.1), 5, seed=0)

    def test_holdout_split(self, small_linear_net):
        """Test n = 100 draws 86 train and 14 test images for MNIST"""
        train = constant_dataset(100, 153, 0)
        test = constant_dataset(20, 153, 0, split=DatasetSplit.TEST)
        examples = build_adversarial_set(small_linear_net, train, AttackSpec(AttackKind.FGSM, 0.55),
                                         100, seed=1, holdout=test)
        splits = [e.original.split for e in examples]
        assert splits.count(DatasetSplit.TRAIN) == 86
        assert splits.count(DatasetSplit.TEST) == 14

    def test_threads_same_result(self, small_linear_net):
        """Test concurrency does not change which images are used"""
        ds = constant_dataset(40, 153, 0)
        spec = AttackSpec(AttackKind.PGD, 0.55, 10, seed=0)
        serial = build_adversarial_set(small_linear_net, ds, spec, 12, seed=5, threads=1)
        threaded = build_adversarial_set(small_linear_net, ds, spec, 12, seed=5, threads=3)
        assert [e.original.index for e in serial] == [e.original.index for e in threaded]
        for a, b in zip(serial, threaded):
            assert np.array_equal(a.perturbed, b.perturbed)
