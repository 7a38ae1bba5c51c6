"""
Tests for the command-line interface
"""

import json

import numpy as np
import pytest

from config.constants import AttackKind, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE
from core.network import zero_network
from data.adversarial_store import MANIFEST_FILE, TENSOR_DIR, save_adversarial_set
from data.model_store import save_model
from data.models import AdversarialExample, AttackSpec, DefenseCell, DefenseReport, LabeledImage
from data.report_store import emit_report, load_report
from tests.conftest import linear_net, planted_pixel_net, write_idx
from ui import cli
from ui.cli import PixelDefenseCLI, read_config_file
from utils.exceptions import InvalidConfigError


def run_cli(*argv) -> int:
    return PixelDefenseCLI().run([str(a) for a in argv] + ['--quiet', '--no-color'])


@pytest.fixture
def mnist_files(temp_dir):
    """Tiny 28x28 IDX train/test files in the standard layout"""
    rng = np.random.default_rng(0)
    write_idx(temp_dir, "train", rng.integers(0, 256, size=(20, 28, 28)), np.arange(20) % 10)
    write_idx(temp_dir, "t10k", rng.integers(0, 256, size=(10, 28, 28)), np.arange(10))
    return temp_dir


@pytest.fixture
def bright_mnist(temp_dir):
    """28x28 images of constant 153 (0.6), all labeled 0"""
    images = np.full((6, 28, 28), 153)
    write_idx(temp_dir, "train", images, np.zeros(6))
    write_idx(temp_dir, "t10k", images[:2], np.zeros(2))
    return temp_dir


def data_flags(directory):
    return [
        '--train-images', directory / "train-images-idx3-ubyte",
        '--train-labels', directory / "train-labels-idx1-ubyte",
        '--test-images', directory / "t10k-images-idx3-ubyte",
        '--test-labels', directory / "t10k-labels-idx1-ubyte",
    ]


def planted_set(directory):
    examples = []
    for i in range(3):
        original = LabeledImage(pixels=np.zeros((10, 10, 1), dtype=np.float32), label=0, index=i)
        perturbed = original.pixels.copy()
        perturbed[5, 5, 0] = 1.0
        examples.append(AdversarialExample(original=original, perturbed=perturbed, predicted_label=1,
                                           true_label=0, l0=1.0, l2=1.0, linf=1.0))
    return save_adversarial_set(examples, str(directory / "adv"), AttackSpec(AttackKind.FGSM, 0.55),
                                extra={'dataset': 'mnist'})


class TestUsageErrors:
    """Test exit code 2 paths"""

    def test_unknown_attack_kind(self, temp_dir):
        """Test an invalid --kind value"""
        code = run_cli('attack', '--model', temp_dir / "m.bin", '--kind', 'cw', '--out-dir', temp_dir)
        assert code == EXIT_USAGE

    def test_missing_required_flag(self):
        """Test a subcommand without its required flags"""
        assert run_cli('report') == EXIT_USAGE

    def test_missing_data(self, temp_dir):
        """Test absent dataset files"""
        code = run_cli('train', '--data-dir', temp_dir / "nothing", '--model-out', temp_dir / "m.bin")
        assert code == EXIT_USAGE

    def test_missing_model(self, temp_dir):
        """Test an absent model file"""
        adv_dir = planted_set(temp_dir)
        code = run_cli('defend', '--model', temp_dir / "absent.bin", '--adversarial-dir', adv_dir,
                       '--report-out', temp_dir / "r.json")
        assert code == EXIT_USAGE

    def test_help(self):
        """Test --help exits cleanly"""
        assert PixelDefenseCLI().run(['--help']) == EXIT_OK


class TestTrain:
    """Test the train subcommand"""

    def test_train_deterministic(self, mnist_files, temp_dir):
        """Test one seed writes byte-identical models"""
        first, second = temp_dir / "a.bin", temp_dir / "b.bin"
        for out in (first, second):
            code = run_cli('train', *data_flags(mnist_files), '--model-out', out,
                           '--epochs', 1, '--batch-size', 8, '--seed', 3)
            assert code == EXIT_OK
        assert first.read_bytes() == second.read_bytes()

    def test_train_from_data_dir(self, mnist_files, temp_dir):
        """Test standard file names are found in --data-dir"""
        out = temp_dir / "models" / "m.bin"
        assert run_cli('train', '--data-dir', mnist_files, '--model-out', out, '--epochs', 0) == EXIT_OK
        assert out.is_file()


class TestAttack:
    """Test the attack subcommand"""

    def test_attack_writes_set(self, bright_mnist, temp_dir):
        """Test a successful attack writes n manifest entries"""
        model = save_model(linear_net(shape=(28, 28, 1), bias=600.0), str(temp_dir / "linear.bin"))
        out_dir = temp_dir / "adv"
        code = run_cli('attack', *data_flags(bright_mnist), '--model', model, '--kind', 'fgsm',
                       '--epsilon', 0.55, '--n', 3, '--out-dir', out_dir)
        assert code == EXIT_OK
        assert len((out_dir / MANIFEST_FILE).read_text().splitlines()) == 3
        assert json.loads((out_dir / "config.json").read_text())['attack']['kind'] == 'fgsm'

    def test_attack_exhausted(self, bright_mnist, temp_dir):
        """Test an unfoolable model exits with code 3"""
        model = save_model(zero_network((28, 28, 1)), str(temp_dir / "zero.bin"))
        code = run_cli('attack', *data_flags(bright_mnist), '--model', model, '--kind', 'fgsm',
                       '--n', 2, '--out-dir', temp_dir / "adv")
        assert code == EXIT_RUNTIME

    def test_pgd_default_iterations(self, bright_mnist, temp_dir, monkeypatch):
        """Test PGD without --iterations uses the PGD default, not BIM's"""
        monkeypatch.setattr(cli, 'PGD_DEFAULT_ITERATIONS', 7)
        model = save_model(linear_net(shape=(28, 28, 1), bias=600.0), str(temp_dir / "linear.bin"))
        out_dir = temp_dir / "adv"
        code = run_cli('attack', *data_flags(bright_mnist), '--model', model, '--kind', 'pgd',
                       '--epsilon', 0.55, '--n', 2, '--out-dir', out_dir)
        assert code == EXIT_OK
        assert json.loads((out_dir / "config.json").read_text())['attack']['iterations'] == 7

    def test_attack_deterministic(self, bright_mnist, temp_dir):
        """Test one seed writes byte-identical manifests and tensors"""
        model = save_model(linear_net(shape=(28, 28, 1), bias=600.0), str(temp_dir / "linear.bin"))
        outputs = [temp_dir / "adv-a", temp_dir / "adv-b"]
        for out_dir in outputs:
            code = run_cli('attack', *data_flags(bright_mnist), '--model', model, '--kind', 'fgsm',
                           '--epsilon', 0.55, '--n', 3, '--out-dir', out_dir,
                           '--seed', 5, '--threads', 2)
            assert code == EXIT_OK

        first, second = outputs
        assert (first / MANIFEST_FILE).read_bytes() == (second / MANIFEST_FILE).read_bytes()
        tensors = sorted(path.relative_to(first) for path in (first / TENSOR_DIR).iterdir())
        assert len(tensors) == 6
        for name in tensors:
            assert (first / name).read_bytes() == (second / name).read_bytes()


class TestDefendAndReport:
    """Test the defend and report subcommands"""

    def test_defend(self, temp_dir):
        """Test a sweep writes a JSON report with one cell per d"""
        model = save_model(planted_pixel_net(), str(temp_dir / "planted.bin"))
        adv_dir = planted_set(temp_dir)
        report_path = temp_dir / "report.json"
        code = run_cli('defend', '--model', model, '--adversarial-dir', adv_dir, '--d', '0,10',
                       '--pop', 40, '--max-iter', 50, '--runs', 1, '--report-out', report_path,
                       '--threads', 1)
        assert code == EXIT_OK

        data = json.loads(report_path.read_text())
        assert [cell['d'] for cell in data['cells']] == [0, 10]
        assert data['cells'][0]['runs'] == [0.0]
        assert data['cells'][1]['runs'] == [1.0]
        assert data['n_adversarial'] == 3

    def test_defend_deterministic(self, temp_dir):
        """Test repeated sweeps give identical report bodies"""
        model = save_model(planted_pixel_net(), str(temp_dir / "planted.bin"))
        adv_dir = planted_set(temp_dir)
        bodies = []
        for name in ("a.json", "b.json"):
            code = run_cli('defend', '--model', model, '--adversarial-dir', adv_dir, '--d', '1,10',
                           '--pop', 20, '--max-iter', 10, '--runs', 2, '--seeds', '4,9',
                           '--report-out', temp_dir / name, '--threads', 2)
            assert code == EXIT_OK
            bodies.append(load_report(str(temp_dir / name)).body())
        assert bodies[0] == bodies[1]
        assert [cell['seeds'] for cell in bodies[0]['cells']] == [[4, 9], [4, 9]]

    def test_report_json_to_csv(self, temp_dir):
        """Test re-rendering a JSON report as CSV"""
        report = DefenseReport(dataset="mnist", model="m", attack={'kind': 'pgd'},
                               cells=[DefenseCell(d=1, runs=[0.5, 1.0], mean=0.75, seeds=[0, 1])],
                               n_adversarial=2)
        source = emit_report(report, temp_dir / "r.json")
        target = temp_dir / "r.csv"
        assert run_cli('report', '--input', source, '--output', target) == EXIT_OK
        assert target.read_text().splitlines()[-1] == "mnist,pgd,1,,0.75,true"

    def test_report_from_config_file(self, temp_dir):
        """Test required flags can come from a config file"""
        report = DefenseReport(dataset="mnist", model="m", attack={'kind': 'bim'},
                               cells=[DefenseCell(d=2, runs=[1.0], mean=1.0, seeds=[0])],
                               n_adversarial=1)
        source = emit_report(report, temp_dir / "r.json")
        config = temp_dir / "report.env"
        config.write_text(f"input={source}\noutput={temp_dir / 'out.csv'}\nformat=csv\n")

        assert run_cli('report', '--config', config) == EXIT_OK
        assert (temp_dir / "out.csv").is_file()

    def test_unknown_config_key(self, temp_dir):
        """Test a config file key no flag accepts"""
        config = temp_dir / "bad.env"
        config.write_text("colour=blue\n")
        assert run_cli('report', '--config', config) == EXIT_USAGE


class TestConfigFile:
    """Test config file parsing"""

    def test_dashes_normalized(self, temp_dir):
        """Test dashed keys map to underscores"""
        path = temp_dir / "c.env"
        path.write_text("max-iter=5\nreport_out=x.json\n")
        assert read_config_file(str(path)) == {'max_iter': '5', 'report_out': 'x.json'}

    def test_missing_file(self, temp_dir):
        """Test an absent config file"""
        with pytest.raises(InvalidConfigError):
            read_config_file(str(temp_dir / "absent.env"))
