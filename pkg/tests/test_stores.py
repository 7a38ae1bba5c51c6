"""
Tests for adversarial-set directories and defense reports
"""

import csv
import io
import json

import numpy as np
import pytest

from config.constants import AttackKind, DatasetSplit, ReportFormat
from data.adversarial_store import (
    MANIFEST_FILE,
    load_adversarial_set,
    load_config,
    save_adversarial_set,
)
from data.models import AdversarialExample, AttackSpec, DefenseCell, DefenseReport, LabeledImage
from data.report_store import emit_report, load_report, render_csv
from utils.exceptions import AdversarialSetError, ReportError


def make_examples(count: int):
    rng = np.random.default_rng(0)
    examples = []
    for i in range(count):
        original = LabeledImage(pixels=rng.random((3, 3, 1)).astype(np.float32), label=i % 10,
                                split=DatasetSplit.TRAIN, index=100 + i)
        perturbed = np.clip(original.pixels + 0.1, 0, 1).astype(np.float32)
        examples.append(AdversarialExample(original=original, perturbed=perturbed,
                                           predicted_label=(i + 1) % 10, true_label=i % 10,
                                           l0=9.0, l2=0.3, linf=0.1, seed=i))
    return examples


def make_report() -> DefenseReport:
    cells = [
        DefenseCell(d=1, runs=[0.5, 0.25, 0.75], mean=0.5, seeds=[0, 1, 2], clean_accuracy=1.0,
                    flip_rate=0.9, mean_evaluations=120.0, seconds_per_image=0.01),
        DefenseCell(d=10, runs=[1.0, 0.75, 1.0], mean=2.75 / 3, seeds=[0, 1, 2]),
    ]
    return DefenseReport(dataset="mnist", model="model.bin", attack={'kind': 'fgsm', 'epsilon': 0.55},
                         cells=cells, n_adversarial=4, undefended_accuracy=0.0,
                         config={'pop_size': 40}, generated_at="2024-01-01T00:00:00Z", wall_time=3.5)


class TestAdversarialStore:
    """Test adversarial-set directories"""

    def test_round_trip(self, temp_dir):
        """Test saved examples load back unchanged"""
        spec = AttackSpec(AttackKind.PGD, 0.03, 50, seed=2)
        examples = make_examples(3)
        save_adversarial_set(examples, str(temp_dir / "adv"), spec, extra={'dataset': 'mnist'})

        loaded, loaded_spec = load_adversarial_set(str(temp_dir / "adv"))
        assert loaded_spec == spec
        assert len(loaded) == 3
        for a, b in zip(examples, loaded):
            assert np.array_equal(a.perturbed, b.perturbed)
            assert np.array_equal(a.original.pixels, b.original.pixels)
            assert (a.true_label, a.predicted_label, a.seed) == (b.true_label, b.predicted_label, b.seed)
            assert b.original.split == DatasetSplit.TRAIN
            assert b.original.index == a.original.index
        assert load_config(str(temp_dir / "adv"))['dataset'] == 'mnist'

    def test_missing_directory(self, temp_dir):
        """Test a directory without config.json"""
        with pytest.raises(AdversarialSetError):
            load_adversarial_set(str(temp_dir / "absent"))

    def test_missing_manifest(self, temp_dir):
        """Test a directory without a manifest"""
        directory = save_adversarial_set(make_examples(1), str(temp_dir / "adv"),
                                         AttackSpec(AttackKind.FGSM, 0.55))
        (directory / MANIFEST_FILE).unlink()
        with pytest.raises(AdversarialSetError):
            load_adversarial_set(str(directory))

    def test_truncated_tensor(self, temp_dir):
        """Test a tensor file of the wrong size"""
        directory = save_adversarial_set(make_examples(2), str(temp_dir / "adv"),
                                         AttackSpec(AttackKind.FGSM, 0.55))
        tensor = directory / "tensors" / "00001.adv"
        tensor.write_bytes(tensor.read_bytes()[:-4])
        with pytest.raises(AdversarialSetError):
            load_adversarial_set(str(directory))

    def test_count_mismatch(self, temp_dir):
        """Test a manifest shorter than config.json says"""
        directory = save_adversarial_set(make_examples(2), str(temp_dir / "adv"),
                                         AttackSpec(AttackKind.FGSM, 0.55))
        lines = (directory / MANIFEST_FILE).read_text().splitlines()
        (directory / MANIFEST_FILE).write_text(lines[0] + "\n")
        with pytest.raises(AdversarialSetError):
            load_adversarial_set(str(directory))


class TestReportStore:
    """Test report output"""

    def test_json_round_trip(self, temp_dir):
        """Test a JSON report loads back equal"""
        report = make_report()
        path = emit_report(report, temp_dir / "report.json", ReportFormat.JSON)
        assert load_report(path) == report
        assert json.loads(path.read_text())['cells'][0]['runs'] == [0.5, 0.25, 0.75]

    def test_csv_rows(self):
        """Test one row per run plus a mean row per d"""
        rows = list(csv.reader(io.StringIO(render_csv(make_report()))))
        assert rows[0] == ["dataset", "attack", "d", "run_index", "rate", "is_mean"]
        assert len(rows) == 1 + 4 + 4
        assert rows[1] == ["mnist", "fgsm", "1", "0", "0.5", "false"]
        assert rows[4] == ["mnist", "fgsm", "1", "", "0.5", "true"]
        assert float(rows[8][4]) == pytest.approx(2.75 / 3)

    def test_single_cell_csv(self, temp_dir):
        """Test a one-run, one-d report has three lines"""
        report = DefenseReport(dataset="cifar10", model="m", attack={'kind': 'bim'},
                               cells=[DefenseCell(d=5, runs=[0.4], mean=0.4, seeds=[0])],
                               n_adversarial=5)
        path = emit_report(report, temp_dir / "out" / "r.csv", "csv")
        assert len(path.read_text().splitlines()) == 3

    def test_body_excludes_timing(self):
        """Test body() drops wall-clock fields"""
        body = make_report().body()
        assert 'generated_at' not in body and 'wall_time' not in body
        assert 'seconds_per_image' not in body['cells'][0]

    def test_load_errors(self, temp_dir):
        """Test missing and malformed report files"""
        with pytest.raises(ReportError):
            load_report(temp_dir / "absent.json")
        bad = temp_dir / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ReportError):
            load_report(bad)
        bad.write_text(json.dumps({'dataset': 'mnist'}))
        with pytest.raises(ReportError):
            load_report(bad)

    def test_unwritable_path(self, temp_dir):
        """Test writing over a directory raises ReportError"""
        (temp_dir / "taken").mkdir()
        with pytest.raises(ReportError):
            emit_report(make_report(), temp_dir / "taken", ReportFormat.JSON)
