"""
Defense report output (JSON and CSV) and JSON loading
"""

import csv
import io
import json
from pathlib import Path
from typing import Union

from config.constants import REPORT_CSV_COLUMNS, ReportFormat
from data.models import DefenseReport
from utils.exceptions import ReportError


def report_rows(report: DefenseReport) -> list:
    """CSV rows: one per (d, run) followed by that d's mean row"""
    attack = report.attack.get('kind', '')
    rows = []
    for cell in report.cells:
        for run_index, rate in enumerate(cell.runs):
            rows.append([report.dataset, attack, cell.d, run_index, repr(float(rate)), 'false'])
        rows.append([report.dataset, attack, cell.d, '', repr(float(cell.mean)), 'true'])
    return rows


def render_csv(report: DefenseReport) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(REPORT_CSV_COLUMNS)
    writer.writerows(report_rows(report))
    return buffer.getvalue()


def render_json(report: DefenseReport) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"


def emit_report(report: DefenseReport, path: Union[str, Path],
                fmt: Union[ReportFormat, str] = ReportFormat.JSON) -> Path:
    """
    Write a report

    Raises:
        ReportError: If the file cannot be written
    """
    fmt = ReportFormat(fmt)
    path = Path(path)
    text = render_csv(report) if fmt == ReportFormat.CSV else render_json(report)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as e:
        raise ReportError(f"Cannot write report {path}: {e}")
    return path


def load_report(path: Union[str, Path]) -> DefenseReport:
    """
    Read a JSON report

    Raises:
        ReportError: Missing or malformed file
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
        return DefenseReport.from_dict(data)
    except OSError as e:
        raise ReportError(f"Cannot read report {path}: {e}")
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ReportError(f"Malformed report {path}: {e}")
