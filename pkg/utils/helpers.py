"""
Small formatting and filesystem helpers shared by the CLI and stores
"""

from datetime import datetime, timezone
from pathlib import Path
from typing import Union


def ensure_dir(directory: Union[str, Path]) -> Path:
    """Create directory (and parents) if missing; return it as a Path"""
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def format_time(seconds: float) -> str:
    """
    Render a wall time for summaries

    Args:
        seconds: Elapsed seconds

    Returns:
        "12.3s" under a minute, "1m 30s" under an hour, else "2h 05m"
    """
    if seconds < 60:
        return f"{seconds:.1f}s"
    whole = int(seconds)
    if whole < 3600:
        return f"{whole // 60}m {whole % 60}s"
    return f"{whole // 3600}h {(whole % 3600) // 60:02d}m"


def format_percent(rate: float, digits: int = 2) -> str:
    """0.8279 -> '82.79%'"""
    return f"{100 * rate:.{digits}f}%"


def utc_timestamp() -> str:
    """Current UTC time in ISO-8601 form, seconds precision"""
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()
