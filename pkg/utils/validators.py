"""
Input validation utilities for flags and config-file values
"""

from typing import List, Optional

from config.constants import AttackKind, DatasetSource, ReportFormat
from utils.exceptions import InvalidConfigError


class InputValidator:
    """Validates user inputs (command-line flags and config-file strings)"""

    @staticmethod
    def validate_int(value, name: str, minimum: Optional[int] = None) -> int:
        """
        Parse an integer

        Raises:
            InvalidConfigError: If not an integer or below minimum
        """
        try:
            number = int(str(value).strip())
        except ValueError:
            raise InvalidConfigError(f"Invalid {name}: '{value}'. Must be an integer")
        if minimum is not None and number < minimum:
            raise InvalidConfigError(f"Invalid {name}: {number}. Must be >= {minimum}")
        return number

    @staticmethod
    def validate_float(value, name: str, low: Optional[float] = None,
                       high: Optional[float] = None) -> float:
        """
        Parse a real number, optionally within [low, high]

        Raises:
            InvalidConfigError: If not a number or out of range
        """
        try:
            number = float(str(value).strip())
        except ValueError:
            raise InvalidConfigError(f"Invalid {name}: '{value}'. Must be a number")
        if (low is not None and number < low) or (high is not None and number > high):
            raise InvalidConfigError(
                f"Invalid {name}: {number}. Must be between {low} and {high}"
            )
        return number

    @staticmethod
    def validate_int_list(value, name: str) -> List[int]:
        """
        Parse a comma-separated list of integers ("1,10,50,100")

        Raises:
            InvalidConfigError: If empty or an entry is not an integer
        """
        if isinstance(value, (list, tuple)):
            items = list(value)
        else:
            items = [item for item in str(value).split(',') if item.strip()]
        if not items:
            raise InvalidConfigError(f"Invalid {name}: list must not be empty")
        return [InputValidator.validate_int(item, name) for item in items]

    @staticmethod
    def validate_float_list(value, name: str) -> List[float]:
        """Parse a comma-separated list of real numbers"""
        items = [item for item in str(value).split(',') if item.strip()]
        if not items:
            raise InvalidConfigError(f"Invalid {name}: list must not be empty")
        return [InputValidator.validate_float(item, name) for item in items]

    @staticmethod
    def validate_bool(value, name: str) -> bool:
        """
        Parse a yes/no value

        Raises:
            InvalidConfigError: If not a recognized boolean
        """
        if isinstance(value, bool):
            return value
        normalized = str(value).lower().strip()
        if normalized in ('1', 'true', 'yes', 'y', 'on'):
            return True
        if normalized in ('0', 'false', 'no', 'n', 'off'):
            return False
        raise InvalidConfigError(f"Invalid {name}: '{value}'. Must be true or false")

    @staticmethod
    def validate_attack_kind(value) -> AttackKind:
        """
        Normalize an attack name

        Raises:
            InvalidConfigError: If not fgsm, bim or pgd
        """
        try:
            return AttackKind(str(value).lower().strip())
        except ValueError:
            valid = ", ".join(kind.value for kind in AttackKind)
            raise InvalidConfigError(f"Invalid attack kind: '{value}'. Must be one of {valid}")

    @staticmethod
    def validate_dataset(value) -> DatasetSource:
        """Normalize a dataset name (mnist or cifar10)"""
        try:
            return DatasetSource(str(value).lower().strip())
        except ValueError:
            valid = ", ".join(source.value for source in DatasetSource)
            raise InvalidConfigError(f"Invalid dataset: '{value}'. Must be one of {valid}")

    @staticmethod
    def validate_report_format(value) -> ReportFormat:
        """Normalize a report format (json or csv)"""
        try:
            return ReportFormat(str(value).lower().strip())
        except ValueError:
            raise InvalidConfigError(f"Invalid report format: '{value}'. Must be json or csv")
