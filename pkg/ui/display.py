"""
Console display and formatting
"""

from typing import List

from config.settings import Settings
from data.models import DefenseReport, SweepPoint
from utils.helpers import format_percent, format_time


class Display:
    """Console output formatting"""

    # Color codes for terminal (if supported)
    COLORS = {
        'reset': '\033[0m',
        'bold': '\033[1m',
        'green': '\033[92m',
        'red': '\033[91m',
        'yellow': '\033[93m',
        'blue': '\033[94m',
        'cyan': '\033[96m',
    }

    def __init__(self, use_colors: bool = True, quiet: bool = False):
        """
        Initialize display

        Args:
            use_colors: Whether to use terminal colors
            quiet: Suppress info output (errors are still shown)
        """
        self.use_colors = use_colors
        self.quiet = quiet

    def _color(self, text: str, color: str) -> str:
        """Apply color to text if colors enabled"""
        if not self.use_colors:
            return text
        return f"{self.COLORS.get(color, '')}{text}{self.COLORS['reset']}"

    def _print(self, text: str = ""):
        if not self.quiet:
            print(text)

    def show_header(self, title: str):
        self._print("\n" + "=" * 60)
        self._print(self._color(f"  {title}", 'bold'))
        self._print("=" * 60)

    def show_config(self, config: dict):
        """Echo the resolved configuration"""
        for key in sorted(config):
            self._print(f"  {key}: {config[key]}")

    def show_success(self, message: str):
        """Display success message"""
        self._print(self._color(f"✓ {message}", 'green'))

    def show_error(self, message: str):
        """Display error message"""
        print(self._color(f"✗ {message}", 'red'))

    def show_warning(self, message: str):
        """Display warning message"""
        self._print(self._color(f"⚠ {message}", 'yellow'))

    def show_info(self, message: str):
        """Display info message"""
        self._print(self._color(message, 'cyan'))

    def show_training_result(self, train_accuracy: float, test_accuracy: float,
                             model_path: str, seconds: float):
        """
        Display training summary

        Args:
            train_accuracy: Accuracy on the training subset
            test_accuracy: Accuracy on the held-out subset
            model_path: Where the model was written
            seconds: Training time
        """
        self._print("\n" + "-" * 60)
        self._print(f"Train accuracy: {self._color(format_percent(train_accuracy), 'cyan')}")
        self._print(f"Test accuracy:  {self._color(format_percent(test_accuracy), 'cyan')}")
        self._print(f"Time: {format_time(seconds)}")
        self.show_success(f"Model saved to {model_path}")

    def show_attack_result(self, kind: str, count: int, l2_mean: float, linf_max: float,
                           out_dir: str):
        """Display adversarial-set statistics"""
        self._print("\n" + "-" * 60)
        self._print(f"Attack: {self._color(kind, 'cyan')}  examples: {count}")
        self._print(f"Mean L2: {l2_mean:.4f}  max Linf: {linf_max:.4f}")
        self.show_success(f"Adversarial set written to {out_dir}")

    def show_report(self, report: DefenseReport):
        """
        Display per-d defense success rates

        Args:
            report: Finished defense report
        """
        self._print("\n" + "=" * 60)
        self._print(self._color(
            f"DEFENSE: {report.dataset} / {report.attack.get('kind', '?')} "
            f"(n={report.n_adversarial})", 'bold'))
        self._print("=" * 60)
        self._print(f"Undefended accuracy: {format_percent(report.undefended_accuracy)}")
        self._print(f"{'d':>5}  {'mean':>8}  {'runs':<28} {'clean':>8}  {'flips':>7}  {'evals':>8}")
        for cell in report.cells:
            runs = " ".join(format_percent(rate, 1) for rate in cell.runs)
            clean = format_percent(cell.clean_accuracy) if cell.clean_accuracy is not None else "-"
            self._print(
                f"{cell.d:>5}  {self._color(f'{format_percent(cell.mean):>8}', 'green')}  "
                f"{runs:<28} {clean:>8}  {format_percent(cell.flip_rate, 0):>7}  "
                f"{cell.mean_evaluations:>8.0f}"
            )
        self._print(f"Wall time: {format_time(report.wall_time)}")

    def show_sweep(self, kind: str, points: List[SweepPoint]):
        """Display fooling rate per setting"""
        self._print("\n" + "-" * 60)
        self._print(self._color(f"{kind.upper()} fooling rate", 'bold'))
        for point in points:
            self._print(
                f"  eps={point.epsilon:<7g} iters={point.iterations:<4d} "
                f"{format_percent(point.fooling_rate):>8}  ({point.fooled}/{point.attempted})"
            )

    def show_dump_location(self, dump_dir: str):
        self.show_info(f"Image dumps (first {Settings.DUMP_LIMIT} per d) in {dump_dir}")
