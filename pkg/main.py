"""
Sensitive-pixel defense - Main Entry Point
"""

import sys
from typing import List, Optional

from ui.cli import PixelDefenseCLI


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point

    Flow:
    1. Parse subcommand and flags (config-file overlay applied first)
    2. Run the subcommand
    3. Map errors to exit codes (0 ok, 2 usage/config, 3 runtime)
    """
    return PixelDefenseCLI().run(argv)


if __name__ == "__main__":
    sys.exit(main())
