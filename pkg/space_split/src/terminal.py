"""Terminal utility for colored status output."""

import os
import sys


class ColorPrinter:
    """
    Utility for printing colored text to the terminal using ANSI escape codes.

    Colouring is dropped when stdout is not a terminal or NO_COLOR is set, so
    redirected run logs stay plain text.
    """

    # ANSI Color Codes
    HEADER = "\033[95m"
    BLUE = "\033[94m"
    CYAN = "\033[96m"
    GREEN = "\033[92m"
    YELLOW = "\033[93m"
    RED = "\033[91m"
    RESET = "\033[0m"
    BOLD = "\033[1m"

    enabled = sys.stdout.isatty() and "NO_COLOR" not in os.environ

    @staticmethod
    def _paint(color, text):
        if not ColorPrinter.enabled:
            return text
        return f"{color}{text}{ColorPrinter.RESET}"

    @staticmethod
    def info(message):
        """Print an informational message in blue."""
        print(ColorPrinter._paint(ColorPrinter.BLUE, f"[INFO] {message}"))

    @staticmethod
    def success(message):
        """Print a success message in green."""
        print(ColorPrinter._paint(ColorPrinter.GREEN, f"[SUCCESS] {message}"))

    @staticmethod
    def warning(message):
        """Print a warning message in yellow."""
        print(ColorPrinter._paint(ColorPrinter.YELLOW, f"[WARNING] {message}"))

    @staticmethod
    def error(message):
        """Print an error message in red to stderr."""
        print(ColorPrinter._paint(ColorPrinter.RED, f"[ERROR] {message}"), file=sys.stderr)

    @staticmethod
    def header(message):
        """Print a bold header message in magenta."""
        bar = "=" * 60
        print(ColorPrinter._paint(ColorPrinter.HEADER + ColorPrinter.BOLD, f"\n{bar}\n   {message.upper()}\n{bar}\n"))

    @staticmethod
    def cyan(message):
        """Print a message in cyan."""
        print(ColorPrinter._paint(ColorPrinter.CYAN, message))

    @staticmethod
    def progress(label, done, total):
        """Print a one-line progress update, e.g. ``[run seed=3] 40% (400000/1000000)``."""
        pct = 100.0 * done / total if total else 100.0
        print(ColorPrinter._paint(ColorPrinter.CYAN, f"[{label}] {pct:3.0f}% ({done}/{total})"), flush=True)
