"""
Text-based visualization for the command-line lab.
This module renders scenario listings, run records and pass/fail summaries.
"""

import os
import textwrap
from typing import Any, Dict, List, Optional

from colorama import init, Fore, Style, Back

# Initialize colorama for cross-platform color support
init()


class TextVisualizer:
    """Terminal rendering for experiment records and summaries."""

    def __init__(self, use_color: bool = True):
        """
        Initialize the text visualizer

        Args:
            use_color: Whether to use colored output (default: True)
        """
        self.use_color = use_color
        self.terminal_width = self._get_terminal_width()

    def _get_terminal_width(self) -> int:
        """
        Get the terminal width, with fallback for non-terminal environments

        Returns:
            int: Terminal width
        """
        try:
            return os.get_terminal_size().columns
        except (AttributeError, OSError):
            return 80

    def get_color(self, color_name: str) -> str:
        """
        Get ANSI color code for a named color

        Args:
            color_name: Name of the color (reset, success, error, warning, highlight, info, data)

        Returns:
            ANSI color code string
        """
        color_map = {
            'reset': Style.RESET_ALL,
            'success': Fore.GREEN,
            'error': Fore.RED,
            'warning': Fore.YELLOW,
            'highlight': Fore.CYAN + Style.BRIGHT,
            'info': Fore.BLUE,
            'data': Fore.WHITE + Style.BRIGHT,
        }

        if not self.use_color:
            return ""

        return color_map.get(color_name.lower(), Style.RESET_ALL)

    def _format_text(self, text: str, color: str = "", style: str = "", max_width: int = 0) -> str:
        """
        Format text with color and style

        Args:
            text: Text to format
            color: Color to use (from colorama.Fore)
            style: Style to use (from colorama.Style)
            max_width: Maximum width for text wrapping

        Returns:
            Formatted text
        """
        if max_width:
            text = textwrap.fill(text, width=max_width)

        if not self.use_color:
            return text

        formatted = ""
        if color:
            formatted += getattr(Fore, color.upper())
        if style:
            formatted += getattr(Style, style.upper())

        formatted += text + Style.RESET_ALL
        return formatted

    def print_header(self, text: str, width: int = 0):
        if width == 0:
            width = self.terminal_width

        print()
        if self.use_color:
            print(Back.BLUE + Fore.WHITE + text.center(width) + Style.RESET_ALL)
        else:
            print(text.center(width))
            print("=" * width)
        print()

    def print_section(self, title: str):
        print()
        if self.use_color:
            print(Fore.CYAN + Style.BRIGHT + title + Style.RESET_ALL)
            print(Fore.CYAN + "-" * len(title) + Style.RESET_ALL)
        else:
            print(title)
            print("-" * len(title))

    def _status(self, passed: Optional[bool]) -> str:
        if passed is None:
            return self._format_text("INFO", "YELLOW", "BRIGHT")
        if passed:
            return self._format_text("PASS", "GREEN", "BRIGHT")
        return self._format_text("FAIL", "RED", "BRIGHT")

    def display_registry(self, scenarios: Dict[str, str]):
        """
        List the registered scenarios

        Args:
            scenarios: Mapping of scenario name to one-line description
        """
        self.print_header("Registered Scenarios")
        name_width = max((len(name) for name in scenarios), default=0) + 2
        for name, description in scenarios.items():
            wrapped = textwrap.fill(description, width=max(20, self.terminal_width - name_width - 2),
                                    subsequent_indent=" " * name_width)
            print(self._format_text(name.ljust(name_width), "CYAN", "BRIGHT") + wrapped)

    def display_record(self, record: Dict[str, Any]):
        """
        Display a single experiment record

        Args:
            record: ExperimentRecord as a dictionary
        """
        self.print_header(f"Scenario: {record.get('scenario', 'unknown')}")
        print(f"Config hash: {record.get('config_hash', '')[:12]}")
        print(f"Seed: {record.get('seed')}")
        print(f"Runtime: {record.get('runtime', 0.0):.2f} s")
        print(f"Theorem bound: {record.get('theorem_bound')}")
        print(f"Measured: {record.get('measured')}")
        print(f"Margin: {record.get('margin')}")
        print(f"Result: {self._status(record.get('passed'))}")

        exceptions = record.get("exceptions") or []
        if exceptions:
            self.print_section("Exceptional Parameters")
            display_count = min(10, len(exceptions))
            for entry in exceptions[:display_count]:
                print(f"  - {entry}")
            if len(exceptions) > display_count:
                print(f"  ... and {len(exceptions) - display_count} more")

        notes = record.get("notes") or []
        if notes:
            self.print_section("Notes")
            for note in notes:
                print(self._format_text(note, max_width=self.terminal_width - 4))

    def display_summary(self, summary: Dict[str, Any]):
        """
        Display the pass/fail table produced by ``report``

        Args:
            summary: Summary document with ``rows``, ``passed`` and ``total``
        """
        self.print_header("Experiment Summary")
        rows: List[Dict[str, Any]] = summary.get("rows", [])
        if not rows:
            print(self._format_text("No records to report.", "YELLOW", "BRIGHT"))
            return

        name_width = max(len("scenario"), max(len(r["scenario"]) for r in rows)) + 2
        print(f"{'scenario'.ljust(name_width)}{'bound':>12}{'measured':>12}{'margin':>12}  status")
        print("-" * (name_width + 44))
        for row in rows:
            print(f"{row['scenario'].ljust(name_width)}"
                  f"{_fmt(row.get('theorem_bound')):>12}{_fmt(row.get('measured')):>12}"
                  f"{_fmt(row.get('margin')):>12}  {self._status(row.get('passed'))}")

        passed, total = summary.get("passed", 0), summary.get("total", 0)
        color = "GREEN" if passed == total else "RED"
        print()
        print(self._format_text(f"Passed: {passed}/{total}", color, "BRIGHT"))

    def display_progress(self, current: int, total: int, label: str = "", bar_length: int = 30) -> str:
        """
        Build a one-line progress bar

        Args:
            current: Samples finished
            total: Samples scheduled
            label: Text shown after the counts
            bar_length: Length of the bar in characters

        Returns:
            Formatted progress string
        """
        percentage = int(100 * current / total) if total > 0 else 0
        filled = int(bar_length * current // total) if total > 0 else 0
        bar = '█' * filled + '░' * (bar_length - filled)
        color = "GREEN" if percentage >= 100 else "BLUE"
        return f"[{self._format_text(bar, color)}] {percentage}% ({current}/{total}) {label}".rstrip()


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.4g}"
    return "-" if value is None else str(value)
