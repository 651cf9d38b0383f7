import logging
from contextlib import nullcontext
from typing import Dict, List, Sequence

from mfgc.config import LOG_LEVEL
from mfgc.utils.ui import UI


def configure_logging(level: str = LOG_LEVEL):
    """Attach a stderr handler to the mfgc logger tree."""
    root = logging.getLogger("mfgc")
    if not root.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)
    root.setLevel(level)


class Logger:
    """Logger that uses the console UI for experiment runs."""

    def __init__(self, quiet: bool = False):
        self.ui = UI()
        self.quiet = quiet
        self.log: List[str] = []

    def _keep(self, msg: str):
        self.log.append(msg)

    def log_header(self, msg: str):
        self._keep(msg)
        if not self.quiet:
            self.ui.print_header(msg)

    def log_cell_start(self, cell: str):
        self._keep(f"start {cell}")
        if not self.quiet:
            self.ui.print_cell_start(cell)

    def log_cell_done(self, cell: str, detail: str = "", ok: bool = True):
        self._keep(f"{'done' if ok else 'failed'} {cell} {detail}".rstrip())
        if not self.quiet:
            self.ui.print_cell_done(cell, detail, ok)

    def log_table(self, columns: Sequence[str], rows: List[Dict[str, object]]):
        self._keep(f"table {len(rows)} rows")
        if not self.quiet:
            self.ui.print_table(columns, rows)

    def log_summary(self, title: str, lines: Sequence[str]):
        """Printed even when quiet."""
        self.log.extend(lines)
        self.ui.print_summary(title, lines)

    def log_warning(self, message: str):
        self._keep(f"warning {message}")
        if not self.quiet:
            self.ui.print_warning(message)

    def log_error(self, message: str):
        self._keep(f"error {message}")
        self.ui.print_error(message)

    def progress(self, message: str, success_message: str = ""):
        """Return a progress context manager for showing loading states."""
        if self.quiet:
            return nullcontext()
        return self.ui.progress(message, success_message)
