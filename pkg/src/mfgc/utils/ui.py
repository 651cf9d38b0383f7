import sys
import threading
import time
from contextlib import contextmanager
from typing import Dict, List, Optional, Sequence

from mfgc.config import NO_COLOR


class Colors:
    BLUE = "\033[94m"
    CYAN = "\033[96m"
    GREEN = "\033[92m"
    YELLOW = "\033[93m"
    RED = "\033[91m"
    ENDC = "\033[0m"
    BOLD = "\033[1m"
    DIM = "\033[2m"

    @classmethod
    def disable(cls):
        """Blank every escape sequence (MFGC_NO_COLOR or a non-terminal stdout)."""
        for name in ("BLUE", "CYAN", "GREEN", "YELLOW", "RED", "ENDC", "BOLD", "DIM"):
            setattr(cls, name, "")


if NO_COLOR or not sys.stdout.isatty():
    Colors.disable()

BAR = "│"
BOX_WIDTH = 80


def _bar() -> str:
    return f"{Colors.BLUE}{BAR}{Colors.ENDC}"


class Spinner:
    """Braille spinner on its own thread; without a terminal only the final line is printed."""

    FRAMES = "⠋⠙⠹⠸⠼⠴⠦⠧⠇⠏"
    INTERVAL = 0.08

    def __init__(self, message: str = "", color: str = Colors.CYAN):
        self.message = message
        self.color = color
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def _spin(self):
        frame = 0
        while not self._stop.wait(self.INTERVAL):
            glyph = self.FRAMES[frame % len(self.FRAMES)]
            sys.stdout.write(f"\r{self.color}{glyph}{Colors.ENDC} {self.message}")
            sys.stdout.flush()
            frame += 1

    def start(self):
        if self._thread is None and sys.stdout.isatty():
            self._thread = threading.Thread(target=self._spin, daemon=True)
            self._thread.start()

    def stop(self, final_message: str = "", ok: bool = True):
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
            self._thread = None
            sys.stdout.write("\r" + " " * (len(self.message) + 4) + "\r")
        if final_message:
            mark = f"{Colors.GREEN}✓" if ok else f"{Colors.RED}✗"
            print(f"{mark}{Colors.ENDC} {final_message}")
        sys.stdout.flush()


class UI:
    """Console output for experiment runs: header, cell lines, result table and summary box."""

    @contextmanager
    def progress(self, message: str, success_message: str = ""):
        spinner = Spinner(message)
        spinner.start()
        try:
            yield spinner
        except Exception as e:
            spinner.stop(f"Failed: {e}", ok=False)
            raise
        spinner.stop(success_message or message.replace("...", ""))

    def print_header(self, text: str):
        print(f"\n{Colors.BOLD}{Colors.BLUE}╭─ {text}{Colors.ENDC}")

    def print_cell_start(self, cell: str):
        print(f"{_bar()} {Colors.CYAN}▶{Colors.ENDC} {cell}")

    def print_cell_done(self, cell: str, detail: str = "", ok: bool = True):
        mark = f"{Colors.GREEN}✓{Colors.ENDC}" if ok else f"{Colors.RED}✗{Colors.ENDC}"
        suffix = f" {Colors.DIM}{BAR} {detail}{Colors.ENDC}" if detail else ""
        print(f"{_bar()} {mark} {cell}{suffix}")

    def print_table(self, columns: Sequence[str], rows: List[Dict[str, object]], max_rows: int = 40):
        """Right-aligned columns, floats in %.4g, at most max_rows rows."""

        def fmt(value) -> str:
            if value is None:
                return ""
            return f"{value:.4g}" if isinstance(value, float) else str(value)

        shown = [[fmt(row.get(c)) for c in columns] for row in rows[:max_rows]]
        widths = [max([len(c)] + [len(r[k]) for r in shown]) for k, c in enumerate(columns)]
        for cells in [list(columns)] + shown:
            print(f"{_bar()} " + "  ".join(v.rjust(w) for v, w in zip(cells, widths)))
        if len(rows) > max_rows:
            print(f"{_bar()} {Colors.DIM}... {len(rows) - max_rows} more rows{Colors.ENDC}")
        print(f"{Colors.BLUE}╰{'─' * 50}{Colors.ENDC}")

    def print_summary(self, title: str, lines: Sequence[str]):
        inner = BOX_WIDTH - 2
        edge = f"{Colors.BOLD}{Colors.BLUE}"
        print(f"\n{edge}╔{'═' * inner}╗{Colors.ENDC}")
        print(f"{edge}║{title[:inner].center(inner)}║{Colors.ENDC}")
        print(f"{Colors.BLUE}╠{'═' * inner}╣{Colors.ENDC}")
        for line in lines:
            print(f"{Colors.BLUE}║{Colors.ENDC} {line[:inner - 2].ljust(inner - 2)} {Colors.BLUE}║{Colors.ENDC}")
        print(f"{edge}╚{'═' * inner}╝{Colors.ENDC}\n")

    def print_error(self, message: str):
        print(f"{Colors.RED}✗ Error:{Colors.ENDC} {message}", file=sys.stderr)

    def print_warning(self, message: str):
        print(f"{Colors.YELLOW}⚠ Warning:{Colors.ENDC} {message}")
