"""Progress display module for rich progress tracking of simulation runs."""
import sys
import time

from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn, TimeRemainingColumn

console = Console(legacy_windows=(sys.platform == "win32"))

REFRESH_INTERVAL_S = 0.1


def format_virtual_time(time_us: int) -> str:
    """Format virtual microseconds for display, e.g. 1_500_000 -> "1.50 s"."""
    if time_us < 1_000_000:
        return f"{time_us / 1000:.0f} ms"
    if time_us < 60_000_000:
        return f"{time_us / 1_000_000:.2f} s"
    return f"{time_us / 60_000_000:.1f} min"


class _ThrottledBar:
    """
    One rich task whose redraws are capped at ten per second.

    A disabled bar accepts every call and draws nothing; nothing here feeds
    back into the simulation.
    """

    def __init__(self, description: str, total: int, enabled: bool, *extra_columns, **fields):
        self.total = total
        self.completed = 0
        self.enabled = enabled
        self._last_refresh = 0.0
        self.progress = Progress(
            SpinnerColumn(),
            TextColumn("[bold blue]{task.description}"),
            BarColumn(bar_width=40),
            TaskProgressColumn(),
            *extra_columns,
            TimeRemainingColumn(),
            console=console,
            disable=not enabled,
        )
        self.task_id = self.progress.add_task(description, total=total, **fields)

    def __enter__(self):
        if self.enabled:
            self.progress.start()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if self.enabled:
            self.progress.update(self.task_id, completed=self.completed)
            self.progress.stop()

    def _refresh(self, **fields) -> None:
        if not self.enabled:
            return
        now = time.monotonic()
        if self.completed == self.total or now - self._last_refresh >= REFRESH_INTERVAL_S:
            self._last_refresh = now
            self.progress.update(self.task_id, completed=self.completed, **fields)


class SimulationProgressDisplay(_ThrottledBar):
    """Progress bar over completed operations, with the current virtual time."""

    def __init__(self, description: str, total: int, enabled: bool = True):
        super().__init__(description, total, enabled,
                         TextColumn("[dim]t={task.fields[virtual]}[/dim]"),
                         virtual=format_virtual_time(0))

    def update(self, record) -> None:
        """Count one finished operation (an OpRecord)."""
        self.completed += 1
        self._refresh(virtual=format_virtual_time(record.end_us))


class SimpleProgressDisplay(_ThrottledBar):
    """Plain counter bar for setup steps such as building routing tables."""

    def __init__(self, description: str, total: int, enabled: bool = True):
        super().__init__(description, total, enabled)

    def update(self, completed: int) -> None:
        self.completed = completed
        self._refresh()
