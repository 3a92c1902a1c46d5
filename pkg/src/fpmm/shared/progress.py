"""Rich progress display for training, generation and dataset synthesis."""

from __future__ import annotations

import time

from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, MofNCompleteColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn

console = Console()


def _fmt_duration(seconds: float) -> str:
    """Format a duration in seconds as a human-readable string."""
    if seconds < 60:
        return f"{seconds:.1f}s"
    m, s = divmod(int(seconds), 60)
    return f"{m}m {s:02d}s"


class RunProgress:
    """Tracks the tasks of one long-running command using Rich."""

    def __init__(self, label: str = "Run", *, enabled: bool = True) -> None:
        self.label = label
        self._progress = Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            MofNCompleteColumn(),
            TimeElapsedColumn(),
            console=console,
            disable=not enabled,
        )
        self._task_ids: dict[str, int] = {}
        self._task_start: dict[str, float] = {}
        self._run_start: float = 0.0

    def __enter__(self) -> "RunProgress":
        self._run_start = time.monotonic()
        self._progress.__enter__()
        return self

    def __exit__(self, *args: object) -> None:
        elapsed = time.monotonic() - self._run_start
        self._progress.__exit__(*args)
        console.print(f"[bold]{self.label} completed in {_fmt_duration(elapsed)}[/bold]")

    def start_task(self, name: str, total: int | None = None) -> None:
        """Register and start tracking a task."""
        self._task_start[name] = time.monotonic()
        self._task_ids[name] = self._progress.add_task(f"[cyan]{name}[/]", total=total)
        self._progress.console.print(f"  [dim]→ {name} started[/]")

    def update_task(self, name: str, status: str = "", advance: int = 0) -> None:
        """Advance a task and update its status text."""
        if name in self._task_ids:
            description = f"[cyan]{name}[/]: {status}" if status else f"[cyan]{name}[/]"
            self._progress.update(self._task_ids[name], description=description, advance=advance)

    def finish_task(self, name: str) -> None:
        duration = _fmt_duration(time.monotonic() - self._task_start.get(name, time.monotonic()))
        if name in self._task_ids:
            self._progress.remove_task(self._task_ids.pop(name))
        self._progress.console.print(f"  [green]✓ {name} completed[/] [dim]({duration})[/]")

    def fail_task(self, name: str, error: str) -> None:
        duration = _fmt_duration(time.monotonic() - self._task_start.get(name, time.monotonic()))
        if name in self._task_ids:
            self._progress.remove_task(self._task_ids.pop(name))
        self._progress.console.print(f"  [red]✗ {name} failed[/] [dim]({duration}): {error}[/]")

    def log_event(self, name: str, message: str, style: str = "dim") -> None:
        """Print a persistent log line above the progress bars."""
        self._progress.console.print(f"  [{style}]{name}:[/] {message}")

    def print_phase(self, label: str) -> None:
        self._progress.console.print(Panel(f"[bold]{label}[/bold]", style="blue"))
