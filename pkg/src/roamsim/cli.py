"""Command-line front end.

``roamsim run`` is a thin client of the simulation service: it builds the
same request model the HTTP API accepts, executes it in-process (or against
a remote server with ``--server``), and writes the returned artifacts to
disk. Exit codes: 0 success, 1 scenario problem, 2 I/O problem.
"""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Optional

import click

from .scenario import ScenarioError
from .service import SimulateRequest, SimulateResponse, run_request

EXIT_OK = 0
EXIT_SCENARIO = 1
EXIT_IO = 2


def _read_scenario(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: cannot read {path}: {exc.strerror or exc}", err=True)
        sys.exit(EXIT_IO)


def _write(path: Optional[str], content: Optional[str]) -> None:
    if path is None or content is None:
        return
    try:
        Path(path).write_text(content, encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: cannot write {path}: {exc.strerror or exc}", err=True)
        sys.exit(EXIT_IO)


def _execute(request: SimulateRequest, server: Optional[str]) -> SimulateResponse:
    if server is None:
        return run_request(request)
    import httpx

    reply = httpx.post(f"{server.rstrip('/')}/simulate", json=request.model_dump(), timeout=120.0)
    if reply.status_code == 400:
        detail = reply.json().get("detail", {})
        raise ScenarioError(detail.get("message", "scenario rejected"), detail.get("line"))
    reply.raise_for_status()
    return SimulateResponse.model_validate(reply.json())


@click.group()
def main() -> None:
    """Simulate a roaming wireless hotspot from a scenario file."""


@main.command()
@click.argument("scenario_file", type=str)
@click.option("--seed", type=int, default=None, help="Override the scenario's seed.")
@click.option("--csv", "csv_path", type=str, default=None, help="Write the per-second metrics CSV here.")
@click.option("--frames", "frames_path", type=str, default=None, help="Write the frame trace here.")
@click.option("--leases", "leases_path", type=str, default=None, help="Write the final lease table here.")
@click.option("--summary", is_flag=True, help="Print the regime table and handoff report.")
@click.option("--server", type=str, default=None, help="Run on a remote service instead of in-process.")
def run(scenario_file, seed, csv_path, frames_path, leases_path, summary, server) -> None:
    """Run one scenario and emit the requested artifacts."""
    text = _read_scenario(scenario_file)
    request = SimulateRequest(
        scenario=text,
        seed=seed,
        include_csv=csv_path is not None,
        include_frames=frames_path is not None,
        include_leases=leases_path is not None,
    )
    try:
        response = _execute(request, server)
    except ScenarioError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_SCENARIO)
    _write(csv_path, response.csv)
    _write(frames_path, response.frames)
    _write(leases_path, response.leases)
    if summary:
        click.echo(response.summary_text, nl=False)
    sys.exit(EXIT_OK)


@main.command()
@click.argument("scenario_file", type=str)
@click.option("--server", type=str, default=None, help="Validate on a remote service.")
def validate(scenario_file, server) -> None:
    """Check a scenario file without running it."""
    text = _read_scenario(scenario_file)
    if server is None:
        from .scenario import parse_scenario

        try:
            parse_scenario(text)
        except ScenarioError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_SCENARIO)
    else:
        import httpx

        reply = httpx.post(f"{server.rstrip('/')}/validate", json={"scenario": text}, timeout=30.0)
        reply.raise_for_status()
        body = reply.json()
        if not body["valid"]:
            line = body.get("line")
            prefix = f"line {line}: " if line is not None else ""
            click.echo(f"error: {prefix}{body.get('message')}", err=True)
            sys.exit(EXIT_SCENARIO)
    click.echo("ok")
    sys.exit(EXIT_OK)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port) -> None:
    """Start the HTTP simulation service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
