"""Command-line client for the experiment service.

By default experiments run in-process through the same handlers the HTTP
service exposes; pass --server to submit the request to a running service
instead.  Results land in --out as JSON or CSV.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from .experiments import (RUNNERS, ConfigError, ExperimentConfig, RunRecord,
                          emit)

EXPERIMENTS = ("h2-curve", "tfim-matrix", "tfim-truncation",
               "tfim-correlations", "scaling")


def _load_config(config_path, seed, repeats) -> ExperimentConfig:
    if config_path:
        cfg = ExperimentConfig.from_file(config_path)
    else:
        cfg = ExperimentConfig()
    return cfg.with_overrides(**{"backend.seed": seed, "repeats": repeats})


def _execute(name: str, cfg: ExperimentConfig, server: str | None) -> RunRecord:
    if server is None:
        return RUNNERS[name](cfg)
    import httpx

    response = httpx.post(f"{server.rstrip('/')}/experiments/{name}",
                          json={"config": cfg.model_dump()}, timeout=None)
    if response.status_code != 200:
        raise click.ClickException(
            f"server returned {response.status_code}: {response.text}")
    return RunRecord.from_json_dict(response.json())


def _experiment_command(name: str):
    @click.command(name=name, help=f"Run the {name} experiment.")
    @click.option("--config", "config_path", type=click.Path(exists=True),
                  default=None, help="YAML/JSON experiment config.")
    @click.option("--seed", type=int, default=None, help="Master seed override.")
    @click.option("--repeats", type=int, default=None, help="Repeat count override.")
    @click.option("--out", "out_dir", type=click.Path(), default=".",
                  help="Output directory.")
    @click.option("--format", "fmt", type=click.Choice(["json", "csv"]),
                  default="json", help="Output format.")
    @click.option("--server", default=None,
                  help="Submit to a running service, e.g. http://localhost:8000.")
    def command(config_path, seed, repeats, out_dir, fmt, server):
        try:
            cfg = _load_config(config_path, seed, repeats)
            record = _execute(name, cfg, server)
            paths = emit(record, fmt, out_dir)
        except (ConfigError, ValueError) as exc:
            raise click.ClickException(str(exc)) from exc
        for path in paths:
            click.echo(f"wrote {path}")
        for key, value in record.summary.items():
            click.echo(f"{key}: {value}")

    return command


@click.group()
def main():
    """Projective quantum eigensolver experiments."""


for _name in EXPERIMENTS:
    main.add_command(_experiment_command(_name))


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--qubits", type=int, default=None,
              help="Register size (defaults to the configured model size).")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default=".")
@click.option("--server", default=None)
def calibrate(config_path, qubits, seed, out_dir, server):
    """Measure a readout calibration matrix under the configured noise."""
    import json

    import numpy as np

    try:
        cfg = _load_config(config_path, seed, None)
        n = qubits if qubits is not None else (
            1 if cfg.model.kind == "h2" else cfg.model.n_sites)
        if server is None:
            from .backends import Sampler
            from .mitigation import calibrate_readout

            sampler = Sampler(noise=cfg.backend.noise.to_noise_spec(),
                              rng=np.random.default_rng(cfg.backend.seed))
            cal = calibrate_readout(sampler, n, cfg.backend.shots,
                                    cfg.mitigation.calibration_magnification)
            payload = cal.to_json_dict()
        else:
            import httpx

            response = httpx.post(
                f"{server.rstrip('/')}/calibration",
                json={"n_qubits": n, "shots": cfg.backend.shots,
                      "magnification": cfg.mitigation.calibration_magnification,
                      "seed": cfg.backend.seed,
                      "noise": cfg.backend.noise.model_dump()},
                timeout=None)
            if response.status_code != 200:
                raise click.ClickException(
                    f"server returned {response.status_code}: {response.text}")
            payload = response.json()
    except (ConfigError, ValueError) as exc:
        raise click.ClickException(str(exc)) from exc
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "calibration.json"
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    click.echo(f"wrote {path}")


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    uvicorn.run("pqelab.service:app", host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())
