"""Command-line front end.

The CLI is a thin client of the HTTP service: every command builds a request
(reading local files into the payload), sends it — by default to an
in-process instance of the app, or to ``--server URL`` — and writes the
returned artifacts under ``--out``.

Exit codes: 0 adversarial example found, 1 attack finished without one,
2 usage error, 3 oracle/transport failure.
"""

from __future__ import annotations

import base64
import csv
import json
import sys
from pathlib import Path
from typing import Optional

import click
import httpx

EXIT_NO_AE = 1
EXIT_USAGE = 2
EXIT_ORACLE = 3

REQUEST_TIMEOUT = None  # attacks are long-running jobs


class _LocalResponse:
    def __init__(self, status_code: int, body: dict):
        self.status_code = status_code
        self._body = body
        self.text = json.dumps(body)

    def json(self) -> dict:
        return self._body


class _LocalClient:
    """In-process stand-in for the HTTP client: requests go through the same
    pydantic models and endpoint handlers as over the wire, minus sockets."""

    def post(self, endpoint: str, json: dict) -> _LocalResponse:  # noqa: A002
        from fastapi import HTTPException
        from pydantic import ValidationError

        from .service import schemas
        from .service.app import ablate as ablate_endpoint
        from .service.app import attack as attack_endpoint
        from .service.app import batch as batch_endpoint

        endpoints = {
            "/attack": (schemas.AttackRequest, attack_endpoint),
            "/ablate": (schemas.AblateRequest, ablate_endpoint),
            "/batch": (schemas.BatchRequest, batch_endpoint),
        }
        model_cls, handler = endpoints[endpoint]
        try:
            request = model_cls(**json)
        except ValidationError as exc:
            return _LocalResponse(422, {"detail": str(exc)})
        try:
            response = handler(request)
        except HTTPException as exc:
            return _LocalResponse(exc.status_code, {"detail": exc.detail})
        return _LocalResponse(200, response.model_dump())

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False


def _client(server: Optional[str]):
    if server:
        return httpx.Client(base_url=server.rstrip("/"), timeout=REQUEST_TIMEOUT)
    return _LocalClient()


def _b64_file(path: Path) -> str:
    try:
        return base64.b64encode(path.read_bytes()).decode("ascii")
    except OSError as exc:
        raise click.UsageError(f"cannot read {path}: {exc}") from exc


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise click.UsageError(f"cannot read {path}: {exc}") from exc


def _oracle_payload(spec: str) -> dict:
    kind, sep, rest = spec.partition(":")
    if not sep or not rest:
        raise click.UsageError(
            f"bad --oracle {spec!r}: expected toy:FILE, cmd:COMMAND or replay:FILE"
        )
    if kind == "toy":
        return {"kind": "toy", "weights_text": _read_text(rest)}
    if kind == "cmd":
        return {"kind": "cmd", "command": rest}
    if kind == "replay":
        return {"kind": "replay", "replay_jsonl": _read_text(rest)}
    raise click.UsageError(f"unknown oracle kind {kind!r}")


def _mask_payload(mask: str) -> Optional[str]:
    if mask == "none":
        return None
    return _b64_file(Path(mask))


def _write_artifacts(artifacts: list[dict], out_dir: Path) -> None:
    for artifact in artifacts:
        target = out_dir / artifact["name"]
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(base64.b64decode(artifact["content_b64"]))


def _post(client: httpx.Client, endpoint: str, payload: dict) -> dict:
    try:
        response = client.post(endpoint, json=payload)
    except httpx.HTTPError as exc:
        raise click.ClickException(f"cannot reach the attack service: {exc}") from exc
    if response.status_code in (400, 422):
        detail = response.json().get("detail", response.text)
        raise click.UsageError(f"rejected request: {detail}")
    if response.status_code != 200:
        raise click.ClickException(f"service error {response.status_code}: {response.text}")
    return response.json()


run_options = [
    click.option("--pop", default=50, show_default=True, help="population size"),
    click.option("--gens", default=200, show_default=True, help="number of generations"),
    click.option("--alpha", default=0.2, show_default=True, help="initialization shrink factor"),
    click.option("--seed", default=0, show_default=True, help="root RNG seed"),
    click.option(
        "--optimizer",
        type=click.Choice(["psl", "nsga2"]),
        default="psl",
        show_default=True,
        help="search driver",
    ),
    click.option(
        "--threshold",
        default=0.2,
        show_default=True,
        help="relative salience cut for mask binarization (0 keeps every nonzero value)",
    ),
    click.option(
        "--select-norm",
        type=click.Choice(["l1", "l2"]),
        default="l1",
        show_default=True,
        help="norm minimized when picking the final adversarial example",
    ),
    click.option("--server", default=None, help="remote service URL (default: run in-process)"),
]


def add_options(options):
    def wrap(func):
        for option in reversed(options):
            func = option(func)
        return func

    return wrap


def _options_payload(pop, gens, alpha, seed, optimizer, threshold, select_norm, record=False):
    return {
        "pop": pop,
        "gens": gens,
        "alpha": alpha,
        "seed": seed,
        "optimizer": optimizer,
        "threshold": threshold,
        "select_norm": select_norm,
        "record_queries": record,
    }


@click.group()
def main():
    """Black-box adversarial attacks with attention-masked sparse
    multiobjective evolutionary search."""


@main.command()
@click.option("--image", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--mask", default="none", show_default=True, help="PGM saliency map, or 'none'")
@click.option("--oracle", "oracle_spec", required=True, help="toy:FILE | cmd:COMMAND | replay:FILE")
@click.option("--label", required=True, type=int, help="true class index")
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--record", is_flag=True, help="also save every oracle query to queries.jsonl")
@add_options(run_options)
def attack(image, mask, oracle_spec, label, out, record, pop, gens, alpha, seed,
           optimizer, threshold, select_norm, server):
    """Attack one image and write artifacts (CSV, PNG, report) to --out."""
    payload = {
        "image_png_b64": _b64_file(image),
        "mask_pgm_b64": _mask_payload(mask),
        "label": label,
        "oracle": _oracle_payload(oracle_spec),
        "options": _options_payload(
            pop, gens, alpha, seed, optimizer, threshold, select_norm, record
        ),
    }
    with _client(server) as client:
        body = _post(client, "/attack", payload)
    out.mkdir(parents=True, exist_ok=True)
    _write_artifacts(body["artifacts"], out)
    report = body["report"]
    click.echo(
        f"status={body['status']} d={report['mask']['d']} "
        f"queries={report.get('queries', {}).get('total', 'n/a')}"
    )
    if body["status"] == "oracle_failure":
        sys.exit(EXIT_ORACLE)
    if body["status"] == "no_adversarial":
        sys.exit(EXIT_NO_AE)


@main.command()
@click.option("--image", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--mask", default="none", show_default=True)
@click.option("--oracle", "oracle_spec", required=True)
@click.option("--label", required=True, type=int)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@click.option("--sweep", required=True, type=click.Choice(["attention", "alpha", "optimizer"]))
@click.option("--seeds", default="0", show_default=True, help="comma-separated seed list")
@add_options(run_options)
def ablate(image, mask, oracle_spec, label, out, sweep, seeds, pop, gens, alpha, seed,
           optimizer, threshold, select_norm, server):
    """Run an ablation sweep (attention on/off, alpha grid, or optimizer
    comparison) with common seeds."""
    try:
        seed_list = [int(s) for s in seeds.split(",") if s.strip()]
    except ValueError as exc:
        raise click.UsageError(f"bad --seeds {seeds!r}: {exc}") from exc
    if not seed_list:
        raise click.UsageError("--seeds must name at least one seed")
    payload = {
        "image_png_b64": _b64_file(image),
        "mask_pgm_b64": _mask_payload(mask),
        "label": label,
        "oracle": _oracle_payload(oracle_spec),
        "options": _options_payload(pop, gens, alpha, seed, optimizer, threshold, select_norm),
        "sweep": sweep,
        "seeds": seed_list,
    }
    with _client(server) as client:
        body = _post(client, "/ablate", payload)
    out.mkdir(parents=True, exist_ok=True)
    _write_artifacts(body["artifacts"], out)
    cells = ", ".join(body["summary"]["cells"])
    click.echo(f"sweep={sweep} cells=[{cells}] seeds={seed_list}")


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, path_type=Path),
              help="CSV with header image,label,mask (paths relative to the manifest)")
@click.option("--oracle", "oracle_spec", required=True)
@click.option("--out", required=True, type=click.Path(path_type=Path))
@add_options(run_options)
def batch(manifest, oracle_spec, out, pop, gens, alpha, seed, optimizer, threshold,
          select_norm, server):
    """Attack every image in a manifest and aggregate the results."""
    rows = []
    base = manifest.parent
    with open(manifest, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is not None and set(reader.fieldnames) != {"image", "label", "mask"}:
            raise click.UsageError(
                f"manifest header must be image,label,mask — got {reader.fieldnames}"
            )
        for i, row in enumerate(reader):
            image_path = base / row["image"]
            mask_field = (row.get("mask") or "").strip()
            rows.append(
                {
                    "name": Path(row["image"]).stem,
                    "image_png_b64": _b64_file(image_path),
                    "mask_pgm_b64": (
                        None
                        if mask_field in ("", "none")
                        else _b64_file(base / mask_field)
                    ),
                    "label": int(row["label"]),
                }
            )
    payload = {
        "rows": rows,
        "oracle": _oracle_payload(oracle_spec),
        "options": _options_payload(pop, gens, alpha, seed, optimizer, threshold, select_norm),
    }
    with _client(server) as client:
        body = _post(client, "/batch", payload)
    out.mkdir(parents=True, exist_ok=True)
    _write_artifacts(body["artifacts"], out)
    agg = body["report"]["aggregate"]
    click.echo(
        f"images={agg['images']} successes={agg['successes']} "
        f"post-attack accuracy={agg['post_attack_accuracy']:.2f} "
        f"mean l2={agg['mean_l2_success']} mean queries={agg['mean_queries_total']}"
    )


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8333, show_default=True)
def serve(host, port):
    """Run the attack service over HTTP."""
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
