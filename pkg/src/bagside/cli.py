"""Command-line front end.

Every subcommand is a thin client of the HTTP service: by default the
request runs against an in-process application instance, `--server`
points it at a remote one instead. Exit codes: 0 success, 2 input or
config error, 3 divergence, 4 evaluation infeasible, 64 usage.
"""

from __future__ import annotations

import asyncio
import sys

import click
import httpx

from .errors import BagsideError

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DIVERGED = 3
EXIT_INFEASIBLE = 4
EXIT_USAGE = 64

_CATEGORY_EXITS = {"input": EXIT_INPUT, "diverged": EXIT_DIVERGED, "infeasible": EXIT_INFEASIBLE}


class RemoteError(Exception):
    """Service-reported failure carrying its error category."""

    def __init__(self, kind: str, category: str, message: str):
        super().__init__(message)
        self.kind = kind
        self.category = category
        self.message = message


class ServiceClient:
    """POSTs run requests either in-process or to `--server`."""

    def __init__(self, server: str | None = None):
        self.server = server.rstrip("/") if server else None

    def post(self, path: str, payload: dict) -> dict:
        if self.server:
            try:
                with httpx.Client(base_url=self.server, timeout=None) as client:
                    resp = client.post(path, json=payload)
            except httpx.HTTPError as e:
                raise RemoteError("ConnectionFailed", "input",
                                  f"cannot reach {self.server}: {e}") from e
        else:
            resp = asyncio.run(self._post_in_process(path, payload))
        return self._unwrap(resp)

    @staticmethod
    async def _post_in_process(path: str, payload: dict) -> httpx.Response:
        from .service import create_app

        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(transport=transport,
                                     base_url="http://bagside.internal",
                                     timeout=None) as client:
            return await client.post(path, json=payload)

    @staticmethod
    def _unwrap(resp: httpx.Response) -> dict:
        if resp.status_code == 200:
            return resp.json()
        try:
            body = resp.json()
        except ValueError:
            body = {}
        err = body.get("error")
        if isinstance(err, dict) and {"kind", "category", "message"} <= set(err):
            raise RemoteError(err["kind"], err["category"], err["message"])
        raise RemoteError("HTTPError", "input",
                          f"service returned {resp.status_code}: {resp.text[:500]}")


def _payload(config_file, **fields) -> dict:
    body = {k: v for k, v in fields.items() if v is not None}
    if config_file is not None:
        body["config_file"] = config_file
    return body


def _require_sources(config_file, **required) -> None:
    """Usage error when a required value has neither a flag nor a config file."""
    if config_file is not None:
        return
    missing = [flag for flag, value in required.items() if value is None]
    if missing:
        raise click.UsageError("missing option(s): " + ", ".join(missing))


_server_option = click.option("--server", default=None, metavar="URL",
                              help="Send requests to a running service instead of in-process.")
_config_option = click.option("--config", "config_file", default=None, metavar="PATH",
                              help="JSON run-config file; flags override its values.")
_seed_option = click.option("--seed", type=int, default=None, help="Master random seed.")
_out_option = click.option("--out", "out_dir", default=None, metavar="DIR",
                           help="Output directory.")


@click.group()
def cli():
    """Bag-level relation extraction toolkit."""


@cli.command()
@click.option("--bags", "bags_test", default=None, metavar="PATH", help="Bags JSONL file.")
@click.option("--embeddings", default=None, metavar="PATH", help="Sentence embedding file.")
@click.option("--vocab-dir", default=None, metavar="DIR", help="Directory of vocab text files.")
@click.option("--alias-vectors", default=None, metavar="PATH",
              help="Alias phrase embedding file to cross-check.")
@_config_option
@_seed_option
@_server_option
def validate(bags_test, embeddings, vocab_dir, alias_vectors, config_file, seed, server):
    """Parse inputs and print corpus statistics."""
    _require_sources(config_file, **{"--bags": bags_test, "--embeddings": embeddings,
                                     "--vocab-dir": vocab_dir})
    result = ServiceClient(server).post("/validate", _payload(
        config_file, bags_test=bags_test, embeddings=embeddings,
        vocab_dir=vocab_dir, alias_vectors=alias_vectors, seed=seed))
    click.echo(f"bags={result['bags']} sentences={result['sentences']} "
               f"relations={result['relations']} "
               f"embedding_rows={result['embedding_rows']} "
               f"embedding_dim={result['embedding_dim']}")
    for name, count in result["relation_histogram"].items():
        click.echo(f"rel {name}: {count}")


def _train_flags(f):
    for option in (
        click.option("--bags-train", default=None, metavar="PATH"),
        click.option("--bags-valid", default=None, metavar="PATH"),
        click.option("--embeddings", default=None, metavar="PATH"),
        click.option("--vocab-dir", default=None, metavar="DIR"),
        click.option("--u1", type=int, default=None),
        click.option("--a1", default=None),
        click.option("--p1", type=float, default=None),
        click.option("--u2", type=int, default=None),
        click.option("--a2", default=None),
        click.option("--p2", type=float, default=None),
        click.option("--optimizer", default=None),
        click.option("--lr", type=float, default=None),
        click.option("--batch-size", type=int, default=None),
        click.option("--max-epochs", type=int, default=None),
        click.option("--patience", type=int, default=None),
    ):
        f = option(f)
    return f


@cli.command()
@_train_flags
@_config_option
@_seed_option
@_out_option
@_server_option
def train(config_file, seed, out_dir, server, **flags):
    """Train a model and write its checkpoint and history."""
    _require_sources(config_file,
                     **{"--bags-train": flags["bags_train"],
                        "--bags-valid": flags["bags_valid"],
                        "--embeddings": flags["embeddings"],
                        "--vocab-dir": flags["vocab_dir"],
                        "--out": out_dir})
    result = ServiceClient(server).post("/train", _payload(
        config_file, seed=seed, out_dir=out_dir, **flags))
    click.echo(f"checkpoint={result['checkpoint']}")
    click.echo(f"history={result['history']}")
    click.echo(f"epochs={result['epochs']} best_epoch={result['best_epoch']} "
               f"valid_accuracy={result['valid_accuracy']:.6f}")


@cli.command()
@_train_flags
@click.option("--trials", type=click.IntRange(min=1), default=10, show_default=True)
@_config_option
@_seed_option
@_out_option
@_server_option
def tune(config_file, seed, out_dir, server, trials, **flags):
    """Random hyperparameter search; writes a trial log and best config."""
    _require_sources(config_file,
                     **{"--bags-train": flags["bags_train"],
                        "--bags-valid": flags["bags_valid"],
                        "--embeddings": flags["embeddings"],
                        "--vocab-dir": flags["vocab_dir"],
                        "--out": out_dir})
    result = ServiceClient(server).post("/tune", _payload(
        config_file, trials=trials, seed=seed, out_dir=out_dir, **flags))
    click.echo(f"trials={result['trials']}")
    click.echo(f"best_config={result['best_config']}")
    click.echo(f"best_accuracy={result['best_accuracy']:.6f}")


def _eval_flags(f):
    for option in (
        click.option("--checkpoint", required=True, metavar="PATH"),
        click.option("--bags", "bags_test", default=None, metavar="PATH"),
        click.option("--embeddings", default=None, metavar="PATH"),
        click.option("--vocab-dir", default=None, metavar="DIR"),
    ):
        f = option(f)
    return f


def _split_csv(value: str, cast):
    items = [part.strip() for part in value.split(",") if part.strip()]
    if not items:
        raise click.UsageError(f"empty list value: {value!r}")
    try:
        return [cast(part) for part in items]
    except ValueError:
        raise click.UsageError(f"bad list value: {value!r}") from None


@cli.command(name="eval")
@_eval_flags
@click.option("--mode", default="one,two,all", show_default=True,
              help="Comma-separated subsampling modes.")
@click.option("--n", "ns", default="100,200,300", show_default=True,
              help="Comma-separated precision cutoffs.")
@click.option("--eval-seed", type=int, default=None)
@_config_option
@_seed_option
@_out_option
@_server_option
def eval_cmd(checkpoint, bags_test, embeddings, vocab_dir, mode, ns,
             eval_seed, config_file, seed, out_dir, server):
    """Precision@N table for a trained checkpoint."""
    _require_sources(config_file, **{"--bags": bags_test, "--embeddings": embeddings,
                                     "--vocab-dir": vocab_dir, "--out": out_dir})
    result = ServiceClient(server).post("/eval", _payload(
        config_file, checkpoint=checkpoint, bags_test=bags_test,
        embeddings=embeddings, vocab_dir=vocab_dir, out_dir=out_dir,
        seed=seed, eval_seed=eval_seed,
        modes=_split_csv(mode, str), ns=_split_csv(ns, int)))
    for row in result["rows"]:
        click.echo(f"{row['mode']},{row['n']},{row['precision']:.17g}")
    click.echo(f"bag_accuracy={result['bag_accuracy']:.6f}")
    click.echo(f"pn={result['pn']}")


@cli.command(name="pr-curve")
@_eval_flags
@_config_option
@_seed_option
@_out_option
@_server_option
def pr_curve_cmd(checkpoint, bags_test, embeddings, vocab_dir,
                 config_file, seed, out_dir, server):
    """Precision-recall curve CSV and its AUC."""
    _require_sources(config_file, **{"--bags": bags_test, "--embeddings": embeddings,
                                     "--vocab-dir": vocab_dir, "--out": out_dir})
    result = ServiceClient(server).post("/pr-curve", _payload(
        config_file, checkpoint=checkpoint, bags_test=bags_test,
        embeddings=embeddings, vocab_dir=vocab_dir, out_dir=out_dir, seed=seed))
    click.echo(f"points={result['points']} positives={result['positives']} "
               f"auc={result['auc']:.17g}")
    click.echo(f"pr={result['pr']}")


@cli.command()
@_eval_flags
@_config_option
@_seed_option
@_out_option
@_server_option
def predict(checkpoint, bags_test, embeddings, vocab_dir,
            config_file, seed, out_dir, server):
    """Per-bag predicted relation and confidence."""
    _require_sources(config_file, **{"--bags": bags_test, "--embeddings": embeddings,
                                     "--vocab-dir": vocab_dir, "--out": out_dir})
    result = ServiceClient(server).post("/predict", _payload(
        config_file, checkpoint=checkpoint, bags_test=bags_test,
        embeddings=embeddings, vocab_dir=vocab_dir, out_dir=out_dir, seed=seed))
    click.echo(f"predictions={result['predictions']} rows={len(result['rows'])}")


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


def main(argv=None) -> int:
    """Run the CLI and translate failures into the exit-code contract."""
    try:
        cli.main(args=argv, prog_name="bagside", standalone_mode=False)
        return EXIT_OK
    except click.exceptions.NoArgsIsHelpError as e:
        click.echo(e.format_message())
        return EXIT_OK
    except click.UsageError as e:
        click.echo(f"usage error: {e.format_message()}", err=True)
        return EXIT_USAGE
    except click.ClickException as e:
        e.show()
        return EXIT_INPUT
    except click.exceptions.Abort:
        return 130
    except RemoteError as e:
        click.echo(f"error [{e.category}/{e.kind}]: {e.message}", err=True)
        return _CATEGORY_EXITS.get(e.category, EXIT_INPUT)
    except BagsideError as e:
        click.echo(f"error [{e.category}/{type(e).__name__}]: {e}", err=True)
        return _CATEGORY_EXITS.get(e.category, EXIT_INPUT)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
