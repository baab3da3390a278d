"""Command-line surface: thin wrappers over the pipeline layer.

Exit codes: 0 success, 2 usage or validation error, 3 data/file-format error,
4 internal invariant violation. All randomness derives from --seed.
"""

from __future__ import annotations

import functools
import sys
from pathlib import Path

import click

from . import __version__
from .config import EngineConfig, validate_config
from .datagen import GenConfig
from .errors import (
    ConfigError,
    DataError,
    FormatError,
    InternalError,
    ValidationError,
)
from .manifest import RunManifest, manifest_path_for, write_manifest
from .pipelines import (
    SearchOutcome,
    build_index_pipeline,
    eval_pipeline,
    generate_dataset,
    search_pipeline,
    sweep_pipeline,
    train_pipeline,
)
from .trainer import TrainConfig

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_INTERNAL = 4


def guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValidationError, ConfigError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_USAGE)
        except (DataError, FormatError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_DATA)
        except (InternalError, AssertionError) as exc:
            click.echo(f"internal error: {exc}", err=True)
            sys.exit(EXIT_INTERNAL)

    return wrapper


@click.group()
@click.version_option(version=__version__)
def main():
    """Two-stage binary-code passage retrieval toolkit."""


@main.command("gen-data")
@click.option("-n", "--n-passages", default=20_000, show_default=True, help="Corpus size.")
@click.option("--dims", default=256, show_default=True, help="Input feature dimensionality.")
@click.option("--clusters", default=256, show_default=True)
@click.option("--cluster-noise", default=0.35, show_default=True)
@click.option("--feature-noise", default=0.05, show_default=True)
@click.option("--hard-negative-scale", default=0.5, show_default=True)
@click.option("--train-instances", default=512, show_default=True)
@click.option("--eval-queries", default=400, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(file_okay=False), help="Output directory.")
@guarded
def gen_data(n_passages, dims, clusters, cluster_noise, feature_noise,
             hard_negative_scale, train_instances, eval_queries, seed, out):
    """Generate a synthetic clustered retrieval dataset."""
    cfg = GenConfig(
        n_passages=n_passages, input_dims=dims, clusters=clusters,
        cluster_noise=cluster_noise, feature_noise=feature_noise,
        hard_negative_scale=hard_negative_scale, train_instances=train_instances,
        eval_queries=eval_queries, seed=seed,
    )
    outcome = generate_dataset(cfg, out)
    click.echo(f"corpus:  {outcome.corpus_path}")
    click.echo(f"train:   {outcome.train_path}")
    click.echo(f"queries: {outcome.queries_path}")


@main.command("train")
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Checkpoint path.")
@click.option("--epochs", default=40, show_default=True)
@click.option("--batch-size", default=128, show_default=True)
@click.option("--lr", default=2e-5, show_default=True)
@click.option("--warmup-ratio", default=0.06, show_default=True)
@click.option("--weight-decay", default=0.0, show_default=True)
@click.option("--gamma", default=0.1, show_default=True)
@click.option("--alpha", default=2.0, show_default=True)
@click.option("--cand-loss", default="ranking", show_default=True,
              type=click.Choice(["ranking", "cross_entropy"]))
@click.option("--in-batch-negatives/--no-in-batch-negatives", default=True, show_default=True)
@click.option("--code-dims", default=768, show_default=True)
@click.option("--init-scale", default=1e-3, show_default=True)
@click.option("--seed", default=0, show_default=True)
@guarded
def train_cmd(data, out, epochs, batch_size, lr, warmup_ratio, weight_decay, gamma,
              alpha, cand_loss, in_batch_negatives, code_dims, init_scale, seed):
    """Train a two-tower hash model on a JSONL dataset."""
    cfg = TrainConfig(
        epochs=epochs, batch_size=batch_size, lr=lr, warmup_ratio=warmup_ratio,
        weight_decay=weight_decay, gamma=gamma, alpha=alpha, cand_loss=cand_loss,
        in_batch_negatives=in_batch_negatives, code_dims=code_dims,
        init_scale=init_scale, seed=seed,
    )
    outcome = train_pipeline(data, cfg, out)
    click.echo(
        f"checkpoint: {outcome.checkpoint_path} "
        f"(steps={outcome.steps}, final_loss={outcome.final_loss:.6f}, "
        f"final_beta={outcome.final_beta:.4f})"
    )


@main.command("build-index")
@click.option("--model", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--hash-bits", default=None, type=int, help="Validate/record lookup-table key width.")
@click.option("--seed", default=0, show_default=True)
@guarded
def build_index_cmd(model, corpus, out, hash_bits, seed):
    """Encode a corpus with a trained model and write the packed-code index."""
    outcome = build_index_pipeline(model, corpus, out, hash_bits=hash_bits, seed=seed)
    click.echo(
        f"index: {outcome.index_path} (N={outcome.count}, d={outcome.dims}, "
        f"payload={outcome.payload_bytes} bytes, checksum={outcome.checksum})"
    )


def format_search_tsv(outcome: SearchOutcome) -> str:
    """TSV blocks per query: rank, id, hamming and, unless reranking was
    disabled, the rerank score."""
    include_score = outcome.mode != "no_rerank"
    lines = []
    header = ["rank", "id", "hamming"] + (["score"] if include_score else [])
    lines.append("\t".join(header))
    multi = len(outcome.queries) > 1
    for qi, hits in enumerate(outcome.queries):
        if multi:
            lines.append(f"# query\t{qi}")
        for hit in hits:
            row = [str(hit.rank), str(hit.id), "" if hit.hamming is None else str(hit.hamming)]
            if include_score:
                row.append("" if hit.score is None else f"{hit.score:.10g}")
            lines.append("\t".join(row))
    return "\n".join(lines) + "\n"


@main.command("search")
@click.option("--index", "index_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--queries", required=True, type=click.Path(exists=True, dir_okay=False),
              help="JSONL with a 'features' field per line, or whitespace-separated vectors.")
@click.option("--l", "l", default=1000, show_default=True)
@click.option("--k", "k", default=100, show_default=True)
@click.option("--mode", default="two_stage", show_default=True,
              type=click.Choice(["two_stage", "no_rerank", "no_candidate_generation"]))
@click.option("--algo", default="scan", show_default=True, type=click.Choice(["scan", "hash"]))
@click.option("--hash-bits", default=20, show_default=True)
@click.option("--embeddings", "queries_are_embeddings", is_flag=True,
              help="Treat query vectors as already-encoded embeddings.")
@click.option("--out", default="-", show_default=True,
              help="TSV output path; '-' prints to stdout (no manifest).")
@click.option("--server", default=None, help="Query a running service instead of local files.")
@click.option("--engine", default=None, help="Engine name on the remote service.")
@click.option("--seed", default=0, show_default=True)
@guarded
def search_cmd(index_path, model_path, queries, l, k, mode, algo, hash_bits,
               queries_are_embeddings, out, server, engine, seed):
    """Rank passages for each query vector; local artifacts or a remote engine."""
    import time

    started = time.perf_counter()
    if server:
        if not engine:
            raise ValidationError("--server requires --engine")
        outcome = _remote_search(server, engine, queries, l, k, mode, algo,
                                 queries_are_embeddings)
    else:
        if not index_path:
            raise ValidationError("--index is required for local search")
        outcome = search_pipeline(
            index_path, model_path, queries, l, k, mode=mode, algo=algo,
            hash_bits=hash_bits, queries_are_embeddings=queries_are_embeddings,
        )
    text = format_search_tsv(outcome)
    if out == "-":
        click.echo(text, nl=False)
        return
    Path(out).write_text(text)
    write_manifest(
        RunManifest(
            command="search",
            config={"l": l, "k": k, "mode": mode, "algo": algo, "hash_bits": hash_bits,
                    "embeddings": queries_are_embeddings},
            seed=seed,
            inputs={"index": str(index_path or ""), "model": str(model_path or ""),
                    "queries": str(queries)},
            outputs={"results": str(out)},
            version=f"bitpassage-{__version__}",
            duration_s=round(time.perf_counter() - started, 6),
        ),
        manifest_path_for(out),
    )
    click.echo(f"results: {out}")


def _remote_search(server, engine, queries_path, l, k, mode, algo, queries_are_embeddings):
    import httpx

    from .dataio import load_vector_file

    rows = load_vector_file(queries_path)
    resp = httpx.post(
        f"{server.rstrip('/')}/engines/{engine}/search",
        json={
            "queries": [row.tolist() for row in rows],
            "l": l, "k": k, "mode": mode, "algo": algo,
            "queries_are_embeddings": queries_are_embeddings,
        },
        timeout=60.0,
    )
    if resp.status_code != 200:
        raise DataError(f"server error {resp.status_code}: {resp.text}")
    body = resp.json()
    from .pipelines import SearchHit

    return SearchOutcome(
        queries=[
            [SearchHit(rank=h["rank"], id=h["id"], hamming=h.get("hamming"),
                       score=h.get("score")) for h in hits]
            for hits in body["results"]
        ],
        mode=body["mode"], algo=body["algo"],
    )


def _parse_ks(ks: str):
    try:
        values = tuple(int(v) for v in ks.split(",") if v.strip())
    except ValueError as exc:
        raise ValidationError(f"bad --ks value {ks!r}: {exc}") from exc
    if not values:
        raise ValidationError("--ks must name at least one cutoff")
    return values


@main.command("eval")
@click.option("--model", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--queries", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Report CSV path.")
@click.option("--l", "l", default=1000, show_default=True)
@click.option("--hash-bits", default=20, show_default=True)
@click.option("--ks", default="1,20,100", show_default=True)
@click.option("--timed/--no-timed", default=True, show_default=True,
              help="--no-timed keeps report bytes reproducible.")
@click.option("--seed", default=0, show_default=True)
@guarded
def eval_cmd(model, corpus, queries, out, l, hash_bits, ks, timed, seed):
    """Method-comparison recall/latency report plus ablation rows."""
    k_values = _parse_ks(ks)
    cfg = validate_config(EngineConfig(
        dims=768, candidates=l, top_k=min(max(k_values), l), hash_bits=hash_bits, seed=seed,
    ))
    outcome = eval_pipeline(model, corpus, queries, out, cfg, ks=k_values, timed=timed)
    click.echo(f"report: {outcome.report_path} ({len(outcome.rows)} rows)")


@main.command("sweep")
@click.option("--grid", required=True,
              help="Axis grid, e.g. gamma=0.025,0.05,0.1,0.2 or l=200,500,1000,2000.")
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--corpus", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--queries", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--epochs", default=5, show_default=True)
@click.option("--batch-size", default=128, show_default=True)
@click.option("--code-dims", default=256, show_default=True)
@click.option("--init-scale", default=1e-3, show_default=True)
@click.option("--l", "l", default=1000, show_default=True)
@click.option("--ks", default="1,20,100", show_default=True)
@click.option("--timed/--no-timed", default=True, show_default=True)
@click.option("--seed", default=0, show_default=True)
@guarded
def sweep_cmd(grid, data, corpus, queries, out, epochs, batch_size, code_dims,
              init_scale, l, ks, timed, seed):
    """Sweep gamma, l, alpha or cand_loss and emit one report row per point."""
    k_values = _parse_ks(ks)
    train_cfg = TrainConfig(
        epochs=epochs, batch_size=batch_size, code_dims=code_dims,
        init_scale=init_scale, seed=seed,
    )
    engine_cfg = EngineConfig(candidates=l, top_k=min(max(k_values), l), seed=seed)
    outcome = sweep_pipeline(
        grid, data, corpus, queries, out, train_cfg, engine_cfg,
        ks=k_values, timed=timed,
    )
    click.echo(f"report: {outcome.report_path} ({len(outcome.rows)} rows)")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@guarded
def serve_cmd(host, port):
    """Run the HTTP search service."""
    import uvicorn

    uvicorn.run("bitpassage.service.app:app", host=host, port=port)


if __name__ == "__main__":
    main()
