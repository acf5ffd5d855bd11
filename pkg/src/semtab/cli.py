"""semtab command line: wires the pipeline stages together.

Conventions: human-readable summaries on stdout, line-oriented JSON logs on
stderr; exit 0 on success, 1 on runtime failure, 2 on usage/config errors.
Every command is rerunnable and never mutates its inputs; identical inputs
produce byte-identical outputs.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from . import fusion
from .batching import vocabs_from_log
from .embedcache import cache_open
from .embedclient import (
    MOCK_MODEL_ID,
    EmbedEndpointConfig,
    embed_remote,
    mock_embed_records,
)
from .errors import SemtabError
from .fusion import (
    NULL_TOKEN,
    clean_field,
    enrich_location,
    enrich_mcc,
    enrich_merchant,
    load_kb,
    write_kb,
)
from .model import ModelConfig
from .prompts import (
    render_location,
    render_mcc,
    render_merchant,
    wrap_one_word,
)
from .synthworld import WorldConfig, generate_log, generate_world
from .traineval import (
    CacheSource,
    DataBundle,
    EntityDirectory,
    MockSource,
    RunConfig,
    run_grid,
    run_single,
)
from .txndata import SplitSpec, read_log, split_by_time, write_log

DEFAULT_CONFIG: dict = {
    "paths": {"kb": None, "data_dir": None, "cache": None, "reports": None},
    "world": {
        "n_clusters": 4, "mccs_per_cluster": 5, "n_merchants": 120,
        "n_cities": 8, "n_regions": 4, "same_cluster_margin": 0.6,
        "anomaly_rate": 0.02, "home_city_affinity": 0.9,
    },
    "gen": {
        "users": 500, "months": 12, "seq_len_min": 15, "seq_len_max": 40,
        "cold_start_frac": 0.0, "cold_start_last_months": 0,
    },
    "split": {"train_months": 9, "val_months": 1, "test_months": 2},
    "model": {
        "d_mcc": 32, "d_merchant": 48, "d_city": 32, "d_state": 16,
        "d_amount": 8, "d_tdelta": 8, "n_tdelta_buckets": 24,
        "d_model": 64, "n_layers": 2, "n_heads": 4, "d_ff": 256,
        "max_seq_len": 32, "init_scale": 0.02, "dropout": 0.0,
        "head_temperature": 1.0,
    },
    "train": {"epochs": 4, "batch_size": 32, "lr": 5e-3, "lr_schedule": "cosine"},
    "embed": {"dim": 256, "seed": 0, "wrap_one_word": False},
    "endpoint": {
        "batch_size": 16, "max_concurrent_requests": 2, "max_attempts": 3,
        "backoff_s": 0.1, "auth_env": "EMBED_API_KEY",
    },
    "grid": {"strategies": ["vanilla", "all_fields"], "seeds": [0]},
}


def log_event(event: str, **fields) -> None:
    sys.stderr.write(json.dumps({"level": "info", "event": event, **fields},
                                sort_keys=True) + "\n")


def _merge_config(base: dict, override: dict, path: str = "") -> dict:
    out = dict(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise click.UsageError(f"unknown config key: {here}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise click.UsageError(f"config key {here} must be an object")
            out[key] = _merge_config(base[key], value, here)
        else:
            out[key] = value
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return json.loads(json.dumps(DEFAULT_CONFIG))
    p = Path(path)
    if not p.exists():
        raise click.UsageError(f"config file not found: {p}")
    with open(p, "r", encoding="utf-8") as fh:
        user = json.load(fh)
    return _merge_config(DEFAULT_CONFIG, user)


def model_config_from(cfg: dict) -> ModelConfig:
    m = cfg["model"]
    return ModelConfig(
        d_fields={"mcc": m["d_mcc"], "merchant": m["d_merchant"],
                  "city": m["d_city"], "state": m["d_state"]},
        d_amount=m["d_amount"], d_tdelta=m["d_tdelta"],
        n_tdelta_buckets=m["n_tdelta_buckets"], d_model=m["d_model"],
        n_layers=m["n_layers"], n_heads=m["n_heads"], d_ff=m["d_ff"],
        max_seq_len=m["max_seq_len"], init_scale=m["init_scale"],
        dropout=m["dropout"], head_temperature=m["head_temperature"],
    )


def _require_path(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise click.UsageError(f"{what} not found: {p}")
    return p


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


class _Fail(click.ClickException):
    exit_code = 1


def _runtime_guard(fn):
    """Map package runtime errors to exit code 1 with the stage named."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SemtabError as exc:
            sys.stderr.write(json.dumps({
                "level": "error", "stage": fn.__name__,
                "error": type(exc).__name__, "message": str(exc)}) + "\n")
            raise _Fail(f"{fn.__name__}: {exc}") from exc
    return wrapper


@click.group()
def main():
    """Semantic embedding initialization pipeline for transaction models."""


@main.command("gen-data")
@click.option("--users", type=int, default=None, help="number of users")
@click.option("--months", type=int, default=None, help="months of history")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--kb-out", "kb_out", type=click.Path(), default=None,
              help="also write the generated knowledge base here")
@click.option("--config", "config_path", type=click.Path(), default=None)
@_runtime_guard
def cmd_gen_data(users, months, seed, out_path, kb_out, config_path):
    """Generate a synthetic transaction log (and its knowledge base)."""
    cfg = load_config(config_path)
    if users is not None:
        cfg["gen"]["users"] = users
    if months is not None:
        cfg["gen"]["months"] = months
    world = generate_world(WorldConfig(**cfg["world"]), seed=seed)
    gen = cfg["gen"]
    log = generate_log(world, n_users=gen["users"],
                       seq_len_range=(gen["seq_len_min"], gen["seq_len_max"]),
                       months=gen["months"], seed=seed,
                       cold_start_frac=gen["cold_start_frac"],
                       cold_start_last_months=gen["cold_start_last_months"])
    write_log(log, out_path)
    log_event("gen-data", rows=len(log), users=gen["users"], out=str(out_path))
    if kb_out:
        write_kb(world.kb, kb_out)
        log_event("gen-data-kb", out=str(kb_out))
    click.echo(f"wrote {len(log)} transactions to {out_path}")


def _enriched_to_dict(field: str, value: str, kb, directory: EntityDirectory) -> dict:
    if field == "mcc":
        e = enrich_mcc(value, kb)
        payload = {"code": e.code, "title": e.title, "description": e.description,
                   "included_categories": list(e.included_categories),
                   "similar": [list(p) for p in e.similar]}
    elif field == "merchant":
        mcc, city, state, country = directory.merchant_attrs.get(
            value, (NULL_TOKEN,) * 4)
        e = enrich_merchant(value, mcc, city, state, country, kb)
        payload = {"name": e.name, "city": e.city, "state": e.state,
                   "country": e.country,
                   "mcc": {"code": e.mcc.code, "title": e.mcc.title,
                           "description": e.mcc.description,
                           "included_categories": list(e.mcc.included_categories),
                           "similar": [list(p) for p in e.mcc.similar]}}
    else:  # city / state
        if field == "city":
            _, country = directory.city_attrs.get(value, (NULL_TOKEN, NULL_TOKEN))
        else:
            country = directory.state_attrs.get(value, NULL_TOKEN)
        e = enrich_location(country, value, kb)
        payload = {"country": e.country, "region": e.region,
                   "economic_context": e.economic_context,
                   "demographics": e.demographics, "industries": e.industries}
    return {"field": field, "key": value, "enrichment": payload}


@main.command("enrich")
@click.option("--kb", "kb_path", required=True, type=click.Path())
@click.option("--in", "in_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=0, show_default=True, hidden=True)
@_runtime_guard
def cmd_enrich(kb_path, in_path, out_path, config_path, seed):
    """Enrich every unique categorical value of a log from the knowledge base."""
    load_config(config_path)
    kb = load_kb(_require_path(kb_path, "knowledge base"))
    log = read_log(_require_path(in_path, "input log"))
    directory = EntityDirectory.from_log(log)
    values: dict[str, set] = {f: set() for f in ("mcc", "merchant", "city", "state")}
    for t in log:
        values["mcc"].add(clean_field(t.mcc, "mcc").text)
        values["merchant"].add(clean_field(t.merchant_raw, "merchant").text)
        values["city"].add(clean_field(t.city, "city").text)
        values["state"].add(clean_field(t.state_or_region, "state").text)
    n = 0
    with open(out_path, "w", encoding="utf-8") as fh:
        for field in ("mcc", "merchant", "city", "state"):
            for value in sorted(values[field]):
                if value == NULL_TOKEN:
                    continue
                fh.write(json.dumps(_enriched_to_dict(field, value, kb, directory),
                                    sort_keys=True, ensure_ascii=False) + "\n")
                n += 1
    log_event("enrich", entities=n, out=str(out_path))
    click.echo(f"enriched {n} entities to {out_path}")


def _render_enriched_line(obj: dict):
    field = obj["field"]
    e = obj["enrichment"]
    if field == "mcc":
        enriched = fusion.EnrichedMcc(
            code=e["code"], title=e["title"], description=e["description"],
            included_categories=tuple(e["included_categories"]),
            similar=tuple((c, t) for c, t in e["similar"]))
        return render_mcc(enriched)
    if field == "merchant":
        m = e["mcc"]
        enriched = fusion.EnrichedMerchant(
            name=e["name"], city=e["city"], state=e["state"], country=e["country"],
            mcc=fusion.EnrichedMcc(
                code=m["code"], title=m["title"], description=m["description"],
                included_categories=tuple(m["included_categories"]),
                similar=tuple((c, t) for c, t in m["similar"])))
        return render_merchant(enriched)
    enriched = fusion.EnrichedLocation(
        country=e["country"], region=e["region"],
        economic_context=e["economic_context"], demographics=e["demographics"],
        industries=e["industries"])
    return render_location(enriched)


@main.command("prompts")
@click.option("--kb", "kb_path", type=click.Path(), default=None, hidden=True)
@click.option("--in", "in_path", required=True, type=click.Path())
@click.option("--field", "field_kind", required=True,
              type=click.Choice(["mcc", "merchant", "location"]))
@click.option("--wrap-one-word", "wrap", type=click.Choice(["on", "off"]),
              default="off", show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=0, hidden=True)
@_runtime_guard
def cmd_prompts(kb_path, in_path, field_kind, wrap, out_path, config_path, seed):
    """Render prompt templates from enriched entities."""
    load_config(config_path)
    wanted = {"mcc": ("mcc",), "merchant": ("merchant",),
              "location": ("city", "state")}[field_kind]
    n = 0
    with open(_require_path(in_path, "enriched file"), "r", encoding="utf-8") as fh, \
            open(out_path, "w", encoding="utf-8") as out:
        for line in fh:
            obj = json.loads(line)
            if obj["field"] not in wanted:
                continue
            prompt = _render_enriched_line(obj)
            text = wrap_one_word(prompt.text) if wrap == "on" else prompt.text
            from .prompts import fingerprint64
            out.write(json.dumps({
                "key": f"{obj['field']}:{obj['key']}",
                "prompt": text,
                "fingerprint": f"{fingerprint64(text):016x}",
            }, sort_keys=True, ensure_ascii=False) + "\n")
            n += 1
    log_event("prompts", field=field_kind, count=n, wrapped=wrap == "on")
    click.echo(f"rendered {n} {field_kind} prompts to {out_path}")


@main.command("embed")
@click.option("--prompts", "prompts_path", required=True, type=click.Path())
@click.option("--endpoint", default="mock", show_default=True,
              help="'mock' or a base URL like http://host:port")
@click.option("--dim", type=int, default=None, help="mock embedding dimension")
@click.option("--cache", "cache_path", required=True, type=click.Path())
@click.option("--model-id", "model_id", default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
@_runtime_guard
def cmd_embed(prompts_path, endpoint, dim, cache_path, model_id, seed, config_path):
    """Embed rendered prompts and store them in the binary cache."""
    cfg = load_config(config_path)
    pairs = []
    with open(_require_path(prompts_path, "prompts file"), "r", encoding="utf-8") as fh:
        for line in fh:
            obj = json.loads(line)
            pairs.append((obj["key"], obj["prompt"]))
    if not pairs:
        raise click.UsageError(f"no prompts in {prompts_path}")
    if endpoint == "mock":
        dim = dim or cfg["embed"]["dim"]
        records = mock_embed_records(pairs, dim=dim, seed=seed)
        model_id = model_id or MOCK_MODEL_ID
    else:
        ep = cfg["endpoint"]
        records = embed_remote(pairs, EmbedEndpointConfig(
            base_url=endpoint, batch_size=ep["batch_size"],
            max_concurrent_requests=ep["max_concurrent_requests"],
            max_attempts=ep["max_attempts"], backoff_s=ep["backoff_s"],
            auth_env=ep["auth_env"]))
        model_id = model_id or records[0].model_id
        dim = records[0].dim
    with cache_open(cache_path, dim=dim, model_id=model_id) as cache:
        for record in records:
            if record.model_id != model_id:
                record = dataclasses.replace(record, model_id=model_id)
            cache.put(record)
        size = len(cache)
    log_event("embed", records=len(records), cache=str(cache_path), dim=dim)
    click.echo(f"cached {len(records)} embeddings ({size} total) in {cache_path}")


def _load_bundle(data_dir: Path, cfg: dict) -> DataBundle:
    log = read_log(_require_path(data_dir / "log.jsonl", "log"))
    kb = load_kb(_require_path(data_dir / "kb.json", "knowledge base"))
    split = SplitSpec(cfg["split"]["train_months"], cfg["split"]["val_months"],
                      cfg["split"]["test_months"])
    train_log, val_log, test_log = split_by_time(log, split)
    # vocabularies and static attributes come from the full log: they are
    # offline universe knowledge (no labels or dynamics cross the split)
    vocabs = vocabs_from_log(log)
    directory = EntityDirectory.from_log(log)
    train_names = {clean_field(t.merchant_raw, "merchant").text for t in train_log}
    test_names = {clean_field(t.merchant_raw, "merchant").text for t in test_log}
    cold = frozenset(test_names - train_names - {NULL_TOKEN})
    return DataBundle(train=train_log, val=val_log, test=test_log, vocabs=vocabs,
                      kb=kb, directory=directory, cold_merchants=cold)


def _source_from(cfg: dict, cache_path: str | None, mock_dim: int | None):
    if cache_path:
        return CacheSource(cache_open(_require_path(cache_path, "cache")))
    return MockSource(dim=mock_dim or cfg["embed"]["dim"],
                      seed=cfg["embed"]["seed"])


@main.command("train")
@click.option("--strategy", required=True)
@click.option("--data", "data_dir", type=click.Path(), default=None)
@click.option("--cache", "cache_path", type=click.Path(), default=None)
@click.option("--mock-dim", type=int, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
@_runtime_guard
def cmd_train(strategy, data_dir, cache_path, mock_dim, seed, out_path, config_path):
    """Train one model under an initialization strategy; write its report."""
    cfg = load_config(config_path)
    data_dir = data_dir or cfg["paths"]["data_dir"]
    cache_path = cache_path or cfg["paths"]["cache"]
    if not data_dir:
        raise click.UsageError("--data (or config paths.data_dir) is required")
    data = _load_bundle(Path(_require_path(data_dir, "data dir")), cfg)
    source = _source_from(cfg, cache_path, mock_dim)
    run_cfg = RunConfig(strategy=strategy, epochs=cfg["train"]["epochs"],
                        batch_size=cfg["train"]["batch_size"],
                        lr=cfg["train"]["lr"],
                        lr_schedule=cfg["train"]["lr_schedule"], seeds=(seed,),
                        wrap_one_word=cfg["embed"]["wrap_one_word"])
    report = run_single(data, run_cfg, source, model_config_from(cfg), seed)
    payload = {"run_config": {"strategy": strategy, "seed": seed,
                              "epochs": cfg["train"]["epochs"],
                              "batch_size": cfg["train"]["batch_size"],
                              "lr": cfg["train"]["lr"],
                              "source": report["source"]},
               "val": report["val"], "test": report["test"],
               "history": report["history"]}
    if "cold_start" in report:
        payload["cold_start"] = report["cold_start"]
    text = _dump_json(payload)
    if out_path:
        _write_text(Path(out_path), text)
    log_event("train", strategy=strategy, seed=seed,
              test_mcc_acc=report["test"]["next_mcc"]["acc"])
    click.echo(f"strategy {strategy} seed {seed}: "
               f"next-MCC acc {report['test']['next_mcc']['acc']:.4f}")


def _write_grid_outputs(table, out_dir: Path) -> None:
    _write_text(out_dir / "comparison.json", _dump_json(table.to_dict()))
    _write_text(out_dir / "comparison.txt", table.render_text())
    _write_text(out_dir / "comparison.csv", table.render_csv())
    _write_text(out_dir / "ri.txt", table.render_ri_text())


@main.command("grid")
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.option("--data", "data_dir", type=click.Path(), default=None)
@click.option("--cache", "cache_path", type=click.Path(), default=None)
@click.option("--seed", type=int, default=None, help="override grid seeds with one seed")
@click.option("--out", "out_dir", type=click.Path(), default=None)
@_runtime_guard
def cmd_grid(config_path, data_dir, cache_path, seed, out_dir):
    """Run the strategy comparison grid and write its reports."""
    cfg = load_config(config_path)
    data_dir = data_dir or cfg["paths"]["data_dir"]
    cache_path = cache_path or cfg["paths"]["cache"]
    out_dir = out_dir or cfg["paths"]["reports"]
    if not data_dir:
        raise click.UsageError("--data (or config paths.data_dir) is required")
    if not out_dir:
        raise click.UsageError("--out (or config paths.reports) is required")
    data = _load_bundle(Path(_require_path(data_dir, "data dir")), cfg)
    source = _source_from(cfg, cache_path, None)
    seeds = [seed] if seed is not None else list(cfg["grid"]["seeds"])
    table = run_grid(cfg["grid"]["strategies"], [source], seeds, data,
                     model_config_from(cfg),
                     RunConfig(strategy="vanilla", epochs=cfg["train"]["epochs"],
                               batch_size=cfg["train"]["batch_size"],
                               lr=cfg["train"]["lr"],
                               lr_schedule=cfg["train"]["lr_schedule"],
                               wrap_one_word=cfg["embed"]["wrap_one_word"]))
    _write_grid_outputs(table, Path(out_dir))
    log_event("grid", cells=len(table.row_order), out=str(out_dir))
    click.echo(table.render_text())
    click.echo(table.render_ri_text())


@main.command("report")
@click.option("--in", "in_dir", required=True, type=click.Path())
def cmd_report(in_dir):
    """Re-render a saved comparison as the aligned text table."""
    path = _require_path(Path(in_dir) / "comparison.txt", "comparison report")
    click.echo(path.read_text(encoding="utf-8"))
    ri = Path(in_dir) / "ri.txt"
    if ri.exists():
        click.echo(ri.read_text(encoding="utf-8"))


@main.command("demo")
@click.option("--workdir", required=True, type=click.Path())
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--config", "config_path", type=click.Path(), default=None)
@click.pass_context
@_runtime_guard
def cmd_demo(ctx, workdir, seed, config_path):
    """End-to-end pipeline on synthetic data: generate, enrich, render
    prompts, embed with the mock model, build tables, and run the
    vanilla-vs-all_fields comparison grid."""
    cfg = load_config(config_path)
    work = Path(workdir)
    work.mkdir(parents=True, exist_ok=True)
    log_path = work / "log.jsonl"
    kb_path = work / "kb.json"
    enriched = work / "enriched.jsonl"
    cache_path = work / "embeddings.semb"
    reports = work / "reports"

    ctx.invoke(cmd_gen_data, users=None, months=None, seed=seed,
               out_path=str(log_path), kb_out=str(kb_path),
               config_path=config_path)
    ctx.invoke(cmd_enrich, kb_path=str(kb_path), in_path=str(log_path),
               out_path=str(enriched), config_path=config_path, seed=seed)
    if cache_path.exists():
        cache_path.unlink()  # rerunnable: rebuild the cache from scratch
    for field in ("mcc", "merchant", "location"):
        prompts_path = work / f"prompts_{field}.jsonl"
        ctx.invoke(cmd_prompts, kb_path=str(kb_path), in_path=str(enriched),
                   field_kind=field, wrap="off", out_path=str(prompts_path),
                   config_path=config_path, seed=seed)
        ctx.invoke(cmd_embed, prompts_path=str(prompts_path), endpoint="mock",
                   dim=cfg["embed"]["dim"], cache_path=str(cache_path),
                   model_id=None, seed=cfg["embed"]["seed"],
                   config_path=config_path)
    data = _load_bundle(work, cfg)
    source = CacheSource(cache_open(cache_path))
    table = run_grid(["vanilla", "all_fields"], [source],
                     list(cfg["grid"]["seeds"]) if seed is None else [seed],
                     data, model_config_from(cfg),
                     RunConfig(strategy="vanilla", epochs=cfg["train"]["epochs"],
                               batch_size=cfg["train"]["batch_size"],
                               lr=cfg["train"]["lr"],
                               lr_schedule=cfg["train"]["lr_schedule"]))
    _write_grid_outputs(table, reports)
    for key in table.row_order:
        cell = table.cells[key]
        if cell.errors:
            raise _Fail(f"grid cell {key} failed: {cell.errors[0]}")
    click.echo(table.render_text())
    click.echo(table.render_ri_text())
    log_event("demo", workdir=str(work), reports=str(reports))


if __name__ == "__main__":
    main()
