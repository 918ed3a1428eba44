"""Headless driver for scripted and CI use: search, corpus building,
extraction and export without interactive prompts."""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import click

from . import corpus as corpus_mod
from . import review
from .config import AppConfig, load_config
from .domain import PropertyDef, SearchRequest
from .errors import LitloopError
from .extraction import define_model, extract_corpus
from .store import (
    Store,
    corpus_from_dict,
    model_from_dict,
    record_from_dict,
    record_to_dict,
)


def _fail(exc: LitloopError) -> None:
    click.echo(f"error:{exc.code}:{exc.message}", err=True)
    sys.exit(1)


class CliState:
    """Workdir-backed CLI context: config plus a pointer to the current
    corpus/model/table so consecutive commands compose."""

    def __init__(self, config: AppConfig):
        self.config = config
        self.store = Store(config.workdir)
        self._pointer_path = config.workdir / "state" / "current.json"

    @property
    def pointer(self) -> Dict[str, Any]:
        if self._pointer_path.is_file():
            return json.loads(self._pointer_path.read_text(encoding="utf-8"))
        return {}

    def set_pointer(self, **fields: Any) -> None:
        data = self.pointer
        data.update(fields)
        self._pointer_path.parent.mkdir(parents=True, exist_ok=True)
        self._pointer_path.write_text(json.dumps(data, indent=2), encoding="utf-8")


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              default=None, help="Config file (YAML or JSON).")
@click.pass_context
def main(ctx: click.Context, config_path: Optional[Path]):
    """litloop: human-in-the-loop literature review engine."""
    ctx.obj = CliState(load_config(config_path))


@main.command()
@click.option("--query", required=True)
@click.option("--sources", default=None, help="Comma-separated connector ids.")
@click.option("--limit", default=20, type=int)
@click.option("--open-access", is_flag=True, default=False)
@click.option("--year-from", default=None, type=int)
@click.option("--year-to", default=None, type=int)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def search(state: CliState, query: str, sources: Optional[str], limit: int,
           open_access: bool, year_from: Optional[int], year_to: Optional[int],
           out_path: Optional[Path]):
    """Search the configured sources and write unified records."""
    connector_ids = tuple(
        s.strip() for s in sources.split(",")
    ) if sources else tuple(state.config.registry.ids())
    year_range = (year_from, year_to) if year_from and year_to else None
    try:
        request = SearchRequest(query=query, connector_ids=connector_ids,
                                max_results=limit, open_access_only=open_access,
                                year_range=year_range)
        results = state.config.registry.search(request)
    except LitloopError as exc:
        _fail(exc)
    payload = {
        "records": [record_to_dict(r) for r in results.records],
        "per_connector_status": {
            cid: list(status) for cid, status in results.per_connector_status.items()
        },
        "dedup_report": results.dedup_report,
    }
    if out_path:
        out_path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
        click.echo(f"wrote {len(results.records)} records to {out_path}")
    else:
        click.echo(json.dumps(payload, indent=2))


@main.group()
def corpus():
    """Corpus building commands."""


@corpus.command("add")
@click.option("--from", "from_path", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="Results file produced by `litloop search --out`.")
@click.option("--ids", default=None, help="Comma-separated record ids; default all.")
@click.pass_obj
def corpus_add(state: CliState, from_path: Path, ids: Optional[str]):
    data = json.loads(from_path.read_text(encoding="utf-8"))
    records = [record_from_dict(r) for r in data["records"]]
    if ids:
        wanted = {i.strip() for i in ids.split(",")}
        records = [r for r in records if r.record_id in wanted]
    corpus_id = state.pointer.get("corpus_id")
    if corpus_id and corpus_id in state.store.corpora:
        cur = state.store.get_corpus(corpus_id)
    else:
        cur = corpus_mod.new_corpus()
    skipped = corpus_mod.add_selection(cur, records)
    state.store.save_corpus(cur)
    state.set_pointer(corpus_id=cur.corpus_id)
    click.echo(f"corpus {cur.corpus_id}: {len(cur)} entries ({len(skipped)} skipped)")


@corpus.command("import")
@click.argument("directory", type=click.Path(path_type=Path))
@click.pass_obj
def corpus_import(state: CliState, directory: Path):
    try:
        cur = corpus_mod.import_corpus(directory)
    except LitloopError as exc:
        _fail(exc)
    state.store.save_corpus(cur)
    state.set_pointer(corpus_id=cur.corpus_id)
    click.echo(f"corpus {cur.corpus_id}: {len(cur)} entries imported")


@corpus.command("fetch")
@click.pass_obj
def corpus_fetch(state: CliState):
    corpus_id = state.pointer.get("corpus_id")
    if not corpus_id:
        click.echo("error:empty_corpus:no current corpus", err=True)
        sys.exit(1)
    cur = state.store.get_corpus(corpus_id)
    corpus_mod.fetch_documents(cur, state.config.workdir,
                               fetcher=state.config.fetcher,
                               max_workers=state.config.fetch_workers)
    state.store.save_corpus(cur)
    fetched = sum(1 for e in cur.entries if e.fetch_status == "fetched")
    click.echo(f"corpus {corpus_id}: {fetched}/{len(cur)} fetched")


@main.group()
def model():
    """Data-model commands."""


def _parse_prop(spec: str) -> PropertyDef:
    name, _, description = spec.partition(":")
    return PropertyDef(name=name.strip(), description=description.strip() or None)


@model.command("set")
@click.option("--prop", "props", multiple=True, required=True,
              help="Property as name or name:description; repeatable.")
@click.pass_obj
def model_set(state: CliState, props: List[str]):
    try:
        data_model = define_model([_parse_prop(p) for p in props])
    except LitloopError as exc:
        _fail(exc)
    state.store.save_model(data_model)
    state.set_pointer(model_id=data_model.model_id)
    click.echo(f"model {data_model.model_id} v{data_model.version}: "
               + ",".join(p.name for p in data_model.properties))


@main.command()
@click.option("--corpus", "corpus_id", default=None)
@click.option("--model", "model_id", default=None)
@click.option("--workers", default=None, type=int)
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None)
@click.pass_obj
def extract(state: CliState, corpus_id: Optional[str], model_id: Optional[str],
            workers: Optional[int], out_path: Optional[Path]):
    """Run extraction over a corpus with the configured provider."""
    corpus_id = corpus_id or state.pointer.get("corpus_id")
    model_id = model_id or state.pointer.get("model_id")
    try:
        cur = state.store.get_corpus(corpus_id or "")
        data_model = state.store.get_model(model_id or "")
        table = extract_corpus(data_model, cur, state.config.gateway,
                               max_workers=workers or state.config.extract_workers)
    except LitloopError as exc:
        _fail(exc)
    state.store.save_table(table)
    state.set_pointer(table_id=table.table_id)
    if out_path:
        out_path.write_bytes(review.export_json(table))
    click.echo(f"table {table.table_id}: {len(table.rows)} rows x "
               f"{len(table.properties)} properties")


@main.group()
def table():
    """Extraction-table commands."""


@table.command("export")
@click.option("--table", "table_id", default=None)
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.pass_obj
def table_export(state: CliState, table_id: Optional[str], fmt: str, out_path: Path):
    table_id = table_id or state.pointer.get("table_id")
    try:
        cur = state.store.get_table(table_id or "")
    except LitloopError as exc:
        _fail(exc)
    content = review.export_csv(cur) if fmt == "csv" else review.export_json(cur)
    out_path.write_bytes(content)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--config", "run_config", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="Run config with a `run:` section (query, selection, properties).")
def run(run_config: Path):
    """Scripted end-to-end run: search, select, extract, export."""
    config = load_config(run_config)
    state = CliState(config)
    spec: Dict[str, Any] = config.raw.get("run", {})
    try:
        request = SearchRequest(
            query=spec["query"],
            connector_ids=tuple(spec.get("sources") or config.registry.ids()),
            max_results=int(spec.get("limit", 20)),
            open_access_only=bool(spec.get("open_access_only", False)),
        )
        results = config.registry.search(request)
        selection = spec.get("select", "all")
        if selection == "all":
            chosen = list(results.records)
        elif isinstance(selection, int):
            chosen = list(results.records[:selection])
        else:
            wanted = set(selection)
            chosen = [r for r in results.records if r.record_id in wanted]
        cur = corpus_mod.new_corpus()
        corpus_mod.add_selection(cur, chosen)
        if spec.get("fetch", False):
            corpus_mod.fetch_documents(cur, config.workdir, fetcher=config.fetcher,
                                       max_workers=config.fetch_workers)
        data_model = define_model([_parse_prop(p) for p in spec["properties"]])
        tbl = extract_corpus(data_model, cur, config.gateway,
                             max_workers=config.extract_workers)
        state.store.save_corpus(cur)
        state.store.save_model(data_model)
        state.store.save_table(tbl)
        state.set_pointer(corpus_id=cur.corpus_id, model_id=data_model.model_id,
                          table_id=tbl.table_id)
        export_spec = spec.get("export", {})
        if "csv" in export_spec:
            Path(export_spec["csv"]).write_bytes(review.export_csv(tbl))
        if "json" in export_spec:
            Path(export_spec["json"]).write_bytes(review.export_json(tbl))
    except KeyError as exc:
        click.echo(f"error:schema_violation:run config missing {exc}", err=True)
        sys.exit(1)
    except LitloopError as exc:
        _fail(exc)
    click.echo(f"run complete: corpus {cur.corpus_id}, table {tbl.table_id}")


@main.command()
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
@click.pass_obj
def serve(state: CliState, host: Optional[str], port: Optional[int]):
    """Start the HTTP service."""
    import uvicorn

    from .service import create_app

    app = create_app(state.config)
    uvicorn.run(app, host=host or state.config.host, port=port or state.config.port)


if __name__ == "__main__":
    main()
