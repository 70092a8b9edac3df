"""Command-line entry points.

    emagent ingest <corpus.jsonl>                    chunking statistics
    emagent index build <corpus.jsonl> -o out.jsonl  embed and persist an index
    emagent analyze --pollutant NOx --year 2020 ...  inventory aggregation
    emagent ef --vehicle ... --fuel ...              EF recommendation
    emagent eval run <benchmark.jsonl> ...           metric report
    emagent eval experts <scores.csv> --pair A,B     expert win/tie/loss
    emagent tools list --json                        registered function specs
    emagent serve --port 8080 ...                    HTTP service
"""

from __future__ import annotations

import csv as csv_mod
import json
import sys
from pathlib import Path

import click

from . import efrec, evalkit
from .agent import PromptPack
from .corpus import chunk_documents, load_corpus
from .errors import EmagentError
from .inventory import (
    FilterSpec,
    aggregate,
    build_registry,
    chart_to_payload,
    load_inventory,
    make_chart,
    table_to_payload,
    InventoryStore,
)
from .providers import ProviderConfig, load_chat_fixtures
from .retrieval import VectorIndex, build_index
from .service import AppResources, create_app


def _provider_from_options(mode: str | None, fixtures: str | None) -> ProviderConfig:
    config = ProviderConfig.from_env()
    overrides = {}
    if mode:
        overrides["mode"] = mode
    if fixtures:
        overrides["chat_fixtures"] = load_chat_fixtures(fixtures)
    if overrides:
        config = ProviderConfig(**{**config.__dict__, **overrides})
    return config


def _fail(exc: Exception) -> None:
    raise click.ClickException(str(exc))


@click.group()
def main():
    """Emission knowledge and analytics agent."""


@main.command()
@click.argument("corpus", type=click.Path(exists=True))
@click.option("--max-tokens", default=256, show_default=True)
def ingest(corpus, max_tokens):
    """Parse and chunk a corpus, printing per-document statistics."""
    try:
        docs = load_corpus(corpus)
        chunks = chunk_documents(docs, max_tokens=max_tokens)
    except EmagentError as exc:
        _fail(exc)
    by_doc: dict[str, int] = {}
    for chunk in chunks:
        by_doc[chunk.doc_id] = by_doc.get(chunk.doc_id, 0) + 1
    for doc in docs:
        click.echo(f"{doc.doc_id}\t{by_doc.get(doc.doc_id, 0)} chunks")
    click.echo(f"total: {len(docs)} documents, {len(chunks)} chunks")


@main.group()
def index():
    """Vector index maintenance."""


@index.command("build")
@click.argument("corpus", type=click.Path(exists=True))
@click.option("-o", "--output", required=True, type=click.Path())
@click.option("--max-tokens", default=256, show_default=True)
@click.option("--mode", type=click.Choice(["stub", "live"]), default=None)
def index_build(corpus, output, max_tokens, mode):
    """Embed every chunk of CORPUS and write the index file."""
    provider = _provider_from_options(mode, None)
    try:
        docs = load_corpus(corpus)
        chunks = chunk_documents(docs, max_tokens=max_tokens)
        built = build_index(chunks, provider)
        built.save(output)
    except EmagentError as exc:
        _fail(exc)
    click.echo(f"indexed {len(built)} chunks -> {output}")


@main.command()
@click.option("--inventory", "inventory_path", required=True, type=click.Path(exists=True))
@click.option("--pollutant", default=None)
@click.option("--year", type=int, default=None)
@click.option("--region", default=None)
@click.option("--sector", default=None)
@click.option("--subsector", default=None)
@click.option("--from-year", type=int, default=None)
@click.option("--to-year", type=int, default=None)
@click.option("--group-by", "group_by", required=True,
              type=click.Choice(["sector", "subsector", "pollutant", "year"]))
@click.option("--chart", type=click.Choice(["pie", "stacked_bar", "line"]), default=None)
@click.option("--json", "as_json", is_flag=True, help="emit JSON instead of a table")
@click.option("--csv", "as_csv", is_flag=True, help="emit CSV instead of a table")
def analyze(inventory_path, pollutant, year, region, sector, subsector,
            from_year, to_year, group_by, chart, as_json, as_csv):
    """Aggregate inventory rows and print a table, JSON, or chart payload."""
    if as_json and as_csv:
        _fail(ValueError("choose at most one of --json / --csv"))
    try:
        store = load_inventory(inventory_path)
        year_range = (from_year, to_year) if from_year is not None and to_year is not None else None
        filters = FilterSpec(region=region, year=year, sector=sector,
                             subsector=subsector, pollutant=pollutant,
                             year_range=year_range)
        table = aggregate(filters, group_by, store)
    except EmagentError as exc:
        _fail(exc)
    if chart:
        from .inventory import aggregate_by_year
        source = table if chart == "pie" else aggregate_by_year(filters, group_by, store)
        payload = chart_to_payload(make_chart(source, chart, f"emissions by {group_by}"))
        click.echo(json.dumps(payload, ensure_ascii=False, indent=2))
        return
    if as_json:
        click.echo(json.dumps(table_to_payload(table), ensure_ascii=False, indent=2))
        return
    if as_csv:
        writer = csv_mod.writer(sys.stdout)
        writer.writerow([group_by, "total_tonnes", "share"])
        for key, total, share in table.rows:
            writer.writerow([key, f"{total:g}", f"{share:.6f}"])
        return
    for key, total, share in table.rows:
        click.echo(f"{key}\t{total:g}\t{share:.1%}")
    click.echo(f"grand total: {table.grand_total:g}")


@main.command()
@click.option("--vehicle", default=None, help="vehicle type, e.g. light-duty")
@click.option("--fuel", default=None, help="fuel type, e.g. gasoline")
@click.option("--standard", default=None, help="emission standard, e.g. 'China III'")
@click.option("--region", default=None)
@click.option("--guidelines", required=True, type=click.Path(exists=True))
@click.option("--literature", required=True, type=click.Path(exists=True))
@click.option("--json", "as_json", is_flag=True)
def ef(vehicle, fuel, standard, region, guidelines, literature, as_json):
    """Recommend emission factors for a source configuration."""
    try:
        guideline_db = efrec.load_ef_records(guidelines)
        literature_db = efrec.load_ef_records(literature)
    except EmagentError as exc:
        _fail(exc)
    query = efrec.EFQuery(vehicle_type=vehicle, fuel_type=fuel,
                          emission_standard=standard, region=region)
    outcome = efrec.recommend(query, guideline_db, literature_db, ProviderConfig())
    if as_json:
        click.echo(json.dumps(efrec.outcome_to_payload(outcome),
                              ensure_ascii=False, indent=2))
        return
    if not outcome.complete:
        click.echo("missing attributes: " + ", ".join(outcome.missing))
        return
    header = f"{'rank':<5}{'tier':<11}{'ef_id':<14}{'score':<7}{'grades':<9}pollutants / citation"
    click.echo(header)
    for rec in outcome.recommendations:
        grades = "".join(rec.grades.as_tuple()) if rec.grades else "-"
        score = f"{rec.composite_score:.2f}" if rec.composite_score is not None else "-"
        values = "; ".join(f"{sp}={pv.value:g} {pv.units}"
                           for sp, pv in sorted(rec.record.pollutant_values.items()))
        click.echo(f"{rec.rank:<5}{rec.tier:<11}{rec.record.ef_id:<14}"
                   f"{score:<7}{grades:<9}{values} | {rec.record.citation}")


@main.group("eval")
def eval_group():
    """Benchmark metrics and expert-score aggregation."""


@eval_group.command("run")
@click.argument("benchmark", type=click.Path(exists=True))
@click.option("--corpus", "corpus_path", required=True, type=click.Path(exists=True))
@click.option("--index", "index_path", default=None, type=click.Path(exists=True),
              help="prebuilt index file; embeds the corpus when omitted")
@click.option("--report", "report_path", default=None, type=click.Path())
@click.option("-k", default=5, show_default=True)
def eval_run(benchmark, corpus_path, index_path, report_path, k):
    """Score BENCHMARK against the corpus and write the stratified report."""
    provider = ProviderConfig()
    try:
        docs = load_corpus(corpus_path)
        chunks = chunk_documents(docs)
        if index_path:
            vec_index = VectorIndex.load(index_path, chunks)
        else:
            vec_index = build_index(chunks, provider)
        items = evalkit.load_benchmark(benchmark)
        runs = evalkit.run_benchmark(items, provider, vec_index, k=k)
        report = evalkit.report_to_payload(evalkit.aggregate_scores(runs))
    except EmagentError as exc:
        _fail(exc)
    text = json.dumps(report, ensure_ascii=False, indent=2)
    if report_path:
        Path(report_path).write_text(text + "\n", encoding="utf-8")
        click.echo(f"report written to {report_path}")
    else:
        click.echo(text)


@eval_group.command("experts")
@click.argument("scores", type=click.Path(exists=True))
@click.option("--pair", required=True, help="two model ids, comma separated")
def eval_experts(scores, pair):
    """Aggregate expert scores into win/tie/loss counts for a model pair."""
    try:
        model_a, model_b = (p.strip() for p in pair.split(",", 1))
    except ValueError:
        _fail(ValueError("--pair needs two comma-separated model ids"))
    try:
        records = evalkit.load_expert_scores(scores)
        report = evalkit.pairwise_win_rates(records, model_a, model_b)
    except EmagentError as exc:
        _fail(exc)
    click.echo(json.dumps(evalkit.pairwise_to_payload(report),
                          ensure_ascii=False, indent=2))


@main.group()
def tools():
    """Function-calling registry."""


@tools.command("list")
@click.option("--json", "as_json", is_flag=True)
def tools_list(as_json):
    """List the registered analysis functions."""
    registry = build_registry()
    if as_json:
        click.echo(json.dumps(registry.describe(), ensure_ascii=False, indent=2))
        return
    for spec in registry.describe():
        click.echo(f"{spec['name']}: {spec['description']}")


def _read_config_file(path) -> dict[str, str]:
    """key = value lines; '#' starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.ClickException(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


@main.command()
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--corpus", "corpus_path", default=None, type=click.Path())
@click.option("--index", "index_path", default=None, type=click.Path())
@click.option("--inventory", "inventory_path", default=None, type=click.Path())
@click.option("--ef-guidelines", default=None, type=click.Path())
@click.option("--ef-literature", default=None, type=click.Path())
@click.option("--prompts", "prompts_dir", default=None, type=click.Path())
@click.option("--mode", type=click.Choice(["stub", "live"]), default=None)
@click.option("--chat-fixtures", default=None, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
def serve(port, host, corpus_path, index_path, inventory_path, ef_guidelines,
          ef_literature, prompts_dir, mode, chat_fixtures, config_path):
    """Start the HTTP service."""
    if config_path:
        file_values = _read_config_file(config_path)
        corpus_path = corpus_path or file_values.get("corpus")
        index_path = index_path or file_values.get("index")
        inventory_path = inventory_path or file_values.get("inventory")
        ef_guidelines = ef_guidelines or file_values.get("ef_guidelines")
        ef_literature = ef_literature or file_values.get("ef_literature")
        prompts_dir = prompts_dir or file_values.get("prompts")
        mode = mode or file_values.get("mode")
        chat_fixtures = chat_fixtures or file_values.get("chat_fixtures")
        port = int(file_values.get("port", port))
        host = file_values.get("host", host)

    try:
        res = build_resources(
            corpus_path=corpus_path,
            index_path=index_path,
            inventory_path=inventory_path,
            ef_guidelines=ef_guidelines,
            ef_literature=ef_literature,
            mode=mode,
            chat_fixtures=chat_fixtures,
        )
        if prompts_dir:
            res.prompts = PromptPack.load(prompts_dir)
    except EmagentError as exc:
        _fail(exc)
    app = create_app(res)
    import uvicorn
    uvicorn.run(app, host=host, port=port, log_level="info")


def build_resources(corpus_path=None, index_path=None, inventory_path=None,
                    ef_guidelines=None, ef_literature=None, mode=None,
                    chat_fixtures=None) -> AppResources:
    """Assemble service resources from file paths; absent inputs stay empty."""
    provider = _provider_from_options(mode, chat_fixtures)
    if corpus_path:
        docs = load_corpus(corpus_path)
        chunks = chunk_documents(docs)
        if index_path:
            vec_index = VectorIndex.load(index_path, chunks)
        else:
            vec_index = build_index(chunks, provider)
    else:
        vec_index = VectorIndex()
    store = load_inventory(inventory_path) if inventory_path else InventoryStore(())
    return AppResources(
        provider=provider,
        index=vec_index,
        registry=build_registry(),
        store=store,
        guideline_db=efrec.load_ef_records(ef_guidelines) if ef_guidelines else [],
        literature_db=efrec.load_ef_records(ef_literature) if ef_literature else [],
    )


if __name__ == "__main__":
    main()
