"""Command line entry points: `kpi2kvi serve` and `kpi2kvi eval`."""

from __future__ import annotations

import click

from . import fixture_path, fixture_text
from .harness import NoiseModel, load_cases, sweep
from .orchestrator import SessionStore
from .service import create_app
from .taxonomy import load_taxonomy


@click.group()
def main():
    """KPI2KVI: from service description to bounded KVI results."""


@main.command()
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--store-dir", default=None, help="Session store directory (or KPI2KVI_STORE_DIR).")
@click.option(
    "--provider",
    "provider_kind",
    type=click.Choice(["scripted", "http"]),
    default="http",
    show_default=True,
)
@click.option("--playbook", default=None, help="Playbook JSON for the scripted provider.")
@click.option("--taxonomy", "taxonomy_path", default=None, help="Taxonomy document; defaults to the bundled fixture.")
@click.option("--allow-origin", default=None, help="CORS origin for the UI dev server.")
def serve(port, host, store_dir, provider_kind, playbook, taxonomy_path, allow_origin):
    """Run the streaming chat backend."""
    import uvicorn

    from .orchestrator import Orchestrator
    from .providers import HttpProvider, Playbook, ScriptedProvider

    if taxonomy_path:
        with open(taxonomy_path, encoding="utf-8") as fh:
            taxonomy = load_taxonomy(fh.read())
    else:
        taxonomy = load_taxonomy(fixture_text("default.taxonomy.json"))

    if provider_kind == "scripted":
        book = Playbook.load(playbook or fixture_path("telemedicine.playbook.json"))
        factory = lambda: ScriptedProvider(book)  # noqa: E731
    else:
        factory = HttpProvider

    app = create_app(
        Orchestrator(taxonomy), SessionStore(store_dir), factory, allowed_origin=allow_origin
    )
    uvicorn.run(app, host=host, port=port)


@main.command("eval")
@click.option("--cases", "cases_dir", default=None, help="Directory of *.case.json; defaults to bundled fixtures.")
@click.option("--variants", default="1,2,3,4", show_default=True)
@click.option("--q", "q_spec", default="0.0:1.0:0.1", show_default=True, help="start:stop:step or comma list.")
@click.option("--runs", default=10, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--alpha", default=0.5, show_default=True, help="Noise weight on 1-q.")
@click.option("--beta", default=0.1, show_default=True, help="Noise weight on formula depth.")
@click.option("--out", "out_path", default="results.csv", show_default=True)
def eval_command(cases_dir, variants, q_spec, runs, seed, alpha, beta, out_path):
    """Run the taxonomy-quality sweep and write metric CSV."""
    import os

    taxonomy = load_taxonomy(fixture_text("default.taxonomy.json"))
    directory = cases_dir or os.path.dirname(fixture_path("telemedicine.case.json"))
    cases = load_cases(directory)
    variant_list = [int(v) for v in variants.split(",") if v]
    csv_text = sweep(
        cases,
        variant_list,
        _parse_q(q_spec),
        runs,
        seed,
        taxonomy,
        NoiseModel(alpha=alpha, beta=beta),
    )
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    click.echo(f"wrote {out_path}")


def _parse_q(spec: str) -> list[float]:
    if ":" in spec:
        start, stop, step = (float(x) for x in spec.split(":"))
        values = []
        q = start
        while q <= stop + 1e-9:
            values.append(round(q, 10))
            q += step
        return values
    return [float(x) for x in spec.split(",")]


if __name__ == "__main__":
    main()
