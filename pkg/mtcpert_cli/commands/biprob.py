import click

from mtcpert.modules.perturb.services import PerturbativeService
from mtcpert_cli.runconfig import build_model, build_ode, build_quadrature, build_query, build_system
from mtcpert_cli.runner import execute, run_options


def table_columns(n):
    """Latest time first: f{n}p .. f1p, f{n}m .. f1m, re, im."""
    plus = [f"f{j}p" for j in range(n, 0, -1)]
    minus = [f"f{j}m" for j in range(n, 0, -1)]
    return tuple(plus + minus + ["re", "im"])


@click.command("biprob")
@run_options
def biprob(config_path, overrides, out_dir):
    """Perturbative bi-probability table of the configured query."""

    def body(config, app):
        query = config["query"]
        q = build_query(config)
        service = PerturbativeService(build_quadrature(config), build_ode(config))
        table = service.biprob(
            q,
            build_system(config),
            build_model(config),
            order=query["order"],
            propagator=query["propagator"],
            limits=query["limits"],
        )
        rows = []
        for fplus, fminus, value in table.items():
            rows.append(tuple(reversed(fplus)) + tuple(reversed(fminus)) + (value.real, value.imag))
        return table_columns(q.n), rows

    execute("biprob", config_path, overrides, out_dir, body)
