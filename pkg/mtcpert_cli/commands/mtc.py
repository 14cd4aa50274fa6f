import click

from mtcpert.modules.bath.models import FiniteBath
from mtcpert.modules.experiments.services import composite_evolution
from mtcpert.modules.mtc_oracle.models import MTCQuery
from mtcpert.modules.mtc_oracle.services import embed_system, mtc_exact
from mtcpert.modules.opalg.services import spectral_decompose
from mtcpert.modules.perturb.services import PerturbativeService
from mtcpert_cli.runconfig import build_model, build_ode, build_quadrature, build_query, build_system
from mtcpert_cli.runner import execute, run_options

HEADER = (
    "branches",
    "order",
    "zeroth_re",
    "zeroth_im",
    "first_re",
    "first_im",
    "total_re",
    "total_im",
    "exact_re",
    "exact_im",
)


def exact_mtc(q, system, m):
    """Moment of the full system-bath evolution, for finite baths."""
    H, rho = composite_evolution(system, m)
    observables = [spectral_decompose(embed_system(obs.matrix, m.dim)) for obs in q.observables]
    return mtc_exact(MTCQuery(q.times, observables, q.branches), H, rho)


@click.command("mtc")
@run_options
def mtc(config_path, overrides, out_dir):
    """Perturbative multi-time correlation of the configured query."""

    def body(config, app):
        query = config["query"]
        q = build_query(config)
        system = build_system(config)
        m = build_model(config)
        service = PerturbativeService(build_quadrature(config), build_ode(config))
        result = service.mtc(
            q, system, m, order=query["order"], propagator=query["propagator"], limits=query["limits"]
        )
        exact = exact_mtc(q, system, m) if isinstance(m, FiniteBath) else None
        row = (
            "".join(b.value for b in q.branches),
            query["order"],
            result.zeroth.real,
            result.zeroth.imag,
            result.first_correction.real,
            result.first_correction.imag,
            result.total.real,
            result.total.imag,
            None if exact is None else exact.real,
            None if exact is None else exact.imag,
        )
        for message in result.diagnostics["warnings"]:
            app.logger.warning("mtc: %s", message)
        return HEADER, [row]

    execute("mtc", config_path, overrides, out_dir, body)
