import click

from mtcpert.modules.experiments.services import ExperimentsService
from mtcpert_cli.runconfig import build_quadrature, grid
from mtcpert_cli.runner import execute, run_options


@click.command("demo-thermalization")
@run_options
def demo_thermalization(config_path, overrides, out_dir):
    """Detector rates at orders 0 and 1 and their detailed-balance ratios."""

    def body(config, app):
        model, study = config["model"], config["study"]
        service = ExperimentsService(build_quadrature(config), threads=app.config["THREADS"])
        report = service.thermalization_demo(
            beta=model["beta"],
            lam=model["lam"],
            mu=study["mu"],
            tau=model["tau"],
            omega_grid=grid(study["omegas"]),
            dt_grid=grid(study["dt_grid"]) if "dt_grid" in study else None,
        )
        return report.header, report.rows()

    execute("demo-thermalization", config_path, overrides, out_dir, body)
