import click

from mtcpert.modules.bath.models import FiniteBath
from mtcpert.modules.experiments.services import ExperimentsService, default_scaling_bath
from mtcpert_cli.runconfig import build_model, build_ode, build_quadrature, build_system, grid
from mtcpert_cli.runner import execute, run_options


@click.command("scaling")
@run_options
def scaling(config_path, overrides, out_dir):
    """Bi-probability errors against the exact composite evolution over a lambda grid."""

    def body(config, app):
        model, study = config["model"], config["study"]
        bath = build_model(config) if model["kind"] != "exponential" else None
        if not isinstance(bath, FiniteBath):
            bath = default_scaling_bath(model["seed"], model["beta"])
        service = ExperimentsService(build_quadrature(config), build_ode(config), app.config["THREADS"])
        report = service.error_scaling(bath, build_system(config, default=True), grid(study["lambdas"]), study["times"])
        return report.header, report.rows(), report.footer()

    execute("scaling", config_path, overrides, out_dir, body)
