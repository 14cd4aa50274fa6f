import click

from mtcpert.modules.experiments.services import ExperimentsService
from mtcpert_cli.runconfig import build_model, build_quadrature, grid
from mtcpert_cli.runner import execute, run_options


@click.command("fdt-check")
@run_options
def fdt_check(config_path, overrides, out_dir):
    """Both sides of the fluctuation-dissipation identity on the frequency grid."""

    def body(config, app):
        service = ExperimentsService(build_quadrature(config))
        report = service.fdt(build_model(config), grid(config["study"]["omegas"]))
        app.logger.info("fdt-check: max relative deviation %.3g", report.max_deviation)
        return report.header, report.rows()

    execute("fdt-check", config_path, overrides, out_dir, body)
