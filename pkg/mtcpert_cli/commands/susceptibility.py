import click

from mtcpert.modules.experiments.services import ExperimentsService
from mtcpert_cli.runconfig import build_quadrature, grid
from mtcpert_cli.runner import execute, run_options


@click.command("susceptibility")
@run_options
def susceptibility(config_path, overrides, out_dir):
    """Residue-sum susceptibility of the exponential bath against its limits."""

    def body(config, app):
        model, study = config["model"], config["study"]
        service = ExperimentsService(build_quadrature(config))
        report = service.susceptibility(
            grid(study["susceptibility_times"]), model["beta"], model["tau"], study.get("n_terms")
        )
        return report.header, report.rows()

    execute("susceptibility", config_path, overrides, out_dir, body)
