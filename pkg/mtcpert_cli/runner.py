import functools
import os

import click

from mtcpert import create_app
from mtcpert_cli.runconfig import parse_config, write_csv


def run_options(f):
    """--config, --set and --out, shared by every computing command."""

    @click.option("--config", "config_path", type=click.Path(), default=None, help="YAML run configuration.")
    @click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE", help="Override a config key (dotted path).")
    @click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None, help="Output directory.")
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        return f(*args, **kwargs)

    return wrapper


def execute(name, config_path, overrides, out_dir, body):
    """Parse the config, run ``body(config, app)`` and write ``<out>/<name>.csv``.

    ``body`` returns ``(header, rows)`` or ``(header, rows, footer)``. Exceptions are
    mapped to exit codes by the application's error handlers.
    """
    app = create_app()
    try:
        config = parse_config(config_path, overrides)
        result = body(config, app)
        header, rows = result[0], result[1]
        footer = result[2] if len(result) > 2 else None
        directory = out_dir if out_dir is not None else config["output"]["dir"]
        path = write_csv(os.path.join(directory, f"{name}.csv"), config, header, rows, footer)
    except Exception as e:
        raise SystemExit(app.handle_exception(e))
    app.logger.info("%s: wrote %s rows to %s", name, len(rows), path)
    click.echo(path)
