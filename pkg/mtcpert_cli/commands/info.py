import click

from core.configuration.configuration import get_app_version, get_environment, get_thread_limit

try:
    from importlib.metadata import PackageNotFoundError, metadata
except ImportError:  # pragma: no cover
    from importlib_metadata import PackageNotFoundError, metadata  # type: ignore


def get_metadata_value(meta, key, default="Unknown"):
    return meta.get(key, default)


@click.command()
def info():
    """Displays version and environment information."""
    package_name = "mtcpert"

    try:
        description = get_metadata_value(metadata(package_name), "Summary")
    except PackageNotFoundError:
        description = "Not available"

    click.echo(f"Name: {package_name}")
    click.echo(f"Version: {get_app_version()}")
    click.echo(f"Description: {description}")
    click.echo(f"Environment: {get_environment()}")
    click.echo(f"Threads: {get_thread_limit()}")
