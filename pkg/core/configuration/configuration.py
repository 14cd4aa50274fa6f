import os

from dotenv import load_dotenv

load_dotenv()

PACKAGE_NAME = "mtcpert"


def get_app_version():
    try:
        from importlib.metadata import PackageNotFoundError, version
    except ImportError:  # pragma: no cover
        return "unknown"

    try:
        return version(PACKAGE_NAME)
    except PackageNotFoundError:
        version_file_path = os.path.join(os.getenv("WORKING_DIR", ""), ".version")
        try:
            with open(version_file_path, "r") as file:
                return file.readline().strip()
        except FileNotFoundError:
            return "unknown"


def get_thread_limit():
    """Worker-thread cap from ``MTCPERT_THREADS`` (default 1, invalid values fall back to 1)."""
    raw = os.getenv("MTCPERT_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError:
        return 1
    return max(threads, 1)


def get_environment():
    return os.getenv("MTCPERT_ENV", "development")
