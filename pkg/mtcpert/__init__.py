import logging

from dotenv import load_dotenv

from core.configuration.configuration import get_app_version
from core.managers.config_manager import ConfigManager
from core.managers.error_handler_manager import ErrorHandlerManager
from core.managers.logging_manager import LoggingManager

# Load environment variables
load_dotenv()


class Application:
    """Run context: resolved settings, the package logger and the exception-to-exit-code handlers."""

    def __init__(self):
        self.config = {}
        self.debug = False
        self.config_name = None
        self.logger = logging.getLogger("mtcpert")
        self.error_handler = None
        self.version = get_app_version()

    def handle_exception(self, exc):
        return self.error_handler.handle(exc)


def create_app(config_name=None):
    app = Application()

    # Load configuration according to environment
    config_manager = ConfigManager(app)
    config_manager.load_config(config_name=config_name)

    # Set up logging
    logging_manager = LoggingManager(app)
    logging_manager.setup_logging()

    # Initialize error handler manager
    error_handler_manager = ErrorHandlerManager(app)
    error_handler_manager.register_error_handlers()
    app.error_handler = error_handler_manager

    return app
