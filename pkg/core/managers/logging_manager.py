import logging
import sys
from logging.handlers import RotatingFileHandler


class LoggingManager:
    def __init__(self, app):
        self.app = app

    def setup_logging(self):
        formatter = logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s")
        root = logging.getLogger("mtcpert")
        for handler in list(root.handlers):
            root.removeHandler(handler)

        log_file = self.app.config.get("LOG_FILE", "")
        if log_file:
            try:
                file_handler = RotatingFileHandler(log_file, maxBytes=10240, backupCount=10)
                file_handler.setLevel(logging.ERROR)
                file_handler.setFormatter(formatter)
                root.addHandler(file_handler)
            except (PermissionError, OSError) as e:
                # If we can't create the log file, just skip it
                print(f"Warning: Could not create log file: {e}", file=sys.stderr)

        # Console logging goes to stderr so CSV on stdout stays clean
        stream_handler = logging.StreamHandler(sys.stderr)
        stream_handler.setLevel(logging.INFO if self.app.debug else logging.WARNING)
        stream_handler.setFormatter(formatter)
        root.addHandler(stream_handler)

        root.setLevel(self.app.config.get("LOG_LEVEL", "INFO"))
        root.propagate = False
        self.app.logger = root
