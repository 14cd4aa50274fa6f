from core.exceptions import ConfigError, DomainError, NumericError

EXIT_OK = 0
EXIT_NUMERIC = 1
EXIT_VALIDATION = 2


class ErrorHandlerManager:
    def __init__(self, app):
        self.app = app
        self.handlers = []

    def register_error_handlers(self):
        # Most specific first: ConfigError is a DomainError.
        @self.errorhandler(ConfigError)
        def config_error(e):
            for key, message in e.errors:
                self.app.logger.warning("Invalid configuration: %s: %s", key, message)
            return EXIT_VALIDATION

        @self.errorhandler(DomainError)
        def domain_error(e):
            self.app.logger.warning("Validation error: %s", str(e))
            return EXIT_VALIDATION

        @self.errorhandler(NumericError)
        def numeric_error(e):
            self.app.logger.error("Numeric failure: %s", str(e))
            return EXIT_NUMERIC

        @self.errorhandler(Exception)
        def internal_error(e):
            self.app.logger.exception("Internal error: %s", str(e))
            return EXIT_NUMERIC

    def errorhandler(self, exception_class):
        def decorator(f):
            self.handlers.append((exception_class, f))
            return f

        return decorator

    def handle(self, exc):
        for exception_class, handler in self.handlers:
            if isinstance(exc, exception_class):
                return handler(exc)
        raise exc
