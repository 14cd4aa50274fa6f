import os

from core.configuration.configuration import get_environment, get_thread_limit


class ConfigManager:
    def __init__(self, app):
        self.app = app

    def load_config(self, config_name=None):
        # If config_name is not provided, use the environment variable MTCPERT_ENV
        if config_name is None:
            config_name = get_environment()

        if config_name == "testing":
            config_object = TestingConfig
        elif config_name == "production":
            config_object = ProductionConfig
        else:
            config_object = DevelopmentConfig

        for key in dir(config_object):
            if key.isupper():
                self.app.config[key] = getattr(config_object, key)
        self.app.debug = self.app.config.get("DEBUG", False)
        self.app.config_name = config_name


class Config:
    LOG_LEVEL = os.getenv("MTCPERT_LOG_LEVEL", "INFO")
    LOG_FILE = os.getenv("MTCPERT_LOG_FILE", "")
    THREADS = get_thread_limit()
    CSV_PRECISION = 12


class DevelopmentConfig(Config):
    DEBUG = True


class TestingConfig(Config):
    TESTING = True
    DEBUG = False
    LOG_FILE = ""


class ProductionConfig(Config):
    DEBUG = False
