# (c) 2024, iterative-binarization contributors
#
# This file is part of iterative-binarization.
#
# iterative-binarization is free software: you can redistribute it and/or modify
# it under the terms of the Apache License as published by
# the Apache Software Foundation, either version 2 of the License, or
# (at your option) any later version.
#
# iterative-binarization is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# Apache License for more details.

import configparser
import os

from iterative_binarization import constants

FILENAME = "iterative-binarization.cfg"
FILE_LOCATIONS = [
    f"/etc/iterative-binarization/{FILENAME}",
    os.path.join(os.path.dirname(__file__), FILENAME),
]
INI_SECTION = "iterative-binarization"
ENV_PREFIX = "ITERATIVE_BINARIZATION_"


def parse_string_to_bool(val):
    if val is None:
        return val
    if val.lower() in ["yes", "1", "true"]:
        return True
    if val.lower() in ["no", "0", "false"]:
        return False
    return val


def _coerce(default, val):
    """Coerce an environment string to the type of the default value."""
    if isinstance(default, bool) or default is None:
        return parse_string_to_bool(val)
    if isinstance(default, int):
        return int(val)
    return val


class Config:
    """Configuration for iterative-binarization tooling."""

    DEFAULTS = {
        "data_dir": None,
        "eval_batch_size": 1000,
        "log_level_main": "INFO",
        "output_dir": "runs",
        "probe_selection": constants.ProbeSelection.BEST.value,
        "search_order_cap": constants.DEFAULT_SEARCH_ORDER_CAP,
        "skip_singleton_batches": True,
        "workers": 1,
    }

    def __init__(self, config_data=None):
        """Set config values to default, updated with any passed config_data."""
        _data = {}
        _data.update(self.DEFAULTS)
        _data.update(config_data or {})
        self.__dict__.update(_data)

        # Allow environment overrides, ITERATIVE_BINARIZATION_DATA_DIR among them
        for key in self.__dict__:
            env_key = ENV_PREFIX + key.upper()
            if env_key in os.environ:
                self.__dict__[key] = _coerce(self.DEFAULTS.get(key), os.environ[env_key])


class ConfigFile:
    """Load config from file and return dictionary."""

    @staticmethod
    def load():
        file_locations = list(FILE_LOCATIONS)
        env_config = os.getenv(ENV_PREFIX + "CONFIG")
        if env_config:
            file_locations.insert(0, env_config)
        config_parser_data = ConfigFile._load_file(file_locations)
        return ConfigFile._to_dictionary(config_parser_data)

    @staticmethod
    def _load_file(file_locations):
        file_path = None
        for f in file_locations:
            if os.path.isfile(f):
                file_path = f
                break

        if file_path:
            config_parser = configparser.ConfigParser()
            config_parser.read(file_path)
            if INI_SECTION not in config_parser:
                return {}
            return config_parser[INI_SECTION]
        return {}

    @staticmethod
    def _to_dictionary(config_parser_data):
        """Turn from configparser object in to dictionary, with booleans and integers."""
        config_data = {}
        for key in list(config_parser_data):
            default = Config.DEFAULTS.get(key)
            if isinstance(default, int) and not isinstance(default, bool):
                config_data[key] = config_parser_data.getint(key)
                continue
            try:
                config_data[key] = config_parser_data.getboolean(key)
            except ValueError:
                config_data[key] = config_parser_data.get(key)
        return config_data


def load_config(config_data=None):
    """Return a Config built from the config file, updated with config_data."""
    data = ConfigFile.load()
    data.update(config_data or {})
    return Config(config_data=data)
