"""
File: logging_setup.py
Description: configure the "fovtopp" package logger for a CLI run. Library modules
             only call logging.getLogger(__name__); nothing outside the CLI touches
             the configuration.
"""
from typing import Union
from os import PathLike
import os
import json
import logging
import logging.config
import pathlib

# local imports
from ..consts import get_custom_logging_path, get_log_level, PACKAGE_LOGGER, LOG_ENV_VAR, LOG_LEVELS


def setup_logger(out_dir: Union[str, PathLike], run_name: str) -> logging.Logger:
    """
    Apply logger_config.json with the json log written to <out_dir>/logs/<run_name>.jsonl
    and the stderr level taken from FOVTOPP_LOG.

    Args:
        out_dir (PathLike): run output directory
        run_name (str): stem of the json log file

    Returns:
        logging.Logger: the package logger
    """
    logger_config = pathlib.Path(get_custom_logging_path(), "logger_config.json")
    if not logger_config.exists():
        raise FileNotFoundError(f"missing logging configuration: {logger_config}")
    with open(logger_config, "r") as log_cfg:
        config = json.load(log_cfg)

    log_path = os.path.join(out_dir, "logs", f"{run_name}.jsonl")
    set_logs_paths(config, log_path)
    config["handlers"]["err_std"]["level"] = get_log_level()

    logging.config.dictConfig(config)
    logger = logging.getLogger(PACKAGE_LOGGER)

    requested = os.environ.get(LOG_ENV_VAR)
    if requested is not None and requested.strip().lower() not in LOG_LEVELS:
        logger.warning(f"unknown {LOG_ENV_VAR} value {requested!r}; using info")
    return logger


def set_logs_paths(logs_config: dict, run_log_path: Union[str, PathLike]) -> None:
    """
    Point the json file handler at run_log_path, creating its directory.
    """
    try:
        logs_config["handlers"]["file_json"]["filename"] = str(run_log_path)
    except KeyError:
        raise ValueError('log config must define config["handlers"]["file_json"]["filename"]')

    log_dir = os.path.dirname(run_log_path)
    if log_dir and not os.path.exists(log_dir):
        os.makedirs(log_dir)
