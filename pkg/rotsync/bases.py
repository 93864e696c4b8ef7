#!/usr/bin/env python3

"""
Implement base types for the rotsync experiments that could be
inherited from.
"""

import contextlib
import logging.config
import os
from collections.abc import Mapping, Sequence

from .logger import RunMessage, log


class ExperimentConfigurator(logging.config.BaseConfigurator):
    """
    An extension of :class:`logging.config.BaseConfigurator` which
    adds methods for the "experiments" configuration section and for
    resolving the `cfg://` and `ext://` values of the domain sections.
    """
    def configure_experiment_global(self, cls, sub_section="global"):
        """
        Apply common configurations from `sub_section` of the
        "experiments" section of the configuration to `cls` i.e. an
        experiment class.

        Currently, "log_level", "default_fields" and "csv" are
        supported.

        :Parameters:
         - `cls`: the experiment class
         - `sub_section` (optional): the name of a sub section in the
           "experiments" section.
        """
        section = self.config.get("experiments", {}).get(sub_section, {})

        levels = self.configure_log_level(section.get("log_level", {}))
        for log_type in ["first", "update", "final"]:
            with contextlib.suppress(KeyError):
                setattr(cls, f"_log_level_{log_type}", levels[log_type])

        try:
            default_fields = tuple(key for key in
                                   section.get("default_fields", [])
                                   if key in cls.all_fields)
        except Exception:
            default_fields = ()

        if default_fields:
            cls.default_fields = default_fields

        with contextlib.suppress(Exception):
            for csv_item in section.get("csv", []):
                file_name = self.convert(csv_item.get("file"))
                headers = csv_item.get("add_headers_if_empty")

                if file_name and headers:
                    csv_columns = ",".join(RunMessage.csv_columns())
                    headers = headers.replace("{run.csv}", csv_columns)
                    headers = headers.rstrip("\n") + "\n"

                    with contextlib.suppress(IOError, OSError):
                        if not os.path.exists(file_name) or \
                                os.path.getsize(file_name) == 0:
                            with open(file_name, "w") as fp:
                                fp.write(headers)

    def configure_log_level(self, config):
        """
        Given a dictionary `config` i.e. "log_level" section of
        "experiments", this method will return a mapping from all the
        given keys in the dictionary to the resolved log level.

        For example, if `config` is {"final": "cfg://levels.normal"}
        and "levels.normal" in the configuration is the string "INFO",
        the result will be {"final": 20}.

        :Parameters:
         - config: the log_level dictionary in the configuration
        """
        result = {}

        for key, level in config.items():
            with contextlib.suppress(Exception):
                result[key] = logging._checkLevel(self.convert(level))

        return result

    def resolve(self, value):
        """
        Returns a plain copy of `value` (usually a section of the
        configuration) with every `cfg://` and `ext://` string replaced
        by what it refers to.
        """
        value = self.convert(value)
        if isinstance(value, Mapping):
            return {key: self.resolve(value[key]) for key in value}
        if isinstance(value, Sequence) and not isinstance(value, str):
            return [self.resolve(value[i]) for i in range(len(value))]
        return value


class BaseExperiment:
    """
    The shared code between all the experiment classes will be
    maintained here.

    Every run of an experiment (one seed) is reported by a
    :class:`rotsync.logger.RunMessage`: a "first" log when it starts,
    "update" logs at its checkpoints and a "final" log with its
    summary.

    :Attributes:
     - `kind`: the experiment name, also its "experiments" sub-section
     - `default_fields`: The `default_keys` for RunMessage
     - `all_fields`: List of all the possible log fields
    """
    kind = None
    default_fields = ()
    all_fields = ()

    # Defaults for global configurations
    _log_level_first = logging.DEBUG
    _log_level_update = logging.DEBUG
    _log_level_final = logging.INFO

    @classmethod
    def logger_name(cls):
        return f"rotsync.experiments.{cls.kind}"

    @classmethod
    def dictConfig(cls, config, sub_section=None, add_globals=True):
        """
        Configure the experiment class using a dictionary. Similar to
        :func:`logging.config.dictConfig`. The configuration will be
        extracted from the "experiments" key in the `config`
        dictionary.

        :Parameters:
         - `config`: configuration dictionary
         - `sub_section` (optional): Name of a sub-section in the
           experiments section to load after the "global" one
         - `add_globals` (optional): A boolean indicating weather to
           load the "global" section or not.
        """
        cls._configurator = ExperimentConfigurator(config)

        if add_globals:
            cls._configurator.configure_experiment_global(cls)

        if sub_section is not None:
            cls._configurator.configure_experiment_global(
                cls, sub_section=sub_section)

    def start_message(self, **fields):
        """
        Creates the message of a run and emits its "first" log.
        """
        message = RunMessage(Experiment=self.kind, **fields)
        message.default_keys = self.default_fields or None
        log(self.logger_name(), message, level=self._log_level_first)
        return message

    def update_message(self, message, **fields):
        message.advance(**fields)
        log(self.logger_name(), message, level=self._log_level_update)

    def final_message(self, message, **fields):
        message.update(fields)
        message.finalize()
        log(self.logger_name(), message, level=self._log_level_final)
