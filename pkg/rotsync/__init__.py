#!/usr/bin/env python3

"""
`rotsync` simulates random double rotations of the circle and of the
k-torus: maps which translate a set A by a vector v, fix its
complement, and are followed by a uniform random rotation. It decides
whether random trajectories synchronize, from the displacement
function φ_A of the set, and checks the answer against simulations.

The python standard :mod:`logging` module handles the logs. Every
experiment run is reported by a :class:`rotsync.logger.RunMessage`
under the `rotsync.experiments` logger (and sub-loggers named after
the experiments); the modules log their warnings under `rotsync`.

You can setup logging handlers and appropriate log formatting by
:func:`add_logging_handlers` function all in once:

  from rotsync import add_logging_handlers
  import logging
  my_handler = logging.FileHandler("/tmp/rotsync.log")
  add_logging_handlers(my_handler)
"""

import atexit
import logging.handlers
import queue

__version__ = "1.0.0"


def dictConfig(config):
    """
    Configure the experiments using a dictionary. Similar to
    :func:`logging.config.dictConfig`. The configuration will be
    extracted from the "experiments" key.

    :Parameters:
     - config: configuration dictionary
    """
    from .experiments import EXPERIMENTS

    for cls in EXPERIMENTS.values():
        cls.dictConfig(config, sub_section=cls.kind)


queue_listeners = []


def setup_queue_handler(backend, filters=None, register_atexit=True, **kwargs):
    """
    Creates an instance of :class:`logging.handlers.QueueHandler` with
    a :class:`queue.Queue`. Then it will create a
    :class:`logging.handlers.QueueListener` for the queue and the
    provided `backend` logging handler and starts it, so the experiment
    threads never wait on the backend I/O.

    Optionally the stop method of the listener could be registered with
    :func:`atexit.register`.

    :Parameters:
     - `backend`: the backend logging handler
     - `filters`: a list of filters to add to the QueueHandler
     - `register_atexit` (optional): enable registering with
       :mod:`atexit`
     - `kwargs` (optional): keyword arguments supplying any additional
       options for the queue, e.g. `maxsize`
    """
    que = queue.Queue(**kwargs)
    queue_handler = logging.handlers.QueueHandler(que)

    for _filter in filters or []:
        queue_handler.addFilter(_filter)

    listener = logging.handlers.QueueListener(que, backend,
                                              respect_handler_level=True)
    listener.start()
    queue_listeners.append(listener)

    if register_atexit:
        atexit.register(listener.stop)

    return queue_handler


def add_logging_handlers(
        *handlers, logger_name="rotsync.experiments", level=logging.INFO,
        formatter="{asctime} {name} - {run}", with_queue=True,
        register_atexit=True, **kwargs):
    """
    Add the specified `handlers` to the rotsync logger.

    If no handler is specified, a new instance of
    :class:`logging.StreamHandler` will be created and used as the
    handler.

    The handlers format can optionally be set to the provided string
    `formatter`. You can disable this feature by passing None as the
    `formatter`. The log format has to be set with `{` style.

    The logger level could also optionally be set by `level` argument.
    This feature could be disabled by passing None as `level`, too.

    Note that `level` does not change the level of the emitted logs.
    Those are configured per lifecycle stage in the "experiments"
    section, see :func:`dictConfig`.

    If `with_queue` is enabled (the default),
    :func:`setup_queue_handler` will be called to setup a
    :class:`logging.handlers.QueueHandler` for each handler.

    :Parameters:
     - `handlers` (optional): all positional arguments will be used as
       the logging handlers
     - `logger_name` (optional): the name of the logger
     - `level` (optional): the log level
     - `formatter` (optional): the :class:`str` string to set as the
       log format
     - `with_queue` (optional): if True (the default) enable setting
       up with a :class:`logging.handlers.QueueHandler`
     - `kwargs` (optional): keyword arguments supplying any additional
       options for :func:`setup_queue_handler`
    """
    if not handlers:
        handlers = [logging.StreamHandler()]

    logger = logging.getLogger(logger_name)
    if level is not None:
        logger.setLevel(level)

    if formatter is not None and not isinstance(formatter, logging.Formatter):
        formatter = logging.Formatter(formatter, style="{")

    for handler in handlers:
        if formatter is not None:
            handler.setFormatter(formatter)

        if with_queue:
            handler = setup_queue_handler(
                handler, register_atexit=register_atexit, **kwargs)

        logger.addHandler(handler)
