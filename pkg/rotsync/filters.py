#!/usr/bin/env python3

"""
Filters for the records emitted through the `rotsync` loggers, based
on :class:`logging.Filter`.
"""

import logging


class ExpressionFilter(logging.Filter):
    """
    Filters records by a python expression evaluated with :func:`eval`.

    The fields of the :class:`rotsync.logger.RunMessage` inside the
    :class:`logging.LogRecord` are available as variables of the
    expression, as is the whole message under the name `run`:

      ExpressionFilter("Iteration == 'final'")
      ExpressionFilter("Experiment == 'diffchain' and TV > 0.05")
    """
    def __init__(self, expression, exception_result=False):
        """
        Initialize a filter based on a python expression.

        :Parameters:
         - `expression`: the filter expression as a :class:`str`
         - `exception_result` (optional): the result of :meth:`filter`
           when evaluating the expression raises
        """
        super().__init__()
        self._expression = expression
        self._exception_result = exception_result

    def filter(self, record):
        """
        Returns eval(expression), or the requested result for
        exceptions.

        :Parameters:
         - `record`: the input :class:`logging.LogRecord` instance
        """
        run = getattr(record, "run", None)
        fields = run if isinstance(run, dict) else {}
        _locals = {"_record": record, "run": run, **fields}
        try:
            return bool(eval(self._expression, _locals, _locals))
        except Exception:
            return self._exception_result
