"""
File: custom_logging_handlers.py
Description: a QueueHandler that owns its QueueListener, so dictConfig can build a
             non-blocking handler around the stderr and json-file handlers.
"""

from atexit import register
from logging.config import ConvertingList
from logging.handlers import QueueHandler, QueueListener
from queue import Queue
from typing import Optional


class QueueListenerHandler(QueueHandler):

    def __init__(self, handlers, respect_handler_level=False, auto_run=True,
                 queue: Optional[Queue] = None):
        super().__init__(queue if queue is not None else Queue(-1))
        handlers = self._resolve_handlers(handlers)
        self._listener = QueueListener(
            self.queue,
            *handlers,
            respect_handler_level=respect_handler_level)
        self._running = False
        if auto_run:
            self.start()
            register(self.stop)

    def start(self):
        if not self._running:
            self._listener.start()
            self._running = True

    def stop(self):
        # drains the queue before returning
        if self._running:
            self._listener.stop()
            self._running = False

    def close(self):
        self.stop()
        super().close()

    def _resolve_handlers(self, handlers_list):
        if not isinstance(handlers_list, ConvertingList):
            return handlers_list

        # Indexing the list performs the evaluation.
        return [handlers_list[i] for i in range(len(handlers_list))]
