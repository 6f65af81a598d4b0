import logging
import os
from datetime import datetime
from tqdm import tqdm

LOGGER_NAME = "consentaneous_sim"

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"


class TqdmLoggingHandler(logging.Handler):
    """Writes records through tqdm.write so they land above the realization progress bar."""

    def emit(self, record):
        try:
            tqdm.write(self.format(record))
            self.flush()
        except Exception:
            self.handleError(record)


class RunFileHandler(logging.FileHandler):
    """File handler of one run; tagged so a later setup_logger call can find and replace it."""


def run_log_path(log_dir, run_tag):
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    safe_tag = "".join(c if c.isalnum() or c in "-_" else "_" for c in run_tag)
    return os.path.join(log_dir, f"consentaneous_{safe_tag}_{timestamp}.log")


def setup_logger(name=LOGGER_NAME, log_dir="./logs", level="INFO", run_tag="run"):
    """
    Console (through tqdm) plus one log file per run under `log_dir`.

    Calling it again in the same process, as a test session or a batch of
    experiments does, closes the previous run file and opens a new one in
    the new `log_dir`; the console handler is kept.
    """
    os.makedirs(log_dir, exist_ok=True)

    logger = logging.getLogger(name)
    logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))
    formatter = logging.Formatter(LOG_FORMAT)

    for handler in list(logger.handlers):
        if isinstance(handler, RunFileHandler):
            logger.removeHandler(handler)
            handler.close()

    if not any(isinstance(h, TqdmLoggingHandler) for h in logger.handlers):
        console_handler = TqdmLoggingHandler()
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

    file_handler = RunFileHandler(run_log_path(log_dir, run_tag))
    file_handler.setFormatter(formatter)
    logger.addHandler(file_handler)

    logger.debug(f"Logging to {file_handler.baseFilename}")
    return logger
