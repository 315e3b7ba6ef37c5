"""Test configuration."""

import logging

from anisoheat.log import logger

logger.setLevel(logging.DEBUG)
