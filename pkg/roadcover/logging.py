import logging


LOGGER_NAME = 'roadcover'
logger = logging.getLogger(LOGGER_NAME)
