from modules.cli.config import RunConfig, EXPERIMENTS, build_model
from modules.cli.commands import (
    EXIT_OK,
    EXIT_UNEXPECTED,
    EXIT_CONFIG,
    EXIT_NUMERIC,
    build_parser,
    main,
)
