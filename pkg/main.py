"""
Main entry point for noisecalc.

With arguments the command line is handed to modules.cli.commands.main
(see `python3 main.py --help`). Without arguments the three builtin
experiments run side by side, one thread each, which is what start.sh does.
"""

import sys
import threading
from dotenv import load_dotenv

from modules.utils.logs import setup_logging

# Load environment variables
load_dotenv()

logger = setup_logging("main", "main.log")

EXPERIMENT_NAMES = ("langevin1", "langevin2", "relativistic")


def start_experiment(name, codes):
    """Run one builtin experiment in a separate thread"""
    try:
        from modules.cli.commands import main as cli_main
        logger.info(f"Starting experiment {name}...")
        codes[name] = cli_main(["experiment", name])
    except Exception as e:
        logger.error(f"Error running experiment {name}: {e}")
        import traceback
        logger.error(traceback.format_exc())
        codes[name] = 1


def run_all():
    """Run every builtin experiment; the exit code is the worst one"""
    logger.info("Starting all builtin experiments...")
    codes = {}
    threads = [
        threading.Thread(target=start_experiment, args=(name, codes), name=f"experiment-{name}", daemon=True)
        for name in EXPERIMENT_NAMES
    ]
    for thread in threads:
        thread.start()

    try:
        for thread in threads:
            thread.join()
    except KeyboardInterrupt:
        logger.info("Received shutdown signal, stopping experiments...")
        return 130
    logger.info(f"Experiments finished: {codes}")
    return max(codes.values(), default=0)


def main():
    if len(sys.argv) > 1:
        from modules.cli.commands import main as cli_main
        return cli_main(sys.argv[1:])
    return run_all()


if __name__ == "__main__":
    sys.exit(main())
