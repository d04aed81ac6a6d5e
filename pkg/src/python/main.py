import sys
import os

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from cli import cli_main
from config import Config
from utils.logger import get_logger, log_execution, setup_logger

logger = get_logger("MainEntry")


@log_execution(level="DEBUG", start_msg="Application Started", end_msg="Application Finished")
def main(argv=None) -> int:
    Config.load()
    setup_logger(Config.log_level())

    return cli_main(argv)


if __name__ == "__main__":
    sys.exit(main())
