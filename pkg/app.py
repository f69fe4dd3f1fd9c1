"""Entry point for the riskbias command line."""

import sys

from dotenv import load_dotenv

# Load LOG_LEVEL / RISKBIAS_OUTPUT_DIR before the CLI configures logging
load_dotenv()

from riskbias.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
