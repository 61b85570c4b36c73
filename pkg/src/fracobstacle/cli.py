"""Console entry point; a thin wrapper around the experiment harness."""

import sys

from .harness import cli_main


def main(argv=None):
    return cli_main(argv if argv is not None else sys.argv[1:])


if __name__ == "__main__":
    raise SystemExit(main())
