"""Entry point for ``python -m bregsmooth``."""

from .cli import main

if __name__ == "__main__":
    main()
