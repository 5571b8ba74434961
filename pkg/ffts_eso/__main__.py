"""Allow running ffts_eso as a module: python -m ffts_eso"""

from .cli import main

if __name__ == "__main__":
    raise SystemExit(main())
