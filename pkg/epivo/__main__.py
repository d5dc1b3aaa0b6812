"""Allow ``python -m epivo`` as an alias for the CLI."""

from main import main

if __name__ == "__main__":
    main()
