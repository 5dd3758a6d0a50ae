"""peftt CLI package."""

from .cli import app, main, run

if __name__ == "__main__":
    main()
