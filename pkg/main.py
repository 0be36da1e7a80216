"""Low-light calibration and enhancement tool - Entry point."""

from dotenv import load_dotenv

from lle_calibration.cli import app

# DIFFLLE_SEED may come from a .env file
load_dotenv()

if __name__ == "__main__":
    app()
