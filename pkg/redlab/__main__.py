"""Execute the module as an application."""

from redlab.main import app

if __name__ == '__main__':
    app()
