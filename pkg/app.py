import os

from app import create_app

# CLI: flask --app app.py analyze|simulate|ensemble|version|selftest
app = create_app(os.getenv("FLASK_ENV", "development"))
