#!/usr/bin/env python
"""Entry point of the adamant project.

    python manage.py adamant test --x X.csv --y Y.csv --out report.json
    python manage.py migrate          # run registry tables
    python manage.py test mantel
"""
import os
import sys


def main():
    os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings")
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Django is not installed; run `pip install -r requirements.txt` "
            "in the environment you use for the adamant project."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == "__main__":
    main()
