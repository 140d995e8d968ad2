"""Pytest wiring equivalent to `python manage.py test mantel` (settings, test database, acceptance tag)."""
import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "config.settings")
django.setup()

import pytest  # noqa: E402
from django.conf import settings  # noqa: E402
from django.test.utils import setup_databases, setup_test_environment, teardown_databases, teardown_test_environment  # noqa: E402


def _tags(item):
    tags = set(getattr(getattr(item, "cls", None), "tags", ()) or ())
    tags |= set(getattr(getattr(item, "function", None), "tags", ()) or ())
    return tags


def pytest_collection_modifyitems(config, items):
    if settings.ADAMANT_RUN_ACCEPTANCE:
        return
    kept = [item for item in items if "acceptance" not in _tags(item)]
    deselected = [item for item in items if "acceptance" in _tags(item)]
    if deselected:
        config.hook.pytest_deselected(items=deselected)
        items[:] = kept


@pytest.fixture(scope="session", autouse=True)
def _django_test_databases():
    setup_test_environment()
    old_config = setup_databases(verbosity=0, interactive=False)
    yield
    teardown_databases(old_config, verbosity=0)
    teardown_test_environment()
