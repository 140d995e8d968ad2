from django.conf import settings
from django.test.runner import DiscoverRunner


class AdamantTestRunner(DiscoverRunner):
    """Leaves out tests tagged 'acceptance' unless ADAMANT_RUN_ACCEPTANCE is set or --tag acceptance is given."""

    def __init__(self, *args, tags=None, exclude_tags=None, **kwargs):
        exclude_tags = set(exclude_tags or ())
        if not settings.ADAMANT_RUN_ACCEPTANCE and 'acceptance' not in (tags or ()):
            exclude_tags.add('acceptance')
        super().__init__(*args, tags=tags, exclude_tags=exclude_tags, **kwargs)
