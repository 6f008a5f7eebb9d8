#!/usr/bin/env python
"""reclab command line: ``bench``, ``analyze`` and ``generate`` plus Django's own commands."""
import os
import sys


def main():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'core.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Install the pinned stack with "
            "`pip install -r requirements.txt` before running reclab."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()
