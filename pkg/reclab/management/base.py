from django.core.management.base import BaseCommand

from utils.exceptionhandler import custom_exception_handler


class ReclabCommand(BaseCommand):
    """Runs ``execute_command`` and maps library errors onto the exit-code contract."""

    def handle(self, *args, **options):
        try:
            return self.execute_command(**options)
        except Exception as exc:
            error = custom_exception_handler(exc)
            if error is None:
                raise
            raise error from exc

    def execute_command(self, **options):
        raise NotImplementedError('subclasses of ReclabCommand must provide execute_command()')
