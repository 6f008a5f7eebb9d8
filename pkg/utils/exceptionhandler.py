from django.core.management.base import CommandError

INPUT_ERROR = 1
DIVERGENCE = 2


def custom_exception_handler(exc):
    """Turn a library exception into a CommandError carrying the CLI exit code.

    Returns None for exceptions that are not part of the command contract.
    """
    handlers = {
        'ValidationError': _handle_validation_error,
        'DatasetParseError': _handle_generic_error,
        'SchemaError': _handle_generic_error,
        'ContextRequiredError': _handle_generic_error,
        'ParseError': _handle_generic_error,
        'FileNotFoundError': _handle_missing_file,
        'IsADirectoryError': _handle_missing_file,
        'TrainingError': _handle_training_error,
    }

    exception_class = exc.__class__.__name__

    if exception_class in handlers:
        return handlers[exception_class](exc)
    return None


def _handle_validation_error(exc):
    # rest_framework's ValidationError carries .detail, django's carries .messages
    detail = getattr(exc, 'detail', None)
    if detail is None:
        detail = getattr(exc, 'message_dict', None) or exc.messages
    return CommandError(f'invalid input: {_flatten(detail)}', returncode=INPUT_ERROR)


def _handle_missing_file(exc):
    return CommandError(f'no such file: {exc.filename or exc}', returncode=INPUT_ERROR)


def _handle_training_error(exc):
    return CommandError(str(exc), returncode=DIVERGENCE)


def _handle_generic_error(exc):
    return CommandError(str(exc), returncode=INPUT_ERROR)


def _flatten(detail, prefix=''):
    if isinstance(detail, dict):
        return '; '.join(_flatten(value, f'{prefix}{key}: ') for key, value in detail.items())
    if isinstance(detail, (list, tuple)):
        return '; '.join(_flatten(value, prefix) for value in detail)
    return f'{prefix}{detail}'
