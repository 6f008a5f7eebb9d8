import os
import tempfile
from pathlib import Path

from rest_framework import renderers
from rest_framework.exceptions import ErrorDetail


def has_error_detail(data):
    if isinstance(data, ErrorDetail):
        return True
    if isinstance(data, dict):
        return any(has_error_detail(value) for value in data.values())
    if isinstance(data, (list, tuple)):
        return any(has_error_detail(value) for value in data)
    return False


class ReportRender(renderers.JSONRenderer):
    charset = 'utf-8'

    def render(self, data, accepted_media_type=None, renderer_context=None):
        renderer_context = {'indent': 2, **(renderer_context or {})}
        if has_error_detail(data):
            data = {'errors': data}
        return super().render(data, accepted_media_type, renderer_context) + b'\n'


def write_atomic(path, payload):
    """Write bytes next to ``path`` first, then rename over it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(dir=path.parent, prefix=f'.{path.name}.', delete=False)
    try:
        with handle:
            handle.write(payload)
        os.replace(handle.name, path)
    except BaseException:
        if os.path.exists(handle.name):
            os.unlink(handle.name)
        raise
    return path


def write_json(path, data):
    return write_atomic(path, ReportRender().render(data))


def write_csv(path, frame):
    return write_atomic(path, frame.to_csv(index=False, lineterminator='\n').encode('utf-8'))
