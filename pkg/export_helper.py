import csv
import logging
import os

logger = logging.getLogger(__name__)


def output_path(filename, folder=None):
    """Place ``filename`` under the output folder (OUTPUT_FOLDER, default ``outputs``)."""
    if os.path.isabs(filename) or os.path.dirname(filename):
        parent = os.path.dirname(filename)
        if parent and not os.path.exists(parent):
            os.makedirs(parent)
        return filename
    folder = folder or os.getenv('OUTPUT_FOLDER', 'outputs')
    if not os.path.exists(folder):
        os.makedirs(folder)
    return os.path.join(folder, filename)


def format_cell(value):
    # repr keeps full float precision, so equal runs give identical files
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows(path, fieldnames, rows):
    """Write dict rows as CSV; missing keys become blank cells."""
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(fieldnames)
        for row in rows:
            writer.writerow([format_cell(row.get(name)) for name in fieldnames])
    logger.debug("wrote %s", path)
    return path


def read_rows(path):
    with open(path, 'r', newline='', encoding='utf-8') as handle:
        return list(csv.DictReader(handle))


def write_trace(result, path, fieldnames=None):
    from lcpg.drivers import TRACE_FIELDS

    return write_rows(path, list(fieldnames or TRACE_FIELDS), result.rows())
