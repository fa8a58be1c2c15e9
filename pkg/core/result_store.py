import csv
import io
import json
import logging
import os
import tempfile


def fmt(value):
    """17 significant digits for floats, so every written double reads back exactly."""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_text(path, text):
    """Atomically write `text` to `path` (temp file in the same directory, then os.replace)."""
    target_dir = os.path.dirname(os.path.abspath(path))
    os.makedirs(target_dir, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=target_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp_path, path)
        logging.debug("Wrote %d bytes to %s", len(text), path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.unlink(tmp_path)
        raise


def dumps_json(document):
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def write_json(path, document):
    write_text(path, dumps_json(document))


def render_csv(header, rows, comments=()):
    """CSV text with optional `# key=value` comment lines before the header."""
    buf = io.StringIO()
    for key, value in comments:
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, comments=()):
    write_text(path, render_csv(header, rows, comments))


def load_json(path):
    with open(path, "r") as f:
        document = json.load(f)
    logging.debug("Loaded %s", path)
    return document
