"""On-disk formats: binary matrix files, the model container, and the
text sidecars (labels, trials, scores, manifests).

Binary matrices carry a single ASCII header line followed by the raw
little-endian float64 payload in row-major order.  The model container
holds named sections in the same primitive encoding behind a type tag and
a compact JSON metadata field.
"""

import json

import numpy as np

from .errors import DimensionMismatch, MvkitError
from .metrics import TRIAL_LABELS, Trial

FRAMES_MAGIC = "FRAMES"
VEC_MAGIC = "VEC"
MODEL_MAGIC = "MODEL"
FORMAT_VERSION = "v1"


class FormatError(MvkitError):
    """A file does not follow its declared layout."""


def _write_matrix(path, magic, array):
    array = np.ascontiguousarray(array, dtype="<f8")
    if array.ndim != 2:
        raise DimensionMismatch("matrix files store 2-d arrays, got shape %r" % (array.shape,))
    header = "%s %s rows=%d dim=%d\n" % (magic, FORMAT_VERSION, array.shape[0], array.shape[1])
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(array.tobytes(order="C"))


def _read_matrix(path, magic):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").strip()
        parts = header.split()
        if len(parts) != 4 or parts[0] != magic or parts[1] != FORMAT_VERSION:
            raise FormatError("%s: bad header %r" % (path, header))
        try:
            rows = int(parts[2].removeprefix("rows="))
            dim = int(parts[3].removeprefix("dim="))
        except ValueError as exc:
            raise FormatError("%s: bad header %r" % (path, header)) from exc
        payload = fh.read()
    expect = rows * dim * 8
    if len(payload) != expect:
        raise FormatError(
            "%s: payload is %d bytes, header promises %d" % (path, len(payload), expect)
        )
    return np.frombuffer(payload, dtype="<f8").reshape(rows, dim).copy()


def write_frames(path, frames):
    _write_matrix(path, FRAMES_MAGIC, frames)


def read_frames(path):
    return _read_matrix(path, FRAMES_MAGIC)


def write_vec(path, vectors):
    _write_matrix(path, VEC_MAGIC, vectors)


def read_vec(path):
    return _read_matrix(path, VEC_MAGIC)


def write_model_container(path, type_tag, sections, meta=None):
    """Write named float64 sections behind a type tag.

    Section order is preserved; metadata must be JSON-serializable.
    """
    meta_json = json.dumps(meta or {}, sort_keys=True, separators=(",", ":"))
    with open(path, "wb") as fh:
        fh.write(
            ("%s %s type=%s sections=%d meta=%s\n"
             % (MODEL_MAGIC, FORMAT_VERSION, type_tag, len(sections), meta_json)).encode("ascii")
        )
        for name, array in sections.items():
            array = np.ascontiguousarray(array, dtype="<f8")
            if array.ndim == 1:
                array = array[None, :]
            if array.ndim != 2:
                raise DimensionMismatch("section %r must be 1-d or 2-d" % name)
            fh.write(
                ("SECTION name=%s rows=%d dim=%d\n" % (name, array.shape[0], array.shape[1])).encode("ascii")
            )
            fh.write(array.tobytes(order="C"))


def read_model_container(path, expect_type=None):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").rstrip("\n")
        parts = header.split(" ", 4)
        if len(parts) != 5 or parts[0] != MODEL_MAGIC or parts[1] != FORMAT_VERSION:
            raise FormatError("%s: bad model header %r" % (path, header))
        type_tag = parts[2].removeprefix("type=")
        count = int(parts[3].removeprefix("sections="))
        meta = json.loads(parts[4].removeprefix("meta="))
        sections = {}
        for _ in range(count):
            line = fh.readline().decode("ascii", errors="replace").rstrip("\n")
            fields = line.split()
            if len(fields) != 4 or fields[0] != "SECTION":
                raise FormatError("%s: bad section header %r" % (path, line))
            name = fields[1].removeprefix("name=")
            rows = int(fields[2].removeprefix("rows="))
            dim = int(fields[3].removeprefix("dim="))
            payload = fh.read(rows * dim * 8)
            if len(payload) != rows * dim * 8:
                raise FormatError("%s: truncated section %r" % (path, name))
            sections[name] = np.frombuffer(payload, dtype="<f8").reshape(rows, dim).copy()
    if expect_type is not None and type_tag != expect_type:
        raise FormatError("%s: model type %r, expected %r" % (path, type_tag, expect_type))
    return type_tag, sections, meta


def write_labels(path, session_ids, speaker_ids):
    """Per-row identifiers for a VEC matrix: session then speaker."""
    if len(session_ids) != len(speaker_ids):
        raise DimensionMismatch("session and speaker id lists disagree in length")
    with open(path, "w", encoding="ascii") as fh:
        for ses, spk in zip(session_ids, speaker_ids):
            fh.write("%s\t%s\n" % (ses, spk))


def read_labels(path):
    sessions, speakers = [], []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise FormatError("%s: bad label line %r" % (path, line))
            sessions.append(fields[0])
            speakers.append(fields[1])
    return sessions, speakers


def write_trials(path, trials):
    with open(path, "w", encoding="ascii") as fh:
        for t in trials:
            fh.write("%s %s %s\n" % (t.enroll_id, t.test_id, t.label))


def read_trials(path):
    trials = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 3 or fields[2] not in TRIAL_LABELS:
                raise FormatError("%s: bad trial line %r" % (path, line))
            trials.append(Trial(enroll_id=fields[0], test_id=fields[1], label=fields[2]))
    return trials


def write_scores(path, trials, scores):
    """Trial keys with scores at 17 significant digits (exact round trip)."""
    if len(trials) != len(scores):
        raise DimensionMismatch("%d trials, %d scores" % (len(trials), len(scores)))
    with open(path, "w", encoding="ascii") as fh:
        for t, s in zip(trials, scores):
            fh.write("%s %s %.17g\n" % (t.enroll_id, t.test_id, float(s)))


def read_scores(path):
    keys, values = [], []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != 3:
                raise FormatError("%s: bad score line %r" % (path, line))
            keys.append((fields[0], fields[1]))
            values.append(float(fields[2]))
    return keys, np.asarray(values, dtype=np.float64)


def write_manifest(path, rows):
    """Corpus session table: session id, speaker id, frames path."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("#session_id\tspeaker_id\tframes_path\n")
        for ses, spk, rel in rows:
            fh.write("%s\t%s\t%s\n" % (ses, spk, rel))


def read_manifest(path):
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise FormatError("%s: bad manifest line %r" % (path, line))
            rows.append((fields[0], fields[1], fields[2]))
    return rows


def read_class_map(path):
    """Regression class file: one integer class index per component."""
    values = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            values.extend(int(tok) for tok in line.split())
    return np.asarray(values, dtype=np.int64)
