"""Matrix files, dataset manifests, and the synthetic data generator.

Binary matrix layout ("hplm-binary"): 4-byte magic "HPLM", one version
byte (0x01), two little-endian uint32 for rows and cols, then rows * cols
float64 entries in column-major order, little-endian.  The csv form is one
matrix row per line, no header, with 17-significant-digit decimals so a
write/read round trip is exact.
"""

import json
import os
import struct
import tempfile

import numpy as np

from .datasets import LabeledFeatureSet, ModelState, UnlabeledFeatureSet, check_pair
from .exceptions import GenerationError, MatrixFormatError, ValidationError
from .linalg import as_matrix, normalize_columns

MAGIC = b"HPLM"
VERSION = 1
HEADER = struct.Struct("<4sBII")
FORMATS = ("hplm-binary", "csv")

MAX_GENERATION_ATTEMPTS = 1000


def _atomic_write(path, data):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_matrix(M, path, fmt="hplm-binary"):
    """Write a matrix atomically in the requested format."""
    M = as_matrix(M, "matrix")
    if fmt == "hplm-binary":
        rows, cols = M.shape
        header = HEADER.pack(MAGIC, VERSION, rows, cols)
        body = np.asarray(M, dtype="<f8").tobytes(order="F")
        _atomic_write(path, header + body)
    elif fmt == "csv":
        lines = "\n".join(",".join("%.17g" % v for v in row) for row in M)
        _atomic_write(path, (lines + "\n").encode("ascii"))
    else:
        raise ValidationError("unknown matrix format %r" % (fmt,))


def load_matrix(path, fmt="hplm-binary"):
    """Read a matrix, validating structure (format errors) and finiteness."""
    if fmt == "hplm-binary":
        with open(path, "rb") as fh:
            blob = fh.read()
        if len(blob) < HEADER.size:
            raise MatrixFormatError("%s: truncated header, file ends at byte %d" % (path, len(blob)))
        magic, version, rows, cols = HEADER.unpack_from(blob)
        if magic != MAGIC:
            raise MatrixFormatError("%s: bad magic %r at byte 0" % (path, magic))
        if version != VERSION:
            raise MatrixFormatError("%s: unsupported version %d at byte 4" % (path, version))
        expected = HEADER.size + rows * cols * 8
        if len(blob) < expected:
            raise MatrixFormatError(
                "%s: truncated payload, file ends at byte %d of %d" % (path, len(blob), expected)
            )
        if len(blob) > expected:
            raise MatrixFormatError("%s: %d trailing bytes after byte %d" % (path, len(blob) - expected, expected))
        entries = np.frombuffer(blob, dtype="<f8", offset=HEADER.size)
        M = np.array(entries.reshape((rows, cols), order="F"))
    elif fmt == "csv":
        try:
            M = np.loadtxt(path, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise MatrixFormatError("%s: %s" % (path, exc)) from None
    else:
        raise ValidationError("unknown matrix format %r" % (fmt,))
    return as_matrix(M, os.fspath(path))


def _format_for(path):
    return "csv" if os.fspath(path).endswith(".csv") else "hplm-binary"


MANIFEST_KEYS = ("X_s", "labels_s", "Y_s", "X_u", "Y_u")


class DatasetManifest:
    """Paths and formats of the files making up one dataset.

    The JSON form maps each of X_s, labels_s, Y_s, X_u, Y_u (and optionally
    truth_u) to either a path string or a {"path", "format"} object, plus a
    boolean "normalize" telling the loader to unit-normalize feature and
    semantic columns at ingestion.  Relative paths resolve against the
    manifest's own directory.
    """

    def __init__(self, entries, normalize, base=None):
        self.entries = {}
        for key in MANIFEST_KEYS:
            if key not in entries:
                raise ValidationError("manifest is missing required key %r" % key)
        for key, value in entries.items():
            if key == "truth_u" and value is None:
                continue
            if isinstance(value, str):
                path, fmt = value, _format_for(value)
            elif isinstance(value, dict) and "path" in value:
                path = value["path"]
                fmt = value.get("format", _format_for(path))
            else:
                raise ValidationError("manifest entry %r must be a path or {path, format}" % key)
            if fmt not in FORMATS:
                raise ValidationError("manifest entry %r has unknown format %r" % (key, fmt))
            if base is not None:
                path = os.path.join(base, path)
            self.entries[key] = (path, fmt)
        self.normalize = bool(normalize)

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ValidationError("manifest must be a JSON object")
        normalize = doc.pop("normalize", False)
        return cls(doc, normalize, base=os.path.dirname(os.path.abspath(path)))

    def path(self, key):
        return self.entries[key][0] if key in self.entries else None


def write_manifest(path, entries, normalize):
    doc = dict(entries)
    doc["normalize"] = normalize
    _atomic_write(path, (json.dumps(doc, indent=2) + "\n").encode("ascii"))


def load_labels(path, fmt="csv"):
    column = load_matrix(path, fmt)
    if 1 not in column.shape and column.size:
        raise ValidationError("%s: labels must be a single row or column" % path)
    flat = column.ravel()
    if not np.all(flat == np.floor(flat)):
        raise ValidationError("%s: labels must be integers" % path)
    return flat.astype(np.int64)


def save_labels(labels, path):
    save_matrix(np.asarray(labels, dtype=np.float64).reshape(-1, 1), path, "csv")


def load_dataset(manifest):
    """Load and validate a (LabeledFeatureSet, UnlabeledFeatureSet) pair."""
    if isinstance(manifest, (str, os.PathLike)):
        manifest = DatasetManifest.from_file(manifest)
    X_s = load_matrix(*manifest.entries["X_s"])
    labels = load_labels(*manifest.entries["labels_s"])
    Y_s = load_matrix(*manifest.entries["Y_s"])
    X_u = load_matrix(*manifest.entries["X_u"])
    Y_u = load_matrix(*manifest.entries["Y_u"])
    truth = None
    if "truth_u" in manifest.entries:
        truth = load_labels(*manifest.entries["truth_u"])
    if manifest.normalize:
        X_s = normalize_columns(X_s, "X_s")
        X_u = normalize_columns(X_u, "X_u")
        Y_s = normalize_columns(Y_s, "Y_s")
        Y_u = normalize_columns(Y_u, "Y_u")
    seen = LabeledFeatureSet.from_labels(X_s, labels, Y_s)
    unseen = UnlabeledFeatureSet(X_u, Y_u, truth=truth)
    check_pair(seen, unseen)
    if truth is not None and truth.max() > seen.num_classes + unseen.num_classes:
        raise ValidationError(
            "truth label %d exceeds the %d total classes" % (truth.max(), seen.num_classes + unseen.num_classes)
        )
    return seen, unseen


def save_dataset(directory, seen, unseen, state=None):
    """Write a dataset (and optionally its generating state) plus manifest.

    Returns the manifest path.  Feature and semantic matrices go out as
    hplm-binary, labels as csv.
    """
    directory = os.fspath(directory)
    os.makedirs(directory, exist_ok=True)
    entries = {}

    def put(key, matrix, fmt="hplm-binary"):
        name = key + (".csv" if fmt == "csv" else ".hplm")
        save_matrix(matrix, os.path.join(directory, name), fmt)
        entries[key] = {"path": name, "format": fmt}

    put("X_s", seen.features)
    save_labels(seen.labels, os.path.join(directory, "labels_s.csv"))
    entries["labels_s"] = {"path": "labels_s.csv", "format": "csv"}
    put("Y_s", seen.semantics)
    put("X_u", unseen.features)
    put("Y_u", unseen.semantics)
    if unseen.truth is not None:
        save_labels(unseen.truth, os.path.join(directory, "truth_u.csv"))
        entries["truth_u"] = {"path": "truth_u.csv", "format": "csv"}
    if state is not None:
        for name, M in state.matrices().items():
            save_matrix(M, os.path.join(directory, "true_%s.hplm" % name))
    manifest_path = os.path.join(directory, "manifest.json")
    write_manifest(manifest_path, entries, normalize=False)
    return manifest_path


class SynthSpec:
    """Parameters of the synthetic generator.

    d / k are the visual and semantic dimensions, q the number of shared
    atoms, m / n the seen and candidate class counts.  Prototypes are
    rejected and resampled until every pairwise distance exceeds
    separation * noise_sigma.  gzsl_pool_per_class > 0 additionally mixes
    that many held-out seen-class samples into the pool and labels truth
    over the joint 1..m+n vocabulary.
    """

    def __init__(self, d=20, k=10, q=6, m=8, n=5, samples_per_class=50,
                 samples_per_unseen_class=50, noise_sigma=0.05, separation=10.0,
                 seed=0, gzsl_pool_per_class=0):
        for name, v in (("d", d), ("k", k), ("q", q), ("m", m), ("n", n),
                        ("samples_per_class", samples_per_class),
                        ("samples_per_unseen_class", samples_per_unseen_class)):
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise ValidationError("%s must be a positive integer, got %r" % (name, v))
        if q > m + n:
            raise ValidationError("q = %d exceeds the %d total classes" % (q, m + n))
        if noise_sigma < 0.0:
            raise ValidationError("noise_sigma must be nonnegative, got %g" % noise_sigma)
        if separation < 1.0:
            raise ValidationError("separation must be at least 1, got %g" % separation)
        if gzsl_pool_per_class < 0:
            raise ValidationError("gzsl_pool_per_class must be nonnegative")
        self.d, self.k, self.q, self.m, self.n = d, k, q, m, n
        self.samples_per_class = samples_per_class
        self.samples_per_unseen_class = samples_per_unseen_class
        self.noise_sigma = noise_sigma
        self.separation = separation
        self.seed = seed
        self.gzsl_pool_per_class = gzsl_pool_per_class

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ValidationError("generator spec must be a JSON object")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ValidationError("bad generator spec: %s" % exc) from None

    def to_dict(self):
        return {
            "d": self.d, "k": self.k, "q": self.q, "m": self.m, "n": self.n,
            "samples_per_class": self.samples_per_class,
            "samples_per_unseen_class": self.samples_per_unseen_class,
            "noise_sigma": self.noise_sigma, "separation": self.separation,
            "seed": self.seed, "gzsl_pool_per_class": self.gzsl_pool_per_class,
        }


def _spanning_columns(rng, rows, cols):
    # orthonormal when the shape allows it, unit-norm otherwise
    G = rng.standard_normal((rows, cols))
    if cols <= rows:
        Q, _ = np.linalg.qr(G)
        return Q
    return normalize_columns(G)


def _noisy_unit_samples(rng, prototype, sigma, count):
    cols = prototype[:, None] + sigma * rng.standard_normal((prototype.size, count))
    return normalize_columns(cols)


def synth_generate(spec):
    """Generate a dataset with known planted structure.

    A shared atom code matrix Z links an orthonormal visual dictionary D_v
    with an orthonormal semantic dictionary D_c; class prototypes are
    P = D_v Z with exactly unit columns, so at noise_sigma = 0 the planted
    state reproduces the data with zero objective (whenever the dimensions
    allow orthonormal factors).  Samples are prototypes plus Gaussian noise,
    re-normalized.  Returns (LabeledFeatureSet, UnlabeledFeatureSet,
    ModelState) with the planted state as ground truth.
    """
    rng = np.random.default_rng(spec.seed)
    d, k, q, m, n = spec.d, spec.k, spec.q, spec.m, spec.n
    for _ in range(MAX_GENERATION_ATTEMPTS):
        D_v = _spanning_columns(rng, d, q)
        D_c = _spanning_columns(rng, k, q)
        Z = np.hstack([_spanning_columns(rng, q, m), _spanning_columns(rng, q, n)])
        norms = np.linalg.norm(D_v @ Z, axis=0)
        if norms.min() < 1e-9:
            continue
        Z = Z / norms
        P = D_v @ Z
        diff = P[:, :, None] - P[:, None, :]
        dist = np.sqrt(np.sum(diff * diff, axis=0))
        dist[np.diag_indices(m + n)] = np.inf
        if dist.min() > spec.separation * spec.noise_sigma and dist.min() > 0.0:
            break
    else:
        raise GenerationError(
            "could not place %d prototypes with pairwise separation %g after %d attempts; "
            "lower separation or noise_sigma, or raise d"
            % (m + n, spec.separation * spec.noise_sigma, MAX_GENERATION_ATTEMPTS)
        )
    Y = D_c @ Z + 0.1 * spec.noise_sigma * rng.standard_normal((k, m + n))
    Y = normalize_columns(Y)
    P_s, P_u = P[:, :m], P[:, m:]
    Y_s, Y_u = Y[:, :m], Y[:, m:]

    X_s = np.hstack([
        _noisy_unit_samples(rng, P_s[:, j], spec.noise_sigma, spec.samples_per_class)
        for j in range(m)
    ])
    labels_s = np.repeat(np.arange(1, m + 1), spec.samples_per_class)
    X_u = np.hstack([
        _noisy_unit_samples(rng, P_u[:, j], spec.noise_sigma, spec.samples_per_unseen_class)
        for j in range(n)
    ])
    truth_u = np.repeat(np.arange(1, n + 1), spec.samples_per_unseen_class)

    Z_s, Z_u = Z[:, :m], Z[:, m:]
    if spec.gzsl_pool_per_class:
        X_held = np.hstack([
            _noisy_unit_samples(rng, P_s[:, j], spec.noise_sigma, spec.gzsl_pool_per_class)
            for j in range(m)
        ])
        truth_held = np.repeat(np.arange(1, m + 1), spec.gzsl_pool_per_class)
        X_u = np.hstack([X_held, X_u])
        truth_u = np.concatenate([truth_held, truth_u + m])
        C_u = np.zeros((m + n, truth_u.size))
    else:
        C_u = np.zeros((n, truth_u.size))
    C_u[truth_u - 1, np.arange(truth_u.size)] = 1.0

    seen = LabeledFeatureSet.from_labels(X_s, labels_s, Y_s)
    unseen = UnlabeledFeatureSet(X_u, Y_u, truth=truth_u)
    truth_state = ModelState(P_s=P_s, P_u=P_u, D_v=D_v, D_c=D_c, Z_s=Z_s, Z_u=Z_u, C_u=C_u)
    return seen, unseen, truth_state
