"""Tests for matrix files, manifests, and the synthetic generator."""

import json
import os
import struct

import numpy as np
import numpy.testing as npt
import pytest

from protozsl.exceptions import (GenerationError, MatrixFormatError,
                                 ValidationError)
from protozsl.io import (HEADER, MAGIC, DatasetManifest, SynthSpec,
                         load_dataset, load_labels, load_matrix, save_dataset,
                         save_labels, save_matrix, synth_generate,
                         write_manifest)


def small_spec(**overrides):
    base = dict(d=8, k=6, q=4, m=4, n=3, samples_per_class=6,
                samples_per_unseen_class=5, noise_sigma=0.05,
                separation=10.0, seed=0)
    base.update(overrides)
    return SynthSpec(**base)


# ---------------------------------------------------------------------------
# matrix files


def test_binary_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    shapes = [(1, 1), (1, 7), (7, 1), (5, 5), (3, 11)]
    for trial, shape in enumerate(shapes):
        m = rng.standard_normal(shape)
        path = tmp_path / ("rt_%d.hplm" % trial)
        save_matrix(m, path)
        npt.assert_array_equal(load_matrix(path), m)


def test_binary_layout_is_column_major_little_endian(tmp_path):
    m = np.array([[1.0, 3.0], [2.0, 4.0]])
    path = tmp_path / "m.hplm"
    save_matrix(m, path)
    blob = path.read_bytes()
    assert blob[:4] == MAGIC
    assert blob[4] == 1
    assert struct.unpack("<II", blob[5:13]) == (2, 2)
    # column-major payload: 1, 2, 3, 4
    npt.assert_array_equal(np.frombuffer(blob, dtype="<f8", offset=13),
                           [1.0, 2.0, 3.0, 4.0])
    assert len(blob) == 13 + 4 * 8


def test_csv_round_trip_is_exact(tmp_path):
    rng = np.random.default_rng(1)
    m = rng.standard_normal((4, 6)) * 1e-7  # exercise %.17g on small values
    path = tmp_path / "m.csv"
    save_matrix(m, path, "csv")
    npt.assert_array_equal(load_matrix(path, "csv"), m)


def test_unknown_format_rejected(tmp_path):
    with pytest.raises(ValidationError, match="format"):
        save_matrix(np.eye(2), tmp_path / "m.bin", "npz")
    with pytest.raises(ValidationError, match="format"):
        load_matrix(tmp_path / "m.bin", "npz")


def test_truncated_header_reports_file_length(tmp_path):
    path = tmp_path / "short.hplm"
    path.write_bytes(b"HPLM\x01\x02")
    with pytest.raises(MatrixFormatError, match="ends at byte 6"):
        load_matrix(path)


def test_bad_magic_reports_byte_zero(tmp_path):
    path = tmp_path / "magic.hplm"
    path.write_bytes(b"NOPE" + bytes(9))
    with pytest.raises(MatrixFormatError, match="byte 0"):
        load_matrix(path)


def test_bad_version_reports_byte_four(tmp_path):
    path = tmp_path / "version.hplm"
    path.write_bytes(HEADER.pack(MAGIC, 9, 1, 1) + bytes(8))
    with pytest.raises(MatrixFormatError, match="version 9 at byte 4"):
        load_matrix(path)


def test_truncated_payload_reports_offsets(tmp_path):
    path = tmp_path / "payload.hplm"
    path.write_bytes(HEADER.pack(MAGIC, 1, 2, 2) + bytes(8))  # 1 of 4 entries
    with pytest.raises(MatrixFormatError, match="byte 21 of 45"):
        load_matrix(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "extra.hplm"
    save_matrix(np.ones((1, 1)), path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(MatrixFormatError, match="1 trailing byte"):
        load_matrix(path)


def test_unparseable_csv_reports_the_path(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1.0,2.0\nthree,4.0\n")
    with pytest.raises(MatrixFormatError, match="bad.csv"):
        load_matrix(path, "csv")


def test_non_finite_payload_rejected(tmp_path):
    path = tmp_path / "nan.hplm"
    save_matrix(np.ones((2, 2)), path)
    blob = bytearray(path.read_bytes())
    blob[13:21] = struct.pack("<d", float("nan"))
    path.write_bytes(bytes(blob))
    with pytest.raises(ValidationError, match="non-finite"):
        load_matrix(path)


# ---------------------------------------------------------------------------
# labels


def test_labels_round_trip(tmp_path):
    labels = np.array([1, 5, 2, 2, 9], dtype=np.int64)
    path = tmp_path / "labels.csv"
    save_labels(labels, path)
    out = load_labels(path)
    npt.assert_array_equal(out, labels)
    assert out.dtype == np.int64


def test_labels_accept_a_single_row(tmp_path):
    path = tmp_path / "row.csv"
    save_matrix(np.array([[1.0, 2.0, 3.0]]), path, "csv")
    npt.assert_array_equal(load_labels(path), [1, 2, 3])


def test_labels_reject_matrices_and_fractions(tmp_path):
    path = tmp_path / "block.csv"
    save_matrix(np.ones((2, 2)), path, "csv")
    with pytest.raises(ValidationError, match="single row or column"):
        load_labels(path)
    frac = tmp_path / "frac.csv"
    save_matrix(np.array([[1.5]]), frac, "csv")
    with pytest.raises(ValidationError, match="integers"):
        load_labels(frac)


# ---------------------------------------------------------------------------
# manifest and dataset round trip


def test_save_and_load_dataset_round_trip(tmp_path):
    seen, unseen, truth = synth_generate(small_spec())
    manifest_path = save_dataset(tmp_path / "data", seen, unseen, state=truth)
    assert os.path.basename(manifest_path) == "manifest.json"
    seen2, unseen2 = load_dataset(manifest_path)
    npt.assert_array_equal(seen2.features, seen.features)
    npt.assert_array_equal(seen2.labels, seen.labels)
    npt.assert_array_equal(seen2.semantics, seen.semantics)
    npt.assert_array_equal(unseen2.features, unseen.features)
    npt.assert_array_equal(unseen2.semantics, unseen.semantics)
    npt.assert_array_equal(unseen2.truth, unseen.truth)
    # planted state files ride along for diagnostics
    for name in ("P_s", "P_u", "D_v", "D_c", "Z_s", "Z_u", "C_u"):
        saved = load_matrix(tmp_path / "data" / ("true_%s.hplm" % name))
        npt.assert_array_equal(saved, getattr(truth, name))


def test_manifest_accepts_bare_paths_and_infers_format(tmp_path):
    seen, unseen, _ = synth_generate(small_spec())
    save_dataset(tmp_path, seen, unseen)
    entries = {
        "X_s": "X_s.hplm",
        "labels_s": "labels_s.csv",
        "Y_s": "Y_s.hplm",
        "X_u": "X_u.hplm",
        "Y_u": "Y_u.hplm",
    }
    path = tmp_path / "bare.json"
    write_manifest(path, entries, normalize=False)
    seen2, unseen2 = load_dataset(path)
    npt.assert_array_equal(seen2.features, seen.features)
    assert unseen2.truth is None


def test_manifest_relative_paths_resolve_against_manifest_dir(tmp_path):
    seen, unseen, _ = synth_generate(small_spec())
    save_dataset(tmp_path / "inner", seen, unseen)
    manifest = DatasetManifest.from_file(tmp_path / "inner" / "manifest.json")
    for key in ("X_s", "Y_s", "X_u", "Y_u", "labels_s", "truth_u"):
        assert os.path.isabs(manifest.path(key))
        assert os.path.exists(manifest.path(key))
    assert manifest.path("no_such_key") is None


def test_manifest_missing_key_rejected():
    entries = {"X_s": "x.hplm", "labels_s": "l.csv", "Y_s": "y.hplm",
               "X_u": "xu.hplm"}
    with pytest.raises(ValidationError, match="Y_u"):
        DatasetManifest(entries, normalize=False)


def test_manifest_bad_entry_and_format_rejected():
    good = {k: k + ".hplm" for k in ("X_s", "labels_s", "Y_s", "X_u", "Y_u")}
    bad_entry = dict(good)
    bad_entry["X_s"] = 7
    with pytest.raises(ValidationError, match="path"):
        DatasetManifest(bad_entry, normalize=False)
    bad_format = dict(good)
    bad_format["X_s"] = {"path": "x.dat", "format": "parquet"}
    with pytest.raises(ValidationError, match="parquet"):
        DatasetManifest(bad_format, normalize=False)


def test_manifest_normalize_flag_normalizes_columns(tmp_path):
    seen, unseen, _ = synth_generate(small_spec(seed=2))
    d = tmp_path / "scaled"
    manifest_path = save_dataset(d, seen, unseen)
    # rescale the stored features so they are no longer unit columns
    save_matrix(seen.features * 4.0, d / "X_s.hplm")
    save_matrix(unseen.features * 0.25, d / "X_u.hplm")
    doc = json.loads(open(manifest_path).read())
    doc["normalize"] = True
    open(manifest_path, "w").write(json.dumps(doc))
    seen2, unseen2 = load_dataset(manifest_path)
    npt.assert_allclose(seen2.features, seen.features, rtol=0, atol=1e-12)
    npt.assert_allclose(unseen2.features, unseen.features, rtol=0, atol=1e-12)


def test_load_dataset_rejects_out_of_range_truth(tmp_path):
    seen, unseen, _ = synth_generate(small_spec(seed=3))
    manifest_path = save_dataset(tmp_path, seen, unseen)
    save_labels(np.full(unseen.truth.size, 99), tmp_path / "truth_u.csv")
    with pytest.raises(ValidationError, match="99"):
        load_dataset(manifest_path)


def test_manifest_must_be_json_object(tmp_path):
    path = tmp_path / "list.json"
    path.write_text("[1, 2, 3]")
    with pytest.raises(ValidationError, match="JSON object"):
        DatasetManifest.from_file(path)


# ---------------------------------------------------------------------------
# synthetic generator


def test_synth_spec_validation():
    with pytest.raises(ValidationError, match="q"):
        small_spec(q=8)  # q > m + n
    with pytest.raises(ValidationError, match="positive integer"):
        small_spec(d=0)
    with pytest.raises(ValidationError, match="positive integer"):
        small_spec(m=2.5)
    with pytest.raises(ValidationError, match="noise_sigma"):
        small_spec(noise_sigma=-0.1)
    with pytest.raises(ValidationError, match="separation"):
        small_spec(separation=0.5)
    with pytest.raises(ValidationError):
        small_spec(gzsl_pool_per_class=-1)


def test_synth_spec_file_round_trip(tmp_path):
    spec = small_spec(seed=11)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec.to_dict()))
    again = SynthSpec.from_file(path)
    assert again.to_dict() == spec.to_dict()


def test_synth_spec_from_file_rejects_bad_documents(tmp_path):
    as_list = tmp_path / "list.json"
    as_list.write_text("[]")
    with pytest.raises(ValidationError, match="JSON object"):
        SynthSpec.from_file(as_list)
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"d": 4, "bogus": 1}))
    with pytest.raises(ValidationError, match="bad generator spec"):
        SynthSpec.from_file(unknown)


def test_synth_generate_is_deterministic():
    a = synth_generate(small_spec(seed=7))
    b = synth_generate(small_spec(seed=7))
    npt.assert_array_equal(a[0].features, b[0].features)
    npt.assert_array_equal(a[1].features, b[1].features)
    npt.assert_array_equal(a[2].D_v, b[2].D_v)
    c = synth_generate(small_spec(seed=8))
    assert not np.array_equal(a[0].features, c[0].features)


def test_synth_generate_shapes_and_labels():
    spec = small_spec()
    seen, unseen, truth = synth_generate(spec)
    assert seen.features.shape == (spec.d, spec.m * spec.samples_per_class)
    assert seen.semantics.shape == (spec.k, spec.m)
    assert unseen.features.shape == (spec.d, spec.n * spec.samples_per_unseen_class)
    assert unseen.semantics.shape == (spec.k, spec.n)
    npt.assert_array_equal(np.unique(seen.labels), np.arange(1, spec.m + 1))
    npt.assert_array_equal(np.unique(unseen.truth), np.arange(1, spec.n + 1))
    assert truth.P_s.shape == (spec.d, spec.m)
    assert truth.Z_u.shape == (spec.q, spec.n)
    assert truth.C_u.shape == (spec.n, unseen.features.shape[1])


def test_synth_generate_unit_columns_and_separation():
    spec = small_spec(seed=5)
    seen, unseen, truth = synth_generate(spec)
    for M in (seen.features, unseen.features, seen.semantics, unseen.semantics):
        npt.assert_allclose(np.linalg.norm(M, axis=0), 1.0, rtol=0, atol=1e-10)
    P = np.hstack([truth.P_s, truth.P_u])
    npt.assert_allclose(np.linalg.norm(P, axis=0), 1.0, rtol=0, atol=1e-10)
    diff = P[:, :, None] - P[:, None, :]
    dist = np.sqrt(np.sum(diff * diff, axis=0))
    dist[np.diag_indices(P.shape[1])] = np.inf
    assert dist.min() > spec.separation * spec.noise_sigma


def test_synth_generate_gzsl_pool_layout():
    spec = small_spec(seed=4, gzsl_pool_per_class=3)
    seen, unseen, truth = synth_generate(spec)
    held = spec.m * 3
    pool = held + spec.n * spec.samples_per_unseen_class
    assert unseen.features.shape[1] == pool
    npt.assert_array_equal(np.unique(unseen.truth[:held]), np.arange(1, spec.m + 1))
    npt.assert_array_equal(np.unique(unseen.truth[held:]),
                           np.arange(spec.m + 1, spec.m + spec.n + 1))
    assert truth.C_u.shape == (spec.m + spec.n, pool)
    npt.assert_array_equal(truth.C_u.sum(axis=0), np.ones(pool))
    npt.assert_array_equal(np.argmax(truth.C_u, axis=0) + 1, unseen.truth)


def test_synth_generate_impossible_separation_raises():
    # min pairwise distance 1.99 for 7 unit prototypes spanned by 4 atoms
    with pytest.raises(GenerationError, match="separation"):
        synth_generate(small_spec(noise_sigma=0.0995, separation=20.0))
