import json
import struct

import numpy as np
import pytest

from conftest import make_volume
from kswap import (ScanCollection, Volume, VolumeError, binarize_probability,
                   load_collection, load_volume, minmax_normalize, save_volume)


def write_raw(tmp_path, name, payload, shape, kind="intensity", spacing=(1, 1, 1),
              vol_id="x", domain="d", extra_hdr=None, drop_hdr=None):
    path = tmp_path / f"{name}.vol"
    np.asarray(payload, dtype="<f4").tofile(path)
    hdr = {"shape": list(shape), "spacing": list(spacing), "id": vol_id,
           "domain": domain, "kind": kind}
    if extra_hdr:
        hdr.update(extra_hdr)
    if drop_hdr:
        hdr.pop(drop_hdr)
    (tmp_path / f"{name}.vol.hdr").write_text(json.dumps(hdr))
    return path


class TestLoad:
    def test_minmax_endpoints(self, tmp_path):
        payload = np.linspace(10.0, 20.0, 128)
        v = load_volume(write_raw(tmp_path, "a", payload, (2, 8, 8)))
        assert v.data.min() == 0.0
        assert v.data.max() == 1.0
        assert v.kind == "intensity"

    def test_constant_volume_maps_to_zeros(self, tmp_path):
        v = load_volume(write_raw(tmp_path, "c", np.full(128, 5.0), (2, 8, 8)))
        assert np.all(v.data == 0.0)

    def test_size_mismatch_names_counts(self, tmp_path):
        path = write_raw(tmp_path, "m", np.zeros(100), (2, 8, 8))
        with pytest.raises(VolumeError, match=r"100.*128"):
            load_volume(path)

    def test_unknown_header_field_rejected(self, tmp_path):
        path = write_raw(tmp_path, "u", np.zeros(128), (2, 8, 8),
                         extra_hdr={"orientation": "RAS"})
        with pytest.raises(VolumeError, match="orientation"):
            load_volume(path)

    def test_missing_header_field_rejected(self, tmp_path):
        path = write_raw(tmp_path, "miss", np.zeros(128), (2, 8, 8), drop_hdr="spacing")
        with pytest.raises(VolumeError, match="spacing"):
            load_volume(path)

    def test_nonfinite_error_names_voxel_count(self, tmp_path):
        payload = np.zeros(128)
        payload[[3, 17, 99]] = np.nan
        path = write_raw(tmp_path, "n", payload, (2, 8, 8))
        with pytest.raises(VolumeError, match="3 non-finite"):
            load_volume(path)

    def test_missing_payload(self, tmp_path):
        with pytest.raises(VolumeError, match="missing"):
            load_volume(tmp_path / "ghost.vol")

    def test_mask_values_validated(self, tmp_path):
        path = write_raw(tmp_path, "badmask", np.full(128, 0.5), (2, 8, 8), kind="mask")
        with pytest.raises(VolumeError, match="mask"):
            load_volume(path)

    def test_normalization_idempotent(self, tmp_path, rng):
        data = rng.random(128)
        data[0], data[1] = 0.0, 1.0
        first = load_volume(write_raw(tmp_path, "i1", data, (2, 8, 8)))
        second = load_volume(write_raw(tmp_path, "i2", first.data.ravel(), (2, 8, 8)))
        np.testing.assert_array_equal(first.data, second.data)


class TestSaveRoundTrip:
    @pytest.mark.parametrize("kind", ["intensity", "mask", "probability"])
    def test_roundtrip_bit_exact(self, tmp_path, rng, kind):
        data = rng.random((3, 9, 10))
        if kind == "mask":
            data = (data > 0.5).astype(np.float32)
        elif kind == "intensity":
            data = minmax_normalize(data)
        v = make_volume(data, kind=kind)
        save_volume(v, tmp_path / "rt.vol")
        back = load_volume(tmp_path / "rt.vol")
        np.testing.assert_array_equal(back.data, v.data)
        assert back.kind == v.kind
        assert back.spacing == v.spacing
        assert back.id == v.id

    def test_mask_payload_bytes_are_binary_floats(self, tmp_path, rng):
        data = (rng.random((2, 8, 8)) > 0.4).astype(np.float32)
        save_volume(make_volume(data, kind="mask"), tmp_path / "m.vol")
        raw = np.fromfile(tmp_path / "m.vol", dtype="<f4")
        assert set(np.unique(raw)) <= {0.0, 1.0}

    def test_probability_out_of_range_refused(self, tmp_path):
        data = np.zeros((2, 8, 8), dtype=np.float32)
        data[0, 0, 0] = 1.5
        v = make_volume(data, kind="probability")
        with pytest.raises(VolumeError, match=r"outside \[0, 1\]"):
            save_volume(v, tmp_path / "p.vol")

    def test_unwritable_path(self, tmp_path, rng):
        blocker = tmp_path / "blocker"
        blocker.write_text("a plain file, not a directory")
        v = make_volume(minmax_normalize(rng.random((2, 8, 8))))
        with pytest.raises(VolumeError):
            save_volume(v, blocker / "nested.vol")


class TestValidate:
    def test_too_small_plane_rejected(self):
        v = make_volume(np.zeros((2, 4, 4)))
        with pytest.raises(VolumeError, match="below minimum"):
            v.validate()

    def test_bad_kind(self):
        v = make_volume(np.zeros((2, 8, 8)), kind="labels")
        with pytest.raises(VolumeError, match="labels"):
            v.validate()

    def test_data_is_read_only(self):
        v = make_volume(np.zeros((2, 8, 8)))
        with pytest.raises(ValueError):
            v.data[0, 0, 0] = 1.0


class TestNifti:
    def make_nifti(self, tmp_path, data, slope=1.0, inter=0.0, spacing=(1.0, 2.0, 3.0)):
        nz, ny, nx = data.shape
        hdr = bytearray(352)
        struct.pack_into("<i", hdr, 0, 348)
        struct.pack_into("<8h", hdr, 40, 3, nx, ny, nz, 1, 1, 1, 1)
        struct.pack_into("<h", hdr, 70, 16)  # float32
        struct.pack_into("<8f", hdr, 76, 0.0, spacing[2], spacing[1], spacing[0], 0, 0, 0, 0)
        struct.pack_into("<f", hdr, 108, 352.0)
        struct.pack_into("<2f", hdr, 112, slope, inter)
        struct.pack_into("4s", hdr, 344, b"n+1\x00")
        path = tmp_path / "scan.nii"
        # NIfTI stores x fastest; C-order write of (z, y, x) matches.
        path.write_bytes(bytes(hdr) + data.astype("<f4").tobytes())
        return path

    def test_reads_data_and_spacing(self, tmp_path, rng):
        data = rng.random((3, 9, 10)).astype(np.float32)
        v = load_volume(self.make_nifti(tmp_path, data))
        assert v.shape == (3, 9, 10)
        assert v.spacing == (1.0, 2.0, 3.0)
        np.testing.assert_allclose(v.data, minmax_normalize(data), rtol=0, atol=0)

    def test_scl_slope_applied(self, tmp_path, rng):
        data = rng.random((2, 8, 8)).astype(np.float32)
        path = self.make_nifti(tmp_path, data, slope=0.5, inter=0.25)
        v = load_volume(path, kind="probability")
        expected = data * np.float32(0.5) + np.float32(0.25)
        np.testing.assert_array_equal(v.data, expected)

    def test_scaled_probability_rejected(self, tmp_path, rng):
        data = rng.random((2, 8, 8)).astype(np.float32)
        path = self.make_nifti(tmp_path, data, slope=2.0, inter=1.0)
        with pytest.raises(VolumeError):
            load_volume(path, kind="probability")

    def test_bad_magic_rejected(self, tmp_path, rng):
        data = rng.random((2, 8, 8)).astype(np.float32)
        path = self.make_nifti(tmp_path, data)
        raw = bytearray(path.read_bytes())
        struct.pack_into("4s", raw, 344, b"xxxx")
        path.write_bytes(bytes(raw))
        with pytest.raises(VolumeError, match="magic"):
            load_volume(path)


class TestCollections:
    def test_mask_shape_mismatch(self, rng):
        scan = make_volume(minmax_normalize(rng.random((2, 8, 8))))
        mask = make_volume(np.zeros((3, 8, 8)), kind="mask")
        with pytest.raises(VolumeError, match="differs"):
            ScanCollection(scans=[scan], domain="d", masks=[mask])

    def test_load_collection_ordering_and_masks(self, tmp_path, rng):
        for name in ("b", "a"):
            data = minmax_normalize(rng.random((2, 8, 8)))
            save_volume(make_volume(data, vol_id=name, domain="dom"), tmp_path / f"{name}.vol")
            save_volume(make_volume(np.zeros((2, 8, 8)), kind="mask", vol_id=name + "_m",
                                    domain="dom"), tmp_path / f"{name}_mask.vol")
        col = load_collection(tmp_path)
        assert [s.id for s in col.scans] == ["a", "b"]
        assert col.domain == "dom"
        assert col.masks is not None and len(col.masks) == 2

    def test_load_collection_partial_masks_rejected(self, tmp_path, rng):
        for name, with_mask in (("a", True), ("b", False)):
            data = minmax_normalize(rng.random((2, 8, 8)))
            save_volume(make_volume(data, vol_id=name, domain="dom"), tmp_path / f"{name}.vol")
            if with_mask:
                save_volume(make_volume(np.zeros((2, 8, 8)), kind="mask", vol_id="am",
                                        domain="dom"), tmp_path / f"{name}_mask.vol")
        with pytest.raises(VolumeError, match="1 of 2"):
            load_collection(tmp_path)

    def test_mixed_domains_rejected(self, tmp_path, rng):
        for name, dom in (("a", "d1"), ("b", "d2")):
            data = minmax_normalize(rng.random((2, 8, 8)))
            save_volume(make_volume(data, vol_id=name, domain=dom), tmp_path / f"{name}.vol")
        with pytest.raises(VolumeError, match="mixed"):
            load_collection(tmp_path)

    def test_by_id(self, rng):
        scans = [make_volume(minmax_normalize(rng.random((2, 8, 8))), vol_id=f"s{k}")
                 for k in range(2)]
        col = ScanCollection(scans=scans, domain="d")
        assert col.by_id("s1") is scans[1]
        with pytest.raises(VolumeError, match="nope"):
            col.by_id("nope")


def test_binarize_probability(rng):
    data = rng.random((2, 8, 8)).astype(np.float32)
    v = make_volume(data, kind="probability")
    mask = binarize_probability(v, 0.5)
    assert mask.kind == "mask"
    np.testing.assert_array_equal(mask.data, (data >= 0.5).astype(np.float32))
    with pytest.raises(VolumeError):
        binarize_probability(make_volume(data, kind="intensity"))
