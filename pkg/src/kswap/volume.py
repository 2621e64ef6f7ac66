"""Volume I/O: the native ``.vol`` raw format, a minimal NIfTI-1 importer,
and scan collections.

Native format
-------------
``<name>.vol``      raw little-endian float32, C order, slice-major
``<name>.vol.hdr``  UTF-8 JSON sidecar with exactly the keys
                    ``shape`` (3 ints), ``spacing`` (3 floats), ``id``,
                    ``domain``, ``kind``

Kinds are ``intensity`` (min-max normalized to [0, 1] on load; a constant
volume maps to all zeros), ``mask`` (values restricted to {0, 1}, stored as
floats), and ``probability`` (values in [0, 1]). Axis 0 is the slice axis.
Round trips through save/load are bit exact.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import VolumeError

KINDS = ("intensity", "mask", "probability")
HEADER_FIELDS = ("shape", "spacing", "id", "domain", "kind")

_NIFTI_DTYPES = {2: "u1", 4: "i2", 16: "f4"}


def minmax_normalize(data: np.ndarray) -> np.ndarray:
    """Rescale to [0, 1] in float32; a constant array maps to all zeros.

    Idempotent up to float32 rounding: an array whose min is exactly 0.0
    and max exactly 1.0 is returned unchanged bit for bit.
    """
    data = np.asarray(data, dtype=np.float32)
    lo = data.min()
    hi = data.max()
    if hi == lo:
        return np.zeros_like(data)
    return ((data - lo) / np.float32(hi - lo)).astype(np.float32)


@dataclass(frozen=True, eq=False)
class Volume:
    """A 3D scalar grid indexed (slice, row, col) with physical spacing.

    Immutable after construction; the data array is marked read-only so a
    Volume can be shared across workers safely.
    """

    data: np.ndarray
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    id: str = ""
    domain: str = ""
    kind: str = "intensity"

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def n_slices(self) -> int:
        return self.data.shape[0]

    def validate(self) -> None:
        """Check the kind-specific invariants, raising VolumeError on failure."""
        if self.data.ndim != 3:
            raise VolumeError(f"volume '{self.id}': expected 3 dims, got {self.data.ndim}")
        s, h, w = self.data.shape
        if s < 1 or h < 8 or w < 8:
            raise VolumeError(
                f"volume '{self.id}': shape {self.data.shape} below minimum (1, 8, 8)"
            )
        if len(self.spacing) != 3 or any(sp <= 0 for sp in self.spacing):
            raise VolumeError(f"volume '{self.id}': spacing {self.spacing} must be 3 positive reals")
        if self.kind not in KINDS:
            raise VolumeError(f"volume '{self.id}': unknown kind '{self.kind}'")
        bad = int(np.size(self.data) - np.isfinite(self.data).sum())
        if bad:
            raise VolumeError(f"volume '{self.id}': {bad} non-finite voxel(s)")
        if self.kind == "mask":
            if not np.isin(self.data, (0.0, 1.0)).all():
                raise VolumeError(f"volume '{self.id}': mask contains values outside {{0, 1}}")
        else:
            lo, hi = float(self.data.min()), float(self.data.max())
            if lo < 0.0 or hi > 1.0:
                raise VolumeError(
                    f"volume '{self.id}': {self.kind} values [{lo:g}, {hi:g}] outside [0, 1]"
                )


def binarize_probability(v: Volume, threshold: float = 0.5) -> Volume:
    """Threshold a probability volume into a mask (value >= threshold -> 1)."""
    if v.kind != "probability":
        raise VolumeError(f"binarize expects a probability volume, got kind '{v.kind}'")
    data = (v.data >= threshold).astype(np.float32)
    return replace(v, data=data, kind="mask")


def _hdr_path(path: Path) -> Path:
    return path.with_name(path.name + ".hdr")


def load_volume(path, *, kind: str | None = None, domain: str = "", vol_id: str | None = None) -> Volume:
    """Load a ``.vol``/``.vol.hdr`` pair or a NIfTI-1 ``.nii`` file.

    For the native format the sidecar supplies all metadata and the keyword
    arguments are ignored. NIfTI files carry no kind/domain metadata, so
    ``kind`` (default intensity), ``domain`` and ``vol_id`` fill in.

    Intensity volumes are min-max normalized to [0, 1] on load.
    """
    path = Path(path)
    if path.suffix == ".nii":
        return _load_nifti(path, kind or "intensity", domain, vol_id or path.stem)
    hdr_path = _hdr_path(path)
    if not path.exists():
        raise VolumeError(f"missing payload file: {path}")
    if not hdr_path.exists():
        raise VolumeError(f"missing sidecar header: {hdr_path}")
    try:
        hdr = json.loads(hdr_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise VolumeError(f"unreadable header {hdr_path}: {exc}") from exc
    unknown = set(hdr) - set(HEADER_FIELDS)
    if unknown:
        raise VolumeError(f"{hdr_path}: unknown header fields {sorted(unknown)}")
    missing = set(HEADER_FIELDS) - set(hdr)
    if missing:
        raise VolumeError(f"{hdr_path}: missing header fields {sorted(missing)}")
    shape = tuple(int(x) for x in hdr["shape"])
    if len(shape) != 3:
        raise VolumeError(f"{hdr_path}: shape must have 3 entries, got {hdr['shape']}")
    raw = np.fromfile(path, dtype="<f4")
    expected = int(np.prod(shape))
    if raw.size != expected:
        raise VolumeError(
            f"{path}: payload has {raw.size} voxels, header shape {shape} needs {expected}"
        )
    return _finish_load(raw.reshape(shape), hdr["spacing"], str(hdr["id"]),
                        str(hdr["domain"]), str(hdr["kind"]), path)


def _finish_load(data: np.ndarray, spacing, vol_id: str, domain: str, kind: str, path: Path) -> Volume:
    bad = int(np.size(data) - np.isfinite(data).sum())
    if bad:
        raise VolumeError(f"{path}: {bad} non-finite voxel(s)")
    if kind == "intensity":
        data = minmax_normalize(data)
    v = Volume(data=data, spacing=tuple(spacing), id=vol_id, domain=domain, kind=kind)
    v.validate()
    return v


def _load_nifti(path: Path, kind: str, domain: str, vol_id: str) -> Volume:
    """Minimal NIfTI-1 single-file reader.

    Reads dims, datatype (uint8/int16/float32), scl_slope/scl_inter, pixdim
    and the voxel payload; every other header field is ignored. The stored
    fastest-varying axis becomes the column axis, so axis 0 is the slice axis.
    """
    raw = path.read_bytes()
    if len(raw) < 352:
        raise VolumeError(f"{path}: too short for a NIfTI-1 header")
    end = "<"
    if struct.unpack_from("<i", raw, 0)[0] != 348:
        end = ">"
        if struct.unpack_from(">i", raw, 0)[0] != 348:
            raise VolumeError(f"{path}: not a NIfTI-1 file (bad sizeof_hdr)")
    magic = struct.unpack_from("4s", raw, 344)[0]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise VolumeError(f"{path}: bad NIfTI magic {magic!r}")
    dim = struct.unpack_from(end + "8h", raw, 40)
    if dim[0] < 3 or any(d > 1 for d in dim[4:4 + max(0, dim[0] - 3)]):
        raise VolumeError(f"{path}: expected a single 3D volume, dim={dim}")
    nx, ny, nz = dim[1], dim[2], dim[3]
    datatype = struct.unpack_from(end + "h", raw, 70)[0]
    if datatype not in _NIFTI_DTYPES:
        raise VolumeError(f"{path}: unsupported NIfTI datatype {datatype}")
    pixdim = struct.unpack_from(end + "8f", raw, 76)
    vox_offset = int(struct.unpack_from(end + "f", raw, 108)[0])
    scl_slope, scl_inter = struct.unpack_from(end + "2f", raw, 112)
    dtype = np.dtype(_NIFTI_DTYPES[datatype]).newbyteorder(end)
    count = nx * ny * nz
    data = np.frombuffer(raw, dtype=dtype, count=count, offset=vox_offset)
    if data.size != count:
        raise VolumeError(f"{path}: payload truncated ({data.size} of {count} voxels)")
    data = data.reshape(nz, ny, nx).astype(np.float32)
    if scl_slope != 0.0 and not (scl_slope == 1.0 and scl_inter == 0.0):
        data = data * np.float32(scl_slope) + np.float32(scl_inter)
    spacing = tuple(p if p > 0 else 1.0 for p in (pixdim[3], pixdim[2], pixdim[1]))
    return _finish_load(data, spacing, vol_id, domain, kind, path)


def save_volume(v: Volume, path) -> None:
    """Write a volume to ``path`` (.vol) plus its JSON sidecar.

    The volume is validated first, so e.g. a probability volume holding a
    1.5 is refused. ``load_volume(save_volume(v))`` reproduces ``v.data``
    bit exactly for volumes in canonical form (intensity already normalized).
    """
    v.validate()
    path = Path(path)
    hdr = {
        "shape": [int(x) for x in v.shape],
        "spacing": [float(s) for s in v.spacing],
        "id": v.id,
        "domain": v.domain,
        "kind": v.kind,
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        _hdr_path(path).write_text(json.dumps(hdr, sort_keys=True) + "\n", encoding="utf-8")
        v.data.astype("<f4").tofile(path)
    except OSError as exc:
        raise VolumeError(f"cannot write {path}: {exc}") from exc


@dataclass
class ScanCollection:
    """An ordered list of scans from one domain, optionally with masks."""

    scans: list[Volume]
    domain: str
    masks: list[Volume] | None = None

    def __post_init__(self):
        if self.masks is not None:
            if len(self.masks) != len(self.scans):
                raise VolumeError(
                    f"collection '{self.domain}': {len(self.scans)} scans but {len(self.masks)} masks"
                )
            for scan, mask in zip(self.scans, self.masks):
                if scan.shape != mask.shape:
                    raise VolumeError(
                        f"scan '{scan.id}' shape {scan.shape} differs from its mask {mask.shape}"
                    )

    def __len__(self) -> int:
        return len(self.scans)

    def by_id(self, scan_id: str) -> Volume:
        for scan in self.scans:
            if scan.id == scan_id:
                return scan
        raise VolumeError(f"collection '{self.domain}': no scan with id '{scan_id}'")


def load_collection(directory) -> ScanCollection:
    """Load every ``*.vol`` in a directory as one collection.

    Files named ``*_mask.vol`` are paired with their scan by id. Scans are
    ordered by filename for determinism. All scans must carry the same
    domain tag.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise VolumeError(f"not a directory: {directory}")
    vol_paths = sorted(p for p in directory.glob("*.vol") if not p.stem.endswith("_mask"))
    if not vol_paths:
        raise VolumeError(f"no .vol files in {directory}")
    scans, masks = [], []
    for p in vol_paths:
        scans.append(load_volume(p))
        mask_path = p.with_name(p.stem + "_mask.vol")
        masks.append(load_volume(mask_path) if mask_path.exists() else None)
    domains = {s.domain for s in scans}
    if len(domains) > 1:
        raise VolumeError(f"{directory}: mixed domain tags {sorted(domains)}")
    n_masked = sum(m is not None for m in masks)
    if n_masked == 0:
        return ScanCollection(scans, domains.pop(), None)
    if n_masked != len(scans):
        raise VolumeError(f"{directory}: only {n_masked} of {len(scans)} scans have masks")
    return ScanCollection(scans, domains.pop(), masks)
