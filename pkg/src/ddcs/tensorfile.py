"""DDCS measurement-tensor files and the small f32 grid files used for reports.

DDCS layout (little-endian)::

    b"DDCS"                      magic
    u32                          version (1)
    5 x u32                      dims: bursts, snapshots, tx beams, rx beams, tones
    f64                          center frequency, Hz
    f64                          tone spacing, Hz
    f64[bursts][snapshots][pairs]            slot timestamps, s
    f32[bursts][snapshots][tx][rx][tone][2]  interleaved re, im

Grid files (``pdp_time.bin``, ``doppler.bin``)::

    b"DDGR", u32 version (1), u32 ndim, ndim x u32 dims,
    ndim x (f64 start, f64 step) axis descriptions, f32 data (C order)
"""
import os
import struct

import numpy as np

MAGIC = b"DDCS"
VERSION = 1
_HEADER = struct.Struct("<4sI5Idd")
GRID_MAGIC = b"DDGR"


class TensorFileError(ValueError):
    pass


class TensorWriter:
    """Streams a campaign to disk one burst at a time.

    Writes to ``path + '.part'`` and renames on :meth:`close`, so an
    interrupted run never leaves a partial file under the final name.
    """

    def __init__(self, path, dims, center_frequency, tone_spacing, timestamps):
        self.path = os.fspath(path)
        self.dims = tuple(int(d) for d in dims)
        ts = np.ascontiguousarray(timestamps, dtype="<f8")
        if ts.shape != (self.dims[0], self.dims[1], self.dims[2] * self.dims[3]):
            raise ValueError(f"timestamp shape {ts.shape} does not match dims {self.dims}")
        self._tmp = self.path + ".part"
        self._fh = open(self._tmp, "wb")
        self._fh.write(_HEADER.pack(MAGIC, VERSION, *self.dims, float(center_frequency), float(tone_spacing)))
        self._fh.write(ts.tobytes())
        self._next = 0

    def write_burst(self, burst):
        burst = np.asarray(burst)
        if burst.shape != self.dims[1:]:
            raise ValueError(f"burst shape {burst.shape} != {self.dims[1:]}")
        self._fh.write(np.ascontiguousarray(burst, dtype="<c8").tobytes())
        self._next += 1

    def close(self):
        self._fh.close()
        if self._next != self.dims[0]:
            os.remove(self._tmp)
            raise TensorFileError(f"only {self._next} of {self.dims[0]} bursts written")
        os.replace(self._tmp, self.path)

    def abort(self):
        self._fh.close()
        if os.path.exists(self._tmp):
            os.remove(self._tmp)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self.abort()


def write_tensor(path, tensor):
    with TensorWriter(path, tensor.data.shape, tensor.center_frequency, tensor.tone_spacing,
                      tensor.timestamps) as w:
        for burst in tensor.data:
            w.write_burst(burst)


class TensorFile:
    """Read-only, memory-mapped view of a DDCS file."""

    def __init__(self, path):
        self.path = os.fspath(path)
        size = os.path.getsize(self.path)
        with open(self.path, "rb") as fh:
            head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise TensorFileError(f"{self.path}: truncated header ({len(head)} bytes)")
        magic, version, *rest = _HEADER.unpack(head)
        if magic != MAGIC:
            raise TensorFileError(f"{self.path}: bad magic {magic!r}, not a DDCS file")
        if version != VERSION:
            raise TensorFileError(f"{self.path}: unsupported DDCS version {version}, expected {VERSION}")
        self.dims = tuple(rest[:5])
        self.center_frequency, self.tone_spacing = rest[5], rest[6]
        b, s, t, r, k = self.dims
        n_ts = b * s * t * r
        expected = _HEADER.size + 8 * n_ts + 8 * b * s * t * r * k
        if size < expected:
            raise TensorFileError(f"{self.path}: truncated file ({size} of {expected} bytes)")
        if size > expected:
            raise TensorFileError(f"{self.path}: {size - expected} trailing bytes after data")
        self.timestamps = np.fromfile(self.path, dtype="<f8", count=n_ts,
                                      offset=_HEADER.size).reshape(b, s, t * r)
        self._data = np.memmap(self.path, dtype="<c8", mode="r", offset=_HEADER.size + 8 * n_ts,
                               shape=self.dims)

    @property
    def bursts(self):
        return self.dims[0]

    def burst(self, b):
        return np.asarray(self._data[b])

    def iter_bursts(self):
        for b in range(self.dims[0]):
            yield b, self.burst(b)

    def load(self):
        return np.asarray(self._data)


def write_grid(path, data, axes):
    """Write an f32 grid; ``axes`` is one (start, step) per dimension."""
    data = np.ascontiguousarray(data, dtype="<f4")
    if len(axes) != data.ndim:
        raise ValueError("one (start, step) per axis required")
    with open(path, "wb") as fh:
        fh.write(GRID_MAGIC + struct.pack("<II", 1, data.ndim))
        fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
        for start, step in axes:
            fh.write(struct.pack("<dd", float(start), float(step)))
        fh.write(data.tobytes())


def read_grid(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != GRID_MAGIC:
        raise TensorFileError(f"{path}: not a grid file")
    version, ndim = struct.unpack_from("<II", raw, 4)
    if version != 1:
        raise TensorFileError(f"{path}: unsupported grid version {version}")
    off = 12
    shape = struct.unpack_from(f"<{ndim}I", raw, off)
    off += 4 * ndim
    axes = [struct.unpack_from("<dd", raw, off + 16 * i) for i in range(ndim)]
    off += 16 * ndim
    data = np.frombuffer(raw, dtype="<f4", offset=off)
    if data.size != int(np.prod(shape)):
        raise TensorFileError(f"{path}: truncated grid data")
    return data.reshape(shape), axes
