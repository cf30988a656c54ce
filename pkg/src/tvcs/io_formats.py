"""File formats for signals, images, spectra, patterns and reports.

Binary layout (all integers little-endian)::

    magic    5 bytes   b"TVCS" + version byte b"1"
    kind     u8        0 signal1d, 1 image2d, 2 pattern, 3 spectrum
    dtype    u8        0 interleaved (re, im) float64, 1 ascii
    ndim     u8        1 or 2
    n        u32       grid size per axis
    notelen  u16       length of the UTF-8 note (seed / provenance)
    note     notelen bytes
    paylen   u64       payload length in bytes
    payload  paylen bytes

Numeric payloads hold ``n**ndim`` complex values in row-major order as
``re, im`` pairs of little-endian float64.
"""
import json
import struct as _struct
from pathlib import Path

import numpy as np

from .assets import ASSET_KINDS, gen_asset  # noqa: F401  (re-exported)
from .sampling import SamplingPattern

MAGIC = b"TVCS"
VERSION = b"1"
KINDS = ("signal1d", "image2d", "pattern", "spectrum")
DTYPES = ("complex-f64-le", "ascii")
_HEAD = _struct.Struct("<BBBIH")
_LEN = _struct.Struct("<Q")


class FormatError(ValueError):
    """Malformed file."""


class BadMagicError(FormatError):
    pass


class TruncationError(FormatError):
    pass


class NaNPayloadError(FormatError):
    pass


class PatternRangeError(FormatError, IndexError):
    """A pattern line names a frequency outside the grid."""


# ---------------------------------------------------------------- binary


def _encode_complex(arr):
    a = np.asarray(arr, dtype=np.complex128).ravel()
    pairs = np.empty(2 * a.size, dtype="<f8")
    pairs[0::2] = a.real
    pairs[1::2] = a.imag
    return pairs.tobytes()


def _decode_complex(buf, count):
    if len(buf) != 16 * count:
        raise TruncationError(f"payload holds {len(buf)} bytes, expected {16 * count}")
    pairs = np.frombuffer(buf, dtype="<f8")
    if not np.all(np.isfinite(pairs)):
        raise NaNPayloadError("payload contains NaN or infinite values")
    # fill the parts directly: re + 1j*im would turn an imaginary -0.0 into 0.0
    out = np.empty(count, dtype=np.complex128)
    out.real = pairs[0::2]
    out.imag = pairs[1::2]
    return out


def encode(kind, data, note="", n=None, ndim=None):
    """Serialize ``data`` under ``kind``; returns bytes.

    ``data`` is a complex/real array for numeric kinds or the ASCII text of a
    pattern file for ``kind="pattern"``.
    """
    if kind not in KINDS:
        raise FormatError(f"unknown kind {kind!r}")
    note_b = note.encode("utf-8")
    if kind == "pattern":
        payload = data.encode("ascii")
        dtype = 1
        if n is None or ndim is None:
            raise FormatError("pattern files need n and ndim")
    else:
        arr = np.asarray(data)
        ndim = arr.ndim
        if ndim not in (1, 2) or (ndim == 2 and arr.shape[0] != arr.shape[1]):
            raise FormatError("expected a length-N vector or an N x N array")
        if kind == "signal1d" and ndim != 1 or kind == "image2d" and ndim != 2:
            raise FormatError(f"{kind} does not accept a {ndim}-D array")
        if not np.all(np.isfinite(arr)):
            raise NaNPayloadError("refusing to write NaN or infinite values")
        n = arr.shape[0]
        payload = _encode_complex(arr)
        dtype = 0
    head = MAGIC + VERSION + _HEAD.pack(KINDS.index(kind), dtype, ndim, n, len(note_b))
    return head + note_b + _LEN.pack(len(payload)) + payload


def decode(buf):
    """Parse bytes produced by :func:`encode`.

    Returns
    -------
    dict
        ``kind``, ``n``, ``ndim``, ``note`` and ``data`` (complex array, or
        text for patterns).
    """
    if len(buf) < 5 or buf[:4] != MAGIC:
        raise BadMagicError("not a TVCS file (bad magic)")
    if buf[4:5] != VERSION:
        raise BadMagicError(f"unsupported format version {buf[4:5]!r}")
    pos = 5
    if len(buf) < pos + _HEAD.size:
        raise TruncationError("header truncated")
    kind_i, dtype, ndim, n, notelen = _HEAD.unpack_from(buf, pos)
    pos += _HEAD.size
    if kind_i >= len(KINDS) or dtype >= len(DTYPES) or ndim not in (1, 2) or n < 1:
        raise FormatError("invalid header fields")
    kind = KINDS[kind_i]
    if len(buf) < pos + notelen + _LEN.size:
        raise TruncationError("header truncated")
    note = buf[pos:pos + notelen].decode("utf-8")
    pos += notelen
    (paylen,) = _LEN.unpack_from(buf, pos)
    pos += _LEN.size
    payload = buf[pos:pos + paylen]
    if len(payload) < paylen:
        raise TruncationError(f"payload truncated: {len(payload)} of {paylen} bytes")
    if len(buf) > pos + paylen:
        raise FormatError("trailing bytes after payload")
    if dtype == 1:
        data = payload.decode("ascii")
    else:
        data = _decode_complex(payload, n ** ndim)
        data = data.reshape((n,) * ndim)
    return {"kind": kind, "n": n, "ndim": ndim, "note": note, "data": data}


def write_binary(path, kind, data, note=""):
    Path(path).write_bytes(encode(kind, data, note))


def read_binary(path, kind=None):
    """Read a binary asset; ``kind`` (if given) must match the header."""
    out = decode(Path(path).read_bytes())
    if kind is not None and out["kind"] != kind:
        raise FormatError(f"expected kind {kind!r}, file holds {out['kind']!r}")
    return out


def write_signal(path, x, note=""):
    write_binary(path, "signal1d", x, note)


def read_signal(path):
    return read_binary(path, "signal1d")["data"]


def write_image(path, x, note=""):
    write_binary(path, "image2d", x, note)


def read_image(path):
    return read_binary(path, "image2d")["data"]


def write_spectrum(path, y, note=""):
    write_binary(path, "spectrum", y, note)


def read_spectrum(path):
    return read_binary(path, "spectrum")["data"]


# ------------------------------------------------------------------- CSV


def write_csv(path, kind, data, note=""):
    """CSV with a ``# TVCS1 kind n ndim note`` line, a ``re,im`` header and
    one row per value (row-major). Values use ``repr`` so they round-trip."""
    arr = np.asarray(data, dtype=np.complex128)
    if kind not in ("signal1d", "image2d", "spectrum"):
        raise FormatError(f"kind {kind!r} has no CSV form")
    lines = [f"# TVCS1 {kind} {arr.shape[0]} {arr.ndim} {note}".rstrip(), "re,im"]
    lines += [f"{float(v.real)!r},{float(v.imag)!r}" for v in arr.ravel()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path):
    """Parse a file written by :func:`write_csv`; returns the same dict as
    :func:`decode`."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# TVCS1 "):
        raise BadMagicError("missing '# TVCS1' header line")
    parts = lines[0].split(" ", 5)
    try:
        kind, n, ndim = parts[2], int(parts[3]), int(parts[4])
    except (IndexError, ValueError):
        raise FormatError("malformed CSV header line") from None
    note = parts[5] if len(parts) > 5 else ""
    if len(lines) < 2 or lines[1].strip() != "re,im":
        raise FormatError("missing 're,im' column header")
    rows = [ln for ln in lines[2:] if ln.strip()]
    if len(rows) != n ** ndim:
        raise TruncationError(f"CSV holds {len(rows)} rows, expected {n ** ndim}")
    vals = np.array([[float(c) for c in r.split(",")] for r in rows])
    if vals.shape[1] != 2:
        raise FormatError("each row needs exactly two columns")
    if not np.all(np.isfinite(vals)):
        raise NaNPayloadError("CSV contains NaN or infinite values")
    data = np.empty(len(rows), dtype=np.complex128)
    data.real, data.imag = vals[:, 0], vals[:, 1]
    data = data.reshape((n,) * ndim)
    return {"kind": kind, "n": n, "ndim": ndim, "note": note, "data": data}


# --------------------------------------------------------------- patterns


def format_pattern(pattern):
    """Pattern as text: one frequency per line, ``# level n`` before each
    labelled group."""
    lines = []
    freqs = pattern.freqs
    if pattern.levels is None:
        order = range(len(pattern))
        current = None
    else:
        order = np.argsort(pattern.levels, kind="stable")
        current = -1
    for i in order:
        if current is not None and pattern.levels[i] != current:
            current = int(pattern.levels[i])
            lines.append(f"# level {current}")
        f = freqs[i]
        lines.append(str(int(f)) if pattern.dimension == 1 else f"{int(f[0])} {int(f[1])}")
    return "\n".join(lines) + "\n"


def parse_pattern(text, n, dimension=None):
    """Inverse of :func:`format_pattern` for grid size ``n``.

    The dimension is inferred from the first data line when not given.

    Raises
    ------
    PatternRangeError
        A frequency lies outside ``kmin(n) .. kmin(n)+n-1``; the message
        names the line.
    """
    from .ops import kmin
    lo = kmin(n)
    hi = lo + n - 1
    freqs, levels = [], []
    level = None
    labelled = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            words = line[1:].split()
            if len(words) == 2 and words[0] == "level":
                try:
                    level = int(words[1])
                except ValueError:
                    raise FormatError(f"line {lineno}: bad level annotation") from None
                labelled = True
            continue
        try:
            ks = [int(w) for w in line.split()]
        except ValueError:
            raise FormatError(f"line {lineno}: expected integers, got {line!r}") from None
        if dimension is None:
            dimension = len(ks)
        if len(ks) != dimension or dimension not in (1, 2):
            raise FormatError(f"line {lineno}: expected {dimension} integer(s)")
        if any(k < lo or k > hi for k in ks):
            raise PatternRangeError(
                f"line {lineno}: frequency {line} outside the grid {lo}..{hi} for N={n}")
        freqs.append(ks if dimension == 2 else ks[0])
        levels.append(-1 if level is None else level)
    if dimension is None:
        dimension = 1
    lv = np.array(levels) if labelled else None
    if lv is not None and np.any(lv < 0):
        raise FormatError("frequencies before the first '# level' line")
    arr = np.array(freqs, dtype=int).reshape((-1,) if dimension == 1 else (-1, 2))
    return SamplingPattern(n, dimension, arr, lv)


def write_pattern(path, pattern):
    Path(path).write_text(format_pattern(pattern))


def read_pattern(path, n, dimension=None):
    return parse_pattern(Path(path).read_text(), n, dimension)


# ------------------------------------------------------------ PGM / JSON


def write_pgm(path, image, vmax=None):
    """16-bit binary PGM (P5) of ``|image|`` scaled so ``vmax`` maps to 65535."""
    mag = np.abs(np.asarray(image))
    if mag.ndim != 2:
        raise FormatError("PGM export needs a 2-D image")
    top = float(mag.max()) if vmax is None else float(vmax)
    scaled = np.zeros(mag.shape) if top <= 0 else np.clip(mag / top, 0, 1) * 65535
    body = np.round(scaled).astype(">u2").tobytes()
    h, w = mag.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n65535\n".encode("ascii") + body)


def read_pgm(path):
    """Read a 16-bit P5 PGM written by :func:`write_pgm`; returns uint16."""
    buf = Path(path).read_bytes()
    parts = buf.split(b"\n", 3)
    if len(parts) < 4 or parts[0] != b"P5":
        raise BadMagicError("not a binary PGM")
    w, h = (int(v) for v in parts[1].split())
    if int(parts[2]) != 65535:
        raise FormatError("only 16-bit PGM is supported")
    body = parts[3]
    if len(body) < 2 * w * h:
        raise TruncationError("PGM pixel data truncated")
    return np.frombuffer(body[: 2 * w * h], dtype=">u2").reshape(h, w).astype(np.uint16)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        # JSON has no inf/nan; keep them readable as strings
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps_report(report):
    """Deterministic JSON text (sorted keys, two-space indent)."""
    return json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"


def write_report(path, report):
    Path(path).write_text(dumps_report(report))


def read_report(path):
    return json.loads(Path(path).read_text())
