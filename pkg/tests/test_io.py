import numpy as np
import pytest
from hypothesis import given, strategies as hs
from hypothesis.extra import numpy as hnp

from tvcs import assets, io_formats as io, ops, sampling as sm, structure as st


# ------------------------------------------------------------------ binary


def test_signal_roundtrip_bit_identical(tmp_path, rng):
    x = rng.normal(size=256) + 1j * rng.normal(size=256)
    io.write_signal(tmp_path / "x.tvcs", x, note="seed=3")
    out = io.read_binary(tmp_path / "x.tvcs", "signal1d")
    assert out["note"] == "seed=3" and out["n"] == 256
    assert out["data"].tobytes() == x.astype(np.complex128).tobytes()
    assert np.array_equal(io.read_signal(tmp_path / "x.tvcs"), x)


def test_image_and_spectrum_roundtrip(tmp_path, rng):
    img = rng.normal(size=(16, 16))
    io.write_image(tmp_path / "i.tvcs", img)
    assert np.array_equal(io.read_image(tmp_path / "i.tvcs"), img)
    spec = ops.dft(img)
    io.write_spectrum(tmp_path / "s.tvcs", spec)
    assert np.array_equal(io.read_spectrum(tmp_path / "s.tvcs"), spec)


finite = hs.floats(allow_nan=False, allow_infinity=False, width=64)


@given(hnp.arrays(np.complex128, hs.integers(1, 40),
                  elements=hs.complex_numbers(allow_nan=False, allow_infinity=False)))
def test_encode_decode_property(arr):
    out = io.decode(io.encode("spectrum", arr, note="p"))
    assert out["data"].tobytes() == arr.tobytes()


def test_header_layout():
    buf = io.encode("signal1d", np.arange(3.0), note="ab")
    assert buf[:5] == b"TVCS1"
    kind, dtype, ndim, n, notelen = io._HEAD.unpack_from(buf, 5)
    assert (kind, dtype, ndim, n, notelen) == (0, 0, 1, 3, 2)
    assert len(buf) == 5 + io._HEAD.size + 2 + 8 + 3 * 16


def test_bad_magic():
    buf = io.encode("signal1d", np.ones(4))
    with pytest.raises(io.BadMagicError):
        io.decode(b"XXXX" + buf[4:])
    with pytest.raises(io.BadMagicError):
        io.decode(buf[:4] + b"2" + buf[5:])


def test_truncation_every_prefix():
    buf = io.encode("image2d", np.ones((4, 4)), note="t")
    for cut in range(len(buf)):
        with pytest.raises(io.FormatError):
            io.decode(buf[:cut])
    with pytest.raises(io.TruncationError):
        io.decode(buf[:-1])
    with pytest.raises(io.FormatError):
        io.decode(buf + b"\0")


def test_nan_payload(tmp_path):
    with pytest.raises(io.NaNPayloadError):
        io.encode("signal1d", np.array([1.0, np.nan]))
    buf = bytearray(io.encode("signal1d", np.array([1.0, 2.0])))
    buf[-8:] = np.array([np.nan]).astype("<f8").tobytes()
    with pytest.raises(io.NaNPayloadError):
        io.decode(bytes(buf))


def test_kind_checks(tmp_path):
    with pytest.raises(io.FormatError):
        io.encode("signal1d", np.ones((4, 4)))
    with pytest.raises(io.FormatError):
        io.encode("volume", np.ones(4))
    io.write_image(tmp_path / "i.tvcs", np.ones((4, 4)))
    with pytest.raises(io.FormatError):
        io.read_binary(tmp_path / "i.tvcs", "signal1d")


# --------------------------------------------------------------------- CSV


def test_csv_matches_binary(tmp_path, rng):
    x = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    io.write_csv(tmp_path / "x.csv", "image2d", x, note="seed 1")
    io.write_image(tmp_path / "x.tvcs", x)
    a = io.read_csv(tmp_path / "x.csv")
    b = io.read_binary(tmp_path / "x.tvcs")
    assert a["kind"] == "image2d" and a["note"] == "seed 1"
    assert np.max(np.abs(a["data"] - b["data"])) <= 1e-15


def test_csv_errors(tmp_path):
    p = tmp_path / "x.csv"
    io.write_csv(p, "signal1d", np.arange(4.0))
    lines = p.read_text().splitlines()
    p.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(io.TruncationError):
        io.read_csv(p)
    p.write_text("re,im\n1,0\n")
    with pytest.raises(io.BadMagicError):
        io.read_csv(p)
    p.write_text("\n".join(lines[:2] + ["nan,0"] + lines[3:]) + "\n")
    with pytest.raises(io.NaNPayloadError):
        io.read_csv(p)
    with pytest.raises(io.FormatError):
        io.write_csv(p, "pattern", np.ones(2))


# ---------------------------------------------------------------- patterns


def test_pattern_dc_only():
    pat = sm.SamplingPattern(16, 1, [0])
    assert io.format_pattern(pat) == "0\n"


def test_pattern_roundtrip_levels(tmp_path):
    scheme = sm.LevelScheme.from_annuli(16, (3, 6, np.inf), budgets=[5, 10, 20], seed=2)
    pat = sm.draw_multilevel(scheme)
    io.write_pattern(tmp_path / "p.txt", pat)
    back = io.read_pattern(tmp_path / "p.txt", 16)
    assert np.array_equal(back.freqs, pat.freqs)
    assert np.array_equal(back.levels, pat.levels)
    assert "# level 2" in (tmp_path / "p.txt").read_text()


def test_pattern_roundtrip_1d():
    pat = sm.lowpass_plus_uniform(64, 8, 0.2, seed=1)
    back = io.parse_pattern(io.format_pattern(pat), 64)
    assert back.dimension == 1 and np.array_equal(back.freqs, pat.freqs)
    assert back.levels is None


def test_pattern_range_error_names_line():
    text = "0\n3\n# comment\n9\n"
    with pytest.raises(io.PatternRangeError, match="line 4"):
        io.parse_pattern(text, 16)
    with pytest.raises(IndexError):
        io.parse_pattern("0 0\n-8 1\n", 16)


def test_pattern_malformed():
    with pytest.raises(io.FormatError, match="line 2"):
        io.parse_pattern("1\nx\n", 16)
    with pytest.raises(io.FormatError):
        io.parse_pattern("1 2\n3\n", 16)
    with pytest.raises(io.FormatError):
        io.parse_pattern("1\n# level 0\n2\n", 16)


def test_pattern_binary_container():
    pat = sm.radial_lines(32, 3, seed=1)
    buf = io.encode("pattern", io.format_pattern(pat), n=32, ndim=2)
    out = io.decode(buf)
    assert out["kind"] == "pattern"
    assert np.array_equal(io.parse_pattern(out["data"], 32).freqs, pat.freqs)


# --------------------------------------------------------------- PGM, JSON


def test_pgm_roundtrip(tmp_path):
    img = np.zeros((4, 6))
    img[1, 2] = 2.0
    img[3, 5] = 1.0
    io.write_pgm(tmp_path / "a.pgm", img)
    raw = (tmp_path / "a.pgm").read_bytes()
    assert raw.startswith(b"P5\n6 4\n65535\n")
    px = io.read_pgm(tmp_path / "a.pgm")
    assert px.shape == (4, 6) and px[1, 2] == 65535 and px[3, 5] == 32768
    with pytest.raises(io.FormatError):
        io.write_pgm(tmp_path / "b.pgm", np.ones(4))


def test_report_deterministic(tmp_path):
    rep = {"b": np.float64(1.5), "a": [np.int64(2), np.bool_(True)], "c": np.arange(2),
           "d": float("inf"), "z": 1 + 2j}
    text = io.dumps_report(rep)
    assert text == io.dumps_report(dict(reversed(list(rep.items()))))
    io.write_report(tmp_path / "r.json", rep)
    back = io.read_report(tmp_path / "r.json")
    assert back == {"a": [2, True], "b": 1.5, "c": [0, 1], "d": "inf", "z": [1.0, 2.0]}


# ------------------------------------------------------------------ assets


def test_gen_asset_dispatch():
    for kind in io.ASSET_KINDS:
        n = 128
        a = io.gen_asset(kind, n, seed=0)
        assert np.array_equal(a, io.gen_asset(kind, n, seed=0))
    with pytest.raises(ValueError):
        io.gen_asset("boat", 64)
    with pytest.raises(ValueError):
        io.gen_asset("blocky1d", 8)


@pytest.mark.parametrize("seed", range(5))
def test_blocky_spiky_pair(seed):
    b = assets.blocky_1d(256, seed)
    s = assets.spiky_1d(256, seed)
    jb = st.detect_cosupport_1d(b)
    js = st.detect_cosupport_1d(s)
    assert jb.n_jumps == js.n_jumps == 16
    assert jb.widths.min() >= 256 / 20
    inner = js.widths[1:-1]
    assert inner.max() <= 2


@pytest.mark.parametrize("seed", range(3))
def test_squares_lines_pair(seed):
    a = assets.nested_squares(128, seed)
    b = assets.thin_lines(128, seed)
    assert assets.gradient_support(a) == assets.gradient_support(b)
    # direct count of pixels with a nonzero forward difference
    d1 = np.zeros_like(a, dtype=bool)
    d1[:-1] = a[1:] != a[:-1]
    d2 = np.zeros_like(a, dtype=bool)
    d2[:, :-1] = a[:, 1:] != a[:, :-1]
    assert assets.gradient_support(a) == int(np.count_nonzero(d1 | d2))


def test_shepp_logan_values():
    x = assets.shepp_logan(64)
    assert x.min() >= 0 and x.max() <= 1
    c = (np.arange(64) + 0.5) / 32 - 1

    def at(px, py):
        return x[np.argmin(np.abs(-c - py)), np.argmin(np.abs(c - px))]

    # brain matter, upper blob, a dark ventricle and the outside
    assert at(0.0, 0.0) == pytest.approx(0.2)
    assert at(0.0, 0.35) == pytest.approx(0.3)
    assert at(0.22, 0.0) == pytest.approx(0.0)
    assert at(0.95, 0.95) == 0.0


def test_shepp_logan_mirror_symmetry():
    # the table is mirror-symmetric except the two side ellipses (different
    # sizes) and the three small ones near the bottom; away from those the
    # rasterized image must be exactly symmetric
    n = 128
    x = assets.shepp_logan(n)
    c = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    X, Y = np.meshgrid(c, -c)
    near = np.zeros((n, n), dtype=bool)
    for k in (2, 3, 7, 8, 9):
        _, a, b, x0, y0, phi = assets.SHEPP_LOGAN_ELLIPSES[k]
        t = np.deg2rad(phi)
        for sx in (1, -1):
            xr = (sx * X - x0) * np.cos(t) + (Y - y0) * np.sin(t)
            yr = -(sx * X - x0) * np.sin(t) + (Y - y0) * np.cos(t)
            near |= (xr / (a + 0.05)) ** 2 + (yr / (b + 0.05)) ** 2 <= 1.0
    assert np.array_equal(x[~near], x[:, ::-1][~near])
    assert not np.array_equal(x, x[:, ::-1])
