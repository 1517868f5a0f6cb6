"""Self-contained baseline JPEG codec (JFIF, Annex-K tables, IJG QF scaling).

The encoder produces deterministic baseline sequential streams: BT.601 colour
conversion, optional 4:2:0 subsampling by 2x2 box average, exact float FDCT,
quantization by the IJG-scaled Annex-K tables, and the fixed Annex-K Huffman
tables (no optimized-Huffman pass, no metadata passthrough).

The decoder takes the opposite stance on arithmetic: its IDCT, chroma
upsampling, and colour conversion are ports of the classic libjpeg integer
decode path (the "islow" IDCT with its two-pass DESCALE rounding, the fancy
3:1 fractional upsamplers, the 16-bit fixed-point YCbCr tables), so output
agrees with a libjpeg-based reference decoder to within ±1 per sample —
in practice bit-for-bit.

Scope is baseline/extended sequential Huffman only; progressive and
arithmetic streams raise :class:`UnsupportedJpegError`.
"""

from __future__ import annotations

import dataclasses
import struct

import numpy as np

from .errors import JpegParseError, UnsupportedJpegError
from .image import ImageBuffer

__all__ = [
    "QuantTables",
    "JpegConfig",
    "scale_quant_tables",
    "encode_jpeg",
    "decode_jpeg",
    "BASE_QUANT_LUMA",
    "BASE_QUANT_CHROMA",
]

# --- Annex-K base tables ---------------------------------------------------

BASE_QUANT_LUMA = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)

BASE_QUANT_CHROMA = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ],
    dtype=np.int64,
)

# ZIGZAG[i] = raster position (row*8+col) of the i-th coefficient in zigzag order.
ZIGZAG = np.array(
    [
        0, 1, 8, 16, 9, 2, 3, 10,
        17, 24, 32, 25, 18, 11, 4, 5,
        12, 19, 26, 33, 40, 48, 41, 34,
        27, 20, 13, 6, 7, 14, 21, 28,
        35, 42, 49, 56, 57, 50, 43, 36,
        29, 22, 15, 23, 30, 37, 44, 51,
        58, 59, 52, 45, 38, 31, 39, 46,
        53, 60, 61, 54, 47, 55, 62, 63,
    ],
    dtype=np.int64,
)

# Annex-K "typical" Huffman tables: (BITS counts for code lengths 1..16, values).
DC_LUMA_BITS = (0, 1, 5, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0)
DC_LUMA_VALS = tuple(range(12))
DC_CHROMA_BITS = (0, 3, 1, 1, 1, 1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0)
DC_CHROMA_VALS = tuple(range(12))

AC_LUMA_BITS = (0, 2, 1, 3, 3, 2, 4, 3, 5, 5, 4, 4, 0, 0, 1, 0x7D)
AC_LUMA_VALS = (
    0x01, 0x02, 0x03, 0x00, 0x04, 0x11, 0x05, 0x12,
    0x21, 0x31, 0x41, 0x06, 0x13, 0x51, 0x61, 0x07,
    0x22, 0x71, 0x14, 0x32, 0x81, 0x91, 0xA1, 0x08,
    0x23, 0x42, 0xB1, 0xC1, 0x15, 0x52, 0xD1, 0xF0,
    0x24, 0x33, 0x62, 0x72, 0x82, 0x09, 0x0A, 0x16,
    0x17, 0x18, 0x19, 0x1A, 0x25, 0x26, 0x27, 0x28,
    0x29, 0x2A, 0x34, 0x35, 0x36, 0x37, 0x38, 0x39,
    0x3A, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48, 0x49,
    0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58, 0x59,
    0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68, 0x69,
    0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78, 0x79,
    0x7A, 0x83, 0x84, 0x85, 0x86, 0x87, 0x88, 0x89,
    0x8A, 0x92, 0x93, 0x94, 0x95, 0x96, 0x97, 0x98,
    0x99, 0x9A, 0xA2, 0xA3, 0xA4, 0xA5, 0xA6, 0xA7,
    0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4, 0xB5, 0xB6,
    0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3, 0xC4, 0xC5,
    0xC6, 0xC7, 0xC8, 0xC9, 0xCA, 0xD2, 0xD3, 0xD4,
    0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA, 0xE1, 0xE2,
    0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9, 0xEA,
    0xF1, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8,
    0xF9, 0xFA,
)
AC_CHROMA_BITS = (0, 2, 1, 2, 4, 4, 3, 4, 7, 5, 4, 4, 0, 1, 2, 0x77)
AC_CHROMA_VALS = (
    0x00, 0x01, 0x02, 0x03, 0x11, 0x04, 0x05, 0x21,
    0x31, 0x06, 0x12, 0x41, 0x51, 0x07, 0x61, 0x71,
    0x13, 0x22, 0x32, 0x81, 0x08, 0x14, 0x42, 0x91,
    0xA1, 0xB1, 0xC1, 0x09, 0x23, 0x33, 0x52, 0xF0,
    0x15, 0x62, 0x72, 0xD1, 0x0A, 0x16, 0x24, 0x34,
    0xE1, 0x25, 0xF1, 0x17, 0x18, 0x19, 0x1A, 0x26,
    0x27, 0x28, 0x29, 0x2A, 0x35, 0x36, 0x37, 0x38,
    0x39, 0x3A, 0x43, 0x44, 0x45, 0x46, 0x47, 0x48,
    0x49, 0x4A, 0x53, 0x54, 0x55, 0x56, 0x57, 0x58,
    0x59, 0x5A, 0x63, 0x64, 0x65, 0x66, 0x67, 0x68,
    0x69, 0x6A, 0x73, 0x74, 0x75, 0x76, 0x77, 0x78,
    0x79, 0x7A, 0x82, 0x83, 0x84, 0x85, 0x86, 0x87,
    0x88, 0x89, 0x8A, 0x92, 0x93, 0x94, 0x95, 0x96,
    0x97, 0x98, 0x99, 0x9A, 0xA2, 0xA3, 0xA4, 0xA5,
    0xA6, 0xA7, 0xA8, 0xA9, 0xAA, 0xB2, 0xB3, 0xB4,
    0xB5, 0xB6, 0xB7, 0xB8, 0xB9, 0xBA, 0xC2, 0xC3,
    0xC4, 0xC5, 0xC6, 0xC7, 0xC8, 0xC9, 0xCA, 0xD2,
    0xD3, 0xD4, 0xD5, 0xD6, 0xD7, 0xD8, 0xD9, 0xDA,
    0xE2, 0xE3, 0xE4, 0xE5, 0xE6, 0xE7, 0xE8, 0xE9,
    0xEA, 0xF2, 0xF3, 0xF4, 0xF5, 0xF6, 0xF7, 0xF8,
    0xF9, 0xFA,
)


# --- public types ----------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class QuantTables:
    """Scaled luma/chroma quantization tables, entries in [1, 255]."""

    luma: np.ndarray
    chroma: np.ndarray

    def __post_init__(self):
        for name, t in (("luma", self.luma), ("chroma", self.chroma)):
            t = np.asarray(t, dtype=np.int64)
            if t.shape != (8, 8):
                raise ValueError(f"{name} table must be 8x8")
            if t.min() < 1 or t.max() > 255:
                raise ValueError(f"{name} table entries outside [1,255]")
            t = np.array(t, copy=True)
            t.flags.writeable = False
            object.__setattr__(self, name, t)


@dataclasses.dataclass(frozen=True)
class JpegConfig:
    """Encoder knobs: quality in [1,100], subsampling "4:2:0" or "4:4:4",
    restart interval in MCUs (0 disables restart markers)."""

    quality: int = 50
    subsampling: str = "4:2:0"
    restart_interval: int = 0

    def __post_init__(self):
        if not 1 <= self.quality <= 100:
            raise ValueError(f"quality must be in [1,100], got {self.quality}")
        if self.subsampling not in ("4:2:0", "4:4:4"):
            raise ValueError(f"subsampling must be 4:2:0 or 4:4:4, got {self.subsampling!r}")
        if self.restart_interval < 0:
            raise ValueError("restart_interval must be >= 0")


def scale_quant_tables(quality: int) -> QuantTables:
    """IJG quality scaling of the Annex-K base tables.

    scale = 5000/QF below 50, otherwise 200 - 2*QF; each entry becomes
    floor((base*scale + 50)/100) clamped to [1, 255]. QF=50 reproduces the
    base tables; QF=100 collapses everything to 1.
    """
    if not isinstance(quality, (int, np.integer)) or not 1 <= quality <= 100:
        raise ValueError(f"quality must be an integer in [1,100], got {quality!r}")
    scale = 5000 // quality if quality < 50 else 200 - 2 * quality

    def scaled(base):
        t = (base * scale + 50) // 100
        return np.clip(t, 1, 255)

    return QuantTables(luma=scaled(BASE_QUANT_LUMA), chroma=scaled(BASE_QUANT_CHROMA))


# --- shared small pieces ---------------------------------------------------

# Orthonormal 8-point DCT-II matrix; T @ block @ T.T is exactly the T.81 FDCT.
def _dct_matrix():
    k = np.arange(8)
    t = np.cos((2 * k[None, :] + 1) * k[:, None] * np.pi / 16)
    t[0, :] = 1.0
    t *= np.where(k == 0, np.sqrt(1 / 8), 0.5)[:, None]
    return t


_DCT_T = _dct_matrix()


def _build_code_map(bits, vals):
    """Canonical Huffman assignment: {symbol: (code, length)}."""
    codes = {}
    code = 0
    i = 0
    for length in range(1, 17):
        for _ in range(bits[length - 1]):
            codes[vals[i]] = (code, length)
            code += 1
            i += 1
        code <<= 1
    return codes


_ENC_DC = (_build_code_map(DC_LUMA_BITS, DC_LUMA_VALS), _build_code_map(DC_CHROMA_BITS, DC_CHROMA_VALS))
_ENC_AC = (_build_code_map(AC_LUMA_BITS, AC_LUMA_VALS), _build_code_map(AC_CHROMA_BITS, AC_CHROMA_VALS))


def _pad_to_multiple(plane, mult_h, mult_w):
    h, w = plane.shape
    ph = (-h) % mult_h
    pw = (-w) % mult_w
    if ph or pw:
        plane = np.pad(plane, ((0, ph), (0, pw)), mode="edge")
    return plane


# --- encoder ---------------------------------------------------------------


class _BitWriter:
    """MSB-first bit accumulator with 0xFF byte stuffing."""

    def __init__(self):
        self.out = bytearray()
        self.acc = 0
        self.nbits = 0

    def put(self, code, length):
        if length == 0:
            return
        self.acc = (self.acc << length) | (code & ((1 << length) - 1))
        self.nbits += length
        while self.nbits >= 8:
            self.nbits -= 8
            byte = (self.acc >> self.nbits) & 0xFF
            self.out.append(byte)
            if byte == 0xFF:
                self.out.append(0x00)
        self.acc &= (1 << self.nbits) - 1

    def pad_byte(self):
        """Fill to a byte boundary with 1-bits (T.81 B.1.1.5)."""
        if self.nbits:
            self.put((1 << (8 - self.nbits)) - 1, 8 - self.nbits)

    def marker(self, byte2):
        """Byte-align and emit a marker (used for RSTn inside scan data)."""
        self.pad_byte()
        self.out.append(0xFF)
        self.out.append(byte2)


def _rgb_to_ycbcr_planes(arr):
    r = arr[:, :, 0].astype(np.float64)
    g = arr[:, :, 1].astype(np.float64)
    b = arr[:, :, 2].astype(np.float64)
    y = 0.299 * r + 0.587 * g + 0.114 * b
    cb = 128.0 - 0.168735892 * r - 0.331264108 * g + 0.5 * b
    cr = 128.0 + 0.5 * r - 0.418687589 * g - 0.081312411 * b
    return [y, cb, cr]


def _box_downsample2(plane):
    p = _pad_to_multiple(plane, 2, 2)
    return (p[0::2, 0::2] + p[0::2, 1::2] + p[1::2, 0::2] + p[1::2, 1::2]) / 4.0


def _fdct_quantize(plane, qtable):
    """Blocked FDCT + quantization -> int32 zigzag coefficients.

    Returns an array of shape (blocks_y, blocks_x, 64), zigzag order.
    """
    h, w = plane.shape
    by, bx = h // 8, w // 8
    blocks = plane.reshape(by, 8, bx, 8).transpose(0, 2, 1, 3) - 128.0
    coefs = np.einsum("ux,byxv,wv->byuw", _DCT_T, blocks, _DCT_T, optimize=True)
    q = coefs / qtable.astype(np.float64)
    quantized = np.where(q >= 0, np.floor(q + 0.5), np.ceil(q - 0.5)).astype(np.int64)
    zz = quantized.reshape(by, bx, 64)[:, :, ZIGZAG]
    return zz


def _magnitude(v):
    """(category, bit pattern) for a DC diff / AC value per T.81 F.1.2."""
    if v == 0:
        return 0, 0
    a = v if v > 0 else -v
    size = a.bit_length()
    bits = v if v > 0 else v + (1 << size) - 1
    return size, bits


def _encode_block(writer, zzblock, pred, dc_map, ac_map):
    dc = int(zzblock[0])
    size, bits = _magnitude(dc - pred)
    code, length = dc_map[size]
    writer.put(code, length)
    if size:
        writer.put(bits, size)
    run = 0
    last_nz = 0
    nz = np.nonzero(zzblock[1:])[0]
    last_nz = nz[-1] + 1 if len(nz) else 0
    for k in range(1, last_nz + 1):
        v = int(zzblock[k])
        if v == 0:
            run += 1
            continue
        while run > 15:
            code, length = ac_map[0xF0]  # ZRL
            writer.put(code, length)
            run -= 16
        size, bits = _magnitude(v)
        code, length = ac_map[(run << 4) | size]
        writer.put(code, length)
        writer.put(bits, size)
        run = 0
    if last_nz < 63:
        code, length = ac_map[0x00]  # EOB
        writer.put(code, length)
    return dc


def _segment(marker, payload):
    return bytes([0xFF, marker]) + struct.pack(">H", len(payload) + 2) + payload


def encode_jpeg(img, cfg: JpegConfig) -> bytes:
    """Encode an 8-bit grayscale or RGB buffer as a baseline JFIF stream."""
    buf = img if isinstance(img, ImageBuffer) else ImageBuffer(np.asarray(img))
    if buf.is_float:
        raise ValueError("encode_jpeg needs 8-bit input; quantize first")
    h, w = buf.height, buf.width
    tables = scale_quant_tables(cfg.quality)
    gray = buf.channels == 1

    if gray:
        planes = [buf.data[:, :, 0].astype(np.float64)]
        samp = [(1, 1)]
        qsel = [0]
    else:
        planes = _rgb_to_ycbcr_planes(buf.data)
        if cfg.subsampling == "4:2:0":
            planes[1] = _box_downsample2(planes[1])
            planes[2] = _box_downsample2(planes[2])
            samp = [(2, 2), (1, 1), (1, 1)]
        else:
            samp = [(1, 1), (1, 1), (1, 1)]
        qsel = [0, 1, 1]

    hmax = max(s[0] for s in samp)
    vmax = max(s[1] for s in samp)
    mcus_x = -(-w // (8 * hmax))
    mcus_y = -(-h // (8 * vmax))

    # Pad each plane so it holds a whole number of MCUs, then transform.
    coef = []
    for plane, (sh, sv), qi in zip(planes, samp, qsel):
        padded = _pad_to_multiple(plane, 1, 1)
        target_h, target_w = mcus_y * sv * 8, mcus_x * sh * 8
        padded = np.pad(
            padded,
            ((0, target_h - plane.shape[0]), (0, target_w - plane.shape[1])),
            mode="edge",
        )
        qtable = tables.luma if qi == 0 else tables.chroma
        coef.append(_fdct_quantize(padded, qtable))

    # Entropy-coded scan data.
    writer = _BitWriter()
    preds = [0] * len(planes)
    huff_sel = [0] + [1] * (len(planes) - 1)
    rst_index = 0
    mcu_count = 0
    for my in range(mcus_y):
        for mx in range(mcus_x):
            if cfg.restart_interval and mcu_count and mcu_count % cfg.restart_interval == 0:
                writer.marker(0xD0 + rst_index)
                rst_index = (rst_index + 1) % 8
                preds = [0] * len(planes)
            for ci, (sh, sv) in enumerate(samp):
                for by in range(sv):
                    for bx in range(sh):
                        block = coef[ci][my * sv + by, mx * sh + bx]
                        preds[ci] = _encode_block(
                            writer, block, preds[ci], _ENC_DC[huff_sel[ci]], _ENC_AC[huff_sel[ci]]
                        )
            mcu_count += 1
    writer.pad_byte()

    # Assemble the stream.
    parts = [b"\xff\xd8"]  # SOI
    parts.append(
        _segment(0xE0, b"JFIF\x00" + bytes([1, 1, 0]) + struct.pack(">HH", 1, 1) + b"\x00\x00")
    )
    zz_luma = tables.luma.reshape(64)[ZIGZAG]
    parts.append(_segment(0xDB, bytes([0x00]) + bytes(int(v) for v in zz_luma)))
    if not gray:
        zz_chroma = tables.chroma.reshape(64)[ZIGZAG]
        parts.append(_segment(0xDB, bytes([0x01]) + bytes(int(v) for v in zz_chroma)))

    sof = bytearray(struct.pack(">BHHB", 8, h, w, len(planes)))
    for ci, (sh, sv) in enumerate(samp):
        sof += bytes([ci + 1, (sh << 4) | sv, qsel[ci]])
    parts.append(_segment(0xC0, bytes(sof)))

    def dht(tc, th, bits, vals):
        return _segment(0xC4, bytes([(tc << 4) | th]) + bytes(bits) + bytes(vals))

    parts.append(dht(0, 0, DC_LUMA_BITS, DC_LUMA_VALS))
    parts.append(dht(1, 0, AC_LUMA_BITS, AC_LUMA_VALS))
    if not gray:
        parts.append(dht(0, 1, DC_CHROMA_BITS, DC_CHROMA_VALS))
        parts.append(dht(1, 1, AC_CHROMA_BITS, AC_CHROMA_VALS))

    if cfg.restart_interval:
        parts.append(_segment(0xDD, struct.pack(">H", cfg.restart_interval)))

    sos = bytearray([len(planes)])
    for ci in range(len(planes)):
        sos += bytes([ci + 1, (huff_sel[ci] << 4) | huff_sel[ci]])
    sos += bytes([0, 63, 0])
    parts.append(_segment(0xDA, bytes(sos)))
    parts.append(bytes(writer.out))
    parts.append(b"\xff\xd9")  # EOI
    return b"".join(parts)


# --- decoder ---------------------------------------------------------------


class _HuffLUT:
    """16-bit peek table: one lookup gives (symbol, code length)."""

    def __init__(self, bits, vals):
        self.sym = np.zeros(65536, dtype=np.int32)
        self.len = np.zeros(65536, dtype=np.int32)
        code = 0
        i = 0
        for length in range(1, 17):
            for _ in range(bits[length - 1]):
                lo = code << (16 - length)
                hi = (code + 1) << (16 - length)
                if hi > 65536:
                    raise JpegParseError("overfull Huffman table")
                self.sym[lo:hi] = vals[i]
                self.len[lo:hi] = length
                code += 1
                i += 1
            code <<= 1
        self.sym_list = self.sym.tolist()
        self.len_list = self.len.tolist()


@dataclasses.dataclass
class _Component:
    cid: int
    h: int
    v: int
    tq: int
    # filled in once the frame geometry is known
    dw: int = 0          # true downsampled width/height (no block padding)
    dh: int = 0
    blocks_w: int = 0    # interleaved (MCU-padded) block geometry
    blocks_h: int = 0
    coef: np.ndarray = None
    dc_lut: _HuffLUT = None
    ac_lut: _HuffLUT = None


class _Decoder:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0
        self.qtables = {}
        self.huff = {}
        self.components = []
        self.width = self.height = 0
        self.hmax = self.vmax = 1
        self.mcus_x = self.mcus_y = 0
        self.restart_interval = 0
        self.got_frame = False
        self.done = False

    # -- marker level -------------------------------------------------------

    def fail(self, msg):
        raise JpegParseError(msg, offset=self.pos)

    def need(self, n):
        if self.pos + n > len(self.data):
            self.fail(f"truncated stream (wanted {n} more bytes)")

    def u8(self):
        self.need(1)
        v = self.data[self.pos]
        self.pos += 1
        return v

    def u16(self):
        self.need(2)
        v = struct.unpack_from(">H", self.data, self.pos)[0]
        self.pos += 2
        return v

    def run(self):
        self.need(2)
        if self.data[0:2] != b"\xff\xd8":
            raise JpegParseError("missing SOI marker", offset=0)
        self.pos = 2
        while not self.done:
            marker = self.next_marker()
            self.dispatch(marker)
        if not self.components or self.components[0].coef is None:
            self.fail("stream ended without decodable scan data")
        return self.finish()

    def next_marker(self):
        # tolerate fill bytes (0xFF padding) before a marker
        self.need(2)
        if self.data[self.pos] != 0xFF:
            self.fail(f"expected marker, found 0x{self.data[self.pos]:02x}")
        while True:
            self.need(2)
            b = self.data[self.pos + 1]
            if b == 0xFF:
                self.pos += 1
                continue
            self.pos += 2
            return b

    def dispatch(self, marker):
        if marker == 0xD9:  # EOI
            self.done = True
            return
        if marker in (0xC0, 0xC1):
            self.read_sof()
            return
        if marker in (0xC2, 0xC6, 0xCA, 0xCE):
            raise UnsupportedJpegError("progressive JPEG is not supported")
        if marker in (0xC3, 0xC5, 0xC7, 0xCB, 0xCF):
            raise UnsupportedJpegError("lossless/differential JPEG is not supported")
        if marker in (0xC9, 0xCD):
            raise UnsupportedJpegError("arithmetic-coded JPEG is not supported")
        if marker == 0xC4:
            self.read_dht()
            return
        if marker == 0xDB:
            self.read_dqt()
            return
        if marker == 0xDD:
            length = self.u16()
            if length != 4:
                self.fail(f"bad DRI length {length}")
            self.restart_interval = self.u16()
            return
        if marker == 0xDA:
            self.read_scan()
            return
        if 0xE0 <= marker <= 0xEF or marker == 0xFE:  # APPn / COM
            length = self.u16()
            if length < 2:
                self.fail(f"bad segment length {length}")
            self.need(length - 2)
            self.pos += length - 2
            return
        if marker == 0xDC:
            raise UnsupportedJpegError("DNL segments are not supported")
        self.fail(f"unexpected marker 0xff{marker:02x}")

    def read_dqt(self):
        length = self.u16() - 2
        end = self.pos + length
        while self.pos < end:
            pq_tq = self.u8()
            pq, tq = pq_tq >> 4, pq_tq & 15
            if pq != 0:
                raise UnsupportedJpegError("16-bit quantization tables (Pq=1) unsupported")
            self.need(64)
            zz = np.frombuffer(self.data, dtype=np.uint8, count=64, offset=self.pos).astype(np.int64)
            self.pos += 64
            nat = np.zeros(64, dtype=np.int64)
            nat[ZIGZAG] = zz
            self.qtables[tq] = nat.reshape(8, 8)
        if self.pos != end:
            self.fail("DQT length does not match its payload")

    def read_dht(self):
        length = self.u16() - 2
        end = self.pos + length
        while self.pos < end:
            tc_th = self.u8()
            tc, th = tc_th >> 4, tc_th & 15
            self.need(16)
            bits = list(self.data[self.pos : self.pos + 16])
            self.pos += 16
            total = sum(bits)
            self.need(total)
            vals = list(self.data[self.pos : self.pos + total])
            self.pos += total
            self.huff[(tc, th)] = _HuffLUT(bits, vals)
        if self.pos != end:
            self.fail("DHT length does not match its payload")

    def read_sof(self):
        if self.got_frame:
            self.fail("multiple SOF segments")
        length = self.u16()
        precision = self.u8()
        if precision != 8:
            raise UnsupportedJpegError(f"{precision}-bit precision unsupported (baseline is 8)")
        self.height = self.u16()
        self.width = self.u16()
        if self.height == 0 or self.width == 0:
            self.fail("zero image dimensions (DNL-deferred heights unsupported)")
        nf = self.u8()
        if nf not in (1, 3):
            raise UnsupportedJpegError(f"{nf}-component images unsupported (1 or 3 only)")
        if length != 8 + 3 * nf:
            self.fail(f"bad SOF length {length}")
        for _ in range(nf):
            cid = self.u8()
            hv = self.u8()
            tq = self.u8()
            h, v = hv >> 4, hv & 15
            if h not in (1, 2) or v not in (1, 2):
                raise UnsupportedJpegError(f"sampling factors {h}x{v} unsupported")
            self.components.append(_Component(cid=cid, h=h, v=v, tq=tq))
        self.hmax = max(c.h for c in self.components)
        self.vmax = max(c.v for c in self.components)
        self.mcus_x = -(-self.width // (8 * self.hmax))
        self.mcus_y = -(-self.height // (8 * self.vmax))
        for c in self.components:
            c.dw = -(-self.width * c.h // self.hmax)
            c.dh = -(-self.height * c.v // self.vmax)
            c.blocks_w = self.mcus_x * c.h
            c.blocks_h = self.mcus_y * c.v
            c.coef = np.zeros((c.blocks_h, c.blocks_w, 64), dtype=np.int64)
        self.got_frame = True

    # -- scan level ----------------------------------------------------------

    def read_scan(self):
        if not self.got_frame:
            self.fail("SOS before SOF")
        length = self.u16()
        ns = self.u8()
        if length != 6 + 2 * ns:
            self.fail(f"bad SOS length {length}")
        scan_comps = []
        for _ in range(ns):
            cs = self.u8()
            td_ta = self.u8()
            comp = next((c for c in self.components if c.cid == cs), None)
            if comp is None:
                self.fail(f"scan references unknown component id {cs}")
            td, ta = td_ta >> 4, td_ta & 15
            if (0, td) not in self.huff or (1, ta) not in self.huff:
                self.fail(f"scan uses undefined Huffman table (dc {td}, ac {ta})")
            comp.dc_lut = self.huff[(0, td)]
            comp.ac_lut = self.huff[(1, ta)]
            scan_comps.append(comp)
        ss, se, a = self.u8(), self.u8(), self.u8()
        if (ss, se, a) != (0, 63, 0):
            raise UnsupportedJpegError(
                f"non-sequential scan parameters Ss={ss} Se={se} AhAl={a}"
            )
        segments, next_pos = self.collect_entropy_segments()
        self.decode_entropy(scan_comps, segments)
        self.pos = next_pos

    def collect_entropy_segments(self):
        """Destuff scan bytes, splitting on restart markers.

        Returns (list of byte strings, position of the next marker's 0xFF).
        """
        data = self.data
        segments = []
        cur = bytearray()
        i = self.pos
        n = len(data)
        while True:
            ff = data.find(b"\xff", i)
            if ff < 0 or ff + 1 >= n:
                raise JpegParseError("entropy data ran off the end of the stream", offset=n)
            cur += data[i:ff]
            nxt = data[ff + 1]
            if nxt == 0x00:
                cur.append(0xFF)
                i = ff + 2
            elif 0xD0 <= nxt <= 0xD7:  # RSTn
                segments.append(bytes(cur))
                cur = bytearray()
                i = ff + 2
            elif nxt == 0xFF:  # fill byte
                i = ff + 1
            else:
                segments.append(bytes(cur))
                return segments, ff

    def decode_entropy(self, scan_comps, segments):
        interleaved = len(scan_comps) > 1
        if interleaved:
            total_mcus = self.mcus_x * self.mcus_y
            mcus_per_row = self.mcus_x
        else:
            c = scan_comps[0]
            niw = -(-c.dw // 8)
            nih = -(-c.dh // 8)
            total_mcus = niw * nih
            mcus_per_row = niw
        ri = self.restart_interval
        expected_segments = (total_mcus + ri - 1) // ri if ri else 1
        if len(segments) < expected_segments:
            self.fail(
                f"scan has {len(segments)} restart segments, expected {expected_segments}"
            )

        mcu = 0
        for seg_index in range(expected_segments):
            seg = segments[seg_index]
            reader = _BitReader(seg)
            preds = {c.cid: 0 for c in scan_comps}
            count = min(ri, total_mcus - mcu) if ri else total_mcus
            for _ in range(count):
                my, mx = divmod(mcu, mcus_per_row)
                for c in scan_comps:
                    if interleaved:
                        for by in range(c.v):
                            for bx in range(c.h):
                                blk = self.decode_block(reader, c, preds)
                                c.coef[my * c.v + by, mx * c.h + bx] = blk
                    else:
                        blk = self.decode_block(reader, c, preds)
                        c.coef[my, mx] = blk
                mcu += 1

    def decode_block(self, reader, comp, preds):
        blk = [0] * 64
        s = reader.read_symbol(comp.dc_lut)
        diff = reader.receive_extend(s) if s else 0
        pred = preds[comp.cid] + diff
        preds[comp.cid] = pred
        blk[0] = pred
        k = 1
        while k < 64:
            rs = reader.read_symbol(comp.ac_lut)
            r, size = rs >> 4, rs & 15
            if size == 0:
                if r == 15:
                    k += 16
                    continue
                break  # EOB
            k += r
            if k > 63:
                raise JpegParseError("AC run overruns the block")
            blk[k] = reader.receive_extend(size)
            k += 1
        return blk

    # -- reconstruction -------------------------------------------------------

    def finish(self):
        planes = []
        for c in self.components:
            q = self.qtables.get(c.tq)
            if q is None:
                self.fail(f"component {c.cid} references undefined quant table {c.tq}")
            plane = _reconstruct_plane(c.coef, q)
            plane = plane[: c.dh, : c.dw]
            plane = _upsample(plane, self.hmax // c.h, self.vmax // c.v)
            planes.append(plane[: self.height, : self.width])
        if len(planes) == 1:
            return ImageBuffer(planes[0].astype(np.uint8))
        rgb = _ycbcr_to_rgb(planes[0], planes[1], planes[2])
        return ImageBuffer(rgb)


class _BitReader:
    """MSB-first reader over one destuffed entropy segment."""

    __slots__ = ("buf", "n", "i", "acc", "nbits")

    def __init__(self, segment: bytes):
        # trailing zero bytes let the final pad bits resolve without bounds checks
        self.buf = segment + b"\x00\x00\x00\x00"
        self.n = len(self.buf)
        self.i = 0
        self.acc = 0
        self.nbits = 0

    def _fill(self, want):
        buf, i, acc, nbits = self.buf, self.i, self.acc, self.nbits
        while nbits < want:
            if i >= self.n:
                raise JpegParseError("entropy segment exhausted mid-symbol")
            acc = (acc << 8) | buf[i]
            i += 1
            nbits += 8
        self.i, self.acc, self.nbits = i, acc, nbits

    def read_symbol(self, lut: _HuffLUT):
        if self.nbits < 16:
            self._fill(16)
        peek = (self.acc >> (self.nbits - 16)) & 0xFFFF
        length = lut.len_list[peek]
        if length == 0:
            raise JpegParseError("invalid Huffman code in entropy data")
        self.nbits -= length
        self.acc &= (1 << self.nbits) - 1
        return lut.sym_list[peek]

    def receive_extend(self, size):
        if self.nbits < size:
            self._fill(size)
        self.nbits -= size
        v = (self.acc >> self.nbits) & ((1 << size) - 1)
        self.acc &= (1 << self.nbits) - 1
        if v < (1 << (size - 1)):
            v += 1 - (1 << size)
        return v


# Fixed-point constants from the libjpeg islow IDCT (13-bit scaling).
_F_0_298631336 = 2446
_F_0_390180644 = 3196
_F_0_541196100 = 4433
_F_0_765366865 = 6270
_F_0_899976223 = 7373
_F_1_175875602 = 9633
_F_1_501321110 = 12299
_F_1_847759065 = 15137
_F_1_961570560 = 16069
_F_2_053119869 = 16819
_F_2_562915447 = 20995
_F_3_072711026 = 25172


def _descale(x, n):
    return (x + (1 << (n - 1))) >> n  # numpy >> on signed ints is arithmetic


def _islow_butterfly(i0, i1, i2, i3, i4, i5, i6, i7, shift):
    z2, z3 = i2, i6
    z1 = (z2 + z3) * _F_0_541196100
    tmp2 = z1 - z3 * _F_1_847759065
    tmp3 = z1 + z2 * _F_0_765366865
    tmp0 = (i0 + i4) << 13
    tmp1 = (i0 - i4) << 13
    t10 = tmp0 + tmp3
    t13 = tmp0 - tmp3
    t11 = tmp1 + tmp2
    t12 = tmp1 - tmp2
    tmp0, tmp1, tmp2, tmp3 = i7, i5, i3, i1
    z1 = tmp0 + tmp3
    z2 = tmp1 + tmp2
    z3 = tmp0 + tmp2
    z4 = tmp1 + tmp3
    z5 = (z3 + z4) * _F_1_175875602
    tmp0 = tmp0 * _F_0_298631336
    tmp1 = tmp1 * _F_2_053119869
    tmp2 = tmp2 * _F_3_072711026
    tmp3 = tmp3 * _F_1_501321110
    z1 = -z1 * _F_0_899976223
    z2 = -z2 * _F_2_562915447
    z3 = -z3 * _F_1_961570560 + z5
    z4 = -z4 * _F_0_390180644 + z5
    tmp0 += z1 + z3
    tmp1 += z2 + z4
    tmp2 += z2 + z3
    tmp3 += z1 + z4
    return (
        _descale(t10 + tmp3, shift),
        _descale(t11 + tmp2, shift),
        _descale(t12 + tmp1, shift),
        _descale(t13 + tmp0, shift),
        _descale(t13 - tmp0, shift),
        _descale(t12 - tmp1, shift),
        _descale(t11 - tmp2, shift),
        _descale(t10 - tmp3, shift),
    )


def _reconstruct_plane(coef_zz, qtable):
    """Dequantize + islow IDCT all blocks of one component; returns uint8 plane
    of size (blocks_h*8, blocks_w*8)."""
    bh, bw, _ = coef_zz.shape
    n = bh * bw
    qz = qtable.reshape(64)[ZIGZAG]
    dq = (coef_zz.reshape(n, 64) * qz).astype(np.int64)
    nat = np.zeros((n, 64), dtype=np.int64)
    nat[:, ZIGZAG] = dq
    blocks = nat.reshape(n, 8, 8)

    cols = [blocks[:, i, :] for i in range(8)]  # pass 1 over columns
    ws = _islow_butterfly(*cols, shift=11)
    rows = [w for w in ws]  # ws[r] has shape (n, 8); pass 2 over rows
    # For pass 2 the eight inputs are ws[r][:, 0..7]; operate rowwise by
    # stacking to (n, 8, 8) and slicing the other axis.
    wsarr = np.stack(rows, axis=1)  # (n, 8row, 8col)
    ins = [wsarr[:, :, j] for j in range(8)]
    outs = _islow_butterfly(*ins, shift=18)
    out = np.stack(outs, axis=2)  # (n, 8, 8)
    out = np.clip(out + 128, 0, 255).astype(np.uint8)
    plane = out.reshape(bh, bw, 8, 8).transpose(0, 2, 1, 3).reshape(bh * 8, bw * 8)
    return plane


def _upsample(plane, hexp, vexp):
    if hexp == 1 and vexp == 1:
        return plane
    if hexp == 2 and vexp == 1:
        return _h2v1_fancy(plane)
    if hexp == 2 and vexp == 2:
        return _h2v2_fancy(plane)
    # any other ratio: pixel replication (matches the non-fancy fallback)
    return np.repeat(np.repeat(plane, vexp, axis=0), hexp, axis=1)


def _h2v1_fancy(plane):
    """libjpeg h2v1 fancy upsample: 3/4 + 1/4 weighting with copied edges."""
    a = plane.astype(np.int32)
    h, w = a.shape
    if w == 1:
        return np.repeat(plane, 2, axis=1)
    prev = np.empty_like(a)
    prev[:, 1:] = a[:, :-1]
    prev[:, 0] = a[:, 0]
    nxt = np.empty_like(a)
    nxt[:, :-1] = a[:, 1:]
    nxt[:, -1] = a[:, -1]
    even = (a * 3 + prev + 1) >> 2
    odd = (a * 3 + nxt + 2) >> 2
    even[:, 0] = a[:, 0]
    odd[:, -1] = a[:, -1]
    out = np.empty((h, w * 2), dtype=np.int32)
    out[:, 0::2] = even
    out[:, 1::2] = odd
    return out.astype(np.uint8)


def _h2v2_fancy(plane):
    """libjpeg h2v2 fancy upsample: vertical 3:1 blend into column sums, then
    the same horizontal 3:1 pattern with the documented +8/+7 rounders."""
    a = plane.astype(np.int32)
    h, w = a.shape
    out = np.empty((h * 2, w * 2), dtype=np.uint8)
    for parity in (0, 1):
        near_idx = np.arange(h) + (1 if parity else -1)
        np.clip(near_idx, 0, h - 1, out=near_idx)
        colsum = a * 3 + a[near_idx]  # (h, w)
        if w == 1:
            row = (colsum * 4 + 8) >> 4
            outrows = np.repeat(row, 2, axis=1)
        else:
            last = np.empty_like(colsum)
            last[:, 1:] = colsum[:, :-1]
            last[:, 0] = colsum[:, 0]
            nxt = np.empty_like(colsum)
            nxt[:, :-1] = colsum[:, 1:]
            nxt[:, -1] = colsum[:, -1]
            even = (colsum * 3 + last + 8) >> 4
            odd = (colsum * 3 + nxt + 7) >> 4
            even[:, 0] = (colsum[:, 0] * 4 + 8) >> 4
            odd[:, -1] = (colsum[:, -1] * 4 + 7) >> 4
            outrows = np.empty((h, w * 2), dtype=np.int32)
            outrows[:, 0::2] = even
            outrows[:, 1::2] = odd
        out[parity::2, :] = outrows.astype(np.uint8)
    return out


def _ycbcr_to_rgb(y, cb, cr):
    """libjpeg jdcolor fixed-point conversion (SCALEBITS=16)."""
    yv = y.astype(np.int64)
    xb = cb.astype(np.int64) - 128
    xr = cr.astype(np.int64) - 128
    r = yv + ((91881 * xr + 32768) >> 16)
    b = yv + ((116130 * xb + 32768) >> 16)
    g = yv + ((-22554 * xb - 46802 * xr + 32768) >> 16)
    rgb = np.stack([r, g, b], axis=-1)
    return np.clip(rgb, 0, 255).astype(np.uint8)


def decode_jpeg(data: bytes) -> ImageBuffer:
    """Decode a baseline sequential JPEG stream to a uint8 buffer.

    Three-component streams come back as RGB, single-component as grayscale.
    Progressive/arithmetic coding raises :class:`UnsupportedJpegError`;
    malformed or truncated streams raise :class:`JpegParseError` carrying the
    byte offset of the problem.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise TypeError("decode_jpeg expects a byte sequence")
    return _Decoder(bytes(data)).run()
