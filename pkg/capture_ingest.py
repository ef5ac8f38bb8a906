"""
BreathBFM Capture Ingest — pcap / フィクスチャ読み込みモジュール
VHT Compressed Beamforming フレームを BfmFrameRecord の時系列に変換する。
角度ビット列は LSB-first・サブキャリア間パディングなしで詰められている。

pcap: classic pcap (pcapng 非対応)、DLT 127 (radiotap)、両エンディアン、usec / nsec。
フィクスチャ: 行区切り JSON (1 行目ヘッダ、以降 1 行 1 フレーム)。
"""
import json
import os
import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

import config
from bfm_codec import (
    AngleSet,
    QuantizationConfig,
    angle_counts,
    angle_order,
    bits_per_subcarrier,
    check_dims,
    validate_indices,
)
from errors import (
    BfmError,
    CaptureFormatError,
    EmptyCaptureError,
    FixtureParseError,
    InvalidAngleError,
    ShapeError,
    TruncatedReportError,
)

# ── 802.11 定数 ──
CATEGORY_VHT            = 21
VHT_ACTION_COMPRESSED_BF = 0
SUBTYPE_ACTION          = 13
SUBTYPE_ACTION_NO_ACK   = 14
RADIOTAP_FLAGS_FCS      = 0x10
ZERO_MAC                = b"\x00" * 6

# magic → (struct のエンディアン, 秒以下の分母)
PCAP_MAGICS = {
    b"\xd4\xc3\xb2\xa1": ("<", 1e6),
    b"\xa1\xb2\xc3\xd4": (">", 1e6),
    b"\x4d\x3c\xb2\xa1": ("<", 1e9),
    b"\xa1\xb2\x3c\x4d": (">", 1e9),
}


def mac_str(mac: bytes) -> str:
    return ":".join(f"{b:02x}" for b in mac)


def parse_mac(text: str) -> bytes:
    try:
        mac = bytes(int(x, 16) for x in text.replace("-", ":").split(":"))
    except ValueError:
        raise CaptureFormatError(f"invalid MAC address: {text!r}")
    if len(mac) != 6:
        raise CaptureFormatError(f"invalid MAC address: {text!r}")
    return mac


# ═══════════════════════════════════════════
#  1. 型
# ═══════════════════════════════════════════
@dataclass(frozen=True, eq=False)
class BfmFrameRecord:
    """キャプチャ 1 フレーム。角度はサブキャリア昇順の (n_subcarriers, count) 配列で保持。"""
    timestamp: float
    n_rows: int
    n_cols: int
    config: QuantizationConfig
    phi_indices: np.ndarray
    psi_indices: np.ndarray
    source: bytes = ZERO_MAC
    dest: bytes = ZERO_MAC

    def __post_init__(self):
        count = angle_counts(self.n_rows, self.n_cols)
        phi = np.array(self.phi_indices, dtype=np.int64)
        psi = np.array(self.psi_indices, dtype=np.int64)
        if phi.ndim != 2 or phi.shape != psi.shape or phi.shape[1] != count:
            raise ShapeError(
                f"angle arrays must be (n_subcarriers, {count}); got {phi.shape} / {psi.shape}"
            )
        validate_indices(phi, psi, self.config)
        phi.setflags(write=False)
        psi.setflags(write=False)
        object.__setattr__(self, "phi_indices", phi)
        object.__setattr__(self, "psi_indices", psi)

    @classmethod
    def from_angle_sets(cls, timestamp: float, angle_sets: list[AngleSet],
                        source: bytes = ZERO_MAC, dest: bytes = ZERO_MAC) -> "BfmFrameRecord":
        if not angle_sets:
            raise ShapeError("a frame needs at least one subcarrier")
        first = angle_sets[0]
        for a in angle_sets[1:]:
            if (a.n_rows, a.n_cols, a.config) != (first.n_rows, first.n_cols, first.config):
                raise ShapeError("angle sets of one frame must share dimensions and quantization")
        return cls(
            timestamp=float(timestamp),
            n_rows=first.n_rows,
            n_cols=first.n_cols,
            config=first.config,
            phi_indices=np.array([a.phi_indices for a in angle_sets]),
            psi_indices=np.array([a.psi_indices for a in angle_sets]),
            source=source,
            dest=dest,
        )

    @property
    def n_subcarriers(self) -> int:
        return self.phi_indices.shape[0]

    @property
    def angle_sets(self) -> list[AngleSet]:
        return [
            AngleSet(self.n_rows, self.n_cols, tuple(p), tuple(q), self.config)
            for p, q in zip(self.phi_indices.tolist(), self.psi_indices.tolist())
        ]

    def layout(self) -> tuple:
        return (self.n_rows, self.n_cols, self.config, self.n_subcarriers)

    def same_angles(self, other: "BfmFrameRecord") -> bool:
        return (
            self.layout() == other.layout()
            and np.array_equal(self.phi_indices, other.phi_indices)
            and np.array_equal(self.psi_indices, other.psi_indices)
        )

    def with_timestamp(self, t: float) -> "BfmFrameRecord":
        return BfmFrameRecord(t, self.n_rows, self.n_cols, self.config,
                              self.phi_indices, self.psi_indices, self.source, self.dest)


@dataclass(frozen=True)
class CaptureStream:
    """時刻順の BfmFrameRecord 列とメタデータ。スキップ数は必ず報告する。"""
    records: tuple[BfmFrameRecord, ...]
    source: str = ""
    parsed: int = 0
    skip_reasons: dict = field(default_factory=dict)
    trailing_bits: int = 0
    duration: float | None = None

    def __post_init__(self):
        records = tuple(self.records)
        for prev, cur in zip(records, records[1:]):
            if cur.timestamp < prev.timestamp:
                raise ShapeError("records must be sorted by timestamp")
        object.__setattr__(self, "records", records)
        if not self.parsed:
            object.__setattr__(self, "parsed", len(records))

    @property
    def skipped(self) -> int:
        return sum(self.skip_reasons.values())

    @property
    def timestamps(self) -> np.ndarray:
        return np.array([r.timestamp for r in self.records], dtype=np.float64)

    def effective_duration(self) -> float:
        """明示値がなければ (最終 - 先頭) に平均間隔 1 つ分を足したもの"""
        if self.duration is not None:
            return float(self.duration)
        n = len(self.records)
        if n < 2:
            return 0.0
        span = self.records[-1].timestamp - self.records[0].timestamp
        return span * n / (n - 1)

    def metadata(self) -> dict:
        return {
            "source": self.source,
            "parsed": self.parsed,
            "skipped": self.skipped,
            "skip_reasons": dict(sorted(self.skip_reasons.items())),
            "trailing_bits": self.trailing_bits,
            "duration": self.effective_duration(),
        }


# ═══════════════════════════════════════════
#  2. 角度ビット列
# ═══════════════════════════════════════════
def _field_layout(n_rows: int, n_cols: int, qc: QuantizationConfig):
    order = angle_order(n_rows, n_cols)
    kinds = np.array([kind for kind, _, _ in order])
    widths = [qc.b_phi if kind == "phi" else qc.b_psi for kind, _, _ in order]
    return kinds, widths


def unpack_report(payload: bytes, n_rows: int, n_cols: int,
                  qc: QuantizationConfig) -> tuple[np.ndarray, np.ndarray, int]:
    """報告バイト列 → (phi_idx, psi_idx, 端数ビット数)。phi/psi は (n_subcarriers, count)。"""
    nbits = bits_per_subcarrier(n_rows, n_cols, qc)
    bits = np.unpackbits(np.frombuffer(bytes(payload), dtype=np.uint8), bitorder="little")
    n_sc = len(bits) // nbits
    if n_sc == 0:
        raise TruncatedReportError(
            f"report has {len(bits)} bits, one {n_rows}x{n_cols} subcarrier needs {nbits}"
        )
    trailing = len(bits) - n_sc * nbits
    block = bits[: n_sc * nbits].reshape(n_sc, nbits).astype(np.int64)

    kinds, widths = _field_layout(n_rows, n_cols, qc)
    values = np.empty((n_sc, len(widths)), dtype=np.int64)
    off = 0
    for j, w in enumerate(widths):
        # フィールド内も LSB-first: 先に読んだビットが下位
        values[:, j] = block[:, off:off + w] @ (1 << np.arange(w, dtype=np.int64))
        off += w
    return values[:, kinds == "phi"], values[:, kinds == "psi"], trailing


def unpack_angle_bitstream(payload: bytes, n_rows: int, n_cols: int,
                           qc: QuantizationConfig) -> list[AngleSet]:
    phi, psi, _ = unpack_report(payload, n_rows, n_cols, qc)
    return [AngleSet(n_rows, n_cols, tuple(p), tuple(q), qc)
            for p, q in zip(phi.tolist(), psi.tolist())]


def pack_angle_bitstream(phi_idx, psi_idx, n_rows: int, n_cols: int,
                         qc: QuantizationConfig) -> bytes:
    """unpack_report の逆。末尾は 0 で 1 バイト境界まで埋める。"""
    phi = np.asarray(phi_idx, dtype=np.int64)
    psi = np.asarray(psi_idx, dtype=np.int64)
    validate_indices(phi, psi, qc)
    kinds, widths = _field_layout(n_rows, n_cols, qc)
    n_sc = phi.shape[0]
    values = np.empty((n_sc, len(widths)), dtype=np.int64)
    values[:, kinds == "phi"] = phi
    values[:, kinds == "psi"] = psi

    chunks = [(values[:, j:j + 1] >> np.arange(w)) & 1 for j, w in enumerate(widths)]
    bits = np.concatenate(chunks, axis=1).astype(np.uint8).ravel()
    return np.packbits(bits, bitorder="little").tobytes()


# ═══════════════════════════════════════════
#  3. pcap 読み込み
# ═══════════════════════════════════════════
class _Skip(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _radiotap_has_fcs(rt: bytes) -> bool:
    """radiotap Flags フィールド (present bit 1) の FCS ビットを見る"""
    if len(rt) < 8:
        return False
    present = struct.unpack_from("<I", rt, 4)[0]
    off = 8
    word = present
    while word & 0x80000000:  # 拡張 present ワード
        if off + 4 > len(rt):
            return False
        word = struct.unpack_from("<I", rt, off)[0]
        off += 4
    if not present & 0b10:
        return False
    if present & 0b01:  # TSFT: 8 バイト境界に揃えて 8 バイト
        off = (off + 7) & ~7
        off += 8
    if off >= len(rt):
        return False
    return bool(rt[off] & RADIOTAP_FLAGS_FCS)


def _decode_packet(pkt: bytes) -> dict:
    if len(pkt) < 8 or pkt[0] != 0:
        raise _Skip("radiotap")
    rt_len = struct.unpack_from("<H", pkt, 2)[0]
    if rt_len < 8 or rt_len > len(pkt):
        raise _Skip("radiotap")
    frame = pkt[rt_len:]
    if _radiotap_has_fcs(pkt[:rt_len]):
        if len(frame) < 4:
            raise _Skip("truncated-frame")
        frame = frame[:-4]

    if len(frame) < 24:
        raise _Skip("truncated-frame")
    fc, flags = frame[0], frame[1]
    ftype = (fc >> 2) & 0b11
    subtype = fc >> 4
    if ftype != 0 or subtype not in (SUBTYPE_ACTION, SUBTYPE_ACTION_NO_ACK):
        raise _Skip("not-action")
    hdr_len = 24 + (4 if flags & 0x80 else 0)  # Order ビット → HT Control
    body = frame[hdr_len:]
    if len(body) < 2:
        raise _Skip("truncated-frame")
    if body[0] != CATEGORY_VHT or body[1] != VHT_ACTION_COMPRESSED_BF:
        raise _Skip("not-vht-cbf")
    if len(body) < 5:
        raise _Skip("truncated-frame")

    mimo = int.from_bytes(body[2:5], "little")
    n_cols = (mimo & 0b111) + 1
    n_rows = ((mimo >> 3) & 0b111) + 1
    codebook = (mimo >> 10) & 1
    feedback_type = (mimo >> 11) & 1
    report_start = 5 + n_cols  # Nc 個の平均 SNR を飛ばす
    if len(body) < report_start:
        raise _Skip("truncated-frame")
    qc = QuantizationConfig.from_codebook(feedback_type, codebook)
    try:
        phi, psi, trailing = unpack_report(body[report_start:], n_rows, n_cols, qc)
    except ShapeError:
        raise _Skip("bad-dimensions")
    except TruncatedReportError:
        raise _Skip("truncated-report")
    return {
        "dest": bytes(frame[4:10]),
        "source": bytes(frame[10:16]),
        "n_rows": n_rows,
        "n_cols": n_cols,
        "config": qc,
        "phi": phi,
        "psi": psi,
        "trailing": trailing,
        "channel_width": (mimo >> 6) & 0b11,
        "grouping": (mimo >> 8) & 0b11,
    }


def parse_pcap_bytes(data: bytes, source: str = "<bytes>",
                     sources: set[bytes] | None = None,
                     dests: set[bytes] | None = None) -> CaptureStream:
    """pcap 全体のバイト列を解析する。パケット単位の異常はスキップとして数える。"""
    if len(data) < 24:
        raise CaptureFormatError(f"{source}: too short for a pcap global header")
    magic = bytes(data[:4])
    if magic not in PCAP_MAGICS:
        raise CaptureFormatError(f"{source}: not a classic pcap file (magic {magic.hex()})")
    endian, frac_div = PCAP_MAGICS[magic]
    linktype = struct.unpack_from(endian + "I", data, 20)[0] & 0x0FFFFFFF
    if linktype != config.DLT_IEEE802_11_RADIO:
        raise CaptureFormatError(f"{source}: link type {linktype} is not radiotap (127)")

    skips = Counter()
    accepted = []
    off = 24
    while off < len(data):
        if off + 16 > len(data):
            skips["truncated-packet"] += 1
            break
        ts_sec, ts_frac, incl_len, _ = struct.unpack_from(endian + "IIII", data, off)
        off += 16
        if incl_len > len(data) - off:
            skips["truncated-packet"] += 1
            break
        pkt = data[off:off + incl_len]
        off += incl_len
        try:
            info = _decode_packet(pkt)
        except _Skip as e:
            skips[e.reason] += 1
            continue
        except (struct.error, BfmError):
            skips["malformed"] += 1
            continue
        if sources is not None and info["source"] not in sources:
            skips["filtered"] += 1
            continue
        if dests is not None and info["dest"] not in dests:
            skips["filtered"] += 1
            continue
        info["timestamp"] = ts_sec + ts_frac / frac_div
        accepted.append(info)

    if not accepted:
        raise EmptyCaptureError(f"{source}: no decodable VHT compressed beamforming frames",
                                dict(skips))

    accepted.sort(key=lambda x: x["timestamp"])
    first = accepted[0]
    layout = (first["n_rows"], first["n_cols"], first["config"], first["phi"].shape[0])
    t0 = first["timestamp"]
    records = []
    trailing = 0
    for info in accepted:
        if (info["n_rows"], info["n_cols"], info["config"], info["phi"].shape[0]) != layout:
            skips["dimension-mismatch"] += 1
            continue
        records.append(BfmFrameRecord(
            timestamp=info["timestamp"] - t0,
            n_rows=info["n_rows"],
            n_cols=info["n_cols"],
            config=info["config"],
            phi_indices=info["phi"],
            psi_indices=info["psi"],
            source=info["source"],
            dest=info["dest"],
        ))
        trailing += info["trailing"]

    return CaptureStream(
        records=tuple(records),
        source=source,
        parsed=len(records),
        skip_reasons=dict(skips),
        trailing_bits=trailing,
    )


def read_pcap(path: str, sources: set[bytes] | None = None,
              dests: set[bytes] | None = None) -> CaptureStream:
    with open(path, "rb") as f:
        data = f.read()
    return parse_pcap_bytes(data, source=path, sources=sources, dests=dests)


# ═══════════════════════════════════════════
#  4. pcap 書き出し (合成器・ゴールデンデータ用)
# ═══════════════════════════════════════════
def _codebook_bits(qc: QuantizationConfig) -> tuple[int, int]:
    for (feedback_type, codebook), pair in config.VHT_CODEBOOK_BITS.items():
        if pair == (qc.b_psi, qc.b_phi):
            return feedback_type, codebook
    raise CaptureFormatError(
        f"(b_psi, b_phi)=({qc.b_psi}, {qc.b_phi}) has no VHT codebook encoding"
    )


def build_vht_frame(rec: BfmFrameRecord, seq: int = 0, channel_width: int = 2) -> bytes:
    """radiotap (8 バイト) + Action No Ack + VHT Compressed Beamforming"""
    if rec.n_rows > 8 or rec.n_cols > 8:
        raise CaptureFormatError("VHT MIMO Control carries at most 8 rows / columns")
    feedback_type, codebook = _codebook_bits(rec.config)
    report = pack_angle_bitstream(rec.phi_indices, rec.psi_indices, rec.n_rows, rec.n_cols, rec.config)
    nbits = bits_per_subcarrier(rec.n_rows, rec.n_cols, rec.config)
    if len(report) * 8 // nbits != rec.n_subcarriers:
        raise CaptureFormatError(
            f"{rec.n_subcarriers} subcarriers of {nbits} bits cannot be byte-padded unambiguously"
        )

    mimo = (
        (rec.n_cols - 1)
        | (rec.n_rows - 1) << 3
        | (channel_width & 0b11) << 6
        | codebook << 10
        | feedback_type << 11
        | 1 << 15  # first feedback segment
    )
    radiotap = struct.pack("<BBHI", 0, 0, 8, 0)
    header = (
        bytes([SUBTYPE_ACTION_NO_ACK << 4, 0])
        + b"\x00\x00"
        + rec.dest
        + rec.source
        + rec.dest
        + struct.pack("<H", (seq & 0x0FFF) << 4)
    )
    body = (
        bytes([CATEGORY_VHT, VHT_ACTION_COMPRESSED_BF])
        + mimo.to_bytes(3, "little")
        + bytes(rec.n_cols)  # 平均 SNR (未使用)
        + report
    )
    return radiotap + header + body


def write_pcap(stream: CaptureStream, path: str):
    """classic pcap (リトルエンディアン, usec) として書き出す"""
    out = [struct.pack("<IHHiIII", 0xA1B2C3D4, 2, 4, 0, 0, 65535, config.DLT_IEEE802_11_RADIO)]
    for seq, rec in enumerate(stream.records):
        pkt = build_vht_frame(rec, seq)
        usec_total = int(round(rec.timestamp * 1e6))
        ts_sec, ts_usec = divmod(usec_total, 1_000_000)
        out.append(struct.pack("<IIII", ts_sec, ts_usec, len(pkt), len(pkt)))
        out.append(pkt)
    with open(path, "wb") as f:
        f.write(b"".join(out))


# ═══════════════════════════════════════════
#  5. フィクスチャ (行区切り JSON)
# ═══════════════════════════════════════════
def _stream_layout(stream: CaptureStream) -> dict:
    if not stream.records:
        qc = QuantizationConfig.default()
        return {"n_rows": 0, "n_cols": 0, "b_phi": qc.b_phi, "b_psi": qc.b_psi, "n_subcarriers": 0}
    first = stream.records[0]
    for rec in stream.records[1:]:
        if rec.layout() != first.layout():
            raise ShapeError("fixture streams must share one frame layout")
    return {
        "n_rows": first.n_rows,
        "n_cols": first.n_cols,
        "b_phi": first.config.b_phi,
        "b_psi": first.config.b_psi,
        "n_subcarriers": first.n_subcarriers,
    }


def write_fixture(stream: CaptureStream, path: str):
    header = {"format": config.FIXTURE_FORMAT, **_stream_layout(stream)}
    if stream.duration is not None:
        header["duration"] = stream.duration
    lines = [json.dumps(header, separators=(",", ":"))]
    for rec in stream.records:
        row = {"t": rec.timestamp, "phi": rec.phi_indices.tolist(), "psi": rec.psi_indices.tolist()}
        if rec.source != ZERO_MAC or rec.dest != ZERO_MAC:
            row["src"] = mac_str(rec.source)
            row["dst"] = mac_str(rec.dest)
        lines.append(json.dumps(row, separators=(",", ":")))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def _header_int(header: dict, key: str, minimum: int = 0) -> int:
    v = header.get(key)
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise FixtureParseError(f"expected an integer >= {minimum}", line=1, field=key)
    return v


def _parse_fixture_record(row, lineno: int, layout: dict, qc: QuantizationConfig) -> BfmFrameRecord:
    if not isinstance(row, dict):
        raise FixtureParseError("record must be a JSON object", line=lineno)
    t = row.get("t")
    if not isinstance(t, (int, float)) or isinstance(t, bool) or not np.isfinite(t):
        raise FixtureParseError("missing or non-numeric timestamp", line=lineno, field="t")

    count = angle_counts(layout["n_rows"], layout["n_cols"])
    shape = (layout["n_subcarriers"], count)
    arrays = {}
    for key in ("phi", "psi"):
        raw = row.get(key)
        try:
            arr = np.array(raw, dtype=np.int64)
        except (TypeError, ValueError, OverflowError):
            raise FixtureParseError("indices must be integers", line=lineno, field=key)
        if arr.shape != shape or not all(
            isinstance(k, int) and not isinstance(k, bool) for sc in raw for k in sc
        ):
            raise FixtureParseError(f"expected {shape[0]} x {shape[1]} integer array",
                                    line=lineno, field=key)
        arrays[key] = arr
    try:
        validate_indices(arrays["phi"], np.zeros_like(arrays["psi"]), qc)
    except InvalidAngleError as e:
        raise FixtureParseError(str(e), line=lineno, field="phi")
    try:
        validate_indices(np.zeros_like(arrays["phi"]), arrays["psi"], qc)
    except InvalidAngleError as e:
        raise FixtureParseError(str(e), line=lineno, field="psi")

    try:
        src = parse_mac(row["src"]) if "src" in row else ZERO_MAC
        dst = parse_mac(row["dst"]) if "dst" in row else ZERO_MAC
    except (CaptureFormatError, AttributeError):
        raise FixtureParseError("invalid MAC address", line=lineno, field="src/dst")
    return BfmFrameRecord(float(t), layout["n_rows"], layout["n_cols"], qc,
                          arrays["phi"], arrays["psi"], src, dst)


def read_fixture(path: str) -> CaptureStream:
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise FixtureParseError("empty file (header line missing)", line=1)
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise FixtureParseError(f"header is not JSON: {e.msg}", line=1)
    if not isinstance(header, dict):
        raise FixtureParseError("header must be a JSON object", line=1)
    if header.get("format") != config.FIXTURE_FORMAT:
        raise FixtureParseError(f"expected format {config.FIXTURE_FORMAT!r}", line=1, field="format")

    body = [(n, line) for n, line in enumerate(lines[1:], start=2) if line.strip()]
    layout = {key: _header_int(header, key) for key in ("n_rows", "n_cols", "n_subcarriers")}
    try:
        qc = QuantizationConfig(b_phi=_header_int(header, "b_phi", 1), b_psi=_header_int(header, "b_psi", 1))
    except InvalidAngleError as e:
        raise FixtureParseError(str(e), line=1, field="b_phi/b_psi")
    if body:
        try:
            check_dims(layout["n_rows"], layout["n_cols"])
        except ShapeError as e:
            raise FixtureParseError(str(e), line=1, field="n_rows/n_cols")
        if layout["n_subcarriers"] < 1:
            raise FixtureParseError("expected an integer >= 1", line=1, field="n_subcarriers")

    duration = header.get("duration")
    if duration is not None and (
        isinstance(duration, bool) or not isinstance(duration, (int, float))
        or not np.isfinite(duration) or duration < 0
    ):
        raise FixtureParseError("duration must be a finite non-negative number", line=1, field="duration")

    records = []
    for lineno, line in body:
        try:
            row = json.loads(line)
        except json.JSONDecodeError as e:
            raise FixtureParseError(f"not JSON: {e.msg}", line=lineno)
        rec = _parse_fixture_record(row, lineno, layout, qc)
        if records and rec.timestamp < records[-1].timestamp:
            raise FixtureParseError("timestamps must be non-decreasing", line=lineno, field="t")
        records.append(rec)

    return CaptureStream(
        records=tuple(records),
        source=path,
        parsed=len(records),
        duration=float(duration) if duration is not None else None,
    )


def read_capture(path: str, fmt: str = "auto", sources: set[bytes] | None = None,
                 dests: set[bytes] | None = None) -> CaptureStream:
    """fmt: pcap | fixture | auto (拡張子で判定)"""
    if fmt == "auto":
        ext = os.path.splitext(path)[1].lower()
        fmt = "pcap" if ext in (".pcap", ".cap") else "fixture"
    if fmt == "pcap":
        return read_pcap(path, sources=sources, dests=dests)
    if fmt == "fixture":
        return read_fixture(path)
    raise CaptureFormatError(f"unknown capture format: {fmt}")


def write_capture(stream: CaptureStream, path: str, fmt: str = "fixture"):
    if fmt == "pcap":
        write_pcap(stream, path)
    elif fmt == "fixture":
        write_fixture(stream, path)
    else:
        raise CaptureFormatError(f"unknown capture format: {fmt}")
