//! Downlink wire protocol.
//!
//! Every frame is exactly 52 bytes, little-endian:
//!
//! | bytes    | field        | type | unit            |
//! |----------|--------------|------|-----------------|
//! | 0..2     | sync         | -    | `C5 A7`         |
//! | 2        | version      | u8   | `01`            |
//! | 3        | phase        | u8   | 0..=5           |
//! | 4..6     | seq          | u16  |                 |
//! | 6..10    | t_ms         | u32  | ms since boot   |
//! | 10..12   | temperature  | i16  | 0.01 °C         |
//! | 12..16   | pressure     | u32  | Pa              |
//! | 16..20   | altitude     | i32  | cm              |
//! | 20..22   | uv_adc       | u16  | counts          |
//! | 22       | uv_index     | u8   |                 |
//! | 23       | reserved     | u8   | `00`            |
//! | 24..26   | air_quality  | u16  | ppm             |
//! | 26..32   | accel x,y,z  | i16  | milli-g         |
//! | 32..38   | pitch,roll,yaw | i16 | 0.01°          |
//! | 38..42   | lat          | i32  | 1e-7°           |
//! | 42..46   | lon          | i32  | 1e-7°           |
//! | 46..48   | bus voltage  | u16  | mV              |
//! | 48..50   | bus current  | u16  | mA              |
//! | 50..52   | crc          | u16  | CRC-16/CCITT-FALSE over 2..50 |

use serde::Serialize;
use thiserror::Error;

use crate::atmos::STANDARD_GRAVITY;
use crate::obc::{FlightPhase, TelemetryRecord};

pub const FRAME_LEN: usize = 52;
pub const SYNC: [u8; 2] = [0xC5, 0xA7];
pub const PROTOCOL_VERSION: u8 = 0x01;
/// Byte range covered by the CRC.
pub const CRC_RANGE: core::ops::Range<usize> = 2..50;

const CRC_POLY: u16 = 0x1021;
const CRC_INIT: u16 = 0xFFFF;

const fn crc_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = (i as u16) << 8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ CRC_POLY } else { crc << 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

static CRC_TABLE: [u16; 256] = crc_table();

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor.
pub fn crc16(bytes: &[u8]) -> u16 {
    bytes.iter().fold(CRC_INIT, |crc, &b| {
        (crc << 8) ^ CRC_TABLE[usize::from((crc >> 8) as u8 ^ b)]
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodeError {
    #[error("field {field} = {value} does not fit the wire format")]
    RangeOverflow { field: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("frame must be {FRAME_LEN} bytes, got {0}")]
    BadLength(usize),
    #[error("bad sync word {0:02X} {1:02X}")]
    BadSync(u8, u8),
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),
    #[error("reserved byte is {0:#04X}, expected 0")]
    BadReserved(u8),
    #[error("phase code {0} out of range")]
    BadPhase(u8),
    #[error("crc mismatch: frame carries {stated:#06X}, computed {computed:#06X}")]
    CrcMismatch { stated: u16, computed: u16 },
}

/// A validated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedFrame {
    pub seq: u16,
    pub record: TelemetryRecord,
}

fn scaled(field: &'static str, value: f64, scale: f64, min: f64, max: f64) -> Result<f64, EncodeError> {
    let v = (value * scale).round();
    if v.is_nan() || v < min || v > max {
        return Err(EncodeError::RangeOverflow { field, value });
    }
    Ok(v)
}

fn to_i16(field: &'static str, value: f64, scale: f64) -> Result<i16, EncodeError> {
    scaled(field, value, scale, f64::from(i16::MIN), f64::from(i16::MAX)).map(|v| v as i16)
}

fn to_u16(field: &'static str, value: f64, scale: f64) -> Result<u16, EncodeError> {
    scaled(field, value, scale, 0.0, f64::from(u16::MAX)).map(|v| v as u16)
}

fn to_i32(field: &'static str, value: f64, scale: f64) -> Result<i32, EncodeError> {
    scaled(field, value, scale, f64::from(i32::MIN), f64::from(i32::MAX)).map(|v| v as i32)
}

fn to_u32(field: &'static str, value: f64, scale: f64) -> Result<u32, EncodeError> {
    scaled(field, value, scale, 0.0, f64::from(u32::MAX)).map(|v| v as u32)
}

const MILLI_G_PER_MPS2: f64 = 1000.0 / STANDARD_GRAVITY;

/// Packs a record into a frame. The record's own phase is used.
pub fn encode_frame(record: &TelemetryRecord, seq: u16) -> Result<[u8; FRAME_LEN], EncodeError> {
    if record.lat_deg.is_nan() || record.lat_deg.abs() > 90.0 {
        return Err(EncodeError::RangeOverflow { field: "lat_deg", value: record.lat_deg });
    }
    if record.lon_deg.is_nan() || record.lon_deg.abs() > 180.0 {
        return Err(EncodeError::RangeOverflow { field: "lon_deg", value: record.lon_deg });
    }
    let mut f = [0u8; FRAME_LEN];
    f[0..2].copy_from_slice(&SYNC);
    f[2] = PROTOCOL_VERSION;
    f[3] = record.phase as u8;
    f[4..6].copy_from_slice(&seq.to_le_bytes());
    f[6..10].copy_from_slice(&record.t_ms.to_le_bytes());
    f[10..12].copy_from_slice(&to_i16("temperature_c", record.temperature_c, 100.0)?.to_le_bytes());
    f[12..16].copy_from_slice(&to_u32("pressure_pa", record.pressure_pa, 1.0)?.to_le_bytes());
    f[16..20].copy_from_slice(&to_i32("altitude_m", record.altitude_m, 100.0)?.to_le_bytes());
    f[20..22].copy_from_slice(&record.uv_adc.to_le_bytes());
    f[22] = record.uv_index;
    f[23] = 0;
    f[24..26].copy_from_slice(&to_u16("air_quality_ppm", record.air_quality_ppm, 1.0)?.to_le_bytes());
    const ACCEL: [&str; 3] = ["accel_x_mps2", "accel_y_mps2", "accel_z_mps2"];
    for (axis, (name, a)) in ACCEL.iter().zip(record.accel_mps2).enumerate() {
        let at = 26 + 2 * axis;
        f[at..at + 2].copy_from_slice(&to_i16(name, a, MILLI_G_PER_MPS2)?.to_le_bytes());
    }
    f[32..34].copy_from_slice(&to_i16("pitch_deg", record.pitch_deg, 100.0)?.to_le_bytes());
    f[34..36].copy_from_slice(&to_i16("roll_deg", record.roll_deg, 100.0)?.to_le_bytes());
    f[36..38].copy_from_slice(&to_i16("yaw_deg", record.yaw_deg, 100.0)?.to_le_bytes());
    f[38..42].copy_from_slice(&to_i32("lat_deg", record.lat_deg, 1e7)?.to_le_bytes());
    f[42..46].copy_from_slice(&to_i32("lon_deg", record.lon_deg, 1e7)?.to_le_bytes());
    f[46..48].copy_from_slice(&to_u16("bus_voltage_v", record.bus_voltage_v, 1000.0)?.to_le_bytes());
    f[48..50].copy_from_slice(&to_u16("bus_current_ma", record.bus_current_ma, 1.0)?.to_le_bytes());
    let crc = crc16(&f[CRC_RANGE]);
    f[50..52].copy_from_slice(&crc.to_le_bytes());
    Ok(f)
}

fn u16_at(f: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([f[at], f[at + 1]])
}

fn i16_at(f: &[u8], at: usize) -> i16 {
    i16::from_le_bytes([f[at], f[at + 1]])
}

fn u32_at(f: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([f[at], f[at + 1], f[at + 2], f[at + 3]])
}

fn i32_at(f: &[u8], at: usize) -> i32 {
    i32::from_le_bytes([f[at], f[at + 1], f[at + 2], f[at + 3]])
}

/// Validates header fields and CRC, then unpacks the record.
pub fn decode_frame(bytes: &[u8]) -> Result<DecodedFrame, DecodeError> {
    if bytes.len() != FRAME_LEN {
        return Err(DecodeError::BadLength(bytes.len()));
    }
    let f = bytes;
    if f[0..2] != SYNC {
        return Err(DecodeError::BadSync(f[0], f[1]));
    }
    if f[2] != PROTOCOL_VERSION {
        return Err(DecodeError::BadVersion(f[2]));
    }
    if f[23] != 0 {
        return Err(DecodeError::BadReserved(f[23]));
    }
    let phase = FlightPhase::from_u8(f[3]).ok_or(DecodeError::BadPhase(f[3]))?;
    let stated = u16_at(f, 50);
    let computed = crc16(&f[CRC_RANGE]);
    if stated != computed {
        return Err(DecodeError::CrcMismatch { stated, computed });
    }
    let accel = |axis: usize| f64::from(i16_at(f, 26 + 2 * axis)) / MILLI_G_PER_MPS2;
    let record = TelemetryRecord {
        t_ms: u32_at(f, 6),
        phase,
        temperature_c: f64::from(i16_at(f, 10)) / 100.0,
        pressure_pa: f64::from(u32_at(f, 12)),
        altitude_m: f64::from(i32_at(f, 16)) / 100.0,
        uv_adc: u16_at(f, 20),
        uv_index: f[22],
        air_quality_ppm: f64::from(u16_at(f, 24)),
        accel_mps2: [accel(0), accel(1), accel(2)],
        pitch_deg: f64::from(i16_at(f, 32)) / 100.0,
        roll_deg: f64::from(i16_at(f, 34)) / 100.0,
        yaw_deg: f64::from(i16_at(f, 36)) / 100.0,
        lat_deg: f64::from(i32_at(f, 38)) / 1e7,
        lon_deg: f64::from(i32_at(f, 42)) / 1e7,
        bus_voltage_v: f64::from(u16_at(f, 46)) / 1000.0,
        bus_current_ma: f64::from(u16_at(f, 48)),
    };
    Ok(DecodedFrame {
        seq: u16_at(f, 4),
        record,
    })
}

impl TelemetryRecord {
    /// Saturates every field into its wire range; NaN becomes 0.
    pub fn clamped_to_wire(&self) -> Self {
        fn clamp(v: f64, scale: f64, min: f64, max: f64) -> f64 {
            if v.is_nan() {
                0.0
            } else {
                v.clamp(min / scale, max / scale)
            }
        }
        let i16r = |v: f64, s: f64| clamp(v, s, f64::from(i16::MIN), f64::from(i16::MAX));
        let u16r = |v: f64, s: f64| clamp(v, s, 0.0, f64::from(u16::MAX));
        let i32r = |v: f64, s: f64| clamp(v, s, f64::from(i32::MIN), f64::from(i32::MAX));
        Self {
            t_ms: self.t_ms,
            phase: self.phase,
            temperature_c: i16r(self.temperature_c, 100.0),
            pressure_pa: clamp(self.pressure_pa, 1.0, 0.0, f64::from(u32::MAX)),
            altitude_m: i32r(self.altitude_m, 100.0),
            uv_adc: self.uv_adc,
            uv_index: self.uv_index,
            air_quality_ppm: u16r(self.air_quality_ppm, 1.0),
            accel_mps2: self.accel_mps2.map(|a| i16r(a, MILLI_G_PER_MPS2)),
            pitch_deg: i16r(self.pitch_deg, 100.0),
            roll_deg: i16r(self.roll_deg, 100.0),
            yaw_deg: i16r(self.yaw_deg, 100.0),
            lat_deg: clamp(self.lat_deg, 1.0, -90.0, 90.0),
            lon_deg: clamp(self.lon_deg, 1.0, -180.0, 180.0),
            bus_voltage_v: u16r(self.bus_voltage_v, 1000.0),
            bus_current_ma: u16r(self.bus_current_ma, 1.0),
        }
    }
}

/// Counters kept by a stream decoder. All are monotone over a stream's life.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct DecodeStats {
    pub frames_ok: u64,
    pub crc_failures: u64,
    /// Candidates with a valid sync word but a bad version, reserved byte or phase.
    pub header_failures: u64,
    pub resyncs: u64,
    pub bytes_skipped: u64,
    pub seq_gaps: u64,
    pub frames_lost_estimate: u64,
}

/// Incremental decoder over an arbitrarily chunked byte stream.
///
/// Output and counters depend only on the concatenated bytes, never on how
/// they were split into `push` calls.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StreamDecoder {
    buf: Vec<u8>,
    stats: DecodeStats,
    last_seq: Option<u16>,
    lost_sync: bool,
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Resumes counting from existing stats.
    pub fn with_stats(stats: DecodeStats) -> Self {
        Self {
            stats,
            ..Self::default()
        }
    }

    pub fn stats(&self) -> &DecodeStats {
        &self.stats
    }

    pub fn last_seq(&self) -> Option<u16> {
        self.last_seq
    }

    /// Bytes held back waiting for the rest of a frame.
    pub fn pending(&self) -> usize {
        self.buf.len()
    }

    fn skip(&mut self, n: usize) {
        if n == 0 {
            return;
        }
        if !self.lost_sync {
            self.stats.resyncs += 1;
            self.lost_sync = true;
        }
        self.stats.bytes_skipped += n as u64;
        self.buf.drain(..n);
    }

    fn account_seq(&mut self, seq: u16) {
        if let Some(last) = self.last_seq {
            let gap = seq.wrapping_sub(last).wrapping_sub(1);
            // a repeated seq is a duplicate, not a 65535-frame gap
            if seq != last && gap > 0 {
                self.stats.seq_gaps += 1;
                self.stats.frames_lost_estimate += u64::from(gap);
            }
        }
        self.last_seq = Some(seq);
    }

    /// Feeds bytes and returns every frame completed by them.
    pub fn push(&mut self, bytes: &[u8]) -> Vec<DecodedFrame> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        loop {
            let candidate = self.buf.windows(2).position(|w| w == SYNC);
            let Some(start) = candidate else {
                // keep a trailing first sync byte, it may pair with the next chunk
                let keep = usize::from(self.buf.last() == Some(&SYNC[0]));
                let n = self.buf.len() - keep;
                self.skip(n);
                break;
            };
            self.skip(start);
            if self.buf.len() < FRAME_LEN {
                break;
            }
            match decode_frame(&self.buf[..FRAME_LEN]) {
                Ok(frame) => {
                    self.buf.drain(..FRAME_LEN);
                    self.stats.frames_ok += 1;
                    self.lost_sync = false;
                    self.account_seq(frame.seq);
                    out.push(frame);
                }
                Err(err) => {
                    match err {
                        DecodeError::CrcMismatch { .. } => self.stats.crc_failures += 1,
                        _ => self.stats.header_failures += 1,
                    }
                    self.skip(1);
                }
            }
        }
        out
    }

    /// Ends the stream: any held-back partial frame is counted as skipped.
    pub fn finish(&mut self) {
        let n = self.buf.len();
        if n > 0 {
            self.stats.bytes_skipped += n as u64;
            self.buf.clear();
        }
    }
}

/// Decodes a complete stream, accumulating into `stats`.
pub fn stream_decode(bytes: &[u8], stats: &mut DecodeStats) -> Vec<DecodedFrame> {
    let mut decoder = StreamDecoder::with_stats(*stats);
    let frames = decoder.push(bytes);
    decoder.finish();
    *stats = *decoder.stats();
    frames
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Bit-serial shift register, independent of the table.
    fn crc16_bitwise(bytes: &[u8]) -> u16 {
        let mut crc: u16 = 0xFFFF;
        for &byte in bytes {
            for i in (0..8).rev() {
                let bit = (byte >> i) & 1 == 1;
                let top = crc & 0x8000 != 0;
                crc <<= 1;
                if bit ^ top {
                    crc ^= 0x1021;
                }
            }
        }
        crc
    }

    fn sample_record() -> TelemetryRecord {
        TelemetryRecord {
            t_ms: 12_000,
            phase: FlightPhase::Ascent,
            temperature_c: 32.66,
            pressure_pa: 99_937.0,
            altitude_m: 116.2,
            uv_adc: 335,
            uv_index: 2,
            air_quality_ppm: 83.0,
            accel_mps2: [10.37, 0.01, 9.8],
            pitch_deg: -17.89,
            roll_deg: 0.04,
            yaw_deg: 10.25,
            lat_deg: 20.278863,
            lon_deg: 72.878662,
            bus_voltage_v: 4.99,
            bus_current_ma: 127.0,
        }
    }

    #[test]
    fn crc_check_value() {
        assert_eq!(crc16_bitwise(b"123456789"), 0x29B1);
        assert_eq!(crc16(b"123456789"), 0x29B1);
        assert_eq!(crc16(&[]), 0xFFFF);
    }

    #[test]
    fn crc_table_matches_shift_register() {
        let data: Vec<u8> = (0..=255u8).chain((0..=255u8).rev()).collect();
        for len in 0..data.len() {
            assert_eq!(crc16(&data[..len]), crc16_bitwise(&data[..len]));
        }
    }

    #[test]
    fn reference_fields_encode_to_expected_bytes() {
        let frame = encode_frame(&sample_record(), 7).unwrap();
        assert_eq!(&frame[10..12], &[0xC2, 0x0C]);
        assert_eq!(&frame[38..42], &202_788_630i32.to_le_bytes());
        assert_eq!(&frame[0..4], &[0xC5, 0xA7, 0x01, FlightPhase::Ascent as u8]);
        assert_eq!(&frame[4..6], &[7, 0]);
        assert_eq!(frame[23], 0);
        assert_eq!(u16::from_le_bytes([frame[50], frame[51]]), crc16_bitwise(&frame[2..50]));
    }

    #[test]
    fn zero_record_round_trip() {
        let rec = TelemetryRecord::default();
        let decoded = decode_frame(&encode_frame(&rec, 0).unwrap()).unwrap();
        assert_eq!(decoded, DecodedFrame { seq: 0, record: rec });
    }

    #[test]
    fn decode_error_kinds() {
        let good = encode_frame(&sample_record(), 1).unwrap();
        let mut f = good;
        f[50] = 0;
        f[51] = 0;
        assert!(matches!(decode_frame(&f), Err(DecodeError::CrcMismatch { .. })));
        let mut f = good;
        f[0] = 0;
        f[1] = 0;
        assert_eq!(decode_frame(&f), Err(DecodeError::BadSync(0, 0)));
        let mut f = good;
        f[2] = 2;
        assert_eq!(decode_frame(&f), Err(DecodeError::BadVersion(2)));
        let mut f = good;
        f[3] = 9;
        assert_eq!(decode_frame(&f), Err(DecodeError::BadPhase(9)));
        let mut f = good;
        f[23] = 1;
        assert_eq!(decode_frame(&f), Err(DecodeError::BadReserved(1)));
        assert_eq!(decode_frame(&good[..51]), Err(DecodeError::BadLength(51)));
    }

    #[test]
    fn range_overflow_names_field() {
        let rec = TelemetryRecord {
            temperature_c: 400.0,
            ..sample_record()
        };
        assert_eq!(
            encode_frame(&rec, 0),
            Err(EncodeError::RangeOverflow { field: "temperature_c", value: 400.0 })
        );
        let rec = TelemetryRecord {
            lat_deg: 91.0,
            ..sample_record()
        };
        assert!(matches!(encode_frame(&rec, 0), Err(EncodeError::RangeOverflow { field: "lat_deg", .. })));
        let rec = TelemetryRecord {
            bus_current_ma: -1.0,
            ..sample_record()
        };
        assert!(matches!(encode_frame(&rec, 0), Err(EncodeError::RangeOverflow { field: "bus_current_ma", .. })));
    }

    #[test]
    fn range_limits_are_inclusive() {
        let rec = TelemetryRecord {
            temperature_c: -327.68,
            lat_deg: -90.0,
            lon_deg: 180.0,
            ..sample_record()
        };
        assert!(encode_frame(&rec, 0).is_ok());
        let rec = TelemetryRecord {
            temperature_c: 327.67,
            ..sample_record()
        };
        assert!(encode_frame(&rec, 0).is_ok());
    }

    #[test]
    fn clamped_record_always_encodes() {
        let wild = TelemetryRecord {
            temperature_c: 1e9,
            pressure_pa: -5.0,
            altitude_m: f64::NAN,
            accel_mps2: [1e6, -1e6, f64::INFINITY],
            lat_deg: 200.0,
            lon_deg: -400.0,
            bus_voltage_v: 100.0,
            ..sample_record()
        };
        assert!(encode_frame(&wild.clamped_to_wire(), 0).is_ok());
    }

    #[test]
    fn stream_back_to_back() {
        let bytes: Vec<u8> = (0..5u16).flat_map(|s| encode_frame(&sample_record(), s).unwrap()).collect();
        let mut stats = DecodeStats::default();
        let frames = stream_decode(&bytes, &mut stats);
        assert_eq!(frames.len(), 5);
        assert_eq!(stats.resyncs, 0);
        assert_eq!(stats.bytes_skipped, 0);
    }

    #[test]
    fn stream_after_leading_garbage() {
        let mut bytes: Vec<u8> = (0..100u8).map(|i| i.wrapping_mul(37).wrapping_add(11)).collect();
        bytes.extend(encode_frame(&sample_record(), 3).unwrap());
        let mut stats = DecodeStats::default();
        let frames = stream_decode(&bytes, &mut stats);
        assert_eq!(frames.len(), 1);
        assert!(stats.bytes_skipped >= 100);
    }

    #[test]
    fn stream_gap_arithmetic() {
        let bytes: Vec<u8> = [0u16, 1, 2, 5, 6]
            .into_iter()
            .flat_map(|s| encode_frame(&sample_record(), s).unwrap())
            .collect();
        let mut stats = DecodeStats::default();
        stream_decode(&bytes, &mut stats);
        assert_eq!(stats.seq_gaps, 1);
        assert_eq!(stats.frames_lost_estimate, 2);
    }

    #[test]
    fn stream_wraparound_is_gapless() {
        let bytes: Vec<u8> = [65534u16, 65535, 0, 1]
            .into_iter()
            .flat_map(|s| encode_frame(&sample_record(), s).unwrap())
            .collect();
        let mut stats = DecodeStats::default();
        assert_eq!(stream_decode(&bytes, &mut stats).len(), 4);
        assert_eq!(stats.seq_gaps, 0);
    }

    #[test]
    fn corrupted_frame_is_skipped_and_next_recovered() {
        let mut bad = encode_frame(&sample_record(), 0).unwrap();
        bad[30] ^= 0x10;
        let mut bytes = bad.to_vec();
        bytes.extend(encode_frame(&sample_record(), 1).unwrap());
        let mut stats = DecodeStats::default();
        let frames = stream_decode(&bytes, &mut stats);
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].seq, 1);
        assert_eq!(stats.crc_failures, 1);
        assert_eq!(stats.resyncs, 1);
        assert_eq!(stats.bytes_skipped, FRAME_LEN as u64);
    }

    #[test]
    fn truncated_tail_counted_on_finish() {
        let frame = encode_frame(&sample_record(), 0).unwrap();
        let mut dec = StreamDecoder::new();
        assert!(dec.push(&frame[..30]).is_empty());
        assert_eq!(dec.pending(), 30);
        dec.finish();
        assert_eq!(dec.stats().bytes_skipped, 30);
    }
}
