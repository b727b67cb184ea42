//! Ground station: stream ingestion, latest-value snapshot, CSV log and
//! mission summary.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::obc::{FlightPhase, TelemetryRecord};
use crate::telemetry::{DecodeStats, DecodedFrame, StreamDecoder};

pub const CSV_COLUMNS: [&str; 19] = [
    "t_ms",
    "seq",
    "phase",
    "temperature_c",
    "pressure_pa",
    "altitude_m",
    "uv_adc",
    "uv_index",
    "air_quality_ppm",
    "accel_x_mps2",
    "accel_y_mps2",
    "accel_z_mps2",
    "pitch_deg",
    "roll_deg",
    "yaw_deg",
    "lat_deg",
    "lon_deg",
    "bus_voltage_v",
    "bus_current_ma",
];

fn columns() -> &'static [&'static str] {
    &CSV_COLUMNS
}

#[derive(Debug, Error)]
pub enum GroundError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{}: line {line}: {reason}", path.display())]
    BadRow { path: PathBuf, line: u64, reason: String },
}

/// Everything the ground station knows about one stream.
#[derive(Debug, Clone, Default)]
pub struct GroundState {
    decoder: StreamDecoder,
    records: Vec<DecodedFrame>,
}

impl GroundState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feeds a chunk of received bytes; returns the frames it completed.
    pub fn ingest(&mut self, bytes: &[u8]) -> Vec<DecodedFrame> {
        let frames = self.decoder.push(bytes);
        self.records.extend_from_slice(&frames);
        frames
    }

    /// Marks the end of the stream.
    pub fn finish(&mut self) {
        self.decoder.finish();
    }

    pub fn latest(&self) -> Option<&DecodedFrame> {
        self.records.last()
    }

    pub fn records(&self) -> &[DecodedFrame] {
        &self.records
    }

    pub fn stats(&self) -> &DecodeStats {
        self.decoder.stats()
    }

    pub fn last_seq(&self) -> Option<u16> {
        self.decoder.last_seq()
    }

    /// JSON document mirroring the live display panel.
    ///
    /// Pressure is reported in millibars; `latest` is null before the first frame.
    pub fn snapshot(&self) -> serde_json::Value {
        let latest = self.latest().map(|f| {
            let r = &f.record;
            json!({
                "seq": f.seq,
                "phase": r.phase.as_str(),
                "t_ms": r.t_ms,
                "air_quality_ppm": r.air_quality_ppm,
                "uv_index": r.uv_index,
                "uv_sensor_value": r.uv_adc,
                "altitude_m": r.altitude_m,
                "temperature_c": r.temperature_c,
                "pressure_mb": r.pressure_pa / 100.0,
                "pitch_deg": r.pitch_deg,
                "roll_deg": r.roll_deg,
                "yaw_deg": r.yaw_deg,
                "accel_x_mps2": r.accel_mps2[0],
                "accel_y_mps2": r.accel_mps2[1],
                "accel_z_mps2": r.accel_mps2[2],
                "lat_deg": r.lat_deg,
                "lon_deg": r.lon_deg,
                "input_current_ma": r.bus_current_ma,
                "input_voltage_v": r.bus_voltage_v,
            })
        });
        json!({
            "latest": latest,
            "records": self.records.len(),
            "stats": self.stats(),
        })
    }
}

/// Pretty-printed snapshot with a trailing newline.
pub fn snapshot_text(state: &GroundState) -> String {
    let mut s = serde_json::to_string_pretty(&state.snapshot()).expect("json values always serialize");
    s.push('\n');
    s
}

fn row_of(frame: &DecodedFrame) -> Vec<String> {
    let r = &frame.record;
    let mut row = vec![
        r.t_ms.to_string(),
        frame.seq.to_string(),
        r.phase.as_str().to_owned(),
        r.temperature_c.to_string(),
        r.pressure_pa.to_string(),
        r.altitude_m.to_string(),
        r.uv_adc.to_string(),
        r.uv_index.to_string(),
        r.air_quality_ppm.to_string(),
    ];
    row.extend(r.accel_mps2.iter().map(f64::to_string));
    row.extend(
        [
            r.pitch_deg,
            r.roll_deg,
            r.yaw_deg,
            r.lat_deg,
            r.lon_deg,
            r.bus_voltage_v,
            r.bus_current_ma,
        ]
        .iter()
        .map(f64::to_string),
    );
    row
}

/// Writes the CSV log to any sink.
pub fn write_csv_to<W: Write>(records: &[DecodedFrame], sink: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(sink);
    w.write_record(columns())?;
    for frame in records {
        w.write_record(row_of(frame))?;
    }
    w.flush()?;
    Ok(())
}

pub fn csv_string(records: &[DecodedFrame]) -> String {
    let mut buf = Vec::new();
    write_csv_to(records, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is ascii")
}

pub fn write_csv(records: &[DecodedFrame], path: &Path) -> Result<(), GroundError> {
    let file = File::create(path).map_err(|source| GroundError::Io {
        path: path.to_owned(),
        source,
    })?;
    write_csv_to(records, file).map_err(|source| GroundError::Csv {
        path: path.to_owned(),
        source,
    })
}

fn parse_row(row: &csv::StringRecord) -> Result<DecodedFrame, String> {
    if row.len() != columns().len() {
        return Err(format!("expected {} columns, found {}", columns().len(), row.len()));
    }
    fn field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize) -> Result<T, String> {
        row[i]
            .parse()
            .map_err(|_| format!("column {}: cannot parse {:?}", CSV_COLUMNS[i], &row[i]))
    }
    let phase = FlightPhase::parse(&row[2]).ok_or_else(|| format!("unknown phase {:?}", &row[2]))?;
    Ok(DecodedFrame {
        seq: field(row, 1)?,
        record: TelemetryRecord {
            t_ms: field(row, 0)?,
            phase,
            temperature_c: field(row, 3)?,
            pressure_pa: field(row, 4)?,
            altitude_m: field(row, 5)?,
            uv_adc: field(row, 6)?,
            uv_index: field(row, 7)?,
            air_quality_ppm: field(row, 8)?,
            accel_mps2: [field(row, 9)?, field(row, 10)?, field(row, 11)?],
            pitch_deg: field(row, 12)?,
            roll_deg: field(row, 13)?,
            yaw_deg: field(row, 14)?,
            lat_deg: field(row, 15)?,
            lon_deg: field(row, 16)?,
            bus_voltage_v: field(row, 17)?,
            bus_current_ma: field(row, 18)?,
        },
    })
}

pub fn read_csv_from<R: Read>(source: R, path: &Path) -> Result<Vec<DecodedFrame>, GroundError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
    let headers = reader.headers().map_err(|source| GroundError::Csv {
        path: path.to_owned(),
        source,
    })?;
    if headers.iter().ne(columns().iter().copied()) {
        return Err(GroundError::BadRow {
            path: path.to_owned(),
            line: 1,
            reason: "unexpected header".into(),
        });
    }
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|source| GroundError::Csv {
            path: path.to_owned(),
            source,
        })?;
        let line = row.position().map_or(0, |p| p.line());
        out.push(parse_row(&row).map_err(|reason| GroundError::BadRow {
            path: path.to_owned(),
            line,
            reason,
        })?);
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<Vec<DecodedFrame>, GroundError> {
    let file = File::open(path).map_err(|source| GroundError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_csv_from(file, path)
}

/// Running min/max/mean of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    #[serde(skip)]
    count: u64,
}

impl Default for FieldStats {
    fn default() -> Self {
        Self {
            min: f64::NAN,
            max: f64::NAN,
            mean: f64::NAN,
            count: 0,
        }
    }
}

impl FieldStats {
    fn push(&mut self, v: f64) {
        self.count += 1;
        if self.count == 1 {
            self.min = v;
            self.max = v;
            self.mean = v;
        } else {
            self.min = self.min.min(v);
            self.max = self.max.max(v);
            self.mean += (v - self.mean) / self.count as f64;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionSummary {
    pub frames_received: u64,
    /// Frames the vehicle sent, when the caller knows it.
    pub frames_transmitted: Option<u64>,
    pub frames_lost_estimate: u64,
    /// Fraction of frames that never arrived, in [0, 1].
    pub loss_fraction: f64,
    pub duration_s: f64,
    pub max_altitude_m: f64,
    pub temperature_c: FieldStats,
    pub pressure_pa: FieldStats,
    pub altitude_m: FieldStats,
    pub uv_index: FieldStats,
    pub air_quality_ppm: FieldStats,
    pub bus_voltage_v: FieldStats,
    pub bus_current_ma: FieldStats,
    pub decode: DecodeStats,
}

/// Aggregates a mission log.
///
/// Loss is `lost / (received + lost)` from sequence gaps. When the number of
/// transmitted frames is supplied, loss becomes `1 - received / transmitted`,
/// which also counts frames missing after the last one received.
pub fn summarize(records: &[DecodedFrame], stats: &DecodeStats, transmitted: Option<u64>) -> MissionSummary {
    let mut temperature_c = FieldStats::default();
    let mut pressure_pa = FieldStats::default();
    let mut altitude_m = FieldStats::default();
    let mut uv_index = FieldStats::default();
    let mut air_quality_ppm = FieldStats::default();
    let mut bus_voltage_v = FieldStats::default();
    let mut bus_current_ma = FieldStats::default();
    for f in records {
        let r = &f.record;
        temperature_c.push(r.temperature_c);
        pressure_pa.push(r.pressure_pa);
        altitude_m.push(r.altitude_m);
        uv_index.push(f64::from(r.uv_index));
        air_quality_ppm.push(r.air_quality_ppm);
        bus_voltage_v.push(r.bus_voltage_v);
        bus_current_ma.push(r.bus_current_ma);
    }
    let received = records.len() as u64;
    let lost = stats.frames_lost_estimate;
    let loss_fraction = match transmitted {
        Some(0) => 0.0,
        Some(sent) => (sent.saturating_sub(received)) as f64 / sent as f64,
        None if received + lost == 0 => 0.0,
        None => lost as f64 / (received + lost) as f64,
    };
    let duration_s = match (records.first(), records.last()) {
        (Some(a), Some(b)) => f64::from(b.record.t_ms.saturating_sub(a.record.t_ms)) / 1000.0,
        _ => 0.0,
    };
    MissionSummary {
        frames_received: received,
        frames_transmitted: transmitted,
        frames_lost_estimate: lost,
        loss_fraction,
        duration_s,
        max_altitude_m: altitude_m.max,
        temperature_c,
        pressure_pa,
        altitude_m,
        uv_index,
        air_quality_ppm,
        bus_voltage_v,
        bus_current_ma,
        decode: *stats,
    }
}

impl MissionSummary {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "frames received:      {}", self.frames_received);
        if let Some(sent) = self.frames_transmitted {
            let _ = writeln!(out, "frames transmitted:   {sent}");
        }
        let _ = writeln!(out, "frames lost (gaps):   {}", self.frames_lost_estimate);
        let _ = writeln!(out, "loss:                 {:.2} %", self.loss_fraction * 100.0);
        let _ = writeln!(out, "crc failures:         {}", self.decode.crc_failures);
        let _ = writeln!(out, "header failures:      {}", self.decode.header_failures);
        let _ = writeln!(out, "resyncs:              {}", self.decode.resyncs);
        let _ = writeln!(out, "bytes skipped:        {}", self.decode.bytes_skipped);
        let _ = writeln!(out, "duration:             {:.3} s", self.duration_s);
        let _ = writeln!(out, "max altitude:         {:.2} m", self.max_altitude_m);
        let _ = writeln!(out, "{:<22}{:>12}{:>12}{:>12}", "field", "min", "max", "mean");
        let fields = [
            ("temperature_c", &self.temperature_c),
            ("pressure_pa", &self.pressure_pa),
            ("altitude_m", &self.altitude_m),
            ("uv_index", &self.uv_index),
            ("air_quality_ppm", &self.air_quality_ppm),
            ("bus_voltage_v", &self.bus_voltage_v),
            ("bus_current_ma", &self.bus_current_ma),
        ];
        for (name, s) in fields {
            let _ = writeln!(out, "{name:<22}{:>12.3}{:>12.3}{:>12.3}", s.min, s.max, s.mean);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::encode_frame;

    fn record(alt: f64) -> TelemetryRecord {
        TelemetryRecord {
            t_ms: 2000,
            phase: FlightPhase::Ready,
            temperature_c: 31.43,
            pressure_pa: 101_359.0,
            altitude_m: alt,
            uv_adc: 447,
            uv_index: 3,
            air_quality_ppm: 94.0,
            accel_mps2: [8.63, 0.01, 21.06],
            pitch_deg: -17.89,
            roll_deg: 0.04,
            yaw_deg: 10.25,
            lat_deg: 20.278863,
            lon_deg: 72.878662,
            bus_voltage_v: 4.99,
            bus_current_ma: 127.0,
        }
    }

    fn frame_bytes(seq: u16) -> Vec<u8> {
        encode_frame(&record(49.2), seq).unwrap().to_vec()
    }

    #[test]
    fn one_frame_updates_latest() {
        let mut g = GroundState::new();
        assert_eq!(g.ingest(&frame_bytes(4)).len(), 1);
        assert_eq!(g.latest().unwrap().seq, 4);
        assert_eq!(g.stats().frames_ok, 1);
    }

    #[test]
    fn single_byte_chunks_match_whole() {
        let bytes = frame_bytes(9);
        let mut whole = GroundState::new();
        whole.ingest(&bytes);
        let mut split = GroundState::new();
        for b in &bytes {
            split.ingest(std::slice::from_ref(b));
        }
        assert_eq!(whole.records(), split.records());
        assert_eq!(whole.stats(), split.stats());
    }

    #[test]
    fn wraparound_has_no_gap() {
        let mut g = GroundState::new();
        g.ingest(&frame_bytes(65535));
        g.ingest(&frame_bytes(0));
        assert_eq!(g.stats().seq_gaps, 0);
        assert_eq!(g.last_seq(), Some(0));
    }

    #[test]
    fn snapshot_fields() {
        let mut g = GroundState::new();
        let empty = g.snapshot();
        assert!(empty["latest"].is_null());
        assert_eq!(empty["stats"]["frames_ok"], 0);
        g.ingest(&frame_bytes(1));
        let snap = g.snapshot();
        assert_eq!(snap["latest"]["pressure_mb"], 1013.59);
        assert_eq!(snap["latest"]["uv_index"], 3);
        assert_eq!(snap["latest"]["uv_sensor_value"], 447);
        assert_eq!(snap["latest"]["seq"], 1);
        assert_eq!(snap["latest"]["phase"], "READY");
    }

    #[test]
    fn csv_round_trip() {
        let mut g = GroundState::new();
        for s in 0..3 {
            g.ingest(&frame_bytes(s));
        }
        let text = csv_string(g.records());
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().next().unwrap(), columns().join(","));
        let back = read_csv_from(text.as_bytes(), Path::new("mem")).unwrap();
        assert_eq!(back, g.records());
    }

    #[test]
    fn empty_csv_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        write_csv(&[], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(read_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn missing_directory_names_path() {
        let err = write_csv(&[], Path::new("/nonexistent/dir/log.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/log.csv"));
    }

    #[test]
    fn constant_records_summary() {
        let frames: Vec<DecodedFrame> = (0..5)
            .map(|s| DecodedFrame {
                seq: s,
                record: record(10.0),
            })
            .collect();
        let s = summarize(&frames, &DecodeStats::default(), None);
        assert_eq!(s.altitude_m.min, 10.0);
        assert_eq!(s.altitude_m.max, 10.0);
        assert_eq!(s.altitude_m.mean, 10.0);
        assert_eq!(s.loss_fraction, 0.0);
    }

    #[test]
    fn loss_ratio_from_gaps() {
        let frames: Vec<DecodedFrame> = (0..100)
            .map(|s| DecodedFrame {
                seq: s,
                record: record(1.0),
            })
            .collect();
        let stats = DecodeStats {
            frames_ok: 100,
            frames_lost_estimate: 3,
            ..DecodeStats::default()
        };
        let s = summarize(&frames, &stats, None);
        assert!((s.loss_fraction - 3.0 / 103.0).abs() < 1e-12);
        assert!((s.loss_fraction - 0.029).abs() < 0.001);
        let s = summarize(&frames[..0], &DecodeStats::default(), Some(118));
        assert_eq!(s.loss_fraction, 1.0);
    }
}
