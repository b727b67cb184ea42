//! NMEA-0183 GGA emission and parsing.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NmeaError {
    #[error("checksum mismatch: sentence says {stated:02X}, body folds to {computed:02X}")]
    ChecksumMismatch { stated: u8, computed: u8 },
    #[error("malformed field: {0}")]
    MalformedField(&'static str),
    /// A well-formed sentence of another type. Callers skip these.
    #[error("not a GGA sentence: {0}")]
    NotGga(String),
}

impl NmeaError {
    pub fn is_skippable(&self) -> bool {
        matches!(self, NmeaError::NotGga(_))
    }
}

/// Position fix extracted from a GGA sentence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgaFix {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub fix_quality: u8,
    pub altitude_m: f64,
}

/// XOR of every byte between `$` and `*`.
pub fn checksum(body: &[u8]) -> u8 {
    body.iter().fold(0u8, |acc, b| acc ^ b)
}

const MINUTE_SCALE: u64 = 100_000;

/// `ddmm.mmmmm` / `dddmm.mmmmm` with rounding carried into the degrees.
fn format_angle(value_deg: f64, degree_digits: usize) -> String {
    let total = (value_deg.abs() * 60.0 * MINUTE_SCALE as f64).round() as u64;
    let per_degree = 60 * MINUTE_SCALE;
    let degrees = total / per_degree;
    let rem = total % per_degree;
    format!(
        "{degrees:0width$}{:02}.{:05}",
        rem / MINUTE_SCALE,
        rem % MINUTE_SCALE,
        width = degree_digits
    )
}

fn format_utc(utc_s: f64) -> String {
    let centis = (utc_s.rem_euclid(86_400.0) * 100.0).round() as u64 % 8_640_000;
    let secs = centis / 100;
    format!(
        "{:02}{:02}{:02}.{:02}",
        secs / 3600,
        (secs / 60) % 60,
        secs % 60,
        centis % 100
    )
}

/// Builds a CRLF-terminated `$GPGGA` sentence for a 3D fix.
pub fn emit_gga(lat_deg: f64, lon_deg: f64, altitude_m: f64, utc_s: f64) -> String {
    let body = format!(
        "GPGGA,{},{},{},{},{},1,08,0.9,{:.1},M,0.0,M,,",
        format_utc(utc_s),
        format_angle(lat_deg, 2),
        if lat_deg < 0.0 { 'S' } else { 'N' },
        format_angle(lon_deg, 3),
        if lon_deg < 0.0 { 'W' } else { 'E' },
        altitude_m,
    );
    format!("${body}*{:02X}\r\n", checksum(body.as_bytes()))
}

fn hex_digit(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

fn parse_angle(field: &str, hemisphere: &str, degree_digits: usize, positive: char, negative: char) -> Option<f64> {
    let dot = field.find('.').unwrap_or(field.len());
    if dot != degree_digits + 2 || !field.bytes().all(|b| b.is_ascii_digit() || b == b'.') {
        return None;
    }
    let degrees: f64 = field[..degree_digits].parse().ok()?;
    let minutes: f64 = field[degree_digits..].parse().ok()?;
    if minutes >= 60.0 {
        return None;
    }
    let value = degrees + minutes / 60.0;
    match hemisphere.chars().next() {
        Some(c) if c == positive && hemisphere.len() == 1 => Some(value),
        Some(c) if c == negative && hemisphere.len() == 1 => Some(-value),
        _ => None,
    }
}

/// Validates the checksum, then extracts position, fix quality and altitude.
pub fn parse_gga(sentence: &str) -> Result<GgaFix, NmeaError> {
    let line = sentence
        .strip_suffix("\r\n")
        .or_else(|| sentence.strip_suffix('\n'))
        .unwrap_or(sentence);
    let rest = line.strip_prefix('$').ok_or(NmeaError::MalformedField("missing '$'"))?;
    let star = rest.find('*').ok_or(NmeaError::MalformedField("missing '*'"))?;
    let (body, tail) = (&rest[..star], &rest.as_bytes()[star + 1..]);
    let stated = match tail {
        [hi, lo] => match (hex_digit(*hi), hex_digit(*lo)) {
            (Some(hi), Some(lo)) => (hi << 4) | lo,
            _ => return Err(NmeaError::MalformedField("checksum")),
        },
        _ => return Err(NmeaError::MalformedField("checksum")),
    };
    let computed = checksum(body.as_bytes());
    if stated != computed {
        return Err(NmeaError::ChecksumMismatch { stated, computed });
    }

    let fields: Vec<&str> = body.split(',').collect();
    let kind = fields[0];
    if kind.len() != 5 || !kind.is_ascii() {
        return Err(NmeaError::MalformedField("sentence type"));
    }
    if &kind[2..] != "GGA" {
        return Err(NmeaError::NotGga(kind.to_owned()));
    }
    if fields.len() != 15 {
        return Err(NmeaError::MalformedField("token count"));
    }
    let lat_deg = parse_angle(fields[2], fields[3], 2, 'N', 'S').ok_or(NmeaError::MalformedField("latitude"))?;
    let lon_deg = parse_angle(fields[4], fields[5], 3, 'E', 'W').ok_or(NmeaError::MalformedField("longitude"))?;
    let fix_quality: u8 = fields[6].parse().map_err(|_| NmeaError::MalformedField("fix quality"))?;
    let altitude_m: f64 = fields[9].parse().map_err(|_| NmeaError::MalformedField("altitude"))?;
    if !altitude_m.is_finite() {
        return Err(NmeaError::MalformedField("altitude"));
    }
    Ok(GgaFix {
        lat_deg,
        lon_deg,
        fix_quality,
        altitude_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn xor_fold_oracle(sentence: &str) -> u8 {
        // independent: walk chars, toggle on '$'/'*'
        let mut inside = false;
        let mut acc = 0u8;
        for c in sentence.chars() {
            match c {
                '$' => inside = true,
                '*' => break,
                _ if inside => acc ^= c as u8,
                _ => {}
            }
        }
        acc
    }

    #[test]
    fn reference_position_fields() {
        let s = emit_gga(20.278863, 72.878662, 60.0, 36_900.0);
        let fields: Vec<&str> = s.split(',').collect();
        assert!(s.starts_with("$GPGGA,"));
        assert!(s.ends_with("\r\n"));
        assert_eq!(fields[1], "101500.00");
        assert_eq!((fields[2], fields[3]), ("2016.73178", "N"));
        assert_eq!((fields[4], fields[5]), ("07252.71972", "E"));
    }

    #[test]
    fn checksum_matches_oracle() {
        let s = emit_gga(20.278863, 72.878662, 60.0, 36_900.0);
        let stated = u8::from_str_radix(&s[s.find('*').unwrap() + 1..][..2], 16).unwrap();
        assert_eq!(stated, xor_fold_oracle(&s));
        // classic reference sentence
        let reference = "$GPGGA,123519,4807.038,N,01131.000,E,1,08,0.9,545.4,M,46.9,M,,*47";
        assert_eq!(xor_fold_oracle(reference), 0x47);
        assert_eq!(checksum(&reference.as_bytes()[1..reference.len() - 3]), 0x47);
    }

    #[test]
    fn round_trip_position() {
        for &(lat, lon) in &[(20.278863, 72.878662), (-33.865143, 151.2099), (0.0, -0.000001), (89.9999999, -179.9999999)] {
            let fix = parse_gga(&emit_gga(lat, lon, 12.3, 100.0)).unwrap();
            assert_abs_diff_eq!(fix.lat_deg, lat, epsilon = 1e-6);
            assert_abs_diff_eq!(fix.lon_deg, lon, epsilon = 1e-6);
            assert_eq!(fix.fix_quality, 1);
            assert_abs_diff_eq!(fix.altitude_m, 12.3, epsilon = 1e-9);
        }
    }

    #[test]
    fn minute_rounding_carries() {
        let s = emit_gga(10.9999999999, 0.0, 0.0, 0.0);
        assert!(s.contains(",1100.00000,N,"), "{s}");
    }

    #[test]
    fn flipped_character_detected() {
        let s = emit_gga(20.278863, 72.878662, 60.0, 36_900.0);
        let mut bytes = s.into_bytes();
        bytes[10] = if bytes[10] == b'1' { b'2' } else { b'1' };
        let mutated = String::from_utf8(bytes).unwrap();
        assert!(matches!(parse_gga(&mutated), Err(NmeaError::ChecksumMismatch { .. })));
    }

    #[test]
    fn other_sentences_are_skippable() {
        let body = "GPRMC,123519,A,4807.038,N,01131.000,E,022.4,084.4,230394,003.1,W";
        let s = format!("${body}*{:02X}\r\n", checksum(body.as_bytes()));
        let err = parse_gga(&s).unwrap_err();
        assert!(err.is_skippable());
        assert_eq!(err, NmeaError::NotGga("GPRMC".into()));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_gga("").is_err());
        assert!(parse_gga("hello").is_err());
        assert!(parse_gga("$GPGGA,1,2*ZZ").is_err());
        let body = "GPGGA,1,2,3";
        let s = format!("${body}*{:02X}", checksum(body.as_bytes()));
        assert_eq!(parse_gga(&s), Err(NmeaError::MalformedField("token count")));
        let body = "GPGGA,101500.00,2016.7x178,N,07252.71972,E,1,08,0.9,60.0,M,0.0,M,,";
        let s = format!("${body}*{:02X}", checksum(body.as_bytes()));
        assert_eq!(parse_gga(&s), Err(NmeaError::MalformedField("latitude")));
    }

    #[test]
    fn lowercase_checksum_rejected() {
        let s = emit_gga(1.0, 2.0, 3.0, 4.0);
        let star = s.find('*').unwrap();
        let lowered = format!("{}{}", &s[..star], s[star..].to_ascii_lowercase());
        if lowered != s {
            assert!(parse_gga(&lowered).is_err());
        }
    }
}
