//! HC-12 433 MHz downlink model: log-distance path loss, logistic packet
//! success on link margin, and bit-level corruption of failed packets.

use rand::Rng;
use thiserror::Error;

use crate::scalar::Real;

/// Baud rates the HC-12 can be configured for.
pub const SUPPORTED_BAUDS: [u32; 8] = [1200, 2400, 4800, 9600, 19_200, 38_400, 57_600, 115_200];
/// UART 8N1: start + 8 data + stop.
pub const BITS_PER_BYTE: u32 = 10;
pub const MIN_TX_POWER_MW: f64 = 0.8;
pub const MAX_TX_POWER_MW: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RadioError {
    #[error("distance {0} m is below the 1 m reference distance")]
    DistanceOutOfDomain(f64),
    #[error("baud rate {0} is not supported by the transceiver")]
    InvalidBaud(u32),
    #[error("invalid link config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkConfig<T: Real> {
    pub frequency_hz: T,
    pub tx_power_dbm: T,
    pub tx_gain_dbi: T,
    pub rx_gain_dbi: T,
    pub path_loss_exponent: T,
    /// Path loss at the 1 m reference distance.
    pub reference_loss_db: T,
    pub sensitivity_dbm: T,
    /// Logistic slope, per dB of margin.
    pub logistic_k: T,
    /// Margin at which half the packets get through.
    pub logistic_margin_db: T,
    pub baud: u32,
    /// Share of failed packets that arrive corrupted instead of vanishing.
    pub corrupt_fraction: T,
}

impl<T: Real> Default for LinkConfig<T> {
    fn default() -> Self {
        Self {
            frequency_hz: T::lit(433.4e6),
            tx_power_dbm: T::lit(20.0),
            tx_gain_dbi: T::zero(),
            rx_gain_dbi: T::zero(),
            path_loss_exponent: T::lit(3.5),
            reference_loss_db: T::lit(25.18),
            sensitivity_dbm: T::lit(-117.0),
            logistic_k: T::lit(0.8),
            logistic_margin_db: T::lit(3.0),
            baud: 9600,
            corrupt_fraction: T::lit(0.2),
        }
    }
}

pub fn mw_to_dbm<T: Real>(mw: T) -> T {
    T::lit(10.0) * mw.log10()
}

pub fn dbm_to_mw<T: Real>(dbm: T) -> T {
    T::lit(10.0).powf(dbm / T::lit(10.0))
}

/// Free-space loss at 1 m for the given carrier, from the Friis equation.
pub fn free_space_reference_loss_db<T: Real>(frequency_hz: T) -> T {
    T::lit(20.0) * frequency_hz.log10() - T::lit(147.55)
}

impl<T: Real> LinkConfig<T> {
    pub fn validate(&self) -> Result<(), RadioError> {
        if !SUPPORTED_BAUDS.contains(&self.baud) {
            return Err(RadioError::InvalidBaud(self.baud));
        }
        let tx_mw = dbm_to_mw(self.tx_power_dbm).as_f64();
        // allow the rounding in a dBm figure such as -0.97
        if !(MIN_TX_POWER_MW * 0.999..=MAX_TX_POWER_MW * 1.001).contains(&tx_mw) {
            return Err(RadioError::InvalidConfig(format!(
                "tx power {} dBm is outside 0.8..=100 mW",
                self.tx_power_dbm
            )));
        }
        if !(self.path_loss_exponent >= T::lit(2.0)) {
            return Err(RadioError::InvalidConfig("path loss exponent must be >= 2".into()));
        }
        if !(self.logistic_k > T::zero()) {
            return Err(RadioError::InvalidConfig("logistic_k must be > 0".into()));
        }
        if !(self.corrupt_fraction >= T::zero() && self.corrupt_fraction <= T::one()) {
            return Err(RadioError::InvalidConfig("corrupt_fraction must lie in [0, 1]".into()));
        }
        let finite = [
            self.frequency_hz,
            self.tx_gain_dbi,
            self.rx_gain_dbi,
            self.reference_loss_db,
            self.sensitivity_dbm,
            self.logistic_margin_db,
        ];
        if finite.iter().any(|v| !v.is_finite()) || !(self.frequency_hz > T::zero()) {
            return Err(RadioError::InvalidConfig("non-finite or non-positive link parameter".into()));
        }
        Ok(())
    }
}

fn check_distance<T: Real>(d_m: T) -> Result<(), RadioError> {
    if d_m >= T::one() {
        Ok(())
    } else {
        Err(RadioError::DistanceOutOfDomain(d_m.as_f64()))
    }
}

pub fn path_loss_db<T: Real>(d_m: T, cfg: &LinkConfig<T>) -> Result<T, RadioError> {
    check_distance(d_m)?;
    Ok(cfg.reference_loss_db + T::lit(10.0) * cfg.path_loss_exponent * d_m.log10())
}

pub fn received_power_dbm<T: Real>(d_m: T, cfg: &LinkConfig<T>) -> Result<T, RadioError> {
    Ok(cfg.tx_power_dbm + cfg.tx_gain_dbi + cfg.rx_gain_dbi - path_loss_db(d_m, cfg)?)
}

pub fn margin_db<T: Real>(d_m: T, cfg: &LinkConfig<T>) -> Result<T, RadioError> {
    Ok(received_power_dbm(d_m, cfg)? - cfg.sensitivity_dbm)
}

/// Logistic success curve on margin.
pub fn success_from_margin<T: Real>(margin_db: T, cfg: &LinkConfig<T>) -> T {
    T::one() / (T::one() + (-cfg.logistic_k * (margin_db - cfg.logistic_margin_db)).exp())
}

pub fn packet_success_prob<T: Real>(d_m: T, cfg: &LinkConfig<T>) -> Result<T, RadioError> {
    Ok(success_from_margin(margin_db(d_m, cfg)?, cfg))
}

/// Time on air for `frame_len` bytes at 8N1.
pub fn airtime_s(frame_len: usize, baud: u32) -> Result<f64, RadioError> {
    if !SUPPORTED_BAUDS.contains(&baud) {
        return Err(RadioError::InvalidBaud(baud));
    }
    Ok(frame_len as f64 * f64::from(BITS_PER_BYTE) / f64::from(baud))
}

/// Distance at which the received power equals `target_dbm`.
pub fn range_for_power_m<T: Real>(target_dbm: T, cfg: &LinkConfig<T>) -> T {
    let budget = cfg.tx_power_dbm + cfg.tx_gain_dbi + cfg.rx_gain_dbi - cfg.reference_loss_db - target_dbm;
    T::lit(10.0).powf(budget / (T::lit(10.0) * cfg.path_loss_exponent))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkReport<T: Real> {
    pub distance_m: T,
    pub path_loss_db: T,
    pub received_power_dbm: T,
    pub margin_db: T,
    pub packet_success_prob: T,
    pub airtime_s: f64,
}

pub fn link_report<T: Real>(d_m: T, frame_len: usize, cfg: &LinkConfig<T>) -> Result<LinkReport<T>, RadioError> {
    let path_loss = path_loss_db(d_m, cfg)?;
    let rx = cfg.tx_power_dbm + cfg.tx_gain_dbi + cfg.rx_gain_dbi - path_loss;
    let margin = rx - cfg.sensitivity_dbm;
    Ok(LinkReport {
        distance_m: d_m,
        path_loss_db: path_loss,
        received_power_dbm: rx,
        margin_db: margin,
        packet_success_prob: success_from_margin(margin, cfg),
        airtime_s: airtime_s(frame_len, cfg.baud)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TransmitOutcome {
    Delivered(Vec<u8>),
    Dropped,
    Corrupted(Vec<u8>),
}

impl TransmitOutcome {
    /// Bytes that reach the receiver, if any.
    pub fn bytes(&self) -> Option<&[u8]> {
        match self {
            TransmitOutcome::Delivered(b) | TransmitOutcome::Corrupted(b) => Some(b),
            TransmitOutcome::Dropped => None,
        }
    }
}

/// Sends one frame across the link using a pre-computed success probability.
///
/// Failed packets are corrupted with probability `corrupt_fraction` (1 to 3
/// distinct bits flipped), otherwise dropped.
pub fn transmit_with_prob<R: Rng + ?Sized>(frame: &[u8], p_success: f64, corrupt_fraction: f64, rng: &mut R) -> TransmitOutcome {
    if rng.random::<f64>() < p_success {
        return TransmitOutcome::Delivered(frame.to_vec());
    }
    if frame.is_empty() || rng.random::<f64>() >= corrupt_fraction {
        return TransmitOutcome::Dropped;
    }
    let total_bits = frame.len() * 8;
    let flips = rng.random_range(1..=3usize).min(total_bits);
    let positions = rand::seq::index::sample(rng, total_bits, flips);
    let mut out = frame.to_vec();
    for bit in positions.iter() {
        out[bit / 8] ^= 1 << (bit % 8);
    }
    TransmitOutcome::Corrupted(out)
}

pub fn transmit<T: Real, R: Rng + ?Sized>(
    frame: &[u8],
    d_m: T,
    cfg: &LinkConfig<T>,
    rng: &mut R,
) -> Result<TransmitOutcome, RadioError> {
    let p = packet_success_prob(d_m, cfg)?.as_f64();
    Ok(transmit_with_prob(frame, p, cfg.corrupt_fraction.as_f64(), rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> LinkConfig<f64> {
        LinkConfig::default()
    }

    #[test]
    fn path_loss_examples() {
        assert_abs_diff_eq!(path_loss_db(1.0, &cfg()).unwrap(), 25.18, epsilon = 1e-12);
        // 25.18 + 35*log10(800), evaluated independently
        assert_abs_diff_eq!(path_loss_db(800.0, &cfg()).unwrap(), 126.788_149_54, epsilon = 1e-6);
        let free = LinkConfig {
            path_loss_exponent: 2.0,
            ..cfg()
        };
        assert_abs_diff_eq!(path_loss_db(1000.0, &free).unwrap(), 85.18, epsilon = 1e-9);
        assert_abs_diff_eq!(free_space_reference_loss_db(433.4e6), 25.188, epsilon = 1e-3);
        assert_eq!(path_loss_db(0.5, &cfg()), Err(RadioError::DistanceOutOfDomain(0.5)));
    }

    #[test]
    fn received_power_and_margin() {
        assert_abs_diff_eq!(received_power_dbm(1.0, &cfg()).unwrap(), -5.18, epsilon = 1e-12);
        let m = margin_db(800.0, &cfg()).unwrap();
        assert_abs_diff_eq!(m, 10.211_850_46, epsilon = 1e-6);
        assert!(m >= 10.0);
    }

    #[test]
    fn low_power_range_factor() {
        let low = LinkConfig {
            tx_power_dbm: mw_to_dbm(0.8),
            ..cfg()
        };
        assert_abs_diff_eq!(low.tx_power_dbm, -0.969_100_1, epsilon = 1e-6);
        let ratio = range_for_power_m(-117.0, &cfg()) / range_for_power_m(-117.0, &low);
        let expected = 10f64.powf((20.0 - mw_to_dbm(0.8)) / 35.0);
        assert_abs_diff_eq!(ratio, expected, epsilon = 1e-9);
        assert!(low.validate().is_ok());
    }

    #[test]
    fn success_probability_examples() {
        let c = cfg();
        assert_eq!(success_from_margin(c.logistic_margin_db, &c), 0.5);
        assert_abs_diff_eq!(packet_success_prob(800.0, &c).unwrap(), 0.996_888_33, epsilon = 1e-7);
        assert!(margin_db(2000.0, &c).unwrap() < 0.0);
        assert!(packet_success_prob(2000.0, &c).unwrap() < 0.1);
    }

    #[test]
    fn airtime_examples() {
        assert_abs_diff_eq!(airtime_s(52, 9600).unwrap(), 0.054_166_67, epsilon = 1e-8);
        assert_abs_diff_eq!(airtime_s(52, 115_200).unwrap(), 0.004_513_9, epsilon = 1e-7);
        assert_eq!(airtime_s(0, 1200).unwrap(), 0.0);
        assert_eq!(airtime_s(52, 9601), Err(RadioError::InvalidBaud(9601)));
    }

    #[test]
    fn validation() {
        assert!(cfg().validate().is_ok());
        assert!(LinkConfig { baud: 300, ..cfg() }.validate().is_err());
        assert!(LinkConfig { tx_power_dbm: 21.0, ..cfg() }.validate().is_err());
        assert!(LinkConfig { path_loss_exponent: 1.5, ..cfg() }.validate().is_err());
    }

    #[test]
    fn one_metre_always_delivers() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let frame = [0xAAu8; 52];
        let c = LinkConfig {
            logistic_k: 5.0,
            ..cfg()
        };
        for _ in 0..1000 {
            assert_eq!(transmit(&frame, 1.0, &c, &mut rng).unwrap(), TransmitOutcome::Delivered(frame.to_vec()));
        }
    }

    #[test]
    fn corruption_flips_one_to_three_bits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let frame: Vec<u8> = (0..52u8).collect();
        let mut seen = 0;
        for _ in 0..2000 {
            if let TransmitOutcome::Corrupted(out) = transmit_with_prob(&frame, 0.0, 1.0, &mut rng) {
                let distance: u32 = frame.iter().zip(&out).map(|(a, b)| (a ^ b).count_ones()).sum();
                assert!((1..=3).contains(&distance));
                seen += 1;
            }
        }
        assert_eq!(seen, 2000);
    }

    #[test]
    fn f32_agrees() {
        let c32 = LinkConfig::<f32>::default();
        assert!((packet_success_prob(800.0f32, &c32).unwrap() - 0.996_888).abs() < 1e-4);
    }
}
