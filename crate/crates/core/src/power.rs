//! Electrical power budget, battery runtime and live bus readings.

use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::obc::BusReading;
use crate::scalar::Real;

/// Nominal regulated bus the controller measures.
pub const DEFAULT_BUS_VOLTAGE_V: f64 = 5.0;
/// Half-width of the uniform jitter on the measured bus voltage.
pub const DEFAULT_BUS_JITTER_V: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PowerError {
    #[error("load current must be positive, got {0} mA")]
    NonPositiveLoad(f64),
    #[error("component {name}: {reason}")]
    InvalidComponent { name: String, reason: &'static str },
    #[error("battery: {0}")]
    InvalidBattery(&'static str),
    #[error("budget needs at least one component")]
    EmptyBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerComponent<T: Real> {
    pub name: String,
    pub function: String,
    pub voltage_v: T,
    /// Worst-case draw used for budgeting.
    pub current_ma: T,
    /// Draw in normal operation, used for live telemetry.
    pub typical_current_ma: T,
    pub duty: T,
    /// Draw while the radio is keyed, for transceivers.
    pub transmit_current_ma: Option<T>,
}

impl<T: Real> PowerComponent<T> {
    pub fn new(name: &str, function: &str, voltage_v: f64, current_ma: f64, typical_current_ma: f64) -> Self {
        Self {
            name: name.to_owned(),
            function: function.to_owned(),
            voltage_v: T::lit(voltage_v),
            current_ma: T::lit(current_ma),
            typical_current_ma: T::lit(typical_current_ma),
            duty: T::one(),
            transmit_current_ma: None,
        }
    }

    pub fn validate(&self) -> Result<(), PowerError> {
        let bad = |reason| PowerError::InvalidComponent {
            name: self.name.clone(),
            reason,
        };
        if !(self.voltage_v > T::zero()) {
            return Err(bad("voltage must be positive"));
        }
        if !(self.typical_current_ma >= T::zero()) {
            return Err(bad("typical current must be non-negative"));
        }
        if !(self.current_ma >= self.typical_current_ma) {
            return Err(bad("max current below typical current"));
        }
        if !(self.duty >= T::zero() && self.duty <= T::one()) {
            return Err(bad("duty must lie in [0, 1]"));
        }
        if let Some(tx) = self.transmit_current_ma {
            if !(tx >= T::zero() && tx <= self.current_ma) {
                return Err(bad("transmit current must lie in [0, max current]"));
            }
        }
        Ok(())
    }

    /// Row power at the budgeted current.
    pub fn power_mw(&self) -> T {
        component_power_mw(self.voltage_v, self.current_ma)
    }
}

/// The flight configuration: rated maxima for budgeting, and typical draws
/// that sum to the 127 mA seen at the controller input.
pub fn default_components<T: Real>() -> Vec<PowerComponent<T>> {
    let mut radio = PowerComponent::new("HC-12", "Communication", 5.0, 150.0, 19.0);
    radio.transmit_current_ma = Some(T::lit(30.0));
    vec![
        PowerComponent::new("GY-87", "Sensor", 3.3, 4.034, 4.0),
        PowerComponent::new("Neo-6M", "Sensor", 3.3, 67.0, 45.0),
        PowerComponent::new("MQ-135", "Sensor", 5.0, 20.0, 20.0),
        PowerComponent::new("GUVA-S12SD", "Sensor", 5.0, 20.0, 1.0),
        radio,
        PowerComponent::new("Microcontroller", "ESP32", 5.0, 250.0, 38.0),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Battery<T: Real> {
    pub nominal_voltage_v: T,
    pub capacity_mah: T,
    pub usable_fraction: T,
}

impl<T: Real> Default for Battery<T> {
    fn default() -> Self {
        Self {
            nominal_voltage_v: T::lit(3.7),
            capacity_mah: T::lit(2200.0),
            usable_fraction: T::one(),
        }
    }
}

impl<T: Real> Battery<T> {
    pub fn validate(&self) -> Result<(), PowerError> {
        if !(self.capacity_mah > T::zero()) {
            return Err(PowerError::InvalidBattery("capacity must be positive"));
        }
        if !(self.nominal_voltage_v > T::zero()) {
            return Err(PowerError::InvalidBattery("voltage must be positive"));
        }
        if !(self.usable_fraction >= T::zero() && self.usable_fraction <= T::one()) {
            return Err(PowerError::InvalidBattery("usable fraction must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// P = V·I, in mW for volts and mA.
pub fn component_power_mw<T: Real>(voltage_v: T, current_ma: T) -> T {
    voltage_v * current_ma
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetRow<T: Real> {
    pub name: String,
    pub function: String,
    pub voltage_v: T,
    pub current_ma: T,
    pub power_mw: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerBudget<T: Real> {
    pub rows: Vec<BudgetRow<T>>,
    pub total_current_ma: T,
    pub total_power_mw: T,
}

pub fn total_budget<T: Real>(components: &[PowerComponent<T>]) -> Result<PowerBudget<T>, PowerError> {
    if components.is_empty() {
        return Err(PowerError::EmptyBudget);
    }
    let rows: Vec<BudgetRow<T>> = components
        .iter()
        .map(|c| BudgetRow {
            name: c.name.clone(),
            function: c.function.clone(),
            voltage_v: c.voltage_v,
            current_ma: c.current_ma,
            power_mw: c.power_mw(),
        })
        .collect();
    let total_current_ma = rows.iter().fold(T::zero(), |acc, r| acc + r.current_ma);
    let total_power_mw = rows.iter().fold(T::zero(), |acc, r| acc + r.power_mw);
    Ok(PowerBudget {
        rows,
        total_current_ma,
        total_power_mw,
    })
}

/// Hours of operation at a constant load.
pub fn runtime_hours<T: Real>(battery: &Battery<T>, load_current_ma: T) -> Result<T, PowerError> {
    if !(load_current_ma > T::zero()) {
        return Err(PowerError::NonPositiveLoad(load_current_ma.as_f64()));
    }
    Ok(battery.capacity_mah * battery.usable_fraction / load_current_ma)
}

/// Sum of live draws: typical current scaled by duty, with transceivers
/// switching to their transmit current while keyed.
pub fn bus_current_ma<T: Real>(components: &[PowerComponent<T>], radio_active: bool) -> T {
    components.iter().fold(T::zero(), |acc, c| {
        let draw = match (radio_active, c.transmit_current_ma) {
            (true, Some(tx)) => tx,
            _ => c.typical_current_ma,
        };
        acc + draw * c.duty
    })
}

/// What the controller's ADC reports for its supply. Always consumes one
/// draw from `rng`, even when `jitter_v` is zero.
pub fn bus_telemetry<T: Real, R: Rng + ?Sized>(
    components: &[PowerComponent<T>],
    radio_active: bool,
    bus_voltage_v: f64,
    jitter_v: f64,
    rng: &mut R,
) -> BusReading {
    let u: f64 = rng.random_range(-1.0..=1.0);
    BusReading {
        voltage_v: bus_voltage_v + jitter_v * u,
        current_ma: bus_current_ma(components, radio_active).as_f64(),
    }
}

fn trim_float(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_owned()
    } else {
        s
    }
}

/// Aligned text table; the total current is shown at integer precision.
pub fn render_text<T: Real>(budget: &PowerBudget<T>, battery: &Battery<T>) -> String {
    let headers = ["Component", "Function", "Voltage", "Current", "Power"];
    let mut cells: Vec<[String; 5]> = budget
        .rows
        .iter()
        .map(|r| {
            [
                r.name.clone(),
                r.function.clone(),
                format!("{} V", trim_float(r.voltage_v.as_f64(), 3)),
                format!("{} mA", trim_float(r.current_ma.as_f64(), 3)),
                format!("{} mW", trim_float(r.power_mw.as_f64(), 3)),
            ]
        })
        .collect();
    cells.push([
        "Total".into(),
        String::new(),
        String::new(),
        format!("{:.0} mA", budget.total_current_ma.as_f64()),
        format!("{} mW", trim_float(budget.total_power_mw.as_f64(), 3)),
    ]);
    let mut widths = headers.map(str::len);
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, row: &[String]| {
        let mut text = String::new();
        for (i, cell) in row.iter().enumerate() {
            let pad = widths[i] - cell.chars().count();
            if i < 2 {
                text.push_str(cell);
                text.push_str(&" ".repeat(pad));
            } else {
                text.push_str(&" ".repeat(pad));
                text.push_str(cell);
            }
            if i + 1 < row.len() {
                text.push_str("  ");
            }
        }
        out.push_str(text.trim_end());
        out.push('\n');
    };
    line(&mut out, &headers.map(String::from));
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(&mut out, &rule);
    for row in &cells {
        line(&mut out, row);
    }
    out.push('\n');
    match runtime_hours(battery, budget.total_current_ma) {
        Ok(h) => {
            let _ = writeln!(
                out,
                "Battery: {} V, {} mAh, usable {}; runtime at {} mA: {:.3} h",
                trim_float(battery.nominal_voltage_v.as_f64(), 3),
                trim_float(battery.capacity_mah.as_f64(), 3),
                trim_float(battery.usable_fraction.as_f64(), 3),
                trim_float(budget.total_current_ma.as_f64(), 3),
                h.as_f64()
            );
        }
        Err(e) => {
            let _ = writeln!(out, "Battery: {e}");
        }
    }
    out
}

/// CSV form of the budget with a trailing total row.
pub fn render_csv<T: Real>(budget: &PowerBudget<T>) -> String {
    let mut out = String::from("component,function,voltage_v,current_ma,power_mw\n");
    for r in &budget.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.name,
            r.function,
            r.voltage_v.as_f64(),
            r.current_ma.as_f64(),
            r.power_mw.as_f64()
        );
    }
    let _ = writeln!(
        out,
        "Total,,,{},{}",
        budget.total_current_ma.as_f64(),
        budget.total_power_mw.as_f64()
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn power_rows() {
        assert_abs_diff_eq!(component_power_mw(3.3, 67.0), 221.1, epsilon = 1e-9);
        assert_eq!(component_power_mw(5.0, 150.0), 750.0);
        assert_eq!(component_power_mw(12.0, 0.0), 0.0);
    }

    #[test]
    fn default_budget_totals() {
        let b = total_budget(&default_components::<f64>()).unwrap();
        assert_abs_diff_eq!(b.total_current_ma, 511.034, epsilon = 1e-9);
        assert_abs_diff_eq!(b.rows[0].power_mw, 13.3122, epsilon = 1e-9);
        assert!((b.rows[0].power_mw - 13.315).abs() <= 0.01);
        let expected = [13.3122, 221.1, 100.0, 100.0, 750.0, 1250.0];
        for (row, want) in b.rows.iter().zip(expected) {
            assert_abs_diff_eq!(row.power_mw, want, epsilon = 1e-9);
            assert_eq!(row.power_mw, row.voltage_v * row.current_ma);
        }
        let sum: f64 = b.rows.iter().map(|r| r.current_ma).sum();
        assert_eq!(b.total_current_ma, sum);
    }

    #[test]
    fn single_component_budget() {
        let c = vec![PowerComponent::<f64>::new("x", "y", 5.0, 10.0, 1.0)];
        let b = total_budget(&c).unwrap();
        assert_eq!(b.total_current_ma, 10.0);
        assert_eq!(b.total_power_mw, 50.0);
        assert_eq!(total_budget::<f64>(&[]), Err(PowerError::EmptyBudget));
    }

    #[test]
    fn runtime_examples() {
        let bat = Battery::<f64>::default();
        assert_abs_diff_eq!(runtime_hours(&bat, 511.034).unwrap(), 4.304_997, epsilon = 1e-6);
        assert_eq!(runtime_hours(&bat, 2200.0).unwrap(), 1.0);
        let half = Battery {
            usable_fraction: 0.5,
            ..bat.clone()
        };
        assert_eq!(runtime_hours(&half, 2200.0).unwrap(), 0.5);
        assert!(runtime_hours(&bat, 0.0).is_err());
    }

    #[test]
    fn bus_current_profiles() {
        let comps = default_components::<f64>();
        assert_eq!(bus_current_ma(&comps, false), 127.0);
        assert_eq!(bus_current_ma(&comps, true), 138.0);
        assert_eq!(bus_current_ma::<f64>(&[], false), 0.0);
        let maxed: Vec<_> = comps
            .iter()
            .map(|c| PowerComponent {
                typical_current_ma: c.current_ma,
                transmit_current_ma: None,
                ..c.clone()
            })
            .collect();
        assert_abs_diff_eq!(bus_current_ma(&maxed, false), 511.034, epsilon = 1e-9);
    }

    #[test]
    fn bus_voltage_jitter_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let comps = default_components::<f64>();
        for _ in 0..500 {
            let r = bus_telemetry(&comps, false, 5.0, 0.01, &mut rng);
            assert!((r.voltage_v - 5.0).abs() <= 0.01);
        }
    }

    #[test]
    fn text_shows_integer_total() {
        let b = total_budget(&default_components::<f64>()).unwrap();
        let text = render_text(&b, &Battery::default());
        assert!(text.contains("511 mA"), "{text}");
        assert!(text.contains("221.1 mW"));
        assert!(text.contains("4.305 h"));
        let csv = render_csv(&b);
        assert_eq!(csv.lines().count(), 8);
    }

    #[test]
    fn validation() {
        for c in default_components::<f64>() {
            c.validate().unwrap();
        }
        let bad = PowerComponent::<f64>::new("x", "y", 5.0, 1.0, 2.0);
        assert!(bad.validate().is_err());
        assert!(Battery::<f64> {
            capacity_mah: 0.0,
            ..Battery::default()
        }
        .validate()
        .is_err());
    }
}
