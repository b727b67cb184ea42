//! End-to-end mission: flight truth, sensors, OBC, radio and ground station.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::atmos::environment_at;
use crate::config::{ConfigError, MissionConfig};
use crate::ground::{self, GroundError, GroundState, MissionSummary};
use crate::obc::{FlightPhase, Obc};
use crate::power::bus_telemetry;
use crate::radio::{packet_success_prob, transmit_with_prob, TransmitOutcome};
use crate::rng::{stream, Stream};
use crate::sensors::SensorSuite;

pub const TMF_FILE: &str = "mission.tmf";
pub const CSV_FILE: &str = "ground.csv";
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const SUMMARY_FILE: &str = "summary.txt";

#[derive(Debug, Error)]
pub enum MissionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error("radio: {0}")]
    Radio(#[from] crate::radio::RadioError),
}

impl MissionError {
    /// Process exit code: 2 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            MissionError::Config(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct LinkTally {
    pub delivered: u64,
    pub corrupted: u64,
    pub dropped: u64,
}

/// Everything a mission run produces, in memory.
#[derive(Debug, Clone)]
pub struct MissionOutput {
    pub frames_transmitted: u64,
    pub link: LinkTally,
    /// Received byte stream: dropped frames removed, corrupted ones in place.
    pub tmf: Vec<u8>,
    pub ground: GroundState,
    /// Phase after every step, for inspection.
    pub phases: Vec<FlightPhase>,
    pub summary: MissionSummary,
}

impl MissionOutput {
    pub fn csv(&self) -> String {
        ground::csv_string(self.ground.records())
    }

    pub fn snapshot(&self) -> String {
        ground::snapshot_text(&self.ground)
    }

    pub fn summary_text(&self) -> String {
        let mut out = format!(
            "link: {} delivered, {} corrupted, {} dropped\n",
            self.link.delivered, self.link.corrupted, self.link.dropped
        );
        out.push_str(&self.summary.render());
        out
    }
}

/// Runs the mission in memory. Identical configs give identical outputs.
pub fn simulate(cfg: &MissionConfig) -> Result<MissionOutput, MissionError> {
    cfg.validate()?;
    let m = &cfg.mission;
    let mut sensor_rng = stream(m.seed, Stream::Sensors);
    let mut radio_rng = stream(m.seed, Stream::Radio);
    let mut bus_rng = stream(m.seed, Stream::Bus);

    let suite = SensorSuite::new(cfg.noise.clone(), &mut sensor_rng);
    let mut obc = Obc::new(m.obc_config());
    let mut ground = GroundState::new();
    let mut tmf = Vec::new();
    let mut link = LinkTally::default();
    let mut phases = Vec::new();
    let mut transmitted = 0u64;

    let steps = (m.duration_s / m.sample_period_s).ceil() as u64;
    for k in 0..steps {
        let t_s = k as f64 * m.sample_period_s;
        let env = environment_at(t_s, &cfg.profile);
        let raw = suite.sample(&env, m.utc_start_s + t_s, &mut sensor_rng);
        // sampled while the transceiver listens; it keys up only after packaging
        let bus = bus_telemetry(&cfg.power.components, false, m.bus_voltage_v, m.bus_jitter_v, &mut bus_rng);
        let emitted = obc.step(t_s, &raw, bus);
        phases.push(obc.phase());
        let Some(frame) = emitted else { continue };
        transmitted += 1;
        let p = packet_success_prob(m.link_distance_at(t_s), &cfg.link)?;
        let outcome = transmit_with_prob(&frame.bytes, p, cfg.link.corrupt_fraction, &mut radio_rng);
        match &outcome {
            TransmitOutcome::Delivered(_) => link.delivered += 1,
            TransmitOutcome::Corrupted(_) => link.corrupted += 1,
            TransmitOutcome::Dropped => link.dropped += 1,
        }
        if let Some(bytes) = outcome.bytes() {
            tmf.extend_from_slice(bytes);
            ground.ingest(bytes);
        }
    }
    ground.finish();
    let summary = ground::summarize(ground.records(), ground.stats(), Some(transmitted));
    Ok(MissionOutput {
        frames_transmitted: transmitted,
        link,
        tmf,
        ground,
        phases,
        summary,
    })
}

fn write(path: PathBuf, contents: &[u8]) -> Result<(), MissionError> {
    std::fs::write(&path, contents).map_err(|source| MissionError::Io { path, source })
}

/// Runs the mission and writes its four artifacts into `out_dir`.
pub fn run_mission(cfg: &MissionConfig, out_dir: &Path) -> Result<MissionOutput, MissionError> {
    let out = simulate(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|source| MissionError::Io {
        path: out_dir.to_owned(),
        source,
    })?;
    write(out_dir.join(TMF_FILE), &out.tmf)?;
    write(out_dir.join(CSV_FILE), out.csv().as_bytes())?;
    write(out_dir.join(SNAPSHOT_FILE), out.snapshot().as_bytes())?;
    write(out_dir.join(SUMMARY_FILE), out.summary_text().as_bytes())?;
    Ok(out)
}
