use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cansat_core::config::{ConfigError, MissionConfig};
use cansat_core::ground::{self, GroundState};
use cansat_core::mission::{self, MissionError};
use cansat_core::power::{render_csv, render_text, total_budget};
use cansat_core::radio::link_report;
use cansat_core::telemetry::{crc16, decode_frame, CRC_RANGE, FRAME_LEN};

#[derive(Parser)]
#[command(name = "cansat", version, about = "CanSat onboard computer and ground station simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a seeded mission and write its artifacts.
    Sim {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Decode a captured frame stream offline.
    Decode {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        snapshot: Option<PathBuf>,
        /// Print the mission summary.
        #[arg(long)]
        summary: bool,
    },
    /// Print the power budget and battery runtime.
    Power {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Print the link budget at one or more distances.
    Linkbudget {
        /// Distances in metres, comma-separated.
        #[arg(long, required = true, value_delimiter = ',')]
        distance: Vec<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Frame utilities.
    Frame {
        #[command(subcommand)]
        command: FrameCommand,
    },
}

#[derive(Subcommand)]
enum FrameCommand {
    /// Dump the fields of one hex-encoded frame.
    Inspect {
        #[arg(long)]
        hex: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<MissionError> for Failure {
    fn from(e: MissionError) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<MissionConfig, Failure> {
    let cfg = match path {
        Some(p) => MissionConfig::load(p).map_err(|e| match e {
            ConfigError::Io { .. } => Failure::runtime(e.to_string()),
            other => Failure::usage(other.to_string()),
        })?,
        None => MissionConfig::default(),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn sim(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<String, Failure> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = seed {
        cfg.mission.seed = seed;
    }
    let result = mission::run_mission(&cfg, out)?;
    let mut text = result.summary_text();
    let _ = writeln!(text, "artifacts written to {}", out.display());
    Ok(text)
}

fn decode(input: &Path, csv: Option<&Path>, snapshot: Option<&Path>, summary: bool) -> Result<String, Failure> {
    let bytes = std::fs::read(input).map_err(|e| Failure::runtime(format!("{}: {e}", input.display())))?;
    let mut state = GroundState::new();
    state.ingest(&bytes);
    state.finish();
    if let Some(path) = csv {
        ground::write_csv(state.records(), path).map_err(|e| Failure::runtime(e.to_string()))?;
    }
    if let Some(path) = snapshot {
        std::fs::write(path, ground::snapshot_text(&state))
            .map_err(|e| Failure::runtime(format!("{}: {e}", path.display())))?;
    }
    let mut text = String::new();
    if summary {
        text.push_str(&ground::summarize(state.records(), state.stats(), None).render());
    } else {
        let s = state.stats();
        let _ = writeln!(
            text,
            "{} frames decoded, {} crc failures, {} sequence gaps ({} frames lost)",
            s.frames_ok, s.crc_failures, s.seq_gaps, s.frames_lost_estimate
        );
    }
    Ok(text)
}

fn power(config: Option<&Path>, format: Format) -> Result<String, Failure> {
    let cfg = load_config(config)?;
    let budget = total_budget(&cfg.power.components).map_err(|e| Failure::usage(e.to_string()))?;
    Ok(match format {
        Format::Text => render_text(&budget, &cfg.power.battery),
        Format::Csv => render_csv(&budget),
    })
}

fn linkbudget(distances: &[f64], config: Option<&Path>) -> Result<String, Failure> {
    let cfg = load_config(config)?;
    let mut out = format!(
        "{:>10}  {:>12}  {:>12}  {:>10}  {:>9}  {:>10}\n",
        "distance_m", "path_loss_db", "rx_power_dbm", "margin_db", "p_success", "airtime_ms"
    );
    for &d in distances {
        let r = link_report(d, FRAME_LEN, &cfg.link).map_err(|e| Failure::usage(e.to_string()))?;
        let _ = writeln!(
            out,
            "{:>10.1}  {:>12.2}  {:>12.2}  {:>+10.2}  {:>9.4}  {:>10.2}",
            r.distance_m,
            r.path_loss_db,
            r.received_power_dbm,
            r.margin_db,
            r.packet_success_prob,
            r.airtime_s * 1000.0
        );
    }
    Ok(out)
}

fn parse_hex(text: &str) -> Result<Vec<u8>, Failure> {
    let digits: String = text.chars().filter(|c| !c.is_whitespace() && *c != ':').collect();
    let digits = digits.strip_prefix("0x").unwrap_or(&digits);
    if !digits.len().is_multiple_of(2) {
        return Err(Failure::usage("hex string has an odd number of digits"));
    }
    let bytes = (0..digits.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(&digits[i..i + 2], 16))
        .collect::<Result<Vec<u8>, _>>()
        .map_err(|_| Failure::usage("hex string contains a non-hex character"))?;
    if bytes.len() != FRAME_LEN {
        return Err(Failure::usage(format!("a frame is {FRAME_LEN} bytes, got {}", bytes.len())));
    }
    Ok(bytes)
}

fn inspect(hex: &str) -> Result<String, Failure> {
    let bytes = parse_hex(hex)?;
    let frame = decode_frame(&bytes).map_err(|e| Failure::runtime(format!("decode error: {e}")))?;
    let r = &frame.record;
    let mut out = String::new();
    let _ = writeln!(out, "seq             {}", frame.seq);
    let _ = writeln!(out, "phase           {} ({})", r.phase, r.phase as u8);
    let _ = writeln!(out, "t_ms            {}", r.t_ms);
    let _ = writeln!(out, "temperature_c   {}", r.temperature_c);
    let _ = writeln!(out, "pressure_pa     {}", r.pressure_pa);
    let _ = writeln!(out, "altitude_m      {}", r.altitude_m);
    let _ = writeln!(out, "uv_adc          {}", r.uv_adc);
    let _ = writeln!(out, "uv_index        {}", r.uv_index);
    let _ = writeln!(out, "air_quality_ppm {}", r.air_quality_ppm);
    let _ = writeln!(
        out,
        "accel_mps2      {:.4} {:.4} {:.4}",
        r.accel_mps2[0], r.accel_mps2[1], r.accel_mps2[2]
    );
    let _ = writeln!(out, "pitch/roll/yaw  {} {} {}", r.pitch_deg, r.roll_deg, r.yaw_deg);
    let _ = writeln!(out, "lat_deg         {}", r.lat_deg);
    let _ = writeln!(out, "lon_deg         {}", r.lon_deg);
    let _ = writeln!(out, "bus_voltage_v   {}", r.bus_voltage_v);
    let _ = writeln!(out, "bus_current_ma  {}", r.bus_current_ma);
    let _ = writeln!(out, "crc             {:#06X} ok", crc16(&bytes[CRC_RANGE]));
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sim { config, seed, out } => sim(config.as_deref(), *seed, out),
        Command::Decode {
            input,
            csv,
            snapshot,
            summary,
        } => decode(input, csv.as_deref(), snapshot.as_deref(), *summary),
        Command::Power { config, format } => power(config.as_deref(), *format),
        Command::Linkbudget { distance, config } => linkbudget(distance, config.as_deref()),
        Command::Frame {
            command: FrameCommand::Inspect { hex },
        } => inspect(hex),
    };
    match result {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
