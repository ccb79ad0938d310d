//! `egotrack` command-line driver.
//!
//! Exit status: 0 on success, 1 when inputs fail validation, 2 on I/O errors.

mod commands;
mod stats;

use std::path::Path;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "egotrack", version, about = "Groundtruth synthesis, calibration, target encoding and evaluation for egocentric controller tracking")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic recording: mocap and camera streams, rig and groundtruth labels.
    Simulate(commands::SimulateArgs),
    /// Solve time offset, hand-eye and tip offset from recorded streams.
    Calibrate(commands::CalibrateArgs),
    /// Build, clean and write label rows from calibrated streams.
    Labelgen(commands::LabelgenArgs),
    /// Encode labels into flat per-anchor training targets.
    Encode(commands::EncodeArgs),
    /// Encode then decode every label and report the worst error per field.
    Roundtrip(commands::RoundtripArgs),
    /// Score predictions against labels.
    Evaluate(commands::EvaluateArgs),
    /// Dataset histograms: box occupancy, box size, tip position and orientation.
    Stats(stats::StatsArgs),
    /// Noisy groundtruth predictions from an oracle predictor.
    Predict(commands::PredictArgs),
}

/// I/O failures anywhere in the chain map to 2; everything else is a
/// validation failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<egotrack::Error>() {
            return match e {
                egotrack::Error::Io(_) => 2,
                egotrack::Error::Json(j) if j.is_io() => 2,
                _ => 1,
            };
        }
        if let Some(j) = cause.downcast_ref::<serde_json::Error>() {
            return if j.is_io() { 2 } else { 1 };
        }
        if let Some(c) = cause.downcast_ref::<csv::Error>() {
            return if c.is_io_error() { 2 } else { 1 };
        }
    }
    1
}

/// Fails with an I/O error unless every path names an existing file.
pub fn require_files<'a>(paths: impl IntoIterator<Item = &'a Path>) -> anyhow::Result<()> {
    for p in paths {
        if !p.is_file() {
            return Err(std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"))
                .with_context(|| format!("input {}", p.display()));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Calibrate(a) => commands::calibrate(a),
        Command::Labelgen(a) => commands::labelgen(a),
        Command::Encode(a) => commands::encode(a),
        Command::Roundtrip(a) => commands::roundtrip(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Stats(a) => stats::run(a),
        Command::Predict(a) => commands::predict(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
