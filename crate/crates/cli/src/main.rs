mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "crossbeacon",
    version,
    about = "Emulate iBeacons with WiFi symbols and simulate localization attacks"
)]
struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Emulation {
    #[arg(long, default_value = "adjusted", value_parser = ["basic", "adjusted", "enhanced"])]
    variant: String,
    /// off, 4, 16 or 64
    #[arg(long, default_value = "64")]
    qam: String,
    /// Optional EmulationConfig JSON; --variant and --qam still apply on top.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 38)]
    channel: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the advertising packet for an iBeacon identity JSON file.
    Encode {
        #[arg(long, value_name = "FILE")]
        identity: PathBuf,
        #[arg(long, default_value_t = 38)]
        channel: u8,
        /// Advertiser address as 12 hex digits, transmitted order.
        #[arg(long, default_value = "112233445566")]
        address: String,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Emulate a packet as WiFi frames; prints frame JSON.
    Emulate {
        #[command(flatten)]
        emu: Emulation,
        /// Identity JSON; the built-in reference beacon when omitted.
        #[arg(long, value_name = "FILE")]
        identity: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
        /// Also write interleaved float32 I/Q, one file per frame.
        #[arg(long, value_name = "DIR")]
        iq_dir: Option<PathBuf>,
    },
    /// Decode frames written by `emulate` at one receiver timing.
    Decode {
        #[arg(long, value_name = "FILE")]
        frames: PathBuf,
        #[arg(long, default_value_t = 38)]
        channel: u8,
        /// Sampling offset τ in µs, within [0, 0.5).
        #[arg(long, default_value_t = 0.0)]
        offset_us: f64,
        #[arg(long, default_value = "early", value_parser = ["early", "delayed"])]
        mode: String,
        #[arg(long)]
        snr: Option<f64>,
    },
    /// Monte Carlo PRR of the reference beacon; one CSV row.
    Prr {
        #[command(flatten)]
        emu: Emulation,
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
    },
    /// Received packets per second over a periodic broadcast; CSV.
    Stability {
        #[command(flatten)]
        emu: Emulation,
        #[arg(long)]
        snr: Option<f64>,
        /// Seconds between packets.
        #[arg(long, default_value_t = 0.1)]
        interval: f64,
        /// Seconds.
        #[arg(long, default_value_t = 30.0)]
        duration: f64,
    },
    /// WiFi channel and subcarrier offset for each advertising channel.
    Channels {
        /// Instead print the mean RSS range of a source type over the standard sweep.
        #[arg(long, value_parser = ["wifi", "ibeacon"])]
        rss_range: Option<String>,
    },
    /// Run an attack scenario and write its report files.
    Attack {
        #[arg(long, value_name = "FILE", required_unless_present = "bundled")]
        scenario: Option<PathBuf>,
        /// Use a scenario shipped with the tool.
        #[arg(long, value_parser = ["point", "trilat", "fingerprint"], conflicts_with = "scenario")]
        bundled: Option<String>,
        #[arg(long, value_parser = ["point", "trilat", "fingerprint"])]
        mode: String,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Override the scenario's trial count.
        #[arg(long)]
        trials: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
