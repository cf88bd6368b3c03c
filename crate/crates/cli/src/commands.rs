use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use crossbeacon::attack::bundled;
use crossbeacon::ble::canonical_identity;
use crossbeacon::radio::channels::channel_plan;
use crossbeacon::radio::{range_sweep, rssi_range_report, SourceKind};
use crossbeacon::receiver::{receive, PrrEstimate};
use crossbeacon::{
    assemble_packet, build_ibeacon_payload, emulate_packet, estimate_prr, run_attack, stability_trace, AttackMode,
    DecodeMode, EmulationConfig, IBeaconIdentity, PathLossModel, Placement, SamplingContext, ScenarioConfig,
    WaveformFrame,
};
use serde_json::json;

use crate::{Cli, Command, Emulation};

/// A problem with the invocation or its inputs rather than with the run.
#[derive(Debug)]
pub struct Usage(pub String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// 2 for usage and configuration errors, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    use crossbeacon::Error as E;
    for cause in e.chain() {
        if cause.is::<Usage>() {
            return 2;
        }
        if let Some(err) = cause.downcast_ref::<E>() {
            return match err {
                E::Io(_) | E::Csv(_) | E::MalformedPacket(_) | E::Shape(_) => 1,
                _ => 2,
            };
        }
    }
    1
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn read_identity(path: &Path) -> Result<IBeaconIdentity> {
    let text = read_input(path)?;
    serde_json::from_str(&text).map_err(|e| usage(format!("identity {}: {e}", path.display())))
}

fn emulation_config(emu: &Emulation) -> Result<EmulationConfig> {
    let mut cfg = match &emu.config {
        Some(p) => serde_json::from_str(&read_input(p)?).map_err(|e| usage(format!("config {}: {e}", p.display())))?,
        None => EmulationConfig::default(),
    };
    cfg.variant = emu.variant.parse()?;
    cfg.qam_order = emu.qam.parse()?;
    cfg.validate()?;
    Ok(cfg)
}

fn reference_packet(identity: Option<&Path>, channel: u8) -> Result<crossbeacon::AdvertisingPacket> {
    let id = match identity {
        Some(p) => read_identity(p)?,
        None => canonical_identity(),
    };
    Ok(assemble_packet(&build_ibeacon_payload(&id), crossbeacon::ble::CANONICAL_ADDRESS, channel)?)
}

fn resolved(what: &str, seed: Option<u64>, value: serde_json::Value) {
    log::info!("{what}: seed {seed:?}, resolved config {value}");
}

fn parse_address(s: &str) -> Result<[u8; 6]> {
    let bytes = (s.len() == 12)
        .then(|| (0..6).map(|i| u8::from_str_radix(&s[2 * i..2 * i + 2], 16).ok()).collect::<Option<Vec<u8>>>())
        .flatten()
        .ok_or_else(|| usage(format!("address {s:?} is not 12 hex digits")))?;
    Ok(bytes.try_into().expect("six bytes"))
}

pub fn run(cli: Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker pool")?;
    let seed = cli.seed;
    pool.install(|| dispatch(cli.command, seed))
}

fn dispatch(command: Command, seed: Option<u64>) -> Result<()> {
    match command {
        Command::Encode { identity, channel, address, out } => {
            let id = read_identity(&identity)?;
            let addr = parse_address(&address)?;
            resolved("encode", seed, json!({"identity": id, "channel": channel, "address": address}));
            let pkt = assemble_packet(&build_ibeacon_payload(&id), addr, channel)?;
            let text = serde_json::to_string_pretty(&pkt.to_hex_json())? + "\n";
            write_output(out.as_deref(), &text)
        }
        Command::Emulate { emu, identity, out, iq_dir } => {
            let cfg = emulation_config(&emu)?;
            resolved("emulate", seed, json!({"emulation": cfg, "channel": emu.channel}));
            let pkt = reference_packet(identity.as_deref(), emu.channel)?;
            let frames = emulate_packet(&pkt, &cfg)?;
            if let Some(dir) = iq_dir {
                fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
                for f in &frames {
                    let path = dir.join(format!("{}.cf32", serde_json::to_value(f.role)?.as_str().unwrap_or("frame")));
                    f.write_f32_le(std::io::BufWriter::new(fs::File::create(&path)?))?;
                }
            }
            let doc = json!({
                "channel": emu.channel,
                "config": cfg,
                "packet": pkt.to_hex_json(),
                "frames": frames.iter().map(WaveformFrame::to_json).collect::<Vec<_>>(),
            });
            write_output(out.as_deref(), &(serde_json::to_string(&doc)? + "\n"))
        }
        Command::Decode { frames, channel, offset_us, mode, snr } => {
            let doc: serde_json::Value = serde_json::from_str(&read_input(&frames)?)
                .map_err(|e| usage(format!("frames {}: {e}", frames.display())))?;
            let list = doc.get("frames").and_then(|f| f.as_array()).ok_or_else(|| usage("no \"frames\" array"))?;
            let frames: Vec<WaveformFrame> =
                list.iter().map(|f| WaveformFrame::from_json(f.clone())).collect::<crossbeacon::Result<_>>()?;
            let mode = if mode == "early" { DecodeMode::Early } else { DecodeMode::Delayed };
            let ctx = SamplingContext::new(offset_us * 1e-6, mode)?.with_noise(snr, seed.unwrap_or(1));
            resolved("decode", seed, json!({"channel": channel, "context": ctx}));
            let out = match receive(&frames, channel, &ctx)? {
                Some((role, pkt)) => json!({"received": true, "frame": role, "packet": pkt.to_hex_json()}),
                None => json!({"received": false}),
            };
            write_output(None, &(serde_json::to_string_pretty(&out)? + "\n"))
        }
        Command::Prr { emu, snr, trials } => {
            if trials == 0 {
                return Err(usage("--trials must be at least 1"));
            }
            let cfg = emulation_config(&emu)?;
            let seed = seed.unwrap_or(1);
            resolved(
                "prr",
                Some(seed),
                json!({"emulation": cfg, "channel": emu.channel, "snr_db": snr, "trials": trials}),
            );
            let pkt = reference_packet(None, emu.channel)?;
            let e = estimate_prr(&pkt, &cfg, snr, trials, seed)?;
            write_output(None, &format!("{}\n{}\n", PrrEstimate::CSV_HEADER, e.csv_row()))
        }
        Command::Stability { emu, snr, interval, duration } => {
            let cfg = emulation_config(&emu)?;
            let seed = seed.unwrap_or(1);
            resolved(
                "stability",
                Some(seed),
                json!({"emulation": cfg, "snr_db": snr, "interval": interval, "duration": duration}),
            );
            let pkt = reference_packet(None, emu.channel)?;
            let t = stability_trace(&pkt, &cfg, interval, duration, snr, seed)?;
            log::info!("mean {:.3} packets/s, cv {:.4}", t.mean, t.cv);
            let mut text = String::from("second,received,sent\n");
            for (s, c) in t.counts.iter().enumerate() {
                text += &format!("{s},{c},{}\n", t.per_second);
            }
            write_output(None, &text)
        }
        Command::Channels { rss_range } => {
            resolved("channels", seed, json!({"rss_range": rss_range}));
            let text = match rss_range.as_deref() {
                None => {
                    let mut s =
                        String::from("ble_channel,ble_center_mhz,wifi_channel,wifi_center_mhz,subcarrier_offset\n");
                    let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
                    for e in channel_plan() {
                        s += &format!(
                            "{},{},{},{},{}\n",
                            e.ble_channel,
                            e.ble_center_mhz,
                            opt(e.wifi_channel.map(|w| w.to_string())),
                            opt(e.wifi_center_mhz.map(|w| w.to_string())),
                            opt(e.subcarrier_offset.map(|o| o.to_string())),
                        );
                    }
                    s
                }
                Some(kind) => {
                    let (source, kind) = match kind {
                        "wifi" => (Placement::wifi_ap("ap", [0.0, 0.0], -40.0, -40.0, 1.0), SourceKind::WifiAp),
                        _ => (Placement::ibeacon("beacon", [0.0, 0.0], -65.0), SourceKind::Ibeacon),
                    };
                    let (levels, distances) = range_sweep(kind);
                    let r = rssi_range_report(&source, &distances, &levels, &PathLossModel::default())?;
                    let mut s = String::from("power_1m_dbm,distance_m,mean_rss_dbm\n");
                    for (p, d, m) in &r.grid {
                        s += &format!("{p},{d},{m:.3}\n");
                    }
                    log::info!("mean RSS spans {:.2} to {:.2} dBm", r.min, r.max);
                    s
                }
            };
            write_output(None, &text)
        }
        Command::Attack { scenario, bundled: which, mode, out, trials } => {
            let mut cfg = match (&scenario, which.as_deref()) {
                (Some(p), _) => ScenarioConfig::from_json(&read_input(p)?)
                    .map_err(|e| usage(format!("scenario {}: {e}", p.display())))?,
                (None, Some(name)) => ScenarioConfig::from_json(match name {
                    "point" => bundled::POINT,
                    "trilat" => bundled::TRILAT,
                    _ => bundled::FINGERPRINT,
                })?,
                (None, None) => return Err(usage("pass --scenario or --bundled")),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            cfg.validate()?;
            let mode: AttackMode = mode.parse()?;
            resolved("attack", Some(cfg.seed), serde_json::from_str(&cfg.to_json())?);
            let report = run_attack(&cfg, mode)?;
            let files = report.write_dir(&out).with_context(|| format!("writing report to {}", out.display()))?;
            for n in &report.notes {
                log::warn!("{n}");
            }
            let listing: Vec<PathBuf> = files.iter().map(|f| out.join(f)).collect();
            let mut text = String::new();
            for p in listing {
                text += &format!("{}\n", p.display());
            }
            write_output(None, &text)
        }
    }
}
