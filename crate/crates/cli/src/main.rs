use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Parser, Subcommand};

use dichopt_core::diagnostics::squint_offset_to_angle;
use dichopt_core::game::{read_input_script, replay, write_event_log, GameConfig};
use dichopt_core::persistence::{compliance_report, save_patient, Acuity, PatientProfile, Store, StoreConfig};
use dichopt_core::stereo::{encode_anaglyph, encode_frame_sequential, encode_side_by_side, write_frame_sequence, DEFAULT_REFRESH_HZ};
use dichopt_core::viewer::{play_plan, ViewingPlan};
use dichopt_core::{Encoding, EyeSide};
use dichopt_service::{serve, ServeOptions, ServiceConfig, SessionService, SystemClock, DEFAULT_PORT};

/// Clinic-wide game defaults, read from the store root when present.
const GAME_CONFIG_FILE: &str = "game.json";

#[derive(Parser)]
#[command(name = "dichopt", version, about = "Dichoptic amblyopia therapy: stimuli, sessions and compliance")]
struct Cli {
    /// Data directory holding patients, sessions and event logs.
    #[arg(long, global = true, env = "DICHOPT_STORE", default_value = "store")]
    store: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a clip directory into encoded stereo frames.
    View {
        #[arg(long)]
        plan: PathBuf,
        /// Mask file inside the clip directory, replacing the plan's.
        #[arg(long)]
        mask: Option<String>,
        #[arg(long, default_value = "anaglyph")]
        encode: Encoding,
        #[arg(long)]
        out: PathBuf,
        /// Display refresh rate for frame-sequential output.
        #[arg(long, default_value_t = DEFAULT_REFRESH_HZ)]
        refresh_hz: u32,
    },
    #[command(subcommand)]
    Patient(PatientCmd),
    /// Daily therapy minutes for one patient.
    Report {
        #[arg(long)]
        patient: String,
        #[arg(long)]
        from: NaiveDate,
        #[arg(long)]
        to: NaiveDate,
        /// Print JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
    /// Show or change store settings.
    Config {
        /// Fixed offset from UTC used to assign sessions to days.
        #[arg(long, allow_hyphen_values = true)]
        utc_offset_minutes: Option<i32>,
    },
    /// Run the session service on localhost.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value_t = 60)]
        tick_hz: u32,
        /// Send a frame every N ticks.
        #[arg(long, default_value_t = 1)]
        frame_divisor: u32,
        /// Seconds a session survives with no clients connected.
        #[arg(long, default_value_t = 30)]
        idle_timeout: u64,
        /// Directory of static client files.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
    #[command(subcommand)]
    Game(GameCmd),
    /// Convert an alignment offset into a squint angle.
    Squint {
        #[arg(long, allow_hyphen_values = true)]
        dx: i32,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0)]
        dy: i32,
        #[arg(long, default_value_t = 0.25)]
        pitch_mm: f64,
        #[arg(long, default_value_t = 600.0)]
        distance_mm: f64,
    },
}

#[derive(Subcommand)]
enum PatientCmd {
    Add {
        #[arg(long)]
        id: String,
        /// The amblyopic eye.
        #[arg(long)]
        eye: EyeSide,
        #[arg(long)]
        birth_year: Option<i32>,
        /// Decimal acuity of the lazy and fellow eye.
        #[arg(long, num_args = 2, value_names = ["LAZY", "FELLOW"])]
        acuity: Option<Vec<f64>>,
        #[arg(long)]
        attenuation: Option<f64>,
        #[arg(long)]
        min_shared_ratio: Option<f64>,
    },
    /// Print a patient's XML record.
    Show {
        #[arg(long)]
        id: String,
    },
    List,
}

#[derive(Subcommand)]
enum GameCmd {
    /// Run an input script through the game headlessly.
    Replay {
        #[arg(long)]
        script: PathBuf,
        /// Game configuration JSON; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the event log here.
        #[arg(long)]
        events: Option<PathBuf>,
    },
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::View { plan, mask, encode, out, refresh_hz } => view(&plan, mask.as_deref(), encode, &out, refresh_hz),
        Command::Patient(cmd) => patient(&cli.store, cmd),
        Command::Report { patient, from, to, json } => {
            let store = Store::open(&cli.store)?;
            if !store.has_patient(&patient) {
                bail!("unknown patient `{patient}`");
            }
            let report = compliance_report(&store, &patient, from, to)?;
            if json {
                println!("{}", report.to_json());
            } else {
                print!("{}", report.to_table());
            }
            Ok(())
        }
        Command::Config { utc_offset_minutes } => {
            let mut store = Store::open(&cli.store)?;
            if let Some(m) = utc_offset_minutes {
                store.set_config(StoreConfig { utc_offset_minutes: m })?;
            }
            println!("{}", serde_json::to_string_pretty(&store.config())?);
            Ok(())
        }
        Command::Serve { port, tick_hz, frame_divisor, idle_timeout, ui } => {
            let store = Store::open(&cli.store)?;
            let base_game = load_game_config(&store.root().join(GAME_CONFIG_FILE))?;
            if tick_hz == 0 || frame_divisor == 0 {
                bail!("--tick-hz and --frame-divisor must be positive");
            }
            let config = ServiceConfig {
                tick_hz,
                frame_divisor,
                idle_timeout: Duration::from_secs(idle_timeout),
                base_game,
                ..Default::default()
            };
            let service = SessionService::new(store, SystemClock, config);
            run_server(service, port, ui)
        }
        Command::Game(GameCmd::Replay { script, config, events }) => game_replay(&script, config.as_deref(), events.as_deref()),
        Command::Squint { dx, dy, pitch_mm, distance_mm } => {
            let m = squint_offset_to_angle((dx, dy), pitch_mm, distance_mm)?;
            println!("{}", serde_json::to_string_pretty(&m)?);
            Ok(())
        }
    }
}

fn load_game_config(path: &Path) -> Result<GameConfig> {
    if !path.exists() {
        return Ok(GameConfig::default());
    }
    let cfg: GameConfig = serde_json::from_reader(BufReader::new(File::open(path)?))
        .with_context(|| format!("reading {}", path.display()))?;
    cfg.validate().with_context(|| format!("invalid {}", path.display()))?;
    Ok(cfg)
}

fn view(plan_dir: &Path, mask: Option<&str>, encode: Encoding, out: &Path, refresh_hz: u32) -> Result<()> {
    let plan = ViewingPlan::load_dir(plan_dir, mask)?;
    let pairs = play_plan(&plan)?;
    std::fs::create_dir_all(out)?;
    let written = match encode {
        Encoding::FrameSequential => write_frame_sequence(&encode_frame_sequential(&pairs, refresh_hz)?, out)?.len(),
        Encoding::Anaglyph | Encoding::SideBySide => {
            for (i, pair) in pairs.iter().enumerate() {
                let img = match encode {
                    Encoding::Anaglyph => encode_anaglyph(pair)?,
                    _ => encode_side_by_side(pair)?,
                };
                img.save_png(out.join(format!("frame_{i:06}.png")))?;
            }
            pairs.len()
        }
    };
    println!("wrote {written} {encode} frames to {}", out.display());
    Ok(())
}

fn patient(root: &Path, cmd: PatientCmd) -> Result<()> {
    let store = Store::open(root)?;
    match cmd {
        PatientCmd::Add { id, eye, birth_year, acuity, attenuation, min_shared_ratio } => {
            let mut p = PatientProfile::new(id, eye);
            p.birth_year = birth_year;
            p.acuity = acuity.map(|a| Acuity { lazy: a[0], fellow: a[1] });
            if let Some(a) = attenuation {
                p.therapy.fellow_attenuation = a;
            }
            if let Some(r) = min_shared_ratio {
                p.therapy.min_shared_ratio = r;
            }
            store.insert_patient(&p)?;
            println!("added {}", p.id);
        }
        PatientCmd::Show { id } => {
            let p = store.load_patient(&id)?;
            std::io::stdout().write_all(&save_patient(&p)?)?;
        }
        PatientCmd::List => {
            for id in store.patient_ids()? {
                println!("{id}");
            }
        }
    }
    Ok(())
}

fn game_replay(script: &Path, config: Option<&Path>, events: Option<&Path>) -> Result<()> {
    let cfg = match config {
        Some(p) => {
            if !p.exists() {
                bail!("{} does not exist", p.display());
            }
            load_game_config(p)?
        }
        None => GameConfig::default(),
    };
    let inputs = read_input_script(BufReader::new(File::open(script).with_context(|| format!("opening {}", script.display()))?))?;
    let (state, log) = replay(&cfg, inputs)?;
    if let Some(path) = events {
        let mut w = BufWriter::new(File::create(path)?);
        write_event_log(&mut w, &log)?;
        w.flush()?;
    }
    let summary = serde_json::json!({
        "ticks": state.tick,
        "score": state.score,
        "shotsFired": state.shots_fired,
        "hits": state.hits,
        "speed": state.speed(),
        "outcome": state.outcome,
        "digest": state.digest(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

#[tokio::main]
async fn run_server(service: SessionService<SystemClock>, port: u16, ui: Option<PathBuf>) -> Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
        .await
        .with_context(|| format!("binding 127.0.0.1:{port}"))?;
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
    };
    serve(listener, service, ServeOptions { ui_dir: ui, frame_buffer: 0 }, shutdown).await?;
    Ok(())
}
