use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use vlcsim::analytics::{self, SyncProbabilityInputs};
use vlcsim::channel::{self, db_to_linear, ChannelParams};
use vlcsim::harness::duty::{duty_sweep, DutyStudy};
use vlcsim::harness::{self, write_csv, write_json, Format, SweepConfig};
use vlcsim::Result;

#[derive(Parser)]
#[command(
    name = "vlcsim",
    version,
    about = "UART over on-off-keyed visible light: simulator and calculators"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep described by a key=value config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        format: Option<Format>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Report path; `-` or omitted with no `output` key prints to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate one closed-form expression.
    Calc {
        #[command(subcommand)]
        what: Calc,
    },
    /// Comparator reference sweep on a band-limited random payload.
    Duty {
        #[arg(long)]
        baud: f64,
        #[arg(long)]
        snr_db: f64,
        /// Receiver turn-on corner in Hz; `0` for a symmetric filter.
        #[arg(long)]
        rise_bandwidth: Option<f64>,
        #[arg(long)]
        tia_bandwidth: Option<f64>,
        #[arg(long, default_value_t = 2000)]
        chars: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Comparator references, comma separated (default 0.50 down to 0.05).
        #[arg(long, value_delimiter = ',')]
        refs: Option<Vec<f64>>,
    },
}

#[derive(Args)]
struct SnrArg {
    #[arg(long, conflicts_with = "snr", required_unless_present = "snr")]
    snr_db: Option<f64>,
    /// Linear SNR.
    #[arg(long)]
    snr: Option<f64>,
}

impl SnrArg {
    fn linear(&self) -> f64 {
        self.snr.unwrap_or_else(|| db_to_linear(self.snr_db.unwrap_or(0.0)))
    }
}

#[derive(Args)]
struct SyncArgs {
    #[arg(long)]
    n_sync: u32,
    #[arg(long)]
    n_payload: u32,
    #[arg(long)]
    ps: f64,
    #[arg(long, default_value_t = 256)]
    alphabet: u32,
}

impl SyncArgs {
    fn inputs(&self) -> SyncProbabilityInputs {
        SyncProbabilityInputs {
            alphabet_size: self.alphabet,
            ..SyncProbabilityInputs::new(self.n_sync, self.n_payload, self.ps)
        }
    }
}

#[derive(Args)]
struct GeometryArgs {
    #[arg(long)]
    area_rx: Option<f64>,
    #[arg(long)]
    half_angle: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    psi: Option<f64>,
    #[arg(long)]
    psi_c: Option<f64>,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long)]
    d1: Option<f64>,
    #[arg(long)]
    d2: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    area_reflector: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
}

impl GeometryArgs {
    fn params(&self) -> ChannelParams {
        let mut p = ChannelParams::default();
        let set = |field: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *field = v;
            }
        };
        set(&mut p.area_rx, self.area_rx);
        set(&mut p.half_angle, self.half_angle);
        set(&mut p.theta, self.theta);
        set(&mut p.psi, self.psi);
        set(&mut p.psi_c, self.psi_c);
        set(&mut p.d, self.d);
        set(&mut p.d1, self.d1);
        set(&mut p.d2, self.d2);
        set(&mut p.alpha, self.alpha);
        set(&mut p.beta, self.beta);
        set(&mut p.area_reflector, self.area_reflector);
        set(&mut p.rho, self.rho);
        p
    }
}

#[derive(Subcommand)]
enum Calc {
    /// OOK bit error probability.
    Ber(SnrArg),
    /// UART symbol error rate (clamped; raw value in parentheses).
    Ser(SnrArg),
    /// Frame synchronisation failure probability.
    Pfail(SyncArgs),
    /// Frame synchronisation error probability.
    Perr(SyncArgs),
    /// Line-of-sight channel gain.
    Hlos(GeometryArgs),
    /// First-order reflection channel gain.
    Hnlos(GeometryArgs),
    /// Largest reflection-free link distance.
    Dmax {
        #[arg(long)]
        w: f64,
        #[arg(long)]
        alpha_plus_beta: f64,
        #[arg(long)]
        theta_max: f64,
    },
    /// Lambertian order for a half-power semi-angle.
    M {
        #[arg(long)]
        half_angle: f64,
    },
    /// SNR from four square-wave voltage readings.
    Snr {
        #[arg(long)]
        vmin0: f64,
        #[arg(long)]
        vmax0: f64,
        #[arg(long)]
        vmin1: f64,
        #[arg(long)]
        vmax1: f64,
    },
    /// Distance at which the default link reaches an SNR.
    Distance(SnrArg),
}

fn calc(what: &Calc) -> Result<String> {
    Ok(match what {
        Calc::Ber(s) => analytics::ber_ook(s.linear())?.to_string(),
        Calc::Ser(s) => format!(
            "{} ({})",
            analytics::ser_ttl(s.linear())?,
            analytics::ser_ttl_raw(s.linear())?
        ),
        Calc::Pfail(a) => analytics::p_fail(&a.inputs())?.to_string(),
        Calc::Perr(a) => analytics::p_err(&a.inputs())?.to_string(),
        Calc::Hlos(g) => channel::h_los(&g.params())?.to_string(),
        Calc::Hnlos(g) => channel::h_nlos(&g.params())?.to_string(),
        Calc::Dmax {
            w,
            alpha_plus_beta,
            theta_max,
        } => channel::max_los_distance(*w, *alpha_plus_beta, *theta_max)?.to_string(),
        Calc::M { half_angle } => channel::lambertian_order(*half_angle)?.to_string(),
        Calc::Snr {
            vmin0,
            vmax0,
            vmin1,
            vmax1,
        } => {
            let e = channel::estimate_snr(*vmin0, *vmax0, *vmin1, *vmax1)?;
            if e.noise_free {
                "inf (noise-free)".to_string()
            } else {
                format!("{} ({} dB)", e.linear, e.db)
            }
        }
        Calc::Distance(s) => channel::snr_to_distance(s.linear(), &ChannelParams::default())?.to_string(),
    })
}

fn simulate(
    config: &Path,
    format: Option<Format>,
    workers: Option<usize>,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = SweepConfig::load(config)?;
    if let Some(f) = format {
        cfg.format = f;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    if let Some(o) = out {
        cfg.output_path = (o.as_os_str() != "-").then_some(o);
    }
    let report = harness::run_sweep(&cfg)?;
    if cfg.output_path.is_none() {
        let stdout = io::stdout().lock();
        match cfg.format {
            Format::Csv => write_csv(&report, stdout)?,
            Format::Json => write_json(&report, stdout)?,
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn duty(
    baud: f64,
    snr_db: f64,
    rise_bandwidth: Option<f64>,
    tia_bandwidth: Option<f64>,
    chars: usize,
    seed: u64,
    refs: Option<Vec<f64>>,
) -> Result<()> {
    let mut study = DutyStudy::new(baud, snr_db);
    if let Some(r) = rise_bandwidth {
        study.front_end.rise_bandwidth = (r > 0.0).then_some(r);
    }
    if let Some(t) = tia_bandwidth {
        study.front_end.tia_bandwidth = t;
    }
    study.chars = chars;
    study.seed = seed;
    if let Some(r) = refs {
        study.refs = r;
    }
    let res = duty_sweep(&study)?;
    let mut out = io::stdout().lock();
    let w = |e: io::Error| vlcsim::Error::io("<stdout>", e);
    writeln!(out, "# line ones density {:.2}%", res.line_ones_pct).map_err(w)?;
    writeln!(out, "comparator_ref,duty_pos_pct,duty_neg_pct").map_err(w)?;
    for p in res.points {
        writeln!(
            out,
            "{:.3},{:.3},{:.3}",
            p.comparator_ref, p.duty.positive, p.duty.negative
        )
        .map_err(w)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Simulate {
            config,
            format,
            workers,
            seed,
            out,
        } => simulate(&config, format, workers, seed, out),
        Command::Calc { what } => calc(&what).map(|s| println!("{s}")),
        Command::Duty {
            baud,
            snr_db,
            rise_bandwidth,
            tia_bandwidth,
            chars,
            seed,
            refs,
        } => duty(baud, snr_db, rise_bandwidth, tia_bandwidth, chars, seed, refs),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
