use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trispin::filtering::{angle_grid, filter_scan, CoupledState, ScanSetup};
use trispin::scenarios::config::parse_angle;
use trispin::scenarios::{
    output_dir_from_env, reproduce_figure, resonance_report, run_scenario, FigureId, ModelKind, ScenarioParams,
};
use trispin::verify::run_oracle_batch;
use trispin::{Error, Result, Spin};

/// Exact dynamics of an electron spin coupled to a spin pair with anisotropy.
#[derive(Parser)]
#[command(name = "trispin", version, about)]
struct Cli {
    /// Output directory (overrides the TRISPIN_OUT environment variable).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write its CSV outputs.
    Run { config: PathBuf },
    /// Reproduce the data behind a figure (fig2..fig7, table1, or all).
    Figure { id: String },
    /// List two-state blocks, resonance conditions and Rabi amplitudes.
    Resonances {
        /// general, s_half, s_one, bh3 or trimer.
        model: String,
        #[command(flatten)]
        params: ParamArgs,
        /// Also write the report as CSV to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Relative transition probability over a (θ_in, θ_out) grid.
    ScanFilter {
        /// s_half, s_one or general.
        #[arg(long, default_value = "s_half")]
        model: String,
        #[command(flatten)]
        params: ParamArgs,
        #[arg(long, default_value_t = 133.0)]
        t_snapshot: f64,
        #[arg(long, default_value = "1,1")]
        from: String,
        #[arg(long, default_value = "1,0")]
        to: String,
        #[arg(long, default_value_t = 91)]
        theta_in_points: usize,
        #[arg(long, default_value_t = 91)]
        theta_out_points: usize,
        #[arg(long, default_value = "0")]
        phi_in: String,
        #[arg(long, default_value = "0")]
        phi_out: String,
        /// File name inside the output directory.
        #[arg(long, default_value = "scan.csv")]
        file: String,
    },
    /// Run the oracle checks and print one line per check.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
}

/// Model parameters; unset flags keep the model defaults.
#[derive(Args, Clone, Debug, Default)]
struct ParamArgs {
    /// Spin of particles 2 and 3 (general model), e.g. 3/2.
    #[arg(long)]
    s: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    jk: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    jk2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    jk3: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    jh: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    jz: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    jxy: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    d: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    thop: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    g1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    g23: Option<f64>,
    /// Exchange of the spin-1 clusters (bh3, trimer).
    #[arg(long, allow_hyphen_values = true)]
    j: Option<f64>,
}

impl ParamArgs {
    fn resolve(&self, model: ModelKind) -> Result<ScenarioParams> {
        let s = match (&self.s, model) {
            (Some(text), ModelKind::General) => Some(text.parse::<Spin>()?),
            (Some(_), m) => return Err(Error::Config(format!("--s only applies to the general model, not {m}"))),
            (None, _) => None,
        };
        let mut params = ScenarioParams::defaults(model, s)?;
        let flags = [
            ("jh", self.jh),
            ("jz", self.jz),
            ("jxy", self.jxy),
            ("jk", self.jk),
            ("jk2", self.jk2),
            ("jk3", self.jk3),
            ("d", self.d),
            ("t_hop", self.thop),
            ("b0", self.b0),
            ("g1", self.g1),
            ("g23", self.g23),
            ("j", self.j),
        ];
        for (name, value) in flags {
            if let Some(v) = value {
                params
                    .set(name, v)
                    .map_err(|_| Error::Config(format!("--{} does not apply to model {model}", name.replace('_', ""))))?;
            }
        }
        if let ScenarioParams::Electron(p) = &params {
            p.validate()?;
        }
        Ok(params)
    }
}

fn out_dir(cli_out: &Option<PathBuf>) -> PathBuf {
    cli_out.clone().unwrap_or_else(output_dir_from_env)
}

fn angle(text: &str, flag: &str) -> Result<f64> {
    parse_angle(text).map_err(|e| Error::Config(format!("--{flag}: {e}")))
}

fn figure(id: &str, dir: &Path) -> Result<String> {
    let ids: Vec<FigureId> = if id == "all" {
        FigureId::ALL.to_vec()
    } else {
        vec![id.parse()?]
    };
    let mut text = String::new();
    for id in ids {
        text.push_str(&reproduce_figure(id, dir)?.text);
    }
    Ok(text)
}

fn execute(cli: Cli) -> Result<String> {
    let dir = out_dir(&cli.out);
    match cli.command {
        Command::Run { config } => Ok(run_scenario(&config, &dir)?.text),
        Command::Figure { id } => figure(&id, &dir),
        Command::Resonances { model, params, csv } => {
            let model: ModelKind = model.parse()?;
            let report = resonance_report(model, &params.resolve(model)?)?;
            if let Some(path) = csv {
                let path = if path.is_absolute() { path } else { dir.join(path) };
                std::fs::create_dir_all(path.parent().unwrap_or(&dir))?;
                report.write_csv(std::fs::File::create(&path)?, &[format!("model: {model}")])?;
            }
            Ok(report.text())
        }
        Command::ScanFilter {
            model,
            params,
            t_snapshot,
            from,
            to,
            theta_in_points,
            theta_out_points,
            phi_in,
            phi_out,
            file,
        } => {
            let model: ModelKind = model.parse()?;
            let params = params.resolve(model)?;
            let p = params
                .electron()
                .ok_or_else(|| Error::Config(format!("scan-filter needs an electron model, not {model}")))?;
            let setup = ScanSetup {
                t_snapshot,
                from: CoupledState::parse(&from)?,
                to: CoupledState::parse(&to)?,
                phi_in: angle(&phi_in, "phi-in")?,
                phi_out: angle(&phi_out, "phi-out")?,
            };
            if theta_in_points == 0 || theta_out_points == 0 {
                return Err(Error::Config("grid sizes must be at least 1".into()));
            }
            let grid = filter_scan(p, &angle_grid(theta_in_points), &angle_grid(theta_out_points), &setup)?;
            std::fs::create_dir_all(&dir)?;
            let path = dir.join(&file);
            let comments = vec![
                format!("model: {model}"),
                format!("params: {}", params.describe()),
                format!("scan: {} -> {} at t_ps={t_snapshot}", setup.from.ket(), setup.to.ket()),
            ];
            grid.write_csv(std::fs::File::create(&path)?, &comments)?;
            let peak = grid
                .max()
                .map(|(a, b, v)| format!("peak {v:.6} at theta_in={a:.6} theta_out={b:.6}"))
                .unwrap_or_else(|| "no defined values".into());
            Ok(format!("{}: {peak}\n", path.display()))
        }
        Command::Verify { seed, instances } => {
            let reports = run_oracle_batch(seed, instances)?;
            let mut text = String::new();
            for r in &reports {
                text.push_str(&format!("{r}\n"));
            }
            let failed = reports.iter().filter(|r| !r.passed()).count();
            if failed > 0 {
                print!("{text}");
                return Err(Error::Invariant(format!("{failed} oracle check(s) failed")));
            }
            Ok(text)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
