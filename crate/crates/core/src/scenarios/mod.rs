//! Declarative scenario runs, figure recipes and CSV emission.
//!
//! A scenario names a model, its parameters, an initial state, a time grid
//! and a list of outputs; [`run_scenario`] writes one CSV per output (per
//! sweep value) into an output directory. See [`config`] for the file format.

pub mod config;
pub mod figures;
pub mod report;

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::analysis::{balance_grid, eigen_balance};
use crate::basis::{block_decompose, leakage, transform_from_product, BasisKind, BasisLabel, DeviceBasis};
use crate::dynamics::{basis_projector, bloch_trajectory_of, DensityMatrix, Evolver, TimeGrid, TimeSeries};
use crate::error::{Error, Result};
use crate::filtering::{angle_grid, filter_scan, filtered_series, CoupledState, FilterSpec, ScanSetup};
use crate::linalg::{hermitian_eig, OperatorMatrix};
use crate::model::{unit_convert, HamiltonianBundle};
use crate::output::{format_sig, write_table};
use crate::spin::Spin;

pub use config::{InitialState, ModelKind, OutputSpec, Scenario, ScenarioParams, Sweep};
pub use figures::{figure_recipes, reproduce_figure, FigureId};
pub use report::{resonance_report, transition_table, ResonanceReport};

/// Environment variable naming the output directory.
pub const OUT_DIR_ENV: &str = "TRISPIN_OUT";

/// Upper bound on automatically chosen time spans.
pub const MAX_AUTO_SPAN_PS: f64 = 5000.0;
/// Automatic spans cover this many periods of the slowest populated beat.
const AUTO_PERIODS: f64 = 2.5;
const MIN_GAP_CM: f64 = 1e-6;
const POPULATION_TOL: f64 = 1e-12;

/// Files written by a run and a human-readable summary.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub text: String,
}

impl RunSummary {
    fn extend(&mut self, other: RunSummary) {
        self.files.extend(other.files);
        self.text.push_str(&other.text);
    }
}

/// Output directory from [`OUT_DIR_ENV`], defaulting to the working directory.
pub fn output_dir_from_env() -> PathBuf {
    std::env::var_os(OUT_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Reads, validates and runs a scenario file. The file stem names the
/// scenario unless the file sets `name`.
pub fn run_scenario(path: &Path, out_dir: &Path) -> Result<RunSummary> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario");
    let scenario = Scenario::parse(&text, stem)?;
    run(&scenario, out_dir)
}

/// Runs a validated scenario, expanding its sweep.
pub fn run(scenario: &Scenario, out_dir: &Path) -> Result<RunSummary> {
    fs::create_dir_all(out_dir)?;
    let Some(sweep) = &scenario.sweep else {
        return run_single(scenario, out_dir, "");
    };
    let mut summary = RunSummary::default();
    for &v in &sweep.values {
        let mut s = scenario.clone();
        s.params.set(&sweep.parameter, v)?;
        s.sweep = None;
        let suffix = format!("_{}{}", sweep.parameter, format_sig(v));
        summary.extend(run_single(&s, out_dir, &suffix)?);
    }
    Ok(summary)
}

/// State space, Hamiltonian and initial state of one run.
struct Prepared {
    bundle: HamiltonianBundle,
    h: OperatorMatrix,
    labels: Vec<BasisLabel>,
    rho0: DensityMatrix,
    /// Index of the initial basis state, if it is one.
    start: Option<usize>,
}

fn build_bundle(scenario: &Scenario) -> Result<HamiltonianBundle> {
    report::hamiltonian_in(&scenario.params, scenario.model, BasisKind::Product).map(|(b, _, _)| b)
}

fn prepare(scenario: &Scenario) -> Result<Prepared> {
    let bundle = build_bundle(scenario)?;
    match &scenario.initial {
        InitialState::Basis(label) => {
            let kind = match label {
                BasisLabel::Product { .. } => BasisKind::Product,
                BasisLabel::Device { .. } => BasisKind::Device,
                BasisLabel::TotalSpin { .. } => BasisKind::TotalSpin,
            };
            let t = transform_from_product(kind, bundle.spins)?;
            let h = t.apply_operator(&bundle.total)?;
            let start = find_label(&t.labels_out, label, scenario)?;
            let rho0 = DensityMatrix::basis_state(h.dim(), start, kind)?;
            Ok(Prepared {
                bundle,
                h,
                labels: t.labels_out,
                rho0,
                start: Some(start),
            })
        }
        InitialState::Filtered { theta, phi, coupled } => {
            let basis = DeviceBasis::new(bundle.spins);
            let h = basis.to_device(&bundle.total)?;
            let spinor = crate::filtering::spinor(*theta, *phi);
            let rho0 = crate::filtering::prepare_filtered(&basis, &spinor, *coupled)
                .map_err(|_| unknown_coupled(coupled, scenario))?;
            Ok(Prepared {
                bundle,
                h,
                labels: basis.labels().to_vec(),
                rho0,
                start: None,
            })
        }
    }
}

fn find_label(labels: &[BasisLabel], label: &BasisLabel, scenario: &Scenario) -> Result<usize> {
    labels.iter().position(|l| l == label).ok_or_else(|| {
        let examples: Vec<String> = labels.iter().take(4).map(|l| format!("\"{}\"", l.code())).collect();
        Error::Config(format!(
            "state `{}` does not exist in model {} (states look like {})",
            label.code(),
            scenario.model,
            examples.join(", ")
        ))
    })
}

fn unknown_coupled(c: &CoupledState, scenario: &Scenario) -> Error {
    Error::Config(format!(
        "coupled pair state `{}` does not exist in model {}",
        c.code(),
        scenario.model
    ))
}

/// Span covering [`AUTO_PERIODS`] periods of the slowest beat between
/// populated eigenstates, capped at [`MAX_AUTO_SPAN_PS`].
pub fn auto_span(h: &OperatorMatrix, rho0: &DensityMatrix) -> Result<f64> {
    let eig = hermitian_eig(h)?;
    let v = &eig.eigenvectors;
    let rho = rho0.matrix().matrix();
    let populated: Vec<f64> = (0..eig.dim())
        .filter(|&k| {
            let col = v.column(k);
            let p = (col.adjoint() * rho * col)[(0, 0)].re;
            p > POPULATION_TOL
        })
        .map(|k| eig.eigenvalues[k])
        .collect();
    let mut gap = f64::INFINITY;
    for (i, a) in populated.iter().enumerate() {
        for b in &populated[i + 1..] {
            let g = (a - b).abs();
            if g > MIN_GAP_CM && g < gap {
                gap = g;
            }
        }
    }
    if !gap.is_finite() {
        return Ok(100.0);
    }
    let period = 2.0 * std::f64::consts::PI / unit_convert(gap);
    Ok((AUTO_PERIODS * period).min(MAX_AUTO_SPAN_PS))
}

fn header(scenario: &Scenario, span: Option<f64>, output: &OutputSpec) -> Vec<String> {
    let mut lines = vec![
        format!("scenario: {}", scenario.name),
        format!("model: {}", scenario.model),
        format!("params: {}", scenario.params.describe()),
        format!("initial: {}", scenario.initial),
    ];
    if let Some(span) = span {
        lines.push(format!("time: span_ps={} points={}", format_sig(span), scenario.points));
    }
    lines.push(format!("output: {}", output.kind()));
    lines
}

fn output_path(scenario: &Scenario, out_dir: &Path, output: &OutputSpec, k: usize, suffix: &str) -> PathBuf {
    let stem = match output.file() {
        Some(f) => f.trim_end_matches(".csv").to_string(),
        None => {
            let same_kind = scenario
                .outputs
                .iter()
                .filter(|o| o.kind() == output.kind())
                .count();
            if same_kind > 1 {
                format!("{}_{}{}", scenario.name, output.kind(), k)
            } else {
                format!("{}_{}", scenario.name, output.kind())
            }
        }
    };
    out_dir.join(format!("{stem}{suffix}.csv"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn run_single(scenario: &Scenario, out_dir: &Path, suffix: &str) -> Result<RunSummary> {
    let needs_time = scenario
        .outputs
        .iter()
        .any(|o| matches!(o, OutputSpec::Channels { .. } | OutputSpec::Bloch { .. }));
    let prepared = prepare(scenario)?;
    let grid = if needs_time {
        let span = match scenario.span_ps {
            Some(s) => s,
            None => auto_span(&prepared.h, &prepared.rho0)?,
        };
        Some(TimeGrid::uniform(span, scenario.points)?)
    } else {
        None
    };
    let span = grid.as_ref().and_then(|g| g.times().last().copied());

    let mut summary = RunSummary::default();
    let mut kind_counter = std::collections::HashMap::new();
    for output in &scenario.outputs {
        let k = kind_counter.entry(output.kind()).or_insert(0usize);
        let path = output_path(scenario, out_dir, output, *k, suffix);
        *k += 1;
        let comments = header(scenario, span, output);
        let line = match output {
            OutputSpec::Channels { targets, measure, .. } => {
                let grid = grid.as_ref().expect("time grid");
                let ts = channels(scenario, &prepared, targets.as_deref(), *measure, grid)?;
                ts.write_csv(create(&path)?, &comments)?;
                let maxima: Vec<String> = ts
                    .channels
                    .iter()
                    .map(|c| format!("{} max {}", c.name, c.max().map(format_sig).unwrap_or("-".into())))
                    .collect();
                maxima.join("; ")
            }
            OutputSpec::Bloch { block, .. } => {
                let grid = grid.as_ref().expect("time grid");
                let (ts, states) = bloch(scenario, &prepared, block.as_ref(), grid)?;
                ts.write_csv(create(&path)?, &comments)?;
                format!("Bloch poles +z {} / -z {}", states[0], states[1])
            }
            OutputSpec::Scan {
                t_snapshot_ps,
                from,
                to,
                theta_in_points,
                theta_out_points,
                phi_in,
                phi_out,
                ..
            } => {
                let params = scenario
                    .params
                    .electron()
                    .ok_or_else(|| Error::Config("scan needs an electron model".into()))?;
                let from = match (from, &scenario.initial) {
                    (Some(f), _) => *f,
                    (None, InitialState::Filtered { coupled, .. }) => *coupled,
                    (None, InitialState::Basis(BasisLabel::Device {
                        twice_s23, twice_m23, ..
                    })) => CoupledState::new(*twice_s23, *twice_m23),
                    (None, _) => {
                        return Err(Error::Config("scan output needs `from` (a coupled pair state)".into()))
                    }
                };
                let setup = ScanSetup {
                    t_snapshot: *t_snapshot_ps,
                    from,
                    to: *to,
                    phi_in: *phi_in,
                    phi_out: *phi_out,
                };
                let grid = filter_scan(
                    params,
                    &angle_grid(*theta_in_points),
                    &angle_grid(*theta_out_points),
                    &setup,
                )
                .map_err(|e| match e {
                    Error::UnknownLabel(_) | Error::InvalidQuantumNumbers(_) => unknown_coupled(to, scenario),
                    other => other,
                })?;
                let mut comments = comments;
                comments.push(format!(
                    "scan: {} -> {} at t_ps={}",
                    from.ket(),
                    to.ket(),
                    format_sig(*t_snapshot_ps)
                ));
                grid.write_csv(create(&path)?, &comments)?;
                match grid.max() {
                    Some((ti, to, v)) => format!(
                        "peak {} at theta_in={} theta_out={}",
                        format_sig(v),
                        format_sig(ti),
                        format_sig(to)
                    ),
                    None => "no defined values".into(),
                }
            }
            OutputSpec::ResonanceReport { .. } => {
                let r = resonance_report(scenario.model, &scenario.params)?;
                r.write_csv(create(&path)?, &comments)?;
                summary.text.push_str(&r.text());
                format!("{} two-state blocks", r.rows.len())
            }
            OutputSpec::Balance { d, points, .. } => {
                let p = scenario
                    .params
                    .electron()
                    .ok_or_else(|| Error::Config("balance needs an electron model".into()))?;
                let d = d.unwrap_or(p.d);
                let curve = balance(p.spin(), d, *points)?;
                let mut comments = comments;
                comments.push(format!("balance: s={} d={}", p.spin(), format_sig(d)));
                curve.write_csv(create(&path)?, &comments)?;
                format!("J_R = {}", format_sig(curve.j_resonance))
            }
        };
        let _ = writeln!(summary.text, "{}: {}", path.display(), line);
        summary.files.push(path);
    }
    Ok(summary)
}

fn channels(
    scenario: &Scenario,
    prepared: &Prepared,
    targets: Option<&[String]>,
    measure: Option<(f64, f64)>,
    grid: &TimeGrid,
) -> Result<TimeSeries> {
    let evolver = Evolver::new(&prepared.h)?;
    if let (Some((theta_out, phi_out)), InitialState::Filtered { theta, phi, coupled }) =
        (measure, &scenario.initial)
    {
        let basis = DeviceBasis::new(prepared.bundle.spins);
        let targets: Vec<CoupledState> = match targets {
            Some(ts) => ts.iter().map(|t| CoupledState::parse(t)).collect::<Result<_>>()?,
            None => crate::basis::coupled_pair_states(basis.spins[1], basis.spins[2])
                .into_iter()
                .map(|(s, m)| CoupledState::new(s, m))
                .collect(),
        };
        for t in &targets {
            basis
                .pair_index(t.twice_s23, t.twice_m23)
                .map_err(|_| unknown_coupled(t, scenario))?;
        }
        let spec = FilterSpec::new(*theta, *phi, theta_out, phi_out)?;
        let ts = filtered_series(&evolver, &basis, &spec, *coupled, &targets, grid)?;
        let names: Vec<&str> = ts.channels.iter().map(|c| c.name.as_str()).collect();
        ts.check_probabilities(&names)?;
        return Ok(ts);
    }
    let dim = prepared.h.dim();
    let indices: Vec<usize> = match targets {
        Some(ts) => ts
            .iter()
            .map(|t| find_label(&prepared.labels, &config::parse_label(t)?, scenario))
            .collect::<Result<_>>()?,
        None => match prepared.start {
            Some(start) => block_decompose(&prepared.h, &prepared.labels)?
                .into_iter()
                .find(|b| b.contains(start))
                .map(|b| b.indices)
                .unwrap_or_else(|| vec![start]),
            None => (0..dim).collect(),
        },
    };
    let projectors: Vec<(String, OperatorMatrix)> = indices
        .iter()
        .map(|&i| (prepared.labels[i].to_string(), basis_projector(dim, i)))
        .collect();
    let ts = evolver.probability_series(&prepared.rho0, &projectors, grid)?;
    let names: Vec<&str> = ts.channels.iter().map(|c| c.name.as_str()).collect();
    ts.check_probabilities(&names)?;
    Ok(ts)
}

fn bloch(
    scenario: &Scenario,
    prepared: &Prepared,
    block: Option<&[BasisLabel; 2]>,
    grid: &TimeGrid,
) -> Result<(TimeSeries, [BasisLabel; 2])> {
    let start = prepared
        .start
        .ok_or_else(|| Error::Config("bloch output needs a basis-state initial state".into()))?;
    let mut idx = match block {
        Some([a, b]) => vec![
            find_label(&prepared.labels, a, scenario)?,
            find_label(&prepared.labels, b, scenario)?,
        ],
        None => block_decompose(&prepared.h, &prepared.labels)?
            .into_iter()
            .find(|b| b.contains(start))
            .map(|b| b.indices)
            .unwrap_or_default(),
    };
    idx.sort_unstable();
    idx.dedup();
    if idx.len() != 2 || !idx.contains(&start) {
        return Err(Error::Config(format!(
            "bloch output needs a two-state block containing the initial state {}",
            prepared.labels[start]
        )));
    }
    let leak = leakage(&prepared.h, &idx);
    if leak > report::LEAKAGE_TOL {
        return Err(Error::Config(format!(
            "states {} and {} are coupled to the rest of the system (|H| up to {:.3e}); pick a closed block",
            prepared.labels[idx[0]], prepared.labels[idx[1]], leak
        )));
    }
    let rho0 = prepared.rho0.restrict(&idx)?;
    let ts = bloch_trajectory_of(&prepared.h.submatrix(&idx), &rho0, grid)?;
    Ok((ts, [prepared.labels[idx[0]], prepared.labels[idx[1]]]))
}

/// δ(J) curve on the default grid over `(0, 3]·J_R`.
struct BalanceTable {
    j_resonance: f64,
    columns: [Vec<f64>; 6],
}

impl BalanceTable {
    fn write_csv(&self, out: impl std::io::Write, comments: &[String]) -> Result<()> {
        let headers = ["j", "j_over_jr", "delta", "alpha", "beta", "anisotropy_weight"].map(String::from);
        let n = self.columns[0].len();
        let rows = (0..n).map(|i| self.columns.iter().map(|c| Some(c[i])).collect());
        write_table(out, comments, &headers, rows)
    }
}

fn balance(s: Spin, d: f64, points: usize) -> Result<BalanceTable> {
    let grid = balance_grid(s, d, points);
    let c = eigen_balance(s, d, &grid)?;
    let ratio = c.j_values.iter().map(|j| j / c.j_resonance).collect();
    Ok(BalanceTable {
        j_resonance: c.j_resonance,
        columns: [c.j_values, ratio, c.delta, c.alpha, c.beta, c.anisotropy_weight],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_text(text: &str) -> (tempfile::TempDir, RunSummary) {
        let dir = tempfile::tempdir().unwrap();
        let s = Scenario::parse(text, "t").unwrap();
        let summary = run(&s, dir.path()).unwrap();
        (dir, summary)
    }

    #[test]
    fn minimal_scenario_writes_one_csv() {
        let (_dir, summary) = run_text("model = \"s_one\"\n");
        assert_eq!(summary.files.len(), 1);
        let text = fs::read_to_string(&summary.files[0]).unwrap();
        assert!(text.starts_with("# scenario: t\n# model: s_one\n# params: s=1 "));
        let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header, "time_ps,\"|↑⟩|2,1⟩\",\"|↓⟩|2,2⟩\"");
        assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 1000);
    }

    #[test]
    fn runs_are_byte_identical() {
        let cfg = "model = \"s_half\"\n[[outputs]]\nkind = \"channels\"\n[[outputs]]\nkind = \"bloch\"\n";
        let (_a, sa) = run_text(cfg);
        let (_b, sb) = run_text(cfg);
        for (x, y) in sa.files.iter().zip(&sb.files) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
    }

    #[test]
    fn sweep_suffixes_files() {
        let cfg = "model = \"s_one\"\n[time]\nspan_ps = 10.0\npoints = 11\n\
                   [sweep]\nparameter = \"jk\"\nvalues = [-0.4, -0.3]\n";
        let (_d, s) = run_text(cfg);
        let names: Vec<String> = s
            .files
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["t_channels_jk-0.4.csv", "t_channels_jk-0.3.csv"]);
    }

    #[test]
    fn unknown_state_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let s = Scenario::parse("model = \"s_half\"\n[initial]\nstate = \"down|2,2\"\n", "t").unwrap();
        let err = run(&s, dir.path()).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("down|2,2"), "{err}");
    }

    #[test]
    fn auto_span_covers_two_periods() {
        let s = Scenario::parse("model = \"s_one\"\n", "t").unwrap();
        let p = prepare(&s).unwrap();
        let span = auto_span(&p.h, &p.rho0).unwrap();
        // |↓⟩|2,2⟩ at resonance: P(t) period π/ω with Ω = 0.4 cm⁻¹.
        let period = std::f64::consts::PI / unit_convert(0.4);
        assert!(span >= 2.0 * period, "{span} vs {period}");
    }

    #[test]
    fn bloch_rejects_open_blocks() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = "model = \"s_one\"\n[[outputs]]\nkind = \"bloch\"\nblock = [\"down|2,2\", \"up|2,0\"]\n";
        let s = Scenario::parse(cfg, "t").unwrap();
        assert!(run(&s, dir.path()).is_err());
    }

    #[test]
    fn all_output_kinds() {
        let cfg = "model = \"s_one\"\n[time]\nspan_ps = 20.0\npoints = 21\n\
                   [[outputs]]\nkind = \"channels\"\n\
                   [[outputs]]\nkind = \"bloch\"\n\
                   [[outputs]]\nkind = \"scan\"\nt_snapshot_ps = 10.0\nto = \"2,1\"\ntheta_in_points = 3\ntheta_out_points = 4\n\
                   [[outputs]]\nkind = \"resonance_report\"\n\
                   [[outputs]]\nkind = \"balance\"\npoints = 5\n";
        let (_d, s) = run_text(cfg);
        assert_eq!(s.files.len(), 5);
        let scan = fs::read_to_string(&s.files[2]).unwrap();
        assert_eq!(scan.lines().filter(|l| !l.starts_with('#')).count(), 1 + 12);
        let bal = fs::read_to_string(&s.files[4]).unwrap();
        assert!(bal.contains("j,j_over_jr,delta,alpha,beta,anisotropy_weight"));
    }
}
