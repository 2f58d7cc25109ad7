//! Independent oracles: a Taylor-series matrix exponential that never touches
//! the eigensolver, and a brute-force Rabi estimator that evolves the full
//! model without any block reduction.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{dj_resonance, rabi, trimer_two_level, TrimerBlock};
use crate::basis::{product_to_device, transform_from_product, BasisKind, BasisLabel};
use crate::dynamics::{basis_projector, DensityMatrix, Evolver, ExpectationTrace, TimeGrid};
use crate::error::{Error, Result};
use crate::linalg::{propagator, OperatorMatrix};
use crate::model::{build_hamiltonian, build_trimer, rad_per_ps_to_cm, unit_convert, HamiltonianBundle, ModelParams};
use crate::spin::Spin;

/// `exp(−i H t)` by scaling and squaring of the Taylor series.
pub fn series_expm_oracle(h: &OperatorMatrix, t: f64) -> OperatorMatrix {
    let n = h.dim();
    let a = h.matrix() * Complex64::new(0.0, -t);
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm1 > 0.5 {
        (norm1 / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let b = &a / Complex64::new(2f64.powi(squarings as i32), 0.0);
    let mut sum = DMatrix::<Complex64>::identity(n, n);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    for k in 1..=40 {
        term = &term * &b / Complex64::new(k as f64, 0.0);
        sum += &term;
        if term.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-20 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    OperatorMatrix::new(sum)
}

/// Result of [`brute_force_rabi`].
#[derive(Clone, Debug, PartialEq)]
pub struct RabiEstimate {
    /// Largest refined peak of the transition probability.
    pub p_max: f64,
    /// Rabi frequency in cm⁻¹ from the peak spacing; `None` when the
    /// channel does not oscillate.
    pub omega: Option<f64>,
    pub peak_times: Vec<f64>,
}

impl RabiEstimate {
    pub fn oscillatory(&self) -> bool {
        self.omega.is_some()
    }
}

/// Evolves `|from⟩` under the full Hamiltonian (product basis, cm⁻¹),
/// expressed in `kind`, and measures `|to⟩`. Peaks on the grid are
/// refined by golden-section search; `Ω = π / (mean peak spacing)`.
pub fn brute_force_rabi(
    bundle: &HamiltonianBundle,
    kind: BasisKind,
    from: &BasisLabel,
    to: &BasisLabel,
    grid: &TimeGrid,
) -> Result<RabiEstimate> {
    let transform = transform_from_product(kind, bundle.spins)?;
    let h = transform.apply_operator(&bundle.total)?;
    let find = |l: &BasisLabel| {
        transform
            .labels_out
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| Error::UnknownLabel(l.code()))
    };
    let (i, j) = (find(from)?, find(to)?);
    let evolver = Evolver::new(&h)?;
    let rho0 = DensityMatrix::basis_state(h.dim(), i, kind)?;
    let trace = evolver.trace(&rho0, &basis_projector(h.dim(), j))?;
    Ok(estimate_from_trace(&trace, grid))
}

fn estimate_from_trace(trace: &ExpectationTrace, grid: &TimeGrid) -> RabiEstimate {
    let t = grid.times();
    let p: Vec<f64> = t.par_iter().map(|&x| trace.eval(x)).collect();
    let global = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if t.len() < 3 || global < 1e-9 {
        return RabiEstimate {
            p_max: global.max(0.0),
            omega: None,
            peak_times: Vec::new(),
        };
    }
    let mut peaks = Vec::new();
    for k in 1..t.len() - 1 {
        if p[k] > p[k - 1] && p[k] >= p[k + 1] && p[k] > 0.5 * global {
            peaks.push(golden_max(|x| trace.eval(x), t[k - 1], t[k + 1]));
        }
    }
    let p_max = peaks.iter().map(|&(_, v)| v).fold(global, f64::max);
    let peak_times: Vec<f64> = peaks.iter().map(|&(x, _)| x).collect();
    let omega = (peak_times.len() >= 2).then(|| {
        let spacing = (peak_times[peak_times.len() - 1] - peak_times[0]) / (peak_times.len() - 1) as f64;
        rad_per_ps_to_cm(PI / spacing)
    });
    RabiEstimate {
        p_max,
        omega,
        peak_times,
    }
}

/// Maximiser of a unimodal `f` on `[a, b]`.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-12 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Uniform grid spanning `periods` oscillations of `P(t)` at `omega_cm`.
pub fn rabi_grid(omega_cm: f64, periods: f64, points: usize) -> Result<TimeGrid> {
    TimeGrid::uniform(periods * PI / unit_convert(omega_cm), points)
}

/// One oracle check with its declared tolerance.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
        }
    }

    pub fn passed(&self) -> bool {
        self.residual.is_finite() && self.residual <= self.tolerance
    }
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<4} {:<48} residual {:>10.3e}  tolerance {:>8.1e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.residual,
            self.tolerance
        )
    }
}

/// Random Hermitian matrix with entries of order one.
pub fn random_hermitian(rng: &mut impl Rng, dim: usize) -> OperatorMatrix {
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    for i in 0..dim {
        m[(i, i)] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
        for j in (i + 1)..dim {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    OperatorMatrix::hermitian(m).expect("constructed Hermitian")
}

fn rabi_report(
    name: &str,
    bundle: &HamiltonianBundle,
    kind: BasisKind,
    states: [BasisLabel; 2],
    expect_p: f64,
    expect_omega: f64,
) -> Result<Vec<OracleReport>> {
    let grid = rabi_grid(expect_omega, 3.2, 2000)?;
    let est = brute_force_rabi(bundle, kind, &states[0], &states[1], &grid)?;
    let omega_err = est
        .omega
        .map_or(f64::INFINITY, |w| (w - expect_omega).abs() / expect_omega);
    Ok(vec![
        OracleReport::new(format!("{name}: p_max"), (est.p_max - expect_p).abs(), 1e-6),
        OracleReport::new(format!("{name}: relative Ω error"), omega_err, 5e-3),
    ])
}

/// The full oracle batch run by the `verify` command.
pub fn run_oracle_batch(seed: u64, instances: usize) -> Result<Vec<OracleReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases: Vec<(OperatorMatrix, f64)> = (0..instances)
        .map(|k| {
            let dim = 2 + k % 17;
            (random_hermitian(&mut rng, dim), rng.random_range(0.0..3.0))
        })
        .collect();
    let residuals: Vec<(f64, f64)> = cases
        .par_iter()
        .map(|(h, t)| {
            let u = propagator(h, *t)?;
            Ok((
                u.max_abs_diff(&series_expm_oracle(h, *t)),
                u.unitarity_residual(),
            ))
        })
        .collect::<Result<_>>()?;
    let worst = |f: fn(&(f64, f64)) -> f64| residuals.iter().map(f).fold(0.0, f64::max);
    let mut reports = vec![
        OracleReport::new(
            format!("propagator vs series exponential ({instances} random, dim ≤ 18)"),
            worst(|r| r.0),
            1e-9,
        ),
        OracleReport::new("propagator unitarity", worst(|r| r.1), 1e-10),
    ];
    let cg = (1..=10)
        .map(|twice| product_to_device(Spin::from_twice(twice), Spin::from_twice(twice)).matrix.unitarity_residual())
        .fold(0.0, f64::max);
    reports.push(OracleReport::new("coupling transform unitarity (s ≤ 5)", cg, 1e-12));

    let d = -0.60;
    let jr = dj_resonance(Spin::ONE, d).j;
    let s_one = build_hamiltonian(&ModelParams::reference(Spin::ONE).with_kondo(jr))?;
    reports.extend(rabi_report(
        "s=1 DJ resonance",
        &s_one,
        BasisKind::Device,
        [BasisLabel::device(-1, 4, 4), BasisLabel::device(1, 4, 2)],
        1.0,
        (2.0 / 3.0) * d.abs(),
    )?);

    let jk: f64 = -0.40;
    let s_half = build_hamiltonian(&ModelParams::reference(Spin::HALF))?;
    let r = rabi(jk.abs() / 2f64.sqrt(), jk / 4.0)?;
    reports.extend(rabi_report(
        "s=1/2 ceiling",
        &s_half,
        BasisKind::Device,
        [BasisLabel::device(-1, 2, 2), BasisLabel::device(1, 2, 0)],
        r.p_max,
        r.omega,
    )?);

    let j = 0.3;
    let trimer = build_trimer(j, j);
    let block = TrimerBlock::DeviceM1 { positive: true };
    let (ox, oz) = trimer_two_level(block, j, j);
    let r = rabi(ox, oz)?;
    reports.extend(rabi_report(
        "trimer m=+1 at D=J",
        &trimer,
        block.basis(),
        block.states(),
        r.p_max,
        r.omega,
    )?);
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_oracle_basics() {
        let h = OperatorMatrix::from_real_diagonal(&[0.5, -1.5, 2.0]);
        assert!(series_expm_oracle(&h, 0.0).max_abs_diff(&OperatorMatrix::identity(3)) == 0.0);
        let u = series_expm_oracle(&h, 1.7);
        for (k, l) in [0.5, -1.5, 2.0].iter().enumerate() {
            let expect = Complex64::from_polar(1.0, -l * 1.7);
            assert!((u.get(k, k) - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn series_oracle_matches_propagator_on_large_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = random_hermitian(&mut rng, 12).scale(30.0);
        let u = propagator(&h, 2.0).unwrap();
        assert!(u.max_abs_diff(&series_expm_oracle(&h, 2.0)) < 1e-9);
    }

    #[test]
    fn golden_section_finds_cosine_peak() {
        let (x, v) = golden_max(|t| (t - 1.3).cos(), 0.0, 2.5);
        assert!((x - 1.3).abs() < 1e-6);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_channel_is_flagged() {
        let p = ModelParams::zero(Spin::ONE).with_anisotropy(-0.6);
        let h = build_hamiltonian(&p).unwrap();
        let grid = TimeGrid::uniform(100.0, 200).unwrap();
        let est = brute_force_rabi(
            &h,
            BasisKind::Device,
            &BasisLabel::device(-1, 4, 4),
            &BasisLabel::device(1, 4, 2),
            &grid,
        )
        .unwrap();
        assert!(!est.oscillatory());
        assert!(est.p_max < 1e-12);
    }

    #[test]
    fn unknown_label_rejected() {
        let h = build_hamiltonian(&ModelParams::reference(Spin::HALF)).unwrap();
        let grid = TimeGrid::uniform(10.0, 10).unwrap();
        let err = brute_force_rabi(
            &h,
            BasisKind::Device,
            &BasisLabel::device(-1, 4, 4),
            &BasisLabel::device(1, 2, 0),
            &grid,
        );
        assert!(matches!(err, Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn batch_passes() {
        let reports = run_oracle_batch(11, 20).unwrap();
        for r in &reports {
            assert!(r.passed(), "{r}");
        }
    }
}
