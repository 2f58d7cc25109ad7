//! Spinor-filtered preparation and measurement of particle 1.
//!
//! A filtered state is `χ_in ⊗ |s23, m23⟩`. A measurement conditioned on
//! particle 1 being found along `χ_out` reports
//!
//! ```text
//! P_rel(t) = tr(ρ(t) · P_out ⊗ P_target) / tr(ρ(t) · P_out ⊗ 1)
//! ```
//!
//! with `P_out = |χ_out⟩⟨χ_out|`. Samples whose denominator falls below
//! [`DENOMINATOR_GUARD`] are undefined.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::basis::{BasisKind, DeviceBasis};
use crate::dynamics::{Channel, DensityMatrix, Evolver, TimeGrid, TimeSeries};
use crate::error::{Error, Result};
use crate::linalg::{kron, OperatorMatrix};
use crate::model::{build_hamiltonian, ModelParams};
use crate::output::write_table;
use crate::spin::fmt_half;

pub const DENOMINATOR_GUARD: f64 = 1e-12;

/// Preparation and measurement directions of particle 1, in radians.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterSpec {
    pub theta_in: f64,
    pub phi_in: f64,
    pub theta_out: f64,
    pub phi_out: f64,
}

impl FilterSpec {
    pub fn new(theta_in: f64, phi_in: f64, theta_out: f64, phi_out: f64) -> Result<Self> {
        check_angles(theta_in, phi_in)?;
        check_angles(theta_out, phi_out)?;
        Ok(Self {
            theta_in,
            phi_in,
            theta_out,
            phi_out,
        })
    }

    /// Zero azimuths.
    pub fn polar(theta_in: f64, theta_out: f64) -> Result<Self> {
        Self::new(theta_in, 0.0, theta_out, 0.0)
    }

    pub fn chi_in(&self) -> DVector<Complex64> {
        spinor(self.theta_in, self.phi_in)
    }

    pub fn chi_out(&self) -> DVector<Complex64> {
        spinor(self.theta_out, self.phi_out)
    }
}

fn check_angles(theta: f64, phi: f64) -> Result<()> {
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::InvalidParams(format!("polar angle {theta} outside [0, π]")));
    }
    if !(0.0..2.0 * PI).contains(&phi) {
        return Err(Error::InvalidParams(format!("azimuth {phi} outside [0, 2π)")));
    }
    Ok(())
}

/// `(cos(θ/2) e^{−iφ/2}, sin(θ/2) e^{iφ/2})`.
pub fn spinor(theta: f64, phi: f64) -> DVector<Complex64> {
    DVector::from_vec(vec![
        Complex64::from_polar((theta / 2.0).cos(), -phi / 2.0),
        Complex64::from_polar((theta / 2.0).sin(), phi / 2.0),
    ])
}

/// A coupled-pair state `|s23, m23⟩`, stored doubled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CoupledState {
    pub twice_s23: i32,
    pub twice_m23: i32,
}

impl CoupledState {
    pub fn new(twice_s23: i32, twice_m23: i32) -> Self {
        Self {
            twice_s23,
            twice_m23,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (s, m) = crate::basis::parse_coupled(text)?;
        Ok(Self::new(s, m))
    }

    pub fn code(&self) -> String {
        format!("{},{}", fmt_half(self.twice_s23), fmt_half(self.twice_m23))
    }

    /// `|s23,m23⟩` as shown in channel names.
    pub fn ket(&self) -> String {
        format!("|{}⟩", self.code())
    }

    fn pair_vector(&self, basis: &DeviceBasis) -> Result<DVector<Complex64>> {
        let k = basis.pair_index(self.twice_s23, self.twice_m23)?;
        let mut v = DVector::zeros(basis.pair_dim());
        v[k] = Complex64::new(1.0, 0.0);
        Ok(v)
    }
}

fn kron_vec(a: &DVector<Complex64>, b: &DVector<Complex64>) -> DVector<Complex64> {
    let mut out = DVector::zeros(a.len() * b.len());
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i * b.len() + j] = a[i] * b[j];
        }
    }
    out
}

/// `(χ ⊗ |s23,m23⟩)(·)†` in the device basis of a spin-½ particle 1.
pub fn prepare_filtered(
    basis: &DeviceBasis,
    chi: &DVector<Complex64>,
    coupled: CoupledState,
) -> Result<DensityMatrix> {
    if basis.spins[0].dim() != chi.len() {
        return Err(Error::DimensionMismatch {
            expected: basis.spins[0].dim(),
            found: chi.len(),
        });
    }
    let pair = coupled.pair_vector(basis)?;
    DensityMatrix::pure(&kron_vec(chi, &pair), BasisKind::Device)
}

/// `(P_out ⊗ P_target, P_out ⊗ 1)` in the device basis.
fn conditioned_projectors(
    basis: &DeviceBasis,
    chi_out: &DVector<Complex64>,
    target: CoupledState,
) -> Result<(OperatorMatrix, OperatorMatrix)> {
    let p_out = OperatorMatrix::outer(chi_out);
    let p_target = OperatorMatrix::outer(&target.pair_vector(basis)?);
    Ok((
        kron(&p_out, &p_target),
        kron(&p_out, &OperatorMatrix::identity(basis.pair_dim())),
    ))
}

fn ratio(num: f64, den: f64) -> Option<f64> {
    (den >= DENOMINATOR_GUARD).then(|| num / den)
}

/// Relative transition probabilities into each target along evolved states.
pub fn relative_transition(
    basis: &DeviceBasis,
    times: &[f64],
    states: &[DensityMatrix],
    chi_out: &DVector<Complex64>,
    targets: &[CoupledState],
) -> Result<TimeSeries> {
    if times.len() != states.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: states.len(),
        });
    }
    let mut ts = TimeSeries::new(times.to_vec());
    for &target in targets {
        let (num, den) = conditioned_projectors(basis, chi_out, target)?;
        let values = states
            .iter()
            .map(|rho| ratio(rho.expectation(&num), rho.expectation(&den)))
            .collect();
        ts.push(Channel {
            name: target.ket(),
            values,
        })?;
    }
    Ok(ts)
}

/// Evolution of a filtered state with relative channels for each target,
/// via the eigenbasis fast path.
pub fn filtered_series(
    evolver: &Evolver,
    basis: &DeviceBasis,
    spec: &FilterSpec,
    from: CoupledState,
    targets: &[CoupledState],
    grid: &TimeGrid,
) -> Result<TimeSeries> {
    let rho0 = prepare_filtered(basis, &spec.chi_in(), from)?;
    let chi_out = spec.chi_out();
    let mut ts = TimeSeries::new(grid.times().to_vec());
    for &target in targets {
        let (num, den) = conditioned_projectors(basis, &chi_out, target)?;
        let series = evolver.expectation_series(&rho0, &[&num, &den], grid)?;
        let values = series[0]
            .iter()
            .zip(&series[1])
            .map(|(&n, &d)| ratio(n, d))
            .collect();
        ts.push(Channel {
            name: target.ket(),
            values,
        })?;
    }
    Ok(ts)
}

/// Relative probability over a (θ_in, θ_out) grid at one snapshot time.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanGrid {
    pub theta_in: Vec<f64>,
    pub theta_out: Vec<f64>,
    /// `values[i][j]` at `(theta_in[i], theta_out[j])`.
    pub values: Vec<Vec<Option<f64>>>,
    pub t_snapshot: f64,
}

impl ScanGrid {
    pub fn max(&self) -> Option<(f64, f64, f64)> {
        let mut best: Option<(f64, f64, f64)> = None;
        for (i, row) in self.values.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = *v {
                    if best.is_none_or(|b| v > b.2) {
                        best = Some((self.theta_in[i], self.theta_out[j], v));
                    }
                }
            }
        }
        best
    }

    /// Columns `theta_in, theta_out, value`, θ_in outermost.
    pub fn write_csv<W: Write>(&self, out: W, comments: &[String]) -> Result<()> {
        let headers = ["theta_in", "theta_out", "value"].map(String::from);
        let rows = self.values.iter().enumerate().flat_map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(move |(j, v)| vec![Some(self.theta_in[i]), Some(self.theta_out[j]), *v])
        });
        write_table(out, comments, &headers, rows)
    }
}

/// `n` evenly spaced angles on `[0, π]`.
pub fn angle_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|k| PI * k as f64 / (n - 1) as f64).collect(),
    }
}

/// Scan options besides the angle grids.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanSetup {
    pub t_snapshot: f64,
    pub from: CoupledState,
    pub to: CoupledState,
    pub phi_in: f64,
    pub phi_out: f64,
}

impl ScanSetup {
    /// Azimuths zero.
    pub fn new(t_snapshot: f64, from: CoupledState, to: CoupledState) -> Self {
        Self {
            t_snapshot,
            from,
            to,
            phi_in: 0.0,
            phi_out: 0.0,
        }
    }
}

/// One evolution per θ_in (in parallel), evaluated at every θ_out.
pub fn filter_scan(
    params: &ModelParams,
    theta_in: &[f64],
    theta_out: &[f64],
    setup: &ScanSetup,
) -> Result<ScanGrid> {
    if theta_in.is_empty() || theta_out.is_empty() {
        return Err(Error::InvalidParams("scan grids must be nonempty".into()));
    }
    for &t in theta_in.iter().chain(theta_out) {
        check_angles(t, setup.phi_in)?;
        check_angles(t, setup.phi_out)?;
    }
    TimeGrid::new(vec![setup.t_snapshot])?;
    let h = build_hamiltonian(params)?;
    let basis = DeviceBasis::new(h.spins);
    let hd = basis.to_device(&h.total)?;
    let u = Evolver::new(&hd)?.propagator(setup.t_snapshot);
    let outs: Vec<(OperatorMatrix, OperatorMatrix)> = theta_out
        .iter()
        .map(|&t| conditioned_projectors(&basis, &spinor(t, setup.phi_out), setup.to))
        .collect::<Result<_>>()?;
    let values = theta_in
        .par_iter()
        .map(|&ti| {
            let rho0 = prepare_filtered(&basis, &spinor(ti, setup.phi_in), setup.from)?;
            let rho = rho0.matrix().conjugate_by(u.matrix());
            Ok(outs
                .iter()
                .map(|(num, den)| {
                    let n = trace_product(num, &rho);
                    let d = trace_product(den, &rho);
                    ratio(n, d)
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<Option<f64>>>>>()?;
    Ok(ScanGrid {
        theta_in: theta_in.to_vec(),
        theta_out: theta_out.to_vec(),
        values,
        t_snapshot: setup.t_snapshot,
    })
}

fn trace_product(a: &OperatorMatrix, b: &OperatorMatrix) -> f64 {
    let n = a.dim();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (a.get(i, k) * b.get(k, i)).re;
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::basis_projector;
    use crate::spin::Spin;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn s_half() -> (ModelParams, DeviceBasis, Evolver) {
        let p = ModelParams::reference(Spin::HALF);
        let h = build_hamiltonian(&p).unwrap();
        let basis = DeviceBasis::new(h.spins);
        let hd = basis.to_device(&h.total).unwrap();
        (p, basis, Evolver::new(&hd).unwrap())
    }

    #[test]
    fn spinor_poles_and_equator() {
        let n = spinor(0.0, 0.0);
        assert_eq!((n[0].re, n[1].norm()), (1.0, 0.0));
        let s = spinor(PI, 0.0);
        assert!(s[0].norm() < 1e-16 && (s[1].re - 1.0).abs() < 1e-16);
        let e = spinor(FRAC_PI_2, 0.0);
        assert!((e[0].re - FRAC_1_SQRT_2).abs() < 1e-15 && (e[1].re - FRAC_1_SQRT_2).abs() < 1e-15);
        for (t, p) in [(0.3, 1.1), (2.9, 6.0)] {
            assert!((spinor(t, p).norm() - 1.0).abs() < 1e-15);
        }
        assert!(FilterSpec::new(-0.1, 0.0, 0.0, 0.0).is_err());
        assert!(FilterSpec::new(0.0, 2.0 * PI, 0.0, 0.0).is_err());
    }

    #[test]
    fn south_pole_preparation_is_a_basis_state() {
        let (_, basis, _) = s_half();
        let rho = prepare_filtered(&basis, &spinor(PI, 0.0), CoupledState::new(2, 2)).unwrap();
        let k = basis.parse("down|1,1").unwrap();
        assert!(rho.matrix().max_abs_diff(&basis_projector(basis.dim(), k)) < 1e-16);
        assert!((rho.purity() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn equator_preparation_is_coherent() {
        let (_, basis, _) = s_half();
        let rho = prepare_filtered(&basis, &spinor(FRAC_PI_2, 0.0), CoupledState::new(2, 2)).unwrap();
        let up = basis.parse("up|1,1").unwrap();
        let down = basis.parse("down|1,1").unwrap();
        assert!((rho.matrix().get(up, down).re - 0.5).abs() < 1e-15);
        assert!((rho.matrix().get(up, up).re - 0.5).abs() < 1e-15);
        assert!((rho.trace().re - 1.0).abs() < 1e-15);
        assert!(prepare_filtered(&basis, &spinor(0.0, 0.0), CoupledState::new(4, 0)).is_err());
    }

    fn all_targets() -> Vec<CoupledState> {
        vec![
            CoupledState::new(2, 2),
            CoupledState::new(2, 0),
            CoupledState::new(2, -2),
            CoupledState::new(0, 0),
        ]
    }

    #[test]
    fn relative_channels_are_normalised() {
        let (_, basis, ev) = s_half();
        let spec = FilterSpec::polar(2.0, 0.7).unwrap();
        let grid = TimeGrid::uniform(200.0, 60).unwrap();
        let ts = filtered_series(&ev, &basis, &spec, CoupledState::new(2, 2), &all_targets(), &grid).unwrap();
        for k in 0..grid.len() {
            let sum: f64 = ts.channels.iter().map(|c| c.values[k].unwrap()).sum();
            assert!((sum - 1.0).abs() < 1e-9);
            for c in &ts.channels {
                let v = c.values[k].unwrap();
                assert!((-1e-9..=1.0 + 1e-9).contains(&v));
            }
        }
    }

    #[test]
    fn orthogonal_spinor_pair_recovers_populations() {
        let (_, basis, ev) = s_half();
        let spec = FilterSpec::polar(1.3, 0.0).unwrap();
        let rho0 = prepare_filtered(&basis, &spec.chi_in(), CoupledState::new(2, 2)).unwrap();
        let grid = TimeGrid::uniform(100.0, 7).unwrap();
        let states = ev.evolve(&rho0, &grid).unwrap();
        let target = CoupledState::new(2, 0);
        let (theta, phi) = (0.4, 0.9);
        let chi_a = spinor(theta, phi);
        let chi_b = spinor(PI - theta, phi + PI);
        let (na, _) = conditioned_projectors(&basis, &chi_a, target).unwrap();
        let (nb, _) = conditioned_projectors(&basis, &chi_b, target).unwrap();
        let up = basis.index_of(&crate::basis::BasisLabel::device(1, 2, 0)).unwrap();
        let down = basis.index_of(&crate::basis::BasisLabel::device(-1, 2, 0)).unwrap();
        let unconditioned = &basis_projector(basis.dim(), up) + &basis_projector(basis.dim(), down);
        for rho in &states {
            let split = rho.expectation(&na) + rho.expectation(&nb);
            assert!((split - rho.expectation(&unconditioned)).abs() < 1e-14);
        }
    }

    #[test]
    fn basis_aligned_measurement_of_the_initial_state() {
        let (_, basis, _) = s_half();
        let rho = prepare_filtered(&basis, &spinor(PI, 0.0), CoupledState::new(2, 2)).unwrap();
        let ts = relative_transition(&basis, &[0.0], &[rho.clone()], &spinor(PI, 0.0), &[CoupledState::new(2, 2)]).unwrap();
        assert_eq!(ts.channels[0].values[0], Some(1.0));
        let ts = relative_transition(&basis, &[0.0], &[rho], &spinor(0.0, 0.0), &[CoupledState::new(2, 2)]).unwrap();
        assert_eq!(ts.channels[0].values[0], None);
    }

    #[test]
    fn scan_reflection_symmetry() {
        let (p, _, _) = s_half();
        let grid = angle_grid(5);
        let from = CoupledState::new(2, 2);
        let to = CoupledState::new(2, 0);
        let a = filter_scan(&p, &grid, &grid, &ScanSetup::new(133.0, from, to)).unwrap();
        let mut setup = ScanSetup::new(133.0, from, to);
        setup.phi_in = PI;
        setup.phi_out = PI;
        let b = filter_scan(&p, &grid, &grid, &setup).unwrap();
        for (ra, rb) in a.values.iter().zip(&b.values) {
            for (x, y) in ra.iter().zip(rb) {
                match (x, y) {
                    (Some(x), Some(y)) => assert!((x - y).abs() < 1e-12),
                    (None, None) => {}
                    _ => panic!("definedness differs"),
                }
            }
        }
        let single = filter_scan(&p, &[0.0], &[0.0], &ScanSetup::new(133.0, from, to)).unwrap();
        assert!(single.values[0][0].is_some());
    }

    #[test]
    fn scan_csv_layout() {
        let g = ScanGrid {
            theta_in: vec![0.0, 1.0],
            theta_out: vec![0.5],
            values: vec![vec![Some(0.25)], vec![None]],
            t_snapshot: 1.0,
        };
        let mut buf = Vec::new();
        g.write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "theta_in,theta_out,value\n0,0.5,0.25\n1,0.5,\n");
    }
}
