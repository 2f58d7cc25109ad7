//! Exact unitary evolution `ρ(t) = U(t) ρ(0) U†(t)` of static Hamiltonians
//! and the time series extracted from it.
//!
//! Hamiltonians are given in cm⁻¹ and converted to rad/ps once, when the
//! [`Evolver`] diagonalises them. Times are in ps.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

pub use crate::basis::BasisKind;
use crate::basis::{SpinBlock, TwoLevel};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, EigenSystem, OperatorMatrix};
use crate::model::unit_convert;
use crate::output::write_table;

pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-10;
pub const PROJECTOR_TOL: f64 = 1e-10;
pub const PROBABILITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: OperatorMatrix,
    basis: BasisKind,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: OperatorMatrix, basis: BasisKind) -> Result<Self> {
        let mut matrix = matrix;
        matrix
            .check_hermitian()
            .map_err(|e| Error::InvalidDensityMatrix(e.to_string()))?;
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace is {:.3e}{:+.3e}i, expected 1",
                tr.re, tr.im
            )));
        }
        let min = hermitian_eig(&matrix)?.eigenvalues.min();
        if min < -POSITIVITY_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "smallest eigenvalue {min:.3e} is negative"
            )));
        }
        Ok(Self { matrix, basis })
    }

    /// `|ψ⟩⟨ψ|` for a normalised copy of `psi`.
    pub fn pure(psi: &DVector<Complex64>, basis: BasisKind) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidDensityMatrix("zero state vector".into()));
        }
        Ok(Self {
            matrix: OperatorMatrix::outer(&(psi / Complex64::new(norm, 0.0))),
            basis,
        })
    }

    /// Pure basis state `|index⟩`.
    pub fn basis_state(dim: usize, index: usize, basis: BasisKind) -> Result<Self> {
        if index >= dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: index + 1,
            });
        }
        let mut v = DVector::zeros(dim);
        v[index] = Complex64::new(1.0, 0.0);
        Self::pure(&v, basis)
    }

    /// Uniform mixture `1/n`.
    pub fn maximally_mixed(dim: usize, basis: BasisKind) -> Self {
        Self {
            matrix: OperatorMatrix::identity(dim).scale(1.0 / dim as f64),
            basis,
        }
    }

    pub fn matrix(&self) -> &OperatorMatrix {
        &self.matrix
    }

    pub fn basis(&self) -> BasisKind {
        self.basis
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        (self.matrix.matrix() * self.matrix.matrix()).trace().re
    }

    /// `Re tr(A ρ)`.
    pub fn expectation(&self, op: &OperatorMatrix) -> f64 {
        trace_of_product(op.matrix(), self.matrix.matrix()).re
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(hermitian_eig(&self.matrix)?.eigenvalues.min())
    }

    /// Principal sub-block, renormalised to unit trace.
    pub fn restrict(&self, indices: &[usize]) -> Result<Self> {
        let sub = self.matrix.submatrix(indices);
        let tr = sub.trace().re;
        if tr <= TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(
                "no population in the requested subspace".into(),
            ));
        }
        Self::new(sub.scale(1.0 / tr), BasisKind::Block)
    }
}

/// `tr(A B)` in O(n²).
fn trace_of_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for k in 0..n {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Non-negative, strictly increasing sample times in ps.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidTimeGrid("no time points".into()));
        }
        for (k, &t) in times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(Error::InvalidTimeGrid(format!(
                    "time #{k} = {t} must be finite and non-negative"
                )));
            }
            if k > 0 && t <= times[k - 1] {
                return Err(Error::InvalidTimeGrid(format!(
                    "times must increase strictly (t[{}] = {}, t[{k}] = {t})",
                    k - 1,
                    times[k - 1]
                )));
            }
        }
        Ok(Self { times })
    }

    /// `points` equally spaced times on `[0, span]`.
    pub fn uniform(span_ps: f64, points: usize) -> Result<Self> {
        if points == 0 {
            return Err(Error::InvalidTimeGrid("at least one point required".into()));
        }
        if points == 1 {
            return Self::new(vec![0.0]);
        }
        if !span_ps.is_finite() || span_ps <= 0.0 {
            return Err(Error::InvalidTimeGrid(format!(
                "span must be positive, got {span_ps}"
            )));
        }
        let step = span_ps / (points - 1) as f64;
        Self::new((0..points).map(|k| k as f64 * step).collect())
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A named channel; `None` marks an undefined sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub name: String,
    pub values: Vec<Option<f64>>,
}

impl Channel {
    pub fn defined(name: impl Into<String>, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values: values.into_iter().map(Some).collect(),
        }
    }

    /// Largest defined value.
    pub fn max(&self) -> Option<f64> {
        self.values.iter().flatten().copied().reduce(f64::max)
    }

    pub fn min(&self) -> Option<f64> {
        self.values.iter().flatten().copied().reduce(f64::min)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub channels: Vec<Channel>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>) -> Self {
        Self {
            times,
            channels: Vec::new(),
        }
    }

    pub fn push(&mut self, channel: Channel) -> Result<()> {
        if channel.values.len() != self.times.len() {
            return Err(Error::DimensionMismatch {
                expected: self.times.len(),
                found: channel.values.len(),
            });
        }
        self.channels.push(channel);
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    /// Defined values of a channel with undefined samples as NaN.
    pub fn values(&self, name: &str) -> Option<Vec<f64>> {
        self.channel(name)
            .map(|c| c.values.iter().map(|v| v.unwrap_or(f64::NAN)).collect())
    }

    pub fn max(&self, name: &str) -> Option<f64> {
        self.channel(name).and_then(Channel::max)
    }

    /// Every defined value of the named channels lies in `[−tol, 1 + tol]`.
    pub fn check_probabilities(&self, names: &[&str]) -> Result<()> {
        for name in names {
            let ch = self
                .channel(name)
                .ok_or_else(|| Error::UnknownLabel(name.to_string()))?;
            for (k, v) in ch.values.iter().enumerate() {
                if let Some(v) = v {
                    if *v < -PROBABILITY_TOL || *v > 1.0 + PROBABILITY_TOL {
                        return Err(Error::Invariant(format!(
                            "probability channel `{name}` = {v} at t = {} ps",
                            self.times[k]
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Channels forming a complete projector family sum to 1 within `tol`.
    pub fn check_completeness(&self, names: &[&str], tol: f64) -> Result<()> {
        let chans: Vec<&Channel> = names
            .iter()
            .map(|n| self.channel(n).ok_or_else(|| Error::UnknownLabel(n.to_string())))
            .collect::<Result<_>>()?;
        for k in 0..self.times.len() {
            let mut sum = 0.0;
            for ch in &chans {
                match ch.values[k] {
                    Some(v) => sum += v,
                    None => continue,
                }
            }
            if (sum - 1.0).abs() > tol {
                return Err(Error::Invariant(format!(
                    "channels sum to {sum} at t = {} ps",
                    self.times[k]
                )));
            }
        }
        Ok(())
    }

    /// CSV with a `time_ps` column followed by one column per channel.
    pub fn write_csv<W: Write>(&self, out: W, comments: &[String]) -> Result<()> {
        let mut headers = vec!["time_ps".to_string()];
        headers.extend(self.channels.iter().map(|c| c.name.clone()));
        let rows = (0..self.times.len()).map(|k| {
            let mut row = vec![Some(self.times[k])];
            row.extend(self.channels.iter().map(|c| c.values[k]));
            row
        });
        write_table(out, comments, &headers, rows)
    }

    pub fn to_csv_string(&self, comments: &[String]) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, comments)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }
}

/// Caches the eigendecomposition of `H` (in rad/ps) for repeated evolution.
#[derive(Clone, Debug)]
pub struct Evolver {
    h_cm: OperatorMatrix,
    eig: EigenSystem,
}

impl Evolver {
    /// `h_cm` is a Hermitian Hamiltonian in cm⁻¹.
    pub fn new(h_cm: &OperatorMatrix) -> Result<Self> {
        let h_rad = h_cm.scale(unit_convert(1.0));
        let eig = hermitian_eig(&h_rad)?;
        Ok(Self {
            h_cm: h_cm.clone(),
            eig,
        })
    }

    pub fn hamiltonian(&self) -> &OperatorMatrix {
        &self.h_cm
    }

    pub fn dim(&self) -> usize {
        self.h_cm.dim()
    }

    /// `U(t)` for `t` in ps.
    pub fn propagator(&self, t_ps: f64) -> OperatorMatrix {
        self.eig.propagator(t_ps)
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: n,
            });
        }
        Ok(())
    }

    /// `ρ(t_k)` for every grid time, evaluated in parallel.
    pub fn evolve(&self, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<Vec<DensityMatrix>> {
        self.check_dim(rho0.dim())?;
        grid.times()
            .par_iter()
            .map(|&t| {
                let u = self.propagator(t);
                let rho = rho0.matrix.conjugate_by(u.matrix());
                let tr = rho.trace();
                if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
                    return Err(Error::Invariant(format!(
                        "trace drifted to {:.3e} at t = {t} ps",
                        tr.re
                    )));
                }
                Ok(DensityMatrix {
                    matrix: rho,
                    basis: rho0.basis,
                })
            })
            .collect()
    }

    /// `t ↦ Re tr(A ρ(t))` evaluated in the eigenbasis at O(n²) per call.
    pub fn trace(&self, rho0: &DensityMatrix, observable: &OperatorMatrix) -> Result<ExpectationTrace> {
        self.check_dim(rho0.dim())?;
        self.check_dim(observable.dim())?;
        let v = &self.eig.eigenvectors;
        let vh = v.adjoint();
        let rho = &vh * rho0.matrix.matrix() * v;
        let a = &vh * observable.matrix() * v;
        // ⟨A⟩(t) = Σ_jk Ã_kj ρ̃_jk e^{−i(λ_j − λ_k)t}
        let n = self.dim();
        Ok(ExpectationTrace {
            weights: DMatrix::from_fn(n, n, |j, k| a[(k, j)] * rho[(j, k)]),
            lambda: self.eig.eigenvalues.iter().copied().collect(),
        })
    }

    /// `Re tr(A_j ρ(t_k))` for every observable and grid time, without
    /// forming `ρ(t)`. Returns one vector per observable.
    pub fn expectation_series(
        &self,
        rho0: &DensityMatrix,
        observables: &[&OperatorMatrix],
        grid: &TimeGrid,
    ) -> Result<Vec<Vec<f64>>> {
        let traces: Vec<ExpectationTrace> = observables
            .iter()
            .map(|o| self.trace(rho0, o))
            .collect::<Result<_>>()?;
        Ok(traces
            .iter()
            .map(|tr| grid.times().par_iter().map(|&t| tr.eval(t)).collect())
            .collect())
    }

    /// Named probability channels computed through [`Self::expectation_series`].
    pub fn probability_series(
        &self,
        rho0: &DensityMatrix,
        projectors: &[(String, OperatorMatrix)],
        grid: &TimeGrid,
    ) -> Result<TimeSeries> {
        for (name, p) in projectors {
            check_projector(name, p)?;
        }
        let ops: Vec<&OperatorMatrix> = projectors.iter().map(|(_, p)| p).collect();
        let values = self.expectation_series(rho0, &ops, grid)?;
        let mut ts = TimeSeries::new(grid.times().to_vec());
        for ((name, _), vals) in projectors.iter().zip(values) {
            ts.push(Channel::defined(name.clone(), vals))?;
        }
        Ok(ts)
    }
}

/// Precomputed expectation value of one observable along one trajectory.
#[derive(Clone, Debug)]
pub struct ExpectationTrace {
    weights: DMatrix<Complex64>,
    lambda: Vec<f64>,
}

impl ExpectationTrace {
    /// Value at `t` ps.
    pub fn eval(&self, t_ps: f64) -> f64 {
        let n = self.lambda.len();
        let phase: Vec<Complex64> = self
            .lambda
            .iter()
            .map(|l| Complex64::from_polar(1.0, -l * t_ps))
            .collect();
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            for k in 0..n {
                row += self.weights[(j, k)] * phase[k].conj();
            }
            acc += row * phase[j];
        }
        acc.re
    }
}

/// Convenience wrapper around [`Evolver::evolve`].
pub fn evolve(h_cm: &OperatorMatrix, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<Vec<DensityMatrix>> {
    Evolver::new(h_cm)?.evolve(rho0, grid)
}

/// Projector `|index⟩⟨index|`.
pub fn basis_projector(dim: usize, index: usize) -> OperatorMatrix {
    let mut diag = vec![0.0; dim];
    diag[index] = 1.0;
    OperatorMatrix::from_real_diagonal(&diag)
}

/// Rejects operators that are not Hermitian idempotents within 1e-10.
pub fn check_projector(name: &str, p: &OperatorMatrix) -> Result<()> {
    let (_, _, herm) = p.hermiticity_violation();
    let sq = p * p;
    let idem = sq.max_abs_diff(p);
    if herm > PROJECTOR_TOL || idem > PROJECTOR_TOL {
        return Err(Error::NotProjector(format!(
            "`{name}`: hermiticity residual {herm:.3e}, idempotency residual {idem:.3e}"
        )));
    }
    Ok(())
}

/// `channel[name][k] = Re tr(P_name ρ(t_k))`.
pub fn transition_probabilities(
    times: &[f64],
    states: &[DensityMatrix],
    projectors: &[(String, OperatorMatrix)],
) -> Result<TimeSeries> {
    if times.len() != states.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: states.len(),
        });
    }
    for (name, p) in projectors {
        check_projector(name, p)?;
        if let Some(rho) = states.first() {
            if rho.dim() != p.dim() {
                return Err(Error::DimensionMismatch {
                    expected: rho.dim(),
                    found: p.dim(),
                });
            }
        }
    }
    let mut ts = TimeSeries::new(times.to_vec());
    for (name, p) in projectors {
        let vals = states.iter().map(|rho| rho.expectation(p)).collect();
        ts.push(Channel::defined(name.clone(), vals))?;
    }
    Ok(ts)
}

/// Bloch components and their measurement probabilities.
pub const BLOCH_CHANNELS: [&str; 6] = ["x", "y", "z", "p_x", "p_y", "p_z"];

/// `(⟨σx⟩, ⟨σy⟩, ⟨σz⟩)` of a 2×2 density matrix.
pub fn bloch_vector(rho: &OperatorMatrix) -> [f64; 3] {
    let r01 = rho.get(0, 1);
    [
        2.0 * r01.re,
        -2.0 * r01.im,
        (rho.get(0, 0) - rho.get(1, 1)).re,
    ]
}

/// Evolves a state of a 2-state block under the block's own Hamiltonian and
/// reports the Bloch vector (`x`, `y`, `z`) and the probabilities
/// `(1 + ⟨σ_i⟩)/2` (`p_x`, `p_y`, `p_z`). The Bloch-sphere poles are the
/// block's two states in stored order.
pub fn bloch_trajectory(block: &SpinBlock, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<TimeSeries> {
    if block.len() != 2 {
        return Err(Error::InvalidBlock(format!(
            "Bloch trajectories need a 2-state block, got {} states",
            block.len()
        )));
    }
    bloch_trajectory_of(&block.reduced_h, rho0, grid)
}

/// As [`bloch_trajectory`] for a bare 2×2 Hamiltonian in cm⁻¹.
pub fn bloch_trajectory_of(h: &OperatorMatrix, rho0: &DensityMatrix, grid: &TimeGrid) -> Result<TimeSeries> {
    if h.dim() != 2 || rho0.dim() != 2 {
        return Err(Error::InvalidBlock("Bloch trajectories need 2×2 inputs".into()));
    }
    let states = Evolver::new(h)?.evolve(rho0, grid)?;
    let vecs: Vec<[f64; 3]> = states.iter().map(|r| bloch_vector(r.matrix())).collect();
    let mut ts = TimeSeries::new(grid.times().to_vec());
    for (i, name) in BLOCH_CHANNELS.iter().enumerate() {
        let vals = vecs
            .iter()
            .map(|v| if i < 3 { v[i] } else { 0.5 * (1.0 + v[i - 3]) })
            .collect();
        ts.push(Channel::defined(*name, vals))?;
    }
    Ok(ts)
}

/// `(Ω_x/Ω)² sin²(Ω t)` with `Ω` in cm⁻¹ and `t` in ps.
pub fn rabi_probability(tl: &TwoLevel, t_ps: f64) -> f64 {
    let omega = tl.rabi_frequency();
    if omega == 0.0 {
        return 0.0;
    }
    let w = unit_convert(omega);
    (tl.omega_x / omega).powi(2) * (w * t_ps).sin().powi(2)
}
