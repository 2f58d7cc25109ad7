//! Spin Hamiltonians of the three-particle model in the product basis
//! `particle1 ⊗ particle2 ⊗ particle3`.
//!
//! Energies are in cm⁻¹. [`unit_convert`] maps them to angular frequencies
//! in rad/ps for time evolution.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kron, OperatorMatrix};
use crate::spin::{spin_matrices, Spin};

/// Bohr magneton in cm⁻¹/T.
pub const BOHR_MAGNETON_CM_PER_T: f64 = 0.46686;
/// Speed of light in cm/ps.
pub const SPEED_OF_LIGHT_CM_PER_PS: f64 = 0.029_979_245_8;
/// 1 cm⁻¹ expressed as an angular frequency in rad/ps.
pub const CM_TO_RAD_PER_PS: f64 = 2.0 * PI * SPEED_OF_LIGHT_CM_PER_PS;

/// Converts an energy in cm⁻¹ to an angular frequency in rad/ps (ħ = 1).
pub fn unit_convert(energy_cm: f64) -> f64 {
    energy_cm * CM_TO_RAD_PER_PS
}

/// Inverse of [`unit_convert`].
pub fn rad_per_ps_to_cm(omega: f64) -> f64 {
    omega / CM_TO_RAD_PER_PS
}

/// Physical parameters of the electron + coupled-pair model. All couplings
/// in cm⁻¹, field in tesla.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub s2: Spin,
    pub s3: Spin,
    /// Exchange between particles 2 and 3 along the anisotropy axis.
    pub jz: f64,
    /// Exchange between particles 2 and 3 perpendicular to the axis.
    pub jxy: f64,
    pub jk2: f64,
    pub jk3: f64,
    /// Uniaxial anisotropy of particles 2 and 3.
    pub d: f64,
    pub t_hop: Complex64,
    pub b0: f64,
    pub g1: f64,
    pub g23: f64,
}

impl ModelParams {
    /// All couplings zero, `g = 2`, for equal spins `s` on particles 2 and 3.
    pub fn zero(s: Spin) -> Self {
        Self {
            s2: s,
            s3: s,
            jz: 0.0,
            jxy: 0.0,
            jk2: 0.0,
            jk3: 0.0,
            d: 0.0,
            t_hop: Complex64::new(0.0, 0.0),
            b0: 0.0,
            g1: 2.0,
            g23: 2.0,
        }
    }

    /// The shared parameter set used throughout the figures:
    /// `J_K2 = J_K3 = -0.40`, `J_H = -0.05`, `t = 0.05`, `D = -0.60`.
    pub fn reference(s: Spin) -> Self {
        Self::zero(s)
            .with_kondo(-0.40)
            .with_heisenberg(-0.05)
            .with_hopping(0.05)
            .with_anisotropy(-0.60)
    }

    pub fn with_kondo(mut self, jk: f64) -> Self {
        self.jk2 = jk;
        self.jk3 = jk;
        self
    }

    /// Isotropic exchange `J_z = J_xy = J_H`.
    pub fn with_heisenberg(mut self, jh: f64) -> Self {
        self.jz = jh;
        self.jxy = jh;
        self
    }

    pub fn with_anisotropy(mut self, d: f64) -> Self {
        self.d = d;
        self
    }

    pub fn with_hopping(mut self, t: f64) -> Self {
        self.t_hop = Complex64::new(t, 0.0);
        self
    }

    pub fn with_field(mut self, b0: f64, g1: f64, g23: f64) -> Self {
        self.b0 = b0;
        self.g1 = g1;
        self.g23 = g23;
        self
    }

    /// `Δ_K = J_K2 − J_K3`.
    pub fn delta_k(&self) -> f64 {
        self.jk2 - self.jk3
    }

    /// `Σ_K = J_K2 + J_K3`.
    pub fn sigma_k(&self) -> f64 {
        self.jk2 + self.jk3
    }

    /// The common spin of particles 2 and 3.
    pub fn spin(&self) -> Spin {
        self.s2
    }

    pub fn validate(&self) -> Result<()> {
        if self.s2 != self.s3 {
            return Err(Error::InvalidParams(format!(
                "particles 2 and 3 must carry the same spin (got {} and {})",
                self.s2, self.s3
            )));
        }
        if self.s2.twice() == 0 {
            return Err(Error::InvalidParams("particles 2 and 3 need spin ≥ 1/2".into()));
        }
        let finite = [
            self.jz, self.jxy, self.jk2, self.jk3, self.d, self.t_hop.re, self.t_hop.im, self.b0,
            self.g1, self.g23,
        ];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParams("non-finite parameter".into()));
        }
        Ok(())
    }
}

/// Named pieces of the total Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Heisenberg,
    Kondo,
    Anisotropy,
    Hopping,
    Zeeman,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Term::Heisenberg => "heisenberg",
            Term::Kondo => "kondo",
            Term::Anisotropy => "anisotropy",
            Term::Hopping => "hopping",
            Term::Zeeman => "zeeman",
        })
    }
}

/// A total Hamiltonian together with its term breakdown.
#[derive(Clone, Debug)]
pub struct HamiltonianBundle {
    pub total: OperatorMatrix,
    pub terms: BTreeMap<Term, OperatorMatrix>,
    pub spins: [Spin; 3],
}

impl HamiltonianBundle {
    pub fn dim(&self) -> usize {
        self.total.dim()
    }

    fn from_terms(spins: [Spin; 3], terms: BTreeMap<Term, OperatorMatrix>) -> Self {
        let dim = spins.iter().map(|s| s.dim()).product();
        let total = terms
            .values()
            .fold(OperatorMatrix::zeros(dim), |acc, t| &acc + t);
        Self { total, terms, spins }
    }
}

/// Single-particle spin operators embedded in the three-particle product space.
pub struct ParticleOperators {
    spins: [Spin; 3],
    // ops[particle][component]
    ops: [[OperatorMatrix; 3]; 3],
}

impl ParticleOperators {
    pub fn new(spins: [Spin; 3]) -> Self {
        let embed = |particle: usize, op: &OperatorMatrix| -> OperatorMatrix {
            let factor = |i: usize| {
                if i == particle {
                    op.clone()
                } else {
                    OperatorMatrix::identity(spins[i].dim())
                }
            };
            kron(&factor(0), &kron(&factor(1), &factor(2)))
        };
        let ops = std::array::from_fn(|p| {
            let m = spin_matrices(spins[p]);
            [embed(p, &m.x), embed(p, &m.y), embed(p, &m.z)]
        });
        Self { spins, ops }
    }

    pub fn spins(&self) -> [Spin; 3] {
        self.spins
    }

    pub fn dim(&self) -> usize {
        self.ops[0][0].dim()
    }

    pub fn x(&self, particle: usize) -> &OperatorMatrix {
        &self.ops[particle][0]
    }

    pub fn y(&self, particle: usize) -> &OperatorMatrix {
        &self.ops[particle][1]
    }

    pub fn z(&self, particle: usize) -> &OperatorMatrix {
        &self.ops[particle][2]
    }

    /// `S_a · S_b`.
    pub fn dot(&self, a: usize, b: usize) -> OperatorMatrix {
        let xy = self.xy_exchange(a, b);
        hermitian(&xy + &(self.z(a) * self.z(b)))
    }

    /// `S_a^x S_b^x + S_a^y S_b^y`.
    pub fn xy_exchange(&self, a: usize, b: usize) -> OperatorMatrix {
        let mut m = &(self.x(a) * self.x(b)) + &(self.y(a) * self.y(b));
        m.check_hermitian().expect("xy exchange is Hermitian");
        m
    }

    /// `(S_a^z)²`.
    pub fn z_squared(&self, a: usize) -> OperatorMatrix {
        let mut m = self.z(a) * self.z(a);
        m.check_hermitian().expect("Sz² is Hermitian");
        m
    }

    /// `S^z_total`.
    pub fn total_z(&self) -> OperatorMatrix {
        &(self.z(0) + self.z(1)) + self.z(2)
    }
}

fn hermitian(mut m: OperatorMatrix) -> OperatorMatrix {
    m.check_hermitian().expect("model terms are Hermitian by construction");
    m
}

/// Assembles the electron + coupled-pair Hamiltonian:
///
/// ```text
/// H = J_z S2z S3z + J_xy (S2x S3x + S2y S3y)
///   + J_K2 S1·S2 + J_K3 S1·S3
///   + D (S2z² + S3z²)
///   + 2 Re(t) 1
///   + μ_B B0 (g1 S1z + g23 (S2z + S3z))
/// ```
///
/// Particle 1 is the spin-½ electron. Only the spin-space projection of the
/// hopping term is kept; an imaginary hopping part is ignored with a warning.
pub fn build_hamiltonian(p: &ModelParams) -> Result<HamiltonianBundle> {
    p.validate()?;
    if p.t_hop.im != 0.0 {
        log::warn!(
            "imaginary part of the hopping amplitude ({}) does not enter the spin Hamiltonian",
            p.t_hop.im
        );
    }
    let spins = [Spin::HALF, p.s2, p.s3];
    let ops = ParticleOperators::new(spins);
    let dim = ops.dim();

    let mut terms = BTreeMap::new();
    let heis = &ops.z(1).scale(p.jz) * ops.z(2);
    terms.insert(
        Term::Heisenberg,
        hermitian(&heis + &ops.xy_exchange(1, 2).scale(p.jxy)),
    );
    terms.insert(
        Term::Kondo,
        &ops.dot(0, 1).scale(p.jk2) + &ops.dot(0, 2).scale(p.jk3),
    );
    terms.insert(
        Term::Anisotropy,
        (&ops.z_squared(1) + &ops.z_squared(2)).scale(p.d),
    );
    terms.insert(
        Term::Hopping,
        OperatorMatrix::identity(dim).scale(2.0 * p.t_hop.re),
    );
    let zeeman = &ops.z(0).scale(p.g1) + &(ops.z(1) + ops.z(2)).scale(p.g23);
    terms.insert(
        Term::Zeeman,
        hermitian(zeeman).scale(BOHR_MAGNETON_CM_PER_T * p.b0),
    );
    Ok(HamiltonianBundle::from_terms(spins, terms))
}

/// Three spin-1 particles on an open chain:
/// `H = J (S1·S2 + S2·S3) + D Σ_i (S_i^z)²`.
pub fn build_bh3(j: f64, d: f64) -> HamiltonianBundle {
    build_spin_one_cluster(j, d, false)
}

/// Three spin-1 particles on a triangle:
/// `H = J (S1·S2 + S2·S3 + S3·S1) + D Σ_i (S_i^z)²`.
pub fn build_trimer(j: f64, d: f64) -> HamiltonianBundle {
    build_spin_one_cluster(j, d, true)
}

fn build_spin_one_cluster(j: f64, d: f64, closed: bool) -> HamiltonianBundle {
    let spins = [Spin::ONE; 3];
    let ops = ParticleOperators::new(spins);
    let mut terms = BTreeMap::new();
    terms.insert(Term::Heisenberg, ops.dot(1, 2).scale(j));
    let mut kondo = ops.dot(0, 1);
    if closed {
        kondo = &kondo + &ops.dot(0, 2);
    }
    terms.insert(Term::Kondo, kondo.scale(j));
    let aniso = &(&ops.z_squared(0) + &ops.z_squared(1)) + &ops.z_squared(2);
    terms.insert(Term::Anisotropy, aniso.scale(d));
    HamiltonianBundle::from_terms(spins, terms)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s_one() -> ModelParams {
        ModelParams::reference(Spin::ONE)
    }

    #[test]
    fn unit_conversion() {
        assert_eq!(unit_convert(0.0), 0.0);
        let oracle = 2.0 * PI * 0.029_979_245_8;
        assert!((unit_convert(1.0) - oracle).abs() < 1e-15);
        assert!((unit_convert(1.0) - 0.188365).abs() < 1e-6);
        let omega = unit_convert(0.30);
        assert!((omega - 0.05651).abs() < 1e-5);
        assert!((PI / omega - 55.6).abs() < 0.05);
    }

    #[test]
    fn zero_couplings_give_zero_hamiltonian() {
        let h = build_hamiltonian(&ModelParams::zero(Spin::ONE)).unwrap();
        assert_eq!(h.dim(), 18);
        assert_eq!(h.total.max_abs(), 0.0);
    }

    #[test]
    fn mismatched_spins_rejected() {
        let mut p = s_one();
        p.s3 = Spin::HALF;
        assert!(matches!(build_hamiltonian(&p), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn terms_sum_to_total_and_are_hermitian() {
        let mut p = s_one().with_field(0.7, 2.0, 1.5);
        p.jk3 = 0.13;
        p.jxy = 0.21;
        let h = build_hamiltonian(&p).unwrap();
        let sum = h
            .terms
            .values()
            .fold(OperatorMatrix::zeros(h.dim()), |acc, t| &acc + t);
        assert!(sum.max_abs_diff(&h.total) <= 1e-12);
        assert!(h.terms.values().all(|t| t.is_hermitian()));
        assert!(h.total.is_hermitian());
    }

    #[test]
    fn term_additivity_is_exact() {
        let p = s_one().with_field(0.3, 2.0, 2.5);
        let full = build_hamiltonian(&p).unwrap();
        let zero = ModelParams::zero(Spin::ONE);
        let singles = [
            ModelParams { jz: p.jz, ..zero.clone() },
            ModelParams { jxy: p.jxy, ..zero.clone() },
            ModelParams { jk2: p.jk2, ..zero.clone() },
            ModelParams { jk3: p.jk3, ..zero.clone() },
            ModelParams { d: p.d, ..zero.clone() },
            ModelParams { t_hop: p.t_hop, ..zero.clone() },
            ModelParams { b0: p.b0, g1: p.g1, g23: p.g23, ..zero.clone() },
        ];
        let sum = singles
            .iter()
            .map(|q| build_hamiltonian(q).unwrap().total)
            .fold(OperatorMatrix::zeros(full.dim()), |acc, t| &acc + &t);
        assert!(sum.max_abs_diff(&full.total) <= 1e-15);
    }

    #[test]
    fn symmetric_model_conserves_total_sz() {
        for s in [Spin::HALF, Spin::ONE, Spin::from_twice(3)] {
            let h = build_hamiltonian(&ModelParams::reference(s)).unwrap();
            let sz = ParticleOperators::new(h.spins).total_z();
            assert!(h.total.commutator(&sz).max_abs() <= 1e-12);
        }
    }

    #[test]
    fn hopping_is_scalar() {
        let p = ModelParams::zero(Spin::HALF).with_hopping(0.05);
        let h = build_hamiltonian(&p).unwrap();
        let hop = &h.terms[&Term::Hopping];
        assert!(hop.max_abs_diff(&OperatorMatrix::identity(8).scale(0.1)) == 0.0);

        let mut q = p.clone();
        q.t_hop = Complex64::new(0.05, 0.3);
        let hq = build_hamiltonian(&q).unwrap();
        assert_eq!(hq.total, h.total);
    }

    #[test]
    fn bh3_without_exchange_is_anisotropy_diagonal() {
        let h = build_bh3(0.0, 0.7);
        assert_eq!(h.dim(), 27);
        for i1 in 0..3 {
            for i2 in 0..3 {
                for i3 in 0..3 {
                    let idx = i1 * 9 + i2 * 3 + i3;
                    let m = |i: usize| 1.0 - i as f64;
                    let expect = 0.7 * (m(i1).powi(2) + m(i2).powi(2) + m(i3).powi(2));
                    assert!((h.total.get(idx, idx).re - expect).abs() < 1e-15);
                }
            }
        }
        let off: f64 = (0..27)
            .flat_map(|i| (0..27).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| h.total.get(i, j).norm())
            .fold(0.0, f64::max);
        assert_eq!(off, 0.0);
    }

    #[test]
    fn trimer_is_symmetric_under_particle_exchange() {
        let h = build_trimer(0.3, -0.2);
        let sz = ParticleOperators::new(h.spins).total_z();
        assert!(h.total.commutator(&sz).max_abs() < 1e-12);
        assert!(h.total.is_hermitian());
    }
}
