//! Closed-form Rabi analytics and resonance conditions for the two-level
//! blocks of the model, and the eigenvector-balance diagnostic.
//!
//! All energies in cm⁻¹.

use std::fmt;
use std::str::FromStr;

use crate::basis::{BasisKind, BasisLabel};
use crate::error::{Error, Result};
use crate::model::BOHR_MAGNETON_CM_PER_T;
use crate::spin::Spin;

/// Rabi frequency and amplitude of `Ω_x σx + Ω_z σz`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RabiResult {
    /// `√(Ω_x² + Ω_z²)` in cm⁻¹.
    pub omega: f64,
    /// `(Ω_x/Ω)²`.
    pub p_max: f64,
}

pub fn rabi(omega_x: f64, omega_z: f64) -> Result<RabiResult> {
    let omega = omega_x.hypot(omega_z);
    if omega == 0.0 {
        return Err(Error::NoDynamics("Ω_x = Ω_z = 0".into()));
    }
    let p_max = if omega_z == 0.0 {
        1.0
    } else {
        (omega_x / omega).powi(2)
    };
    Ok(RabiResult { omega, p_max })
}

/// Exchange value balancing the anisotropy in the stretched blocks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DjResonance {
    pub j: f64,
    /// `false` for `s = ½`, where the anisotropy term is a constant.
    pub exists: bool,
}

/// `J = D (s − ½)/(s − ¼)`.
pub fn dj_resonance(s: Spin, d: f64) -> DjResonance {
    let sv = s.value();
    DjResonance {
        j: d * (sv - 0.5) / (sv - 0.25),
        exists: s.twice() > 1,
    }
}

/// Exchange anisotropy resonance of the spin-½ pair: `J_K = J_z − J_xy`.
pub fn jj_resonance(jz: f64, jxy: f64) -> f64 {
    jz - jxy
}

/// Resonant couplings of the two stretched blocks:
/// "a" = {|↓⟩|2s,2s⟩, |↑⟩|2s,2s−1⟩}, "b" = {|↑⟩|2s,−2s⟩, |↓⟩|2s,−2s+1⟩}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonancePrediction {
    pub j_a: f64,
    pub j_b: f64,
    /// The field term vanishes (`B₀ = 0` or `g₁ = g₂₃`).
    pub degenerate: bool,
}

pub fn generalized_dj_resonance(
    s: Spin,
    d: f64,
    jz: f64,
    jxy: f64,
    b0: f64,
    g1: f64,
    g23: f64,
) -> ResonancePrediction {
    let sv = s.value();
    let q = sv - 0.25;
    let common = d * (sv - 0.5) / q + 0.5 * sv * (jz - jxy) / q;
    let field = 0.5 * BOHR_MAGNETON_CM_PER_T * b0 * (g1 - g23) / q;
    ResonancePrediction {
        j_a: common - field,
        j_b: common + field,
        degenerate: field == 0.0,
    }
}

/// `(Ω_x, Ω_z)` of the "a" block at Kondo coupling `j`, signed as the
/// σz coefficient in ascending device-index order.
pub fn stretched_block(s: Spin, j: f64, d: f64, jz: f64, jxy: f64, zeeman: f64) -> (f64, f64) {
    let sv = s.value();
    let omega_z = j * (sv - 0.25) - d * (sv - 0.5) + (jxy - jz) * sv / 2.0;
    ((j * sv.sqrt()).abs(), omega_z + zeeman)
}

/// Eigenvector balance of the stretched block over a grid of couplings.
#[derive(Clone, Debug, PartialEq)]
pub struct BalanceCurve {
    pub s: Spin,
    pub d: f64,
    pub j_resonance: f64,
    pub j_values: Vec<f64>,
    /// `|c₁|² − |c₂|²`, with `c₁` on |↓⟩|2s,2s⟩ and `c₂` on |↑⟩|2s,2s−1⟩.
    pub delta: Vec<f64>,
    /// Lower eigenvalue `−√(β² + (J√s)²)`.
    pub alpha: Vec<f64>,
    /// `D(s − ½) − J(s − ¼)`.
    pub beta: Vec<f64>,
    /// Weight of the anisotropy-favoured state: |↓⟩|2s,2s⟩ for `D < 0`,
    /// |↑⟩|2s,2s−1⟩ for `D > 0`.
    pub anisotropy_weight: Vec<f64>,
}

/// Balance of the ground state of the stretched block
/// `β σz + J√s σx` on {|↓⟩|2s,2s⟩, |↑⟩|2s,2s−1⟩}. Points with `J = 0`
/// are dropped.
pub fn eigen_balance(s: Spin, d: f64, j_grid: &[f64]) -> Result<BalanceCurve> {
    if s.twice() < 2 {
        return Err(Error::InvalidSpin(
            "eigenvector balance needs s > 1/2".into(),
        ));
    }
    let sv = s.value();
    let mut curve = BalanceCurve {
        s,
        d,
        j_resonance: dj_resonance(s, d).j,
        j_values: Vec::new(),
        delta: Vec::new(),
        alpha: Vec::new(),
        beta: Vec::new(),
        anisotropy_weight: Vec::new(),
    };
    for &j in j_grid {
        if j == 0.0 {
            continue;
        }
        let beta = d * (sv - 0.5) - j * (sv - 0.25);
        let x = j * sv.sqrt();
        let alpha = -beta.hypot(x);
        // Ground state: c₁/c₂ = (β + α)/x.
        let c1 = (beta + alpha) / x;
        let norm = 1.0 + c1 * c1;
        let (w1, w2) = (c1 * c1 / norm, 1.0 / norm);
        curve.j_values.push(j);
        curve.delta.push(w1 - w2);
        curve.alpha.push(alpha);
        curve.beta.push(beta);
        curve.anisotropy_weight.push(if d < 0.0 { w1 } else { w2 });
    }
    Ok(curve)
}

/// `points` couplings evenly spaced on `(0, 3]·J_R`.
pub fn balance_grid(s: Spin, d: f64, points: usize) -> Vec<f64> {
    let jr = dj_resonance(s, d).j;
    (1..=points)
        .map(|k| 3.0 * jr * k as f64 / points as f64)
        .collect()
}

/// Two-level blocks of the spin-1 trimer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TrimerBlock {
    /// Device basis, total `m = ±1`: {|1⟩|1,0⟩, |0⟩|1,1⟩} and mirror.
    DeviceM1 { positive: bool },
    /// Device basis, total `m = ±2`: {|1⟩|2,1⟩, |0⟩|2,2⟩} and mirror.
    DeviceM2 { positive: bool },
    /// Total-spin basis, `M = ±1`: {|2,±1⟩, |1,±1⟩} with `s23 = 1`.
    TotalSpinM1 { positive: bool },
}

impl TrimerBlock {
    pub const ALL: [TrimerBlock; 6] = [
        TrimerBlock::DeviceM1 { positive: true },
        TrimerBlock::DeviceM1 { positive: false },
        TrimerBlock::DeviceM2 { positive: true },
        TrimerBlock::DeviceM2 { positive: false },
        TrimerBlock::TotalSpinM1 { positive: true },
        TrimerBlock::TotalSpinM1 { positive: false },
    ];

    pub fn basis(&self) -> BasisKind {
        match self {
            TrimerBlock::TotalSpinM1 { .. } => BasisKind::TotalSpin,
            _ => BasisKind::Device,
        }
    }

    /// The block's two states; the first is the initial state of a transition.
    pub fn states(&self) -> [BasisLabel; 2] {
        let d = BasisLabel::device;
        match *self {
            TrimerBlock::DeviceM1 { positive: true } => [d(2, 2, 0), d(0, 2, 2)],
            TrimerBlock::DeviceM1 { positive: false } => [d(0, 2, -2), d(-2, 2, 0)],
            TrimerBlock::DeviceM2 { positive: true } => [d(2, 4, 2), d(0, 4, 4)],
            TrimerBlock::DeviceM2 { positive: false } => [d(0, 4, -4), d(-2, 4, -2)],
            TrimerBlock::TotalSpinM1 { positive } => {
                let m = if positive { 2 } else { -2 };
                [
                    BasisLabel::TotalSpin {
                        twice_s23: 2,
                        twice_s: 4,
                        twice_m: m,
                    },
                    BasisLabel::TotalSpin {
                        twice_s23: 2,
                        twice_s: 2,
                        twice_m: m,
                    },
                ]
            }
        }
    }
}

impl fmt::Display for TrimerBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (prefix, m, positive) = match *self {
            TrimerBlock::DeviceM1 { positive } => ("", 1, positive),
            TrimerBlock::DeviceM2 { positive } => ("", 2, positive),
            TrimerBlock::TotalSpinM1 { positive } => ("S", 1, positive),
        };
        write!(f, "{prefix}{}{m}", if positive { '+' } else { '-' })
    }
}

impl FromStr for TrimerBlock {
    type Err = Error;

    /// `+1`, `-1`, `+2`, `-2` (device basis) or `S+1`, `S-1` (total spin).
    fn from_str(text: &str) -> Result<Self> {
        TrimerBlock::ALL
            .into_iter()
            .find(|b| b.to_string() == text.trim())
            .ok_or_else(|| Error::InvalidBlock(format!("unknown trimer block `{text}`")))
    }
}

/// `(Ω_x, Ω_z)` of a trimer block.
pub fn trimer_two_level(block: TrimerBlock, j: f64, d: f64) -> (f64, f64) {
    let sign = |p: bool| if p { 1.0 } else { -1.0 };
    match block {
        TrimerBlock::DeviceM1 { positive } => (j.abs(), sign(positive) * d),
        TrimerBlock::DeviceM2 { positive } => ((2f64.sqrt() * j).abs(), sign(positive) * 0.5 * j),
        TrimerBlock::TotalSpinM1 { .. } => (d.abs(), j),
    }
}

pub fn trimer_rabi(block: TrimerBlock, j: f64, d: f64) -> Result<RabiResult> {
    let (ox, oz) = trimer_two_level(block, j, d);
    rabi(ox, oz)
}

/// Phase blocks of the three-site chain: {|2,M⟩_A, |2,M⟩_B} for
/// `M ∈ {2, 0, −2}`, with A/B the `s23 = 2`/`s23 = 1` total-spin states.
pub fn bh3_phase_block(twice_m: i32) -> Result<[BasisLabel; 2]> {
    if ![4, 0, -4].contains(&twice_m) {
        return Err(Error::InvalidBlock(format!(
            "phase blocks exist for M = 2, 0, -2, not {}",
            crate::spin::fmt_half(twice_m)
        )));
    }
    Ok([
        BasisLabel::TotalSpin {
            twice_s23: 4,
            twice_s: 4,
            twice_m,
        },
        BasisLabel::TotalSpin {
            twice_s23: 2,
            twice_s: 4,
            twice_m,
        },
    ])
}

/// `(J/2) σz + (√3 J/2) σx`.
pub fn bh3_rabi(j: f64) -> Result<RabiResult> {
    rabi((3f64.sqrt() * 0.5 * j).abs(), 0.5 * j)
}
