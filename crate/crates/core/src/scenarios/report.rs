//! Two-level block listings with resonance predictions, and the table of
//! pure-state transitions.

use std::fmt::Write as _;
use std::io::Write;

use crate::analysis::{bh3_phase_block, dj_resonance, generalized_dj_resonance, jj_resonance, TrimerBlock};
use crate::basis::{
    block_decompose, leakage, reduce_two_level_matrix, transform_from_product, BasisKind, BasisLabel,
};
use crate::error::{Error, Result};
use crate::model::{build_bh3, build_hamiltonian, build_trimer, HamiltonianBundle, ModelParams};
use crate::output::{format_opt, format_sig, write_text_table};
use crate::spin::{fmt_half, Spin};
use crate::verify::{brute_force_rabi, rabi_grid};

use super::config::{ModelKind, ScenarioParams};

/// Blocks whose off-block couplings exceed this are flagged as open.
pub const LEAKAGE_TOL: f64 = 1e-9;
const SLOPE_TOL: f64 = 1e-12;
const RABI_PERIODS: f64 = 4.0;
const RABI_POINTS: usize = 2001;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResonanceKind {
    /// Exchange balancing onsite anisotropy.
    Dj,
    /// DJ resonance shifted by exchange anisotropy or a Zeeman field.
    Generalized,
    /// Exchange anisotropy of a spin-½ pair.
    Jj,
    /// `Ω_z` does not depend on the swept coupling.
    None,
}

impl ResonanceKind {
    pub fn name(self) -> &'static str {
        match self {
            ResonanceKind::Dj => "DJ",
            ResonanceKind::Generalized => "generalized",
            ResonanceKind::Jj => "JJ",
            ResonanceKind::None => "none",
        }
    }
}

/// One two-state block with its resonance analysis.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockRow {
    pub basis: BasisKind,
    pub states: [BasisLabel; 2],
    pub twice_m_total: Option<i32>,
    pub omega_x: f64,
    pub omega_z: f64,
    pub offset: f64,
    /// Largest off-block coupling of the two states.
    pub leakage: f64,
    /// `(Ω_x/Ω)²` at the given parameters; `None` without dynamics.
    pub p_max: Option<f64>,
    /// Peak of the full-model transition probability at the given parameters.
    pub p_max_full: Option<f64>,
    pub kind: ResonanceKind,
    /// Root of `Ω_z` along the swept coupling.
    pub resonance: Option<f64>,
    /// Closed-form resonance value where one is known.
    pub resonance_formula: Option<f64>,
    /// Rabi frequency at the resonance.
    pub omega_resonance: Option<f64>,
    /// Peak of the full-model transition probability at the resonance.
    pub p_max_resonance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResonanceReport {
    pub model: ModelKind,
    pub params: ScenarioParams,
    /// `jk` (both Kondo couplings) or `d`.
    pub variable: &'static str,
    pub rows: Vec<BlockRow>,
    pub notes: Vec<String>,
}

impl ResonanceReport {
    pub const HEADERS: [&'static str; 16] = [
        "basis",
        "state_a",
        "state_b",
        "m_total",
        "omega_x",
        "omega_z",
        "offset",
        "leakage",
        "p_max",
        "p_max_full",
        "resonance_kind",
        "variable",
        "resonance",
        "resonance_formula",
        "omega_resonance",
        "p_max_resonance",
    ];

    pub fn write_csv<W: Write>(&self, out: W, comments: &[String]) -> Result<()> {
        let rows = self.rows.iter().map(|r| {
            vec![
                basis_name(r.basis).to_string(),
                r.states[0].code(),
                r.states[1].code(),
                r.twice_m_total.map(fmt_half).unwrap_or_default(),
                format_sig(r.omega_x),
                format_sig(r.omega_z),
                format_sig(r.offset),
                format_sig(r.leakage),
                format_opt(r.p_max),
                format_opt(r.p_max_full),
                r.kind.name().to_string(),
                self.variable.to_string(),
                format_opt(r.resonance),
                format_opt(r.resonance_formula),
                format_opt(r.omega_resonance),
                format_opt(r.p_max_resonance),
            ]
        });
        let headers = Self::HEADERS.map(String::from);
        write_text_table(out, comments, &headers, rows)
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model {}: {}", self.model, self.params.describe());
        let var = match self.variable {
            "jk" => "J_K (J_K2 = J_K3)",
            _ => "D",
        };
        let _ = writeln!(s, "resonances located along {var}");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "  {} ↔ {} [{}, M={}]  Ω_x={} Ω_z={} p_max={} (full evolution {})",
                r.states[0],
                r.states[1],
                basis_name(r.basis),
                r.twice_m_total.map(fmt_half).unwrap_or_else(|| "-".into()),
                format_sig_short(r.omega_x),
                format_sig_short(r.omega_z),
                opt_short(r.p_max),
                opt_short(r.p_max_full),
            );
            match r.resonance {
                Some(x) => {
                    let _ = writeln!(
                        s,
                        "      {} resonance at {}={}{}: Ω={} p_max={}",
                        r.kind.name(),
                        self.variable,
                        format_sig_short(x),
                        r.resonance_formula
                            .map(|f| format!(" (closed form {})", format_sig_short(f)))
                            .unwrap_or_default(),
                        opt_short(r.omega_resonance),
                        opt_short(r.p_max_resonance),
                    );
                }
                None => {
                    let _ = writeln!(s, "      no resonance along {}", self.variable);
                }
            }
            if r.leakage > LEAKAGE_TOL {
                let _ = writeln!(s, "      warning: block is not closed (leakage {:.3e})", r.leakage);
            }
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

fn basis_name(kind: BasisKind) -> &'static str {
    match kind {
        BasisKind::Product => "product",
        BasisKind::Device => "device",
        BasisKind::TotalSpin => "total_spin",
        BasisKind::Block => "block",
    }
}

fn format_sig_short(x: f64) -> String {
    crate::output::format_sig_digits(x, 6)
}

fn opt_short(x: Option<f64>) -> String {
    x.map(format_sig_short).unwrap_or_else(|| "-".into())
}

fn bundle_for(params: &ScenarioParams, model: ModelKind) -> Result<HamiltonianBundle> {
    match (params, model) {
        (ScenarioParams::Electron(p), _) => build_hamiltonian(p),
        (ScenarioParams::Cluster { j, d }, ModelKind::Bh3) => Ok(build_bh3(*j, *d)),
        (ScenarioParams::Cluster { j, d }, ModelKind::Trimer) => Ok(build_trimer(*j, *d)),
        (ScenarioParams::Cluster { .. }, m) => Err(Error::Config(format!("model {m} takes electron parameters"))),
    }
}

/// Hamiltonian of the model expressed in `kind`, with its state labels.
pub fn hamiltonian_in(
    params: &ScenarioParams,
    model: ModelKind,
    kind: BasisKind,
) -> Result<(HamiltonianBundle, crate::linalg::OperatorMatrix, Vec<BasisLabel>)> {
    let bundle = bundle_for(params, model)?;
    let t = transform_from_product(kind, bundle.spins)?;
    let h = t.apply_operator(&bundle.total)?;
    Ok((bundle, h, t.labels_out))
}

fn with_variable(params: &ScenarioParams, variable: &str, x: f64) -> Result<ScenarioParams> {
    let mut p = params.clone();
    p.set(variable, x)?;
    Ok(p)
}

fn index_of(labels: &[BasisLabel], l: &BasisLabel) -> Result<usize> {
    labels
        .iter()
        .position(|x| x == l)
        .ok_or_else(|| Error::UnknownLabel(l.code()))
}

/// Peak transition probability between the two states under full evolution,
/// or `None` when the block has no dynamics.
fn full_p_max(
    params: &ScenarioParams,
    model: ModelKind,
    kind: BasisKind,
    states: &[BasisLabel; 2],
    omega: f64,
) -> Result<Option<f64>> {
    if omega < SLOPE_TOL {
        return Ok(None);
    }
    let bundle = bundle_for(params, model)?;
    let grid = rabi_grid(omega, RABI_PERIODS, RABI_POINTS)?;
    let est = brute_force_rabi(&bundle, kind, &states[0], &states[1], &grid)?;
    Ok(Some(est.p_max))
}

struct Candidate {
    kind: BasisKind,
    states: [BasisLabel; 2],
}

fn candidates(model: ModelKind, params: &ScenarioParams) -> Result<Vec<Candidate>> {
    match model {
        ModelKind::Trimer => Ok(TrimerBlock::ALL
            .iter()
            .map(|b| Candidate {
                kind: b.basis(),
                states: b.states(),
            })
            .collect()),
        ModelKind::Bh3 => [4, 0, -4]
            .into_iter()
            .map(|m| {
                Ok(Candidate {
                    kind: BasisKind::TotalSpin,
                    states: bh3_phase_block(m)?,
                })
            })
            .collect(),
        _ => {
            let (_, h, labels) = hamiltonian_in(params, model, BasisKind::Device)?;
            Ok(block_decompose(&h, &labels)?
                .into_iter()
                .filter(|b| b.len() == 2)
                .map(|b| Candidate {
                    kind: BasisKind::Device,
                    states: [b.labels[0], b.labels[1]],
                })
                .collect())
        }
    }
}

/// `Ω_z` of the two states in `kind` under `params`.
fn omega_z_at(params: &ScenarioParams, model: ModelKind, kind: BasisKind, idx: &[usize]) -> Result<f64> {
    let (_, h, _) = hamiltonian_in(params, model, kind)?;
    Ok(reduce_two_level_matrix(&h.submatrix(idx))?.omega_z)
}

/// Closed-form resonance for the electron models, when known.
fn formula(p: &ModelParams, states: &[BasisLabel; 2]) -> Option<f64> {
    let s = p.spin();
    if s == Spin::HALF {
        return (p.b0 == 0.0).then(|| jj_resonance(p.jz, p.jxy));
    }
    let top = 2 * s.twice() as i32;
    let a = BasisLabel::device(-1, top, top);
    let b = BasisLabel::device(1, top, -top);
    let pred = generalized_dj_resonance(s, p.d, p.jz, p.jxy, p.b0, p.g1, p.g23);
    if states.contains(&a) {
        Some(pred.j_a)
    } else if states.contains(&b) {
        Some(pred.j_b)
    } else {
        None
    }
}

/// Lists every two-state block of the model with its Rabi parameters, the
/// root of `Ω_z` along the resonance variable (`J_K` for the electron
/// models, `D` for the spin-1 clusters) and full-evolution checks of the
/// transition amplitude at the given parameters and at the resonance.
pub fn resonance_report(model: ModelKind, params: &ScenarioParams) -> Result<ResonanceReport> {
    let variable = if model.is_cluster() { "d" } else { "jk" };
    let mut rows = Vec::new();
    for c in candidates(model, params)? {
        let (_, h, labels) = hamiltonian_in(params, model, c.kind)?;
        let idx = [index_of(&labels, &c.states[0])?, index_of(&labels, &c.states[1])?];
        let tl = reduce_two_level_matrix(&h.submatrix(&idx))?;
        let omega = tl.rabi_frequency();
        let p_max = (omega > SLOPE_TOL).then(|| (tl.omega_x / omega).powi(2));
        let p_max_full = full_p_max(params, model, c.kind, &c.states, omega)?;

        let z0 = omega_z_at(&with_variable(params, variable, 0.0)?, model, c.kind, &idx)?;
        let z1 = omega_z_at(&with_variable(params, variable, 1.0)?, model, c.kind, &idx)?;
        let slope = z1 - z0;
        let resonance = (slope.abs() > SLOPE_TOL).then(|| -z0 / slope);
        let kind = match (resonance, params.electron()) {
            (None, _) => ResonanceKind::None,
            (Some(_), Some(p)) if p.spin() == Spin::HALF => ResonanceKind::Jj,
            (Some(_), Some(p)) if p.jz != p.jxy || (p.b0 != 0.0 && p.g1 != p.g23) => {
                ResonanceKind::Generalized
            }
            (Some(_), _) => ResonanceKind::Dj,
        };
        let resonance_formula = match (resonance, params.electron()) {
            (Some(_), Some(p)) => formula(p, &c.states),
            _ => None,
        };
        let (omega_resonance, p_max_resonance) = match resonance {
            Some(x) => {
                let at = with_variable(params, variable, x)?;
                let (_, hr, _) = hamiltonian_in(&at, model, c.kind)?;
                let tr = reduce_two_level_matrix(&hr.submatrix(&idx))?;
                let w = tr.rabi_frequency();
                (Some(w), full_p_max(&at, model, c.kind, &c.states, w)?)
            }
            None => (None, None),
        };
        rows.push(BlockRow {
            basis: c.kind,
            states: c.states,
            twice_m_total: Some(c.states[0].twice_m_total())
                .filter(|&m| m == c.states[1].twice_m_total()),
            omega_x: tl.omega_x,
            omega_z: tl.omega_z,
            offset: tl.offset,
            leakage: leakage(&h, &idx),
            p_max,
            p_max_full,
            kind,
            resonance,
            resonance_formula,
            omega_resonance,
            p_max_resonance,
        });
    }
    let mut notes = Vec::new();
    match (model, params.electron()) {
        (_, Some(p)) if p.spin() == Spin::HALF => {
            notes.push("DJ resonance absent: the anisotropy term is constant for spin-1/2 pairs".into());
            notes.push(format!(
                "JJ resonance J_K = J_z - J_xy = {}",
                format_sig_short(jj_resonance(p.jz, p.jxy))
            ));
        }
        (_, Some(p)) => {
            notes.push(format!(
                "stretched-block DJ resonance J = D(s-1/2)/(s-1/4) = {}",
                format_sig_short(dj_resonance(p.spin(), p.d).j)
            ));
        }
        (ModelKind::Bh3, None) => {
            notes.push("no DJ resonance in the total-spin basis: phase blocks have Ω_z = J/2 independent of D".into());
            if let ScenarioParams::Cluster { j, .. } = params {
                if *j != 0.0 {
                    notes.push("phase blocks reach p_max = 3/4 at Ω = |J|".into());
                }
            }
        }
        _ => {}
    }
    Ok(ResonanceReport {
        model,
        params: params.clone(),
        variable,
        rows,
        notes,
    })
}

/// One row of the pure-state transition table.
#[derive(Clone, Debug, PartialEq)]
pub struct TransitionRow {
    pub s23: Spin,
    pub states: [BasisLabel; 2],
    pub resonance_formula: &'static str,
    /// Kondo coupling used for the row: the resonance, or the shared
    /// `J_K = -0.40` when there is none.
    pub jk: f64,
    pub resonance: Option<f64>,
    pub p_formula: &'static str,
    pub p_max: f64,
    pub omega_formula: &'static str,
    pub omega: f64,
}

/// Pure-state transitions of the spin-½ and spin-1 pair models at the
/// shared parameters (`J_H = -0.05`, `t = 0.05`, `D = -0.60`), each
/// verified by full evolution.
pub fn transition_table() -> Result<Vec<TransitionRow>> {
    let d = ModelParams::reference(Spin::ONE).d;
    let dev = BasisLabel::device;
    let rows: [(Spin, [BasisLabel; 2], &str, Option<f64>, &str, &str); 6] = [
        (Spin::HALF, [dev(1, 2, 0), dev(-1, 2, 2)], "-", None, "8/9", "3/4 |J_K|"),
        (Spin::HALF, [dev(-1, 2, 0), dev(1, 2, -2)], "-", None, "8/9", "3/4 |J_K|"),
        (Spin::ONE, [dev(1, 4, 2), dev(-1, 4, 4)], "2/3 D", Some(2.0 / 3.0 * d), "1", "2/3 |D|"),
        (Spin::ONE, [dev(1, 4, -4), dev(-1, 4, -2)], "2/3 D", Some(2.0 / 3.0 * d), "1", "2/3 |D|"),
        (Spin::ONE, [dev(1, 2, 0), dev(-1, 2, 2)], "-2D", Some(-2.0 * d), "1", "sqrt(2) |D|"),
        (Spin::ONE, [dev(1, 2, -2), dev(-1, 2, 0)], "-2D", Some(-2.0 * d), "1", "sqrt(2) |D|"),
    ];
    rows.into_iter()
        .map(|(s, states, jr_text, jr, p_text, w_text)| {
            let mut p = ModelParams::reference(s);
            let jk = jr.unwrap_or(p.jk2);
            p = p.with_kondo(jk);
            let bundle = build_hamiltonian(&p)?;
            let t = transform_from_product(BasisKind::Device, bundle.spins)?;
            let h = t.apply_operator(&bundle.total)?;
            let idx = [index_of(&t.labels_out, &states[0])?, index_of(&t.labels_out, &states[1])?];
            let tl = reduce_two_level_matrix(&h.submatrix(&idx))?;
            let grid = rabi_grid(tl.rabi_frequency(), RABI_PERIODS, RABI_POINTS)?;
            let est = brute_force_rabi(&bundle, BasisKind::Device, &states[1], &states[0], &grid)?;
            let omega = est
                .omega
                .ok_or_else(|| Error::Invariant(format!("no oscillation between {} and {}", states[0], states[1])))?;
            Ok(TransitionRow {
                s23: s,
                states,
                resonance_formula: jr_text,
                jk,
                resonance: jr,
                p_formula: p_text,
                p_max: est.p_max,
                omega_formula: w_text,
                omega,
            })
        })
        .collect()
}

pub const TRANSITION_HEADERS: [&str; 9] = [
    "s23",
    "transition",
    "j_r_formula",
    "j_r",
    "p_formula",
    "p",
    "omega_formula",
    "omega",
    "jk",
];

pub fn write_transition_table<W: Write>(out: W, comments: &[String], rows: &[TransitionRow]) -> Result<()> {
    let body = rows.iter().map(|r| {
        vec![
            r.s23.to_string(),
            format!("{} ↔ {}", r.states[0], r.states[1]),
            r.resonance_formula.to_string(),
            format_opt(r.resonance),
            r.p_formula.to_string(),
            format_sig(r.p_max),
            r.omega_formula.to_string(),
            format_sig(r.omega),
            format_sig(r.jk),
        ]
    });
    write_text_table(out, comments, &TRANSITION_HEADERS.map(String::from), body)
}

pub fn transition_table_text(rows: &[TransitionRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<5} {:<28} {:<8} {:>9} {:>10} {:>10}",
        "S23", "transition", "J_R", "J_R/cm-1", "P", "Ω/cm-1"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:<5} {:<28} {:<8} {:>9} {:>10} {:>10}",
            r.s23.to_string(),
            format!("{}, {}", r.states[0], r.states[1]),
            r.resonance_formula,
            opt_short(r.resonance),
            format_sig_short(r.p_max),
            format_sig_short(r.omega)
        );
    }
    s
}
