//! Coupled ("device") basis `|s1, m1⟩ ⊗ |s23, m23⟩`, the total-spin basis
//! built on top of it, and the decomposition of a Hamiltonian into
//! dynamically closed blocks.
//!
//! Ordering conventions:
//! * device states: particle 1 outermost (`m1` descending), then `s23`
//!   descending, then `m23` descending;
//! * total-spin states: `s23` descending, then `S` descending, then `M`
//!   descending.

mod cg;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub use cg::{clebsch_gordan, clebsch_gordan_squared_signed};

use crate::error::{Error, Result};
use crate::linalg::{kron, OperatorMatrix};
use crate::spin::{fmt_half, parse_twice, Spin};

/// Absolute threshold (cm⁻¹) separating symbolic zeros from couplings.
pub const BLOCK_THRESHOLD: f64 = 1e-12;

/// Which basis a state or operator is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisKind {
    Product,
    Device,
    TotalSpin,
    /// The states of a [`SpinBlock`], in block order.
    Block,
}

/// Quantum numbers of a basis state. All values are stored doubled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BasisLabel {
    Product { twice_m: [i32; 3] },
    Device { twice_m1: i32, twice_s23: i32, twice_m23: i32 },
    TotalSpin { twice_s23: i32, twice_s: i32, twice_m: i32 },
}

impl BasisLabel {
    pub fn device(twice_m1: i32, twice_s23: i32, twice_m23: i32) -> Self {
        BasisLabel::Device {
            twice_m1,
            twice_s23,
            twice_m23,
        }
    }

    /// Twice the total magnetic quantum number.
    pub fn twice_m_total(&self) -> i32 {
        match *self {
            BasisLabel::Product { twice_m } => twice_m.iter().sum(),
            BasisLabel::Device {
                twice_m1, twice_m23, ..
            } => twice_m1 + twice_m23,
            BasisLabel::TotalSpin { twice_m, .. } => twice_m,
        }
    }

    /// Compact text form accepted by [`FromStr`]: `down|2,2`, `1|2,1`,
    /// `up,1/2,-1/2` (product), `S=2,M=1;s23=1` (total spin).
    pub fn code(&self) -> String {
        match *self {
            BasisLabel::Product { twice_m } => format!(
                "{},{},{}",
                m1_code(twice_m[0]),
                fmt_half(twice_m[1]),
                fmt_half(twice_m[2])
            ),
            BasisLabel::Device {
                twice_m1,
                twice_s23,
                twice_m23,
            } => format!(
                "{}|{},{}",
                m1_code(twice_m1),
                fmt_half(twice_s23),
                fmt_half(twice_m23)
            ),
            BasisLabel::TotalSpin {
                twice_s23,
                twice_s,
                twice_m,
            } => format!(
                "S={},M={};s23={}",
                fmt_half(twice_s),
                fmt_half(twice_m),
                fmt_half(twice_s23)
            ),
        }
    }

    fn is_valid_device(&self) -> bool {
        match *self {
            BasisLabel::Device {
                twice_s23,
                twice_m23,
                ..
            } => twice_s23 >= 0 && twice_m23.abs() <= twice_s23 && (twice_s23 - twice_m23) % 2 == 0,
            _ => false,
        }
    }
}

fn m1_code(twice_m1: i32) -> String {
    match twice_m1 {
        1 => "up".into(),
        -1 => "down".into(),
        m => fmt_half(m),
    }
}

fn m1_arrow(twice_m1: i32) -> String {
    match twice_m1 {
        1 => "↑".into(),
        -1 => "↓".into(),
        m => fmt_half(m),
    }
}

fn parse_m1(text: &str) -> Result<i32> {
    match text.trim().to_ascii_lowercase().as_str() {
        "up" | "u" | "↑" | "+" => Ok(1),
        "down" | "dn" | "d" | "↓" | "-" => Ok(-1),
        other => parse_twice(other),
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            BasisLabel::Product { twice_m } => write!(
                f,
                "|{},{},{}⟩",
                m1_arrow(twice_m[0]),
                fmt_half(twice_m[1]),
                fmt_half(twice_m[2])
            ),
            BasisLabel::Device {
                twice_m1,
                twice_s23,
                twice_m23,
            } => write!(
                f,
                "|{}⟩|{},{}⟩",
                m1_arrow(twice_m1),
                fmt_half(twice_s23),
                fmt_half(twice_m23)
            ),
            BasisLabel::TotalSpin {
                twice_s23,
                twice_s,
                twice_m,
            } => write!(
                f,
                "|{},{}⟩_(s23={})",
                fmt_half(twice_s),
                fmt_half(twice_m),
                fmt_half(twice_s23)
            ),
        }
    }
}

impl FromStr for BasisLabel {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::UnknownLabel(text.to_string());
        let t = text.trim();
        if let Some(rest) = t.strip_prefix("S=") {
            // S=2,M=1;s23=1
            let (sm, s23) = rest.split_once(";s23=").ok_or_else(bad)?;
            let (s, m) = sm.split_once(",M=").ok_or_else(bad)?;
            return Ok(BasisLabel::TotalSpin {
                twice_s23: parse_twice(s23).map_err(|_| bad())?,
                twice_s: parse_twice(s).map_err(|_| bad())?,
                twice_m: parse_twice(m).map_err(|_| bad())?,
            });
        }
        if let Some((m1, coupled)) = t.split_once('|') {
            let (s23, m23) = coupled.split_once(',').ok_or_else(bad)?;
            let label = BasisLabel::Device {
                twice_m1: parse_m1(m1).map_err(|_| bad())?,
                twice_s23: parse_twice(s23).map_err(|_| bad())?,
                twice_m23: parse_twice(m23).map_err(|_| bad())?,
            };
            if !label.is_valid_device() {
                return Err(bad());
            }
            return Ok(label);
        }
        let parts: Vec<&str> = t.split(',').collect();
        if parts.len() == 3 {
            return Ok(BasisLabel::Product {
                twice_m: [
                    parse_m1(parts[0]).map_err(|_| bad())?,
                    parse_twice(parts[1]).map_err(|_| bad())?,
                    parse_twice(parts[2]).map_err(|_| bad())?,
                ],
            });
        }
        Err(bad())
    }
}

/// Parses a coupled-pair label `s23,m23` (e.g. `1,0`), returning doubled values.
pub fn parse_coupled(text: &str) -> Result<(i32, i32)> {
    let bad = || Error::UnknownLabel(text.to_string());
    let (s, m) = text.split_once(',').ok_or_else(bad)?;
    let s = parse_twice(s).map_err(|_| bad())?;
    let m = parse_twice(m).map_err(|_| bad())?;
    if s < 0 || m.abs() > s || (s - m) % 2 != 0 {
        return Err(bad());
    }
    Ok((s, m))
}

/// A real orthogonal change of basis. Row `r` of `matrix` holds the
/// components of target state `labels_out[r]` on the source states
/// `labels_in`, so `v_out = matrix · v_in` and `A_out = M A_in Mᵀ`.
#[derive(Clone, Debug)]
pub struct BasisTransform {
    pub matrix: OperatorMatrix,
    pub labels_in: Vec<BasisLabel>,
    pub labels_out: Vec<BasisLabel>,
}

impl BasisTransform {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn apply_operator(&self, op: &OperatorMatrix) -> Result<OperatorMatrix> {
        if op.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: op.dim(),
            });
        }
        Ok(op.conjugate_by(self.matrix.matrix()))
    }

    pub fn apply_state(&self, v: &DVector<Complex64>) -> DVector<Complex64> {
        self.matrix.matrix() * v
    }

    /// Components of target state `k` in the source basis.
    pub fn target_state_in_source(&self, k: usize) -> DVector<Complex64> {
        self.matrix.matrix().row(k).transpose().map(|z| z.conj())
    }

    /// Composition: first `self`, then `next`.
    pub fn then(&self, next: &BasisTransform) -> BasisTransform {
        BasisTransform {
            matrix: OperatorMatrix::new(next.matrix.matrix() * self.matrix.matrix()),
            labels_in: self.labels_in.clone(),
            labels_out: next.labels_out.clone(),
        }
    }
}

/// The product basis `|m1⟩|m2⟩|m3⟩` in kron order.
pub fn product_labels(spins: [Spin; 3]) -> Vec<BasisLabel> {
    let mut labels = Vec::with_capacity(spins.iter().map(|s| s.dim()).product());
    for i1 in 0..spins[0].dim() {
        for i2 in 0..spins[1].dim() {
            for i3 in 0..spins[2].dim() {
                labels.push(BasisLabel::Product {
                    twice_m: [spins[0].twice_m(i1), spins[1].twice_m(i2), spins[2].twice_m(i3)],
                });
            }
        }
    }
    labels
}

/// `(2·s23, 2·m23)` for the coupled pair, `s23` then `m23` descending.
pub fn coupled_pair_states(s2: Spin, s3: Spin) -> Vec<(i32, i32)> {
    let (t2, t3) = (s2.twice() as i32, s3.twice() as i32);
    let mut out = Vec::new();
    let mut ts = t2 + t3;
    while ts >= (t2 - t3).abs() {
        let mut tm = ts;
        while tm >= -ts {
            out.push((ts, tm));
            tm -= 2;
        }
        ts -= 2;
    }
    out
}

/// Product → device transform for a spin-½ particle 1.
pub fn product_to_device(s2: Spin, s3: Spin) -> BasisTransform {
    product_to_device_with(Spin::HALF, s2, s3)
}

/// Product → device transform for an arbitrary particle-1 spin.
pub fn product_to_device_with(s1: Spin, s2: Spin, s3: Spin) -> BasisTransform {
    let pair = coupled_pair_states(s2, s3);
    let (d2, d3) = (s2.dim(), s3.dim());
    let mut w = DMatrix::<f64>::zeros(pair.len(), d2 * d3);
    for (k, &(ts, tm)) in pair.iter().enumerate() {
        for i2 in 0..d2 {
            for i3 in 0..d3 {
                let (m2, m3) = (s2.twice_m(i2), s3.twice_m(i3));
                if m2 + m3 != tm {
                    continue;
                }
                w[(k, i2 * d3 + i3)] =
                    clebsch_gordan(s2.twice() as i32, m2, s3.twice() as i32, m3, ts, tm)
                        .expect("valid quantum numbers by construction");
            }
        }
    }
    let matrix = kron(
        &OperatorMatrix::identity(s1.dim()),
        &OperatorMatrix::from_real(w),
    );
    let mut labels_out = Vec::with_capacity(matrix.dim());
    for i1 in 0..s1.dim() {
        for &(ts, tm) in &pair {
            labels_out.push(BasisLabel::device(s1.twice_m(i1), ts, tm));
        }
    }
    BasisTransform {
        matrix,
        labels_in: product_labels([s1, s2, s3]),
        labels_out,
    }
}

/// Device → total-spin transform: couples particle 1 to each `|s23⟩` multiplet.
pub fn device_to_total_spin(s1: Spin, s2: Spin, s3: Spin) -> BasisTransform {
    let device = product_to_device_with(s1, s2, s3).labels_out;
    let t1 = s1.twice() as i32;
    let mut s23_values: Vec<i32> = coupled_pair_states(s2, s3).iter().map(|p| p.0).collect();
    s23_values.dedup();

    let mut labels_out = Vec::with_capacity(device.len());
    for &ts23 in &s23_values {
        let mut ts = t1 + ts23;
        while ts >= (t1 - ts23).abs() {
            let mut tm = ts;
            while tm >= -ts {
                labels_out.push(BasisLabel::TotalSpin {
                    twice_s23: ts23,
                    twice_s: ts,
                    twice_m: tm,
                });
                tm -= 2;
            }
            ts -= 2;
        }
    }
    let n = device.len();
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (r, out) in labels_out.iter().enumerate() {
        let BasisLabel::TotalSpin {
            twice_s23,
            twice_s,
            twice_m,
        } = *out
        else {
            unreachable!()
        };
        for (col, inp) in device.iter().enumerate() {
            let BasisLabel::Device {
                twice_m1,
                twice_s23: ds,
                twice_m23,
            } = *inp
            else {
                unreachable!()
            };
            if ds != twice_s23 || twice_m1 + twice_m23 != twice_m {
                continue;
            }
            m[(r, col)] = clebsch_gordan(t1, twice_m1, twice_s23, twice_m23, twice_s, twice_m)
                .expect("valid quantum numbers by construction");
        }
    }
    BasisTransform {
        matrix: OperatorMatrix::from_real(m),
        labels_in: device,
        labels_out,
    }
}

/// Product → `kind` transform for the given spins. `Block` is rejected.
pub fn transform_from_product(kind: BasisKind, spins: [Spin; 3]) -> Result<BasisTransform> {
    let device = product_to_device_with(spins[0], spins[1], spins[2]);
    match kind {
        BasisKind::Device => Ok(device),
        BasisKind::TotalSpin => Ok(device.then(&device_to_total_spin(spins[0], spins[1], spins[2]))),
        BasisKind::Product => {
            let labels = product_labels(spins);
            Ok(BasisTransform {
                matrix: OperatorMatrix::identity(labels.len()),
                labels_in: labels.clone(),
                labels_out: labels,
            })
        }
        BasisKind::Block => Err(Error::InvalidBlock(
            "a block basis needs a block decomposition".into(),
        )),
    }
}

/// The device basis of a three-particle model with the transform from the
/// product basis and label lookup.
#[derive(Clone, Debug)]
pub struct DeviceBasis {
    pub spins: [Spin; 3],
    pub transform: BasisTransform,
}

impl DeviceBasis {
    pub fn new(spins: [Spin; 3]) -> Self {
        Self {
            spins,
            transform: product_to_device_with(spins[0], spins[1], spins[2]),
        }
    }

    pub fn dim(&self) -> usize {
        self.transform.dim()
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.transform.labels_out
    }

    /// Number of coupled-pair states `|s23, m23⟩`.
    pub fn pair_dim(&self) -> usize {
        self.spins[1].dim() * self.spins[2].dim()
    }

    pub fn index_of(&self, label: &BasisLabel) -> Result<usize> {
        self.labels()
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.code()))
    }

    pub fn parse(&self, text: &str) -> Result<usize> {
        let label: BasisLabel = text.parse()?;
        self.index_of(&label)
    }

    /// Index of `|s23, m23⟩` within the coupled-pair factor.
    pub fn pair_index(&self, twice_s23: i32, twice_m23: i32) -> Result<usize> {
        coupled_pair_states(self.spins[1], self.spins[2])
            .iter()
            .position(|&p| p == (twice_s23, twice_m23))
            .ok_or_else(|| {
                Error::UnknownLabel(format!("{},{}", fmt_half(twice_s23), fmt_half(twice_m23)))
            })
    }

    pub fn basis_vector(&self, index: usize) -> DVector<Complex64> {
        let mut v = DVector::zeros(self.dim());
        v[index] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn to_device(&self, product_op: &OperatorMatrix) -> Result<OperatorMatrix> {
        self.transform.apply_operator(product_op)
    }
}

/// Two-level reduction `H = offset·1 + Ω_x (cos φ σx − sin φ σy) + Ω_z σz`
/// of a 2×2 block in its stored ordering.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoLevel {
    /// Modulus of the off-diagonal element.
    pub omega_x: f64,
    pub omega_z: f64,
    pub offset: f64,
    /// Phase of the off-diagonal element `H[0][1]`: 0 or π for real couplings.
    pub phase: f64,
}

impl TwoLevel {
    pub fn rabi_frequency(&self) -> f64 {
        self.omega_x.hypot(self.omega_z)
    }

    pub fn to_matrix(&self) -> OperatorMatrix {
        let off = Complex64::from_polar(self.omega_x, self.phase);
        let data = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(self.offset + self.omega_z, 0.0),
                off,
                off.conj(),
                Complex64::new(self.offset - self.omega_z, 0.0),
            ],
        );
        OperatorMatrix::hermitian(data).expect("two-level matrix is Hermitian")
    }
}

/// Reduces a 2×2 Hermitian matrix to `(Ω_x, Ω_z, offset)`.
pub fn reduce_two_level_matrix(h: &OperatorMatrix) -> Result<TwoLevel> {
    if h.dim() != 2 {
        return Err(Error::InvalidBlock(format!(
            "two-level reduction needs a 2×2 block, got {}×{}",
            h.dim(),
            h.dim()
        )));
    }
    let (a, b) = (h.get(0, 0).re, h.get(1, 1).re);
    let off = h.get(0, 1);
    let phase = if off.norm() > 0.0 { off.arg() } else { 0.0 };
    Ok(TwoLevel {
        omega_x: off.norm(),
        omega_z: 0.5 * (a - b),
        offset: 0.5 * (a + b),
        phase,
    })
}

/// A set of basis states closed under the Hamiltonian.
#[derive(Clone, Debug)]
pub struct SpinBlock {
    /// Ascending indices into the basis the block was cut from.
    pub indices: Vec<usize>,
    pub labels: Vec<BasisLabel>,
    /// Twice the conserved total `m`, when uniform across the block.
    pub twice_m_total: Option<i32>,
    pub reduced_h: OperatorMatrix,
    pub two_level: Option<TwoLevel>,
}

impl SpinBlock {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.binary_search(&index).is_ok()
    }

    pub fn describe(&self) -> String {
        let states: Vec<String> = self.labels.iter().map(|l| l.to_string()).collect();
        let m = self
            .twice_m_total
            .map(fmt_half)
            .unwrap_or_else(|| "mixed".into());
        let mut s = format!("m={m} size={} states=[{}]", self.len(), states.join(", "));
        if let Some(tl) = &self.two_level {
            s.push_str(&format!(
                " omega_x={:.6} omega_z={:.6} offset={:.6}",
                tl.omega_x, tl.omega_z, tl.offset
            ));
        }
        s
    }
}

/// Reduces a 2-state block; other sizes are rejected.
pub fn reduce_two_level(block: &SpinBlock) -> Result<TwoLevel> {
    reduce_two_level_matrix(&block.reduced_h)
}

/// Largest coupling magnitude from `indices` to the rest of the basis.
pub fn leakage(h: &OperatorMatrix, indices: &[usize]) -> f64 {
    let n = h.dim();
    let mut worst: f64 = 0.0;
    for &i in indices {
        for j in 0..n {
            if indices.contains(&j) {
                continue;
            }
            worst = worst.max(h.get(i, j).norm()).max(h.get(j, i).norm());
        }
    }
    worst
}

/// Splits `h` into connected components of the graph with edges
/// `|H[i][j]| > BLOCK_THRESHOLD`. Blocks are returned in order of their
/// smallest index; 2-state blocks carry their two-level reduction.
pub fn block_decompose(h: &OperatorMatrix, labels: &[BasisLabel]) -> Result<Vec<SpinBlock>> {
    let n = h.dim();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if h.get(i, j).norm() > BLOCK_THRESHOLD || h.get(j, i).norm() > BLOCK_THRESHOLD {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut root_slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if root_slot[r] == usize::MAX {
            root_slot[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[root_slot[r]].push(i);
    }
    groups
        .into_iter()
        .map(|indices| {
            let block_labels: Vec<BasisLabel> = indices.iter().map(|&i| labels[i]).collect();
            let first = block_labels[0].twice_m_total();
            let twice_m_total = block_labels
                .iter()
                .all(|l| l.twice_m_total() == first)
                .then_some(first);
            let reduced_h = h.submatrix(&indices);
            let two_level = if indices.len() == 2 {
                Some(reduce_two_level_matrix(&reduced_h)?)
            } else {
                None
            };
            Ok(SpinBlock {
                indices,
                labels: block_labels,
                twice_m_total,
                reduced_h,
                two_level,
            })
        })
        .collect()
}

/// Finds the block containing both states, if they share one.
pub fn block_containing(blocks: &[SpinBlock], a: usize, b: usize) -> Option<&SpinBlock> {
    blocks.iter().find(|blk| blk.contains(a) && blk.contains(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eig;
    use crate::model::{build_hamiltonian, ModelParams};
    use std::f64::consts::FRAC_1_SQRT_2;

    fn device_h(p: &ModelParams) -> (DeviceBasis, OperatorMatrix) {
        let h = build_hamiltonian(p).unwrap();
        let basis = DeviceBasis::new(h.spins);
        let hd = basis.to_device(&h.total).unwrap();
        (basis, hd)
    }

    fn sizes(blocks: &[SpinBlock]) -> Vec<usize> {
        let mut s: Vec<usize> = blocks.iter().map(|b| b.len()).collect();
        s.sort();
        s
    }

    #[test]
    fn label_text_round_trip() {
        for text in ["down|2,2", "up|1,0", "1|2,1", "-1|1,0", "up|3/2,-1/2"] {
            let l: BasisLabel = text.parse().unwrap();
            assert_eq!(l.code(), text);
        }
        let t: BasisLabel = "S=2,M=-1;s23=1".parse().unwrap();
        assert_eq!(t.code(), "S=2,M=-1;s23=1");
        assert!("up|1,2".parse::<BasisLabel>().is_err());
        assert!("sideways|1,0".parse::<BasisLabel>().is_err());
        assert_eq!(
            BasisLabel::device(-1, 4, 4).to_string(),
            "|↓⟩|2,2⟩"
        );
    }

    #[test]
    fn spin_half_pair_singlet_rows() {
        let t = product_to_device(Spin::HALF, Spin::HALF);
        assert_eq!(t.dim(), 8);
        // device index 3 = |↑⟩|0,0⟩, product |↑↑↓⟩ = 1 and |↑↓↑⟩ = 2
        assert_eq!(t.labels_out[3], BasisLabel::device(1, 0, 0));
        assert!((t.matrix.get(3, 1).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((t.matrix.get(3, 2).re + FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn spin_one_pair_row_for_two_one() {
        let t = product_to_device(Spin::ONE, Spin::ONE);
        let row = t
            .labels_out
            .iter()
            .position(|l| *l == BasisLabel::device(1, 4, 2))
            .unwrap();
        // product (m1=↑, m2=1, m3=0) → index 1, (↑, 0, 1) → index 3
        assert!((t.matrix.get(row, 1).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((t.matrix.get(row, 3).re - FRAC_1_SQRT_2).abs() < 1e-15);
        let nonzero = (0..18).filter(|&c| t.matrix.get(row, c).norm() > 0.0).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn transforms_are_orthogonal_up_to_spin_five() {
        for twice in 1..=10 {
            let s = Spin::from_twice(twice);
            let t = product_to_device(s, s);
            assert!(t.matrix.unitarity_residual() < 1e-12, "2s = {twice}");
            assert!(t.matrix.matrix().iter().all(|z| z.im == 0.0));
        }
        let t = device_to_total_spin(Spin::ONE, Spin::ONE, Spin::ONE);
        assert!(t.matrix.unitarity_residual() < 1e-12);
    }

    #[test]
    fn device_transform_preserves_spectrum() {
        let mut p = ModelParams::reference(Spin::from_twice(3));
        p.jk3 = 0.17;
        p.jxy = 0.3;
        let h = build_hamiltonian(&p).unwrap();
        let basis = DeviceBasis::new(h.spins);
        let hd = basis.to_device(&h.total).unwrap();
        let a = hermitian_eig(&h.total).unwrap().eigenvalues;
        let b = hermitian_eig(&hd).unwrap().eigenvalues;
        assert!((a - b).amax() < 1e-10);
    }

    #[test]
    fn stretched_block_at_reference_parameters() {
        let p = ModelParams::reference(Spin::ONE);
        let (basis, hd) = device_h(&p);
        let down22 = basis.parse("down|2,2").unwrap();
        let up21 = basis.parse("up|2,1").unwrap();
        // common shift: 2 Re t + J_H s² from the Heisenberg term on s23 = 2s
        let shift = 0.1 + (-0.05);
        assert!((hd.get(down22, down22).re - shift - (-0.80)).abs() < 1e-12);
        assert!((hd.get(down22, up21).re - (-0.40)).abs() < 1e-12);
        // J(s − ½) + D(s² + (s−1)²) = −0.2 − 0.6
        assert!((hd.get(up21, up21).re - shift - (-0.80)).abs() < 1e-12);
    }

    #[test]
    fn spin_half_blocks() {
        let mut p = ModelParams::reference(Spin::HALF);
        p.jk3 = -0.2;
        let (basis, hd) = device_h(&p);
        let blocks = block_decompose(&hd, basis.labels()).unwrap();
        assert_eq!(sizes(&blocks), vec![1, 1, 3, 3]);
        for b in &blocks {
            assert!(b.twice_m_total.is_some());
            assert!(leakage(&hd, &b.indices) < 1e-12);
        }

        let p = ModelParams::reference(Spin::HALF);
        let (basis, hd) = device_h(&p);
        let blocks = block_decompose(&hd, basis.labels()).unwrap();
        assert_eq!(sizes(&blocks), vec![1, 1, 1, 1, 2, 2]);
        let jk: f64 = -0.40;
        for b in blocks.iter().filter(|b| b.len() == 2) {
            let tl = b.two_level.unwrap();
            let sign = b.twice_m_total.unwrap().signum() as f64;
            assert!((tl.omega_x - jk.abs() * FRAC_1_SQRT_2).abs() < 1e-12);
            assert!((tl.omega_z - sign * jk / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spin_one_isotropic_blocks_match_closed_forms() {
        let (d, jk): (f64, f64) = (-0.6, -0.4);
        let p = ModelParams::reference(Spin::ONE);
        let (basis, hd) = device_h(&p);
        let blocks = block_decompose(&hd, basis.labels()).unwrap();
        let two: Vec<&SpinBlock> = blocks.iter().filter(|b| b.len() == 2).collect();
        assert_eq!(two.len(), 4);
        for b in two {
            let tl = b.two_level.unwrap();
            let m = b.twice_m_total.unwrap();
            let sign = m.signum() as f64;
            match m.abs() {
                3 => {
                    assert!((tl.omega_x - jk.abs()).abs() < 1e-12);
                    assert!((tl.omega_z + sign * 0.5 * (d - 1.5 * jk)).abs() < 1e-12);
                }
                1 => {
                    assert!((tl.omega_x - jk.abs() * FRAC_1_SQRT_2).abs() < 1e-12);
                    assert!((tl.omega_z - sign * 0.5 * (d + 0.5 * jk)).abs() < 1e-12);
                }
                _ => panic!("unexpected two-level block {}", b.describe()),
            }
        }
    }

    #[test]
    fn general_spin_stretched_block() {
        for twice in 2..=10 {
            let s = Spin::from_twice(twice);
            let sv = s.value();
            let (d, j, jz, jxy) = (0.37, -0.23, 0.11, -0.07);
            let mut p = ModelParams::zero(s).with_kondo(j).with_anisotropy(d);
            p.jz = jz;
            p.jxy = jxy;
            let (basis, hd) = device_h(&p);
            let blocks = block_decompose(&hd, basis.labels()).unwrap();
            let t = twice as i32;
            let a = basis.index_of(&BasisLabel::device(-1, 2 * t, 2 * t)).unwrap();
            let b = basis.index_of(&BasisLabel::device(1, 2 * t, 2 * t - 2)).unwrap();
            let blk = block_containing(&blocks, a, b).unwrap();
            assert_eq!(blk.len(), 2);
            let tl = reduce_two_level(blk).unwrap();
            let omega_z = j * (sv - 0.25) - d * (sv - 0.5) + (jxy - jz) * sv / 2.0;
            assert!((tl.omega_x - j.abs() * sv.sqrt()).abs() < 1e-12, "2s = {twice}");
            assert!((tl.omega_z - omega_z).abs() < 1e-12, "2s = {twice}");
            assert!(tl.to_matrix().max_abs_diff(&blk.reduced_h) < 1e-12);
        }
    }

    #[test]
    fn blocks_partition_the_basis() {
        let mut p = ModelParams::reference(Spin::from_twice(3)).with_field(0.4, 2.0, 1.2);
        p.jk3 = 0.05;
        let (basis, hd) = device_h(&p);
        let blocks = block_decompose(&hd, basis.labels()).unwrap();
        let mut all: Vec<usize> = blocks.iter().flat_map(|b| b.indices.clone()).collect();
        all.sort();
        assert_eq!(all, (0..basis.dim()).collect::<Vec<_>>());
    }

    #[test]
    fn reduce_rejects_wrong_size() {
        let m = OperatorMatrix::identity(3);
        assert!(matches!(reduce_two_level_matrix(&m), Err(Error::InvalidBlock(_))));
    }

    #[test]
    fn complex_coupling_phase_is_reported() {
        let data = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 0.5),
                Complex64::new(0.0, -0.5),
                Complex64::new(-1.0, 0.0),
            ],
        );
        let h = OperatorMatrix::hermitian(data).unwrap();
        let tl = reduce_two_level_matrix(&h).unwrap();
        assert!((tl.omega_x - 0.5).abs() < 1e-15);
        assert!((tl.phase - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert!(tl.to_matrix().max_abs_diff(&h) < 1e-15);
    }
}
