//! Exact spin magnitudes and angular-momentum matrices.
//!
//! States of a single spin are ordered `m = s, s-1, …, -s` everywhere in the
//! crate. Half-integers are carried as "twice" integers (`2m`, `2s`) so that
//! all bookkeeping stays exact.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::OperatorMatrix;

/// A spin magnitude stored as `2s`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub const HALF: Spin = Spin { twice: 1 };
    pub const ONE: Spin = Spin { twice: 2 };

    pub const fn from_twice(twice: u32) -> Self {
        Self { twice }
    }

    /// A spin that can carry dynamics (`s ≥ ½`).
    pub fn dynamic(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::InvalidSpin("spin 0 carries no dynamics".into()));
        }
        Ok(Self { twice })
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// `2m` for basis index `k` (descending order).
    pub fn twice_m(self, k: usize) -> i32 {
        self.twice as i32 - 2 * k as i32
    }

    /// Basis index of `2m`, if it is a valid projection.
    pub fn index_of(self, twice_m: i32) -> Option<usize> {
        let t = self.twice as i32;
        if twice_m.abs() > t || (t - twice_m) % 2 != 0 {
            return None;
        }
        Some(((t - twice_m) / 2) as usize)
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_half(self.twice as i32))
    }
}

impl FromStr for Spin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let twice = parse_twice(s)?;
        if twice < 0 {
            return Err(Error::InvalidSpin(format!("negative spin `{s}`")));
        }
        Ok(Spin::from_twice(twice as u32))
    }
}

impl TryFrom<String> for Spin {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Spin> for String {
    fn from(s: Spin) -> String {
        s.to_string()
    }
}

/// Formats `x/2` as `"3/2"`, `"-1/2"`, `"2"`.
pub fn fmt_half(twice: i32) -> String {
    if twice % 2 == 0 {
        format!("{}", twice / 2)
    } else {
        format!("{twice}/2")
    }
}

/// Parses `"3/2"`, `"-1/2"`, `"2"`, `"1.5"` into twice the value.
pub fn parse_twice(text: &str) -> Result<i32> {
    let t = text.trim();
    let bad = || Error::InvalidQuantumNumbers(format!("`{text}` is not an integer or half-integer"));
    if let Some((num, den)) = t.split_once('/') {
        let num: i32 = num.trim().parse().map_err(|_| bad())?;
        let den: i32 = den.trim().parse().map_err(|_| bad())?;
        return match den {
            1 => Ok(2 * num),
            2 => Ok(num),
            _ => Err(bad()),
        };
    }
    if let Ok(n) = t.parse::<i32>() {
        return Ok(2 * n);
    }
    let x: f64 = t.parse().map_err(|_| bad())?;
    let twice = (2.0 * x).round();
    if (2.0 * x - twice).abs() > 1e-9 {
        return Err(bad());
    }
    Ok(twice as i32)
}

/// `(Sx, Sy, Sz)` for one spin, with ħ = 1.
#[derive(Clone, Debug)]
pub struct SpinMatrices {
    pub x: OperatorMatrix,
    pub y: OperatorMatrix,
    pub z: OperatorMatrix,
}

impl SpinMatrices {
    pub fn components(&self) -> [&OperatorMatrix; 3] {
        [&self.x, &self.y, &self.z]
    }
}

/// Standard angular-momentum matrices in the `|s, m⟩` basis, `m` descending.
///
/// `S+|s,m⟩ = √(s(s+1) − m(m+1)) |s,m+1⟩`. For `s = 0` the 1×1 zero
/// operators are returned.
pub fn spin_matrices(s: Spin) -> SpinMatrices {
    let n = s.dim();
    let sv = s.value();
    let mut plus = DMatrix::<f64>::zeros(n, n);
    let mut z = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let m = s.twice_m(k) as f64 / 2.0;
        z[(k, k)] = m;
        if k > 0 {
            // row k-1 holds m+1
            plus[(k - 1, k)] = (sv * (sv + 1.0) - m * (m + 1.0)).sqrt();
        }
    }
    let minus = plus.transpose();
    let x = (&plus + &minus) * 0.5;
    let y = (&plus - &minus).map(|v| Complex64::new(0.0, -0.5 * v));
    SpinMatrices {
        x: OperatorMatrix::hermitian(x.map(|v| Complex64::new(v, 0.0))).expect("Sx is Hermitian"),
        y: OperatorMatrix::hermitian(y).expect("Sy is Hermitian"),
        z: OperatorMatrix::hermitian(z.map(|v| Complex64::new(v, 0.0))).expect("Sz is Hermitian"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn spin_half_is_half_pauli() {
        let s = spin_matrices(Spin::HALF);
        assert_eq!(s.z, OperatorMatrix::from_real_diagonal(&[0.5, -0.5]));
        assert_eq!(s.x.get(0, 1), c(0.5, 0.0));
        assert_eq!(s.x.get(1, 0), c(0.5, 0.0));
        assert_eq!(s.y.get(0, 1), c(0.0, -0.5));
        assert_eq!(s.y.get(1, 0), c(0.0, 0.5));
    }

    #[test]
    fn spin_one_ladder() {
        let s = spin_matrices(Spin::ONE);
        assert_eq!(s.z, OperatorMatrix::from_real_diagonal(&[1.0, 0.0, -1.0]));
        for (i, j) in [(0, 1), (1, 0), (1, 2), (2, 1)] {
            assert!((s.x.get(i, j).re - FRAC_1_SQRT_2).abs() < 1e-15);
        }
        assert_eq!(s.x.get(0, 2), c(0.0, 0.0));
    }

    #[test]
    fn algebra_holds_for_many_spins() {
        for twice in 1..=20 {
            let s = Spin::from_twice(twice);
            let m = spin_matrices(s);
            let i = c(0.0, 1.0);
            let cyc = [(&m.x, &m.y, &m.z), (&m.y, &m.z, &m.x), (&m.z, &m.x, &m.y)];
            for (a, b, cc) in cyc {
                let lhs = a.commutator(b);
                let rhs = cc.scale_complex(i);
                assert!(lhs.max_abs_diff(&rhs) < 1e-12, "2s = {twice}");
            }
            let cas = &(&(&m.x * &m.x) + &(&m.y * &m.y)) + &(&m.z * &m.z);
            let sv = s.value();
            let expect = OperatorMatrix::identity(s.dim()).scale(sv * (sv + 1.0));
            assert!(cas.max_abs_diff(&expect) < 1e-12, "2s = {twice}");
        }
    }

    #[test]
    fn spin_zero_is_trivial() {
        let m = spin_matrices(Spin::from_twice(0));
        assert_eq!(m.z.dim(), 1);
        assert_eq!(m.x.max_abs(), 0.0);
        assert!(Spin::dynamic(0).is_err());
    }

    #[test]
    fn parse_and_format_half_integers() {
        assert_eq!(parse_twice("3/2").unwrap(), 3);
        assert_eq!(parse_twice("-1/2").unwrap(), -1);
        assert_eq!(parse_twice("2").unwrap(), 4);
        assert_eq!(parse_twice("2.5").unwrap(), 5);
        assert!(parse_twice("1/3").is_err());
        assert!(parse_twice("0.3").is_err());
        assert_eq!(fmt_half(-3), "-3/2");
        assert_eq!(fmt_half(4), "2");
        assert_eq!("5/2".parse::<Spin>().unwrap().dim(), 6);
    }

    #[test]
    fn index_round_trip() {
        let s = Spin::from_twice(3);
        for k in 0..s.dim() {
            assert_eq!(s.index_of(s.twice_m(k)), Some(k));
        }
        assert_eq!(s.index_of(0), None);
        assert_eq!(s.index_of(5), None);
    }
}
