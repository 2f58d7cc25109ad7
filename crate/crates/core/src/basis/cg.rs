//! Clebsch–Gordan coefficients from the Racah formula, evaluated exactly in
//! big rationals and rounded to `f64` once at the end.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

fn factorial(n: i64) -> BigInt {
    (2..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

fn check_pair(twice_j: i32, twice_m: i32) -> Result<()> {
    if twice_j < 0 || twice_m.abs() > twice_j || (twice_j - twice_m) % 2 != 0 {
        return Err(Error::InvalidQuantumNumbers(format!(
            "j = {twice_j}/2, m = {twice_m}/2"
        )));
    }
    Ok(())
}

/// `⟨j1 m1; j2 m2 | J M⟩` in the Condon–Shortley convention. All arguments are
/// twice the physical values. Returns 0 when `M ≠ m1 + m2` or the triangle
/// rule fails.
pub fn clebsch_gordan(
    twice_j1: i32,
    twice_m1: i32,
    twice_j2: i32,
    twice_m2: i32,
    twice_j: i32,
    twice_m: i32,
) -> Result<f64> {
    check_pair(twice_j1, twice_m1)?;
    check_pair(twice_j2, twice_m2)?;
    check_pair(twice_j, twice_m)?;
    Ok(clebsch_gordan_squared_signed(twice_j1, twice_m1, twice_j2, twice_m2, twice_j, twice_m)
        .map(|(sign, sq)| sign * sq.to_f64().expect("finite rational").sqrt())
        .unwrap_or(0.0))
}

/// Exact `(sign, C²)`, or `None` when the coefficient vanishes by selection
/// rules or by cancellation.
pub fn clebsch_gordan_squared_signed(
    tj1: i32,
    tm1: i32,
    tj2: i32,
    tm2: i32,
    tj: i32,
    tm: i32,
) -> Option<(f64, BigRational)> {
    if tm != tm1 + tm2 {
        return None;
    }
    if tj > tj1 + tj2 || tj < (tj1 - tj2).abs() || (tj1 + tj2 - tj) % 2 != 0 {
        return None;
    }
    let h = |x: i32| -> i64 {
        debug_assert!(x % 2 == 0);
        (x / 2) as i64
    };
    let a = h(tj1 + tj2 - tj);
    let b = h(tj1 - tj2 + tj);
    let cc = h(-tj1 + tj2 + tj);
    let d = h(tj1 + tj2 + tj) + 1;

    let num = BigInt::from(tj + 1)
        * factorial(a)
        * factorial(b)
        * factorial(cc)
        * factorial(h(tj + tm))
        * factorial(h(tj - tm))
        * factorial(h(tj1 - tm1))
        * factorial(h(tj1 + tm1))
        * factorial(h(tj2 - tm2))
        * factorial(h(tj2 + tm2));
    let prefactor = BigRational::new(num, factorial(d));

    let e1 = h(tj1 - tm1);
    let e2 = h(tj2 + tm2);
    let e3 = h(tj - tj2 + tm1);
    let e4 = h(tj - tj1 - tm2);
    let k_min = 0.max(-e3).max(-e4);
    let k_max = a.min(e1).min(e2);
    let mut sum = BigRational::zero();
    for k in k_min..=k_max {
        let den = factorial(k)
            * factorial(a - k)
            * factorial(e1 - k)
            * factorial(e2 - k)
            * factorial(e3 + k)
            * factorial(e4 + k);
        let term = BigRational::new(BigInt::one(), den);
        if k % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if sum.is_zero() {
        return None;
    }
    let sign = if sum.is_negative() { -1.0 } else { 1.0 };
    Some((sign, prefactor * &sum * &sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn stretched_state_is_unity() {
        for ts in 1..=20 {
            let v = clebsch_gordan(ts, ts, ts, ts, 2 * ts, 2 * ts).unwrap();
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn one_step_down_is_symmetric_half() {
        // ⟨s,s; s,s−1 | 2s,2s−1⟩ = 1/√2 for every s.
        for ts in 1..=20 {
            let v = clebsch_gordan(ts, ts, ts, ts - 2, 2 * ts, 2 * ts - 2).unwrap();
            assert!((v - FRAC_1_SQRT_2).abs() < 1e-15, "2s = {ts}");
        }
    }

    #[test]
    fn singlet_signs() {
        assert!((clebsch_gordan(1, 1, 1, -1, 0, 0).unwrap() - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((clebsch_gordan(1, -1, 1, 1, 0, 0).unwrap() + FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn known_spin_one_values() {
        // ⟨1,1; 1,−1 | 0,0⟩ = 1/√3, ⟨1,0; 1,0 | 0,0⟩ = −1/√3
        let r3 = 1.0 / 3f64.sqrt();
        assert!((clebsch_gordan(2, 2, 2, -2, 0, 0).unwrap() - r3).abs() < 1e-15);
        assert!((clebsch_gordan(2, 0, 2, 0, 0, 0).unwrap() + r3).abs() < 1e-15);
        // ⟨1,0; 1,0 | 2,0⟩ = √(2/3), ⟨1,0; 1,0 | 1,0⟩ = 0
        assert!((clebsch_gordan(2, 0, 2, 0, 4, 0).unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(clebsch_gordan(2, 0, 2, 0, 2, 0).unwrap(), 0.0);
        // ⟨1/2,1/2; 1,0 | 3/2,1/2⟩ = √(2/3)
        assert!((clebsch_gordan(1, 1, 2, 0, 3, 1).unwrap() - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn selection_rules_give_zero() {
        assert_eq!(clebsch_gordan(2, 2, 2, 0, 4, 0).unwrap(), 0.0);
        assert_eq!(clebsch_gordan(1, 1, 1, 1, 4, 2).unwrap(), 0.0);
    }

    #[test]
    fn invalid_arguments_rejected() {
        assert!(clebsch_gordan(1, 3, 1, 1, 2, 4).is_err());
        assert!(clebsch_gordan(2, 1, 1, 1, 2, 2).is_err());
        assert!(clebsch_gordan(-1, 1, 1, 1, 2, 2).is_err());
    }

    #[test]
    fn orthonormal_columns_up_to_spin_ten() {
        // Σ_{m1,m2} ⟨j1 m1 j2 m2|J M⟩⟨j1 m1 j2 m2|J' M⟩ = δ_JJ'.
        for (tj1, tj2) in [(20, 20), (7, 4), (19, 20)] {
            for tm in [-(tj1 + tj2) + 2, 0, 1, 3].into_iter().filter(|m| (tj1 + tj2 - m) % 2 == 0) {
                let js: Vec<i32> = ((tj1 - tj2).abs()..=tj1 + tj2)
                    .step_by(2)
                    .filter(|&j| j >= tm.abs())
                    .collect();
                for &ja in &js {
                    for &jb in &js {
                        let mut dot = 0.0;
                        for tm1 in (-tj1..=tj1).step_by(2) {
                            let tm2 = tm - tm1;
                            if tm2.abs() > tj2 {
                                continue;
                            }
                            dot += clebsch_gordan(tj1, tm1, tj2, tm2, ja, tm).unwrap()
                                * clebsch_gordan(tj1, tm1, tj2, tm2, jb, tm).unwrap();
                        }
                        let expect = if ja == jb { 1.0 } else { 0.0 };
                        assert!((dot - expect).abs() < 1e-13, "{tj1} {tj2} {ja} {jb} {tm}");
                    }
                }
            }
        }
    }
}
