use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, C64, ONE, ZERO};

/// Polynomials f of degree ≤ k with f(a_i) = f(b_i) for every node pair,
/// spanned by 1 and one polynomial of each exact degree δ+1, …, k.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectionBasis {
    pub k: usize,
    pub pairs: Vec<(C64, C64)>,
    /// Coefficients in increasing degree; element 0 is the constant 1.
    pub basis: Vec<Vec<C64>>,
}

impl SectionBasis {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

pub fn eval_poly(coeffs: &[C64], z: C64) -> C64 {
    coeffs.iter().rev().fold(ZERO, |acc, c| acc * z + c)
}

/// For each degree i in δ+1..=k, the monic f of degree i with vanishing
/// constant term satisfying the δ pair conditions.
pub fn section_basis(k: usize, pairs: &[(C64, C64)]) -> Result<SectionBasis> {
    let delta = pairs.len();
    if delta >= k {
        return Err(Error::DegreeUnachievable(delta + 1));
    }
    if pairs.iter().any(|(a, b)| (a - b).norm() < 1e-12 || !a.re.is_finite() || !b.re.is_finite()) {
        return Err(Error::InvalidConfig("node parameters must be finite and distinct".into()));
    }
    let mut basis = vec![vec![ONE]];
    for i in delta + 1..=k {
        // unknowns c_1..c_{i−1}; Σ_e c_e (a^e − b^e) = −(a^i − b^i)
        let mut a = CMat::zeros(delta, i - 1);
        let mut rhs = CVec::zeros(delta);
        for (r, (x, y)) in pairs.iter().enumerate() {
            for e in 1..i {
                a[(r, e - 1)] = x.powi(e as i32) - y.powi(e as i32);
            }
            rhs[r] = -(x.powi(i as i32) - y.powi(i as i32));
        }
        let sol = linalg::lstsq(&a, &rhs, 1e-13);
        let resid = (&a * &sol - &rhs).norm();
        if resid > 1e-8 * (1.0 + rhs.norm()) {
            return Err(Error::DegreeUnachievable(i));
        }
        let mut f = vec![ZERO];
        f.extend(sol.iter().copied());
        f.push(ONE);
        basis.push(f);
    }
    Ok(SectionBasis { k, pairs: pairs.to_vec(), basis })
}
