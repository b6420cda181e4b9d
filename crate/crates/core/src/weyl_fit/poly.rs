use serde::{Deserialize, Serialize};

use crate::linalg::{C64, ZERO};

pub type V3 = [C64; 3];
pub type M3 = [[C64; 3]; 3];

/// Exponents of the monomials of degree ≤ d in three variables, ordered by
/// total degree.
pub fn monomials(degree: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for total in 0..=degree {
        for i in (0..=total).rev() {
            for j in (0..=total - i).rev() {
                out.push([i, j, total - i - j]);
            }
        }
    }
    out
}

fn pw(z: C64, e: usize) -> C64 {
    z.powi(e as i32)
}

/// Holomorphic polynomial in x ∈ ℂ³, stored in the scaled variable x / scale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Poly3 {
    pub degree: usize,
    pub scale: f64,
    pub exps: Vec<[usize; 3]>,
    pub coeffs: Vec<C64>,
}

/// Value, gradient and Hessian at a point.
#[derive(Clone, Copy, Debug)]
pub struct Jet {
    pub v: C64,
    pub d: V3,
    pub dd: M3,
}

impl Poly3 {
    pub fn zero(degree: usize, scale: f64) -> Self {
        let exps = monomials(degree);
        let n = exps.len();
        Poly3 { degree, scale, exps, coeffs: vec![ZERO; n] }
    }

    pub fn constant(c: C64) -> Self {
        Poly3 { degree: 0, scale: 1.0, exps: vec![[0, 0, 0]], coeffs: vec![c] }
    }

    pub fn with_coeffs(degree: usize, scale: f64, coeffs: Vec<C64>) -> Self {
        let exps = monomials(degree);
        assert_eq!(exps.len(), coeffs.len());
        Poly3 { degree, scale, exps, coeffs }
    }

    /// Monomial values in the scaled variable, the design row of a fit.
    pub fn basis_row(degree: usize, scale: f64, x: &V3) -> Vec<C64> {
        let xi = x.map(|v| v / scale);
        monomials(degree).iter().map(|e| pw(xi[0], e[0]) * pw(xi[1], e[1]) * pw(xi[2], e[2])).collect()
    }

    pub fn eval(&self, x: &V3) -> C64 {
        self.jet(x).v
    }

    pub fn jet(&self, x: &V3) -> Jet {
        let xi = x.map(|v| v / self.scale);
        let mut jet = Jet { v: ZERO, d: [ZERO; 3], dd: [[ZERO; 3]; 3] };
        // derivative of ξ^e in coordinate k, with the exponent dropped by `drop`
        let factor = |e: &[usize; 3], drop: [usize; 3]| -> C64 {
            let mut f = C64::new(1.0, 0.0);
            for k in 0..3 {
                if e[k] < drop[k] {
                    return ZERO;
                }
                let falling: usize = (0..drop[k]).map(|t| e[k] - t).product();
                f *= pw(xi[k], e[k] - drop[k]) * falling as f64;
            }
            f
        };
        let s = self.scale;
        for (e, c) in self.exps.iter().zip(&self.coeffs) {
            if *c == ZERO {
                continue;
            }
            jet.v += c * factor(e, [0, 0, 0]);
            for k in 0..3 {
                let mut dk = [0; 3];
                dk[k] = 1;
                jet.d[k] += c * factor(e, dk) / s;
                for l in k..3 {
                    let mut dkl = dk;
                    dkl[l] += 1;
                    let v = c * factor(e, dkl) / (s * s);
                    jet.dd[k][l] += v;
                    if l != k {
                        jet.dd[l][k] += v;
                    }
                }
            }
        }
        jet
    }
}

pub const SYM_INDEX: [(usize, usize); 6] = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];

/// Symmetric 3×3 matrix of polynomials, stored by its upper triangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymPoly {
    pub entries: Vec<Poly3>,
}

impl SymPoly {
    pub fn from_fn(f: impl Fn(usize, usize) -> Poly3) -> Self {
        SymPoly { entries: SYM_INDEX.iter().map(|&(i, j)| f(i, j)).collect() }
    }

    pub fn entry(&self, i: usize, j: usize) -> &Poly3 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        &self.entries[SYM_INDEX.iter().position(|&p| p == (a, b)).unwrap()]
    }

    pub fn eval(&self, x: &V3) -> M3 {
        let mut g = [[ZERO; 3]; 3];
        for (k, &(i, j)) in SYM_INDEX.iter().enumerate() {
            g[i][j] = self.entries[k].eval(x);
            g[j][i] = g[i][j];
        }
        g
    }
}
