//! Bihomogeneous forms F(u0,u1; v0,v1) on P¹×P¹.

use serde::{Deserialize, Serialize};

use crate::binary_forms::{BinaryForm, ProjPoint};
use crate::linalg::{self, C64, ONE, ZERO};

/// Coefficient (i, j) multiplies u0^(du−i) u1^i v0^(dv−j) v1^j.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiForm {
    pub du: usize,
    pub dv: usize,
    coeffs: Vec<C64>,
}

impl BiForm {
    pub fn zero(du: usize, dv: usize) -> Self {
        BiForm { du, dv, coeffs: vec![ZERO; (du + 1) * (dv + 1)] }
    }

    pub fn from_coeffs(du: usize, dv: usize, coeffs: Vec<C64>) -> Self {
        assert_eq!(coeffs.len(), (du + 1) * (dv + 1), "coefficient count does not match bidegree");
        BiForm { du, dv, coeffs }
    }

    /// Σ_j slices[j](u)·v0^(dv−j) v1^j.
    pub fn from_v_slices(slices: &[BinaryForm]) -> Self {
        let dv = slices.len() - 1;
        let du = slices[0].degree();
        let mut f = Self::zero(du, dv);
        for (j, s) in slices.iter().enumerate() {
            assert_eq!(s.degree(), du);
            for (i, c) in s.coeffs().iter().enumerate() {
                f.set(i, j, *c);
            }
        }
        f
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.coeffs[i * (self.dv + 1) + j]
    }

    pub fn set(&mut self, i: usize, j: usize, c: C64) {
        let dv = self.dv;
        self.coeffs[i * (dv + 1) + j] = c;
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn norm(&self) -> f64 {
        linalg::vec_norm(&self.coeffs)
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.coeffs)
    }

    pub fn scaled(&self, s: C64) -> Self {
        BiForm { du: self.du, dv: self.dv, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.du, self.dv), (other.du, other.dv));
        BiForm { du: self.du, dv: self.dv, coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-ONE))
    }

    /// The coefficient form in u of v0^(dv−j) v1^j.
    pub fn v_slice(&self, j: usize) -> BinaryForm {
        BinaryForm::new((0..=self.du).map(|i| self.get(i, j)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.du + other.du, self.dv + other.dv);
        for i in 0..=self.du {
            for j in 0..=self.dv {
                let a = self.get(i, j);
                if a == ZERO {
                    continue;
                }
                for k in 0..=other.du {
                    for l in 0..=other.dv {
                        let idx = (i + k) * (out.dv + 1) + j + l;
                        out.coeffs[idx] += a * other.get(k, l);
                    }
                }
            }
        }
        out
    }

    pub fn eval(&self, u: &ProjPoint, v: &ProjPoint) -> C64 {
        let mut acc = ZERO;
        for j in 0..=self.dv {
            let vm = v.z0.powi((self.dv - j) as i32) * v.z1.powi(j as i32);
            acc += self.v_slice(j).eval(u) * vm;
        }
        acc
    }

    fn partial(&self, var: usize) -> Self {
        // var: 0 = u0, 1 = u1, 2 = v0, 3 = v1
        let (du, dv) = match var {
            0 | 1 => (self.du.saturating_sub(1), self.dv),
            _ => (self.du, self.dv.saturating_sub(1)),
        };
        let mut out = Self::zero(du, dv);
        if (var < 2 && self.du == 0) || (var >= 2 && self.dv == 0) {
            return out;
        }
        for i in 0..=self.du {
            for j in 0..=self.dv {
                let c = self.get(i, j);
                match var {
                    0 if i < self.du => out.set(i, j, c * (self.du - i) as f64),
                    1 if i > 0 => out.set(i - 1, j, c * i as f64),
                    2 if j < self.dv => out.set(i, j, c * (self.dv - j) as f64),
                    3 if j > 0 => out.set(i, j - 1, c * j as f64),
                    _ => {}
                }
            }
        }
        out
    }

    pub fn partial_u0(&self) -> Self {
        self.partial(0)
    }
    pub fn partial_u1(&self) -> Self {
        self.partial(1)
    }
    pub fn partial_v0(&self) -> Self {
        self.partial(2)
    }
    pub fn partial_v1(&self) -> Self {
        self.partial(3)
    }

    /// Derivative along the free coordinate of the u-chart (`chart` is the
    /// coordinate held at 1).
    pub fn du_chart(&self, chart: usize) -> Self {
        if chart == 0 {
            self.partial_u1()
        } else {
            self.partial_u0()
        }
    }

    pub fn dv_chart(&self, chart: usize) -> Self {
        if chart == 0 {
            self.partial_v1()
        } else {
            self.partial_v0()
        }
    }

    /// F(U0(z), U1(z); V0(z), V1(z)) as a binary form in z.
    pub fn compose(&self, u: [&BinaryForm; 2], v: [&BinaryForm; 2]) -> BinaryForm {
        let pu0 = powers(u[0], self.du);
        let pu1 = powers(u[1], self.du);
        let pv0 = powers(v[0], self.dv);
        let pv1 = powers(v[1], self.dv);
        let deg = self.du * u[0].degree() + self.dv * v[0].degree();
        let mut out = BinaryForm::zero(deg);
        for i in 0..=self.du {
            let ui = pu0[self.du - i].mul(&pu1[i]);
            for j in 0..=self.dv {
                let c = self.get(i, j);
                if c == ZERO {
                    continue;
                }
                let term = ui.mul(&pv0[self.dv - j].mul(&pv1[j]));
                for (k, t) in term.coeffs().iter().enumerate() {
                    out.coeffs_mut()[k] += c * t;
                }
            }
        }
        out
    }

    /// Scale so that the coefficient of largest modulus is 1.
    pub fn normalized(&self) -> Self {
        let k = self
            .coeffs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().partial_cmp(&b.1.norm()).unwrap())
            .map(|(k, _)| k)
            .unwrap();
        self.scaled(ONE / self.coeffs[k])
    }
}

fn powers(f: &BinaryForm, n: usize) -> Vec<BinaryForm> {
    let mut out = vec![BinaryForm::constant(ONE)];
    for k in 1..=n {
        out.push(out[k - 1].mul(f));
    }
    out
}

/// Relative distance between two forms after the best scalar alignment.
pub fn projective_distance(a: &BiForm, b: &BiForm) -> f64 {
    let (_, r) = linalg::fit_scalar(a.coeffs(), b.coeffs());
    r
}
