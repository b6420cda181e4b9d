use serde::{Deserialize, Serialize};

use super::poly::{M3, V3};
use crate::linalg::{C64, ONE, ZERO};

/// g, ∂_k g and ∂_k∂_l g at a point.
#[derive(Clone, Copy, Debug)]
pub struct MetricJet {
    pub g: M3,
    pub dg: [M3; 3],
    pub ddg: [[M3; 3]; 3],
}

/// a and ∂_k a_i (stored as da[k][i]) at a point.
#[derive(Clone, Copy, Debug)]
pub struct FormJet {
    pub a: V3,
    pub da: M3,
}

impl FormJet {
    pub fn zero() -> Self {
        FormJet { a: [ZERO; 3], da: [[ZERO; 3]; 3] }
    }
}

/// A metric and a Weyl 1-form on a chart of ℂ³, with two derivatives of g and
/// one of a.
pub trait WeylField {
    fn metric_jet(&self, x: &V3) -> MetricJet;
    fn form_jet(&self, x: &V3) -> FormJet;
}

/// A position on a pregeodesic with velocity and acceleration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSample {
    pub x: V3,
    pub t: V3,
    pub acc: V3,
}

pub fn det3(m: &M3) -> C64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn inv3(m: &M3) -> M3 {
    let d = det3(m);
    let mut r = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((j + 1) % 3, (j + 2) % 3);
            let (c, e) = ((i + 1) % 3, (i + 2) % 3);
            r[i][j] = (m[a][c] * m[b][e] - m[a][e] * m[b][c]) / d;
        }
    }
    r
}

fn frob(m: &M3) -> f64 {
    m.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn delta(i: usize, j: usize) -> C64 {
    if i == j {
        ONE
    } else {
        ZERO
    }
}

/// Γ^k_ij = LC^k_ij − ½(δ^k_i a_j + δ^k_j a_i − g_ij a^k), indexed [k][i][j],
/// together with ∂_m Γ indexed [m][k][i][j]. This connection satisfies
/// ∇g = a ⊗ g.
pub struct Connection {
    pub gamma: [M3; 3],
    pub dgamma: [[M3; 3]; 3],
}

pub fn connection(mj: &MetricJet, fj: &FormJet) -> Connection {
    let gi = inv3(&mj.g);
    // ∂_m g^{kl} = −g^{kp} ∂_m g_pq g^{ql}
    let mut dgi = [[[ZERO; 3]; 3]; 3];
    for m in 0..3 {
        for k in 0..3 {
            for l in 0..3 {
                let mut s = ZERO;
                for p in 0..3 {
                    for q in 0..3 {
                        s += gi[k][p] * mj.dg[m][p][q] * gi[q][l];
                    }
                }
                dgi[m][k][l] = -s;
            }
        }
    }
    let lower = |l: usize, i: usize, j: usize| 0.5 * (mj.dg[i][l][j] + mj.dg[j][l][i] - mj.dg[l][i][j]);
    let dlower = |m: usize, l: usize, i: usize, j: usize| 0.5 * (mj.ddg[m][i][l][j] + mj.ddg[m][j][l][i] - mj.ddg[m][l][i][j]);
    let mut a_up = [ZERO; 3];
    let mut da_up = [[ZERO; 3]; 3];
    for k in 0..3 {
        for l in 0..3 {
            a_up[k] += gi[k][l] * fj.a[l];
            for m in 0..3 {
                da_up[m][k] += dgi[m][k][l] * fj.a[l] + gi[k][l] * fj.da[m][l];
            }
        }
    }
    let mut gamma = [[[ZERO; 3]; 3]; 3];
    let mut dgamma = [[[[ZERO; 3]; 3]; 3]; 3];
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let mut lc = ZERO;
                for l in 0..3 {
                    lc += gi[k][l] * lower(l, i, j);
                }
                gamma[k][i][j] = lc - 0.5 * (delta(k, i) * fj.a[j] + delta(k, j) * fj.a[i] - mj.g[i][j] * a_up[k]);
                for m in 0..3 {
                    let mut d = ZERO;
                    for l in 0..3 {
                        d += dgi[m][k][l] * lower(l, i, j) + gi[k][l] * dlower(m, l, i, j);
                    }
                    d -= 0.5 * (delta(k, i) * fj.da[m][j] + delta(k, j) * fj.da[m][i] - mj.dg[m][i][j] * a_up[k] - mj.g[i][j] * da_up[m][k]);
                    dgamma[m][k][i][j] = d;
                }
            }
        }
    }
    Connection { gamma, dgamma }
}

/// Symmetrized Ricci tensor R_(ij) of the connection, with
/// R^k_{lij} = ∂_i Γ^k_{jl} − ∂_j Γ^k_{il} + Γ^k_{ip} Γ^p_{jl} − Γ^k_{jp} Γ^p_{il}
/// and R_{lj} = R^i_{lij}.
pub fn symmetric_ricci(conn: &Connection) -> M3 {
    let g = &conn.gamma;
    let dg = &conn.dgamma;
    let mut ric = [[ZERO; 3]; 3];
    for l in 0..3 {
        for j in 0..3 {
            let mut s = ZERO;
            for i in 0..3 {
                s += dg[i][i][j][l] - dg[j][i][i][l];
                for p in 0..3 {
                    s += g[i][i][p] * g[p][j][l] - g[i][j][p] * g[p][i][l];
                }
            }
            ric[l][j] = s;
        }
    }
    let mut sym = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            sym[i][j] = 0.5 * (ric[i][j] + ric[j][i]);
        }
    }
    sym
}

/// max |∇_k g_ij − a_k g_ij| relative to |∂g| + |a||g|.
pub fn compat_residual(mj: &MetricJet, fj: &FormJet, conn: &Connection) -> f64 {
    let mut worst = 0.0f64;
    let scale = mj.dg.iter().map(frob).fold(0.0, f64::max) + fj.a.iter().map(|v| v.norm()).fold(0.0, f64::max) * frob(&mj.g);
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                let mut cov = mj.dg[k][i][j];
                for l in 0..3 {
                    cov -= conn.gamma[l][k][i] * mj.g[l][j] + conn.gamma[l][k][j] * mj.g[i][l];
                }
                worst = worst.max((cov - fj.a[k] * mj.g[i][j]).norm());
            }
        }
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Pointwise Λ = ⟨R_(ij), g⟩ / ⟨g, g⟩ and the relative trace-free part
/// ‖R_(ij) − Λ g‖ / ‖R_(ij)‖ (zero when R_(ij) vanishes).
pub fn einstein_weyl_at(field: &dyn WeylField, x: &V3) -> (C64, f64) {
    let mj = field.metric_jet(x);
    let conn = connection(&mj, &field.form_jet(x));
    let r = symmetric_ricci(&conn);
    let mut num = ZERO;
    let mut den = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            num += mj.g[i][j].conj() * r[i][j];
            den += mj.g[i][j].norm_sqr();
        }
    }
    let lambda = num / den;
    let mut tf = [[ZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            tf[i][j] = r[i][j] - lambda * mj.g[i][j];
        }
    }
    let rn = frob(&r);
    (lambda, if rn > 0.0 { frob(&tf) / rn } else { 0.0 })
}

/// Component of v orthogonal to t (Hermitian projection).
pub fn transverse(v: &V3, t: &V3) -> V3 {
    let tt: f64 = t.iter().map(|z| z.norm_sqr()).sum();
    let tv: C64 = t.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
    [0, 1, 2].map(|i| v[i] - t[i] * tv / tt)
}

pub fn quad(gamma: &[M3; 3], t: &V3) -> V3 {
    [0, 1, 2].map(|k| {
        let mut s = ZERO;
        for i in 0..3 {
            for j in 0..3 {
                s += gamma[k][i][j] * t[i] * t[j];
            }
        }
        s
    })
}

fn norm2(v: &V3) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// ‖Π_T(A + Γ(T,T))‖ over all samples relative to ‖Π_T A‖ + ‖Π_T Γ(T,T)‖;
/// the absolute value when both vanish.
pub fn geodesic_residual(field: &dyn WeylField, samples: &[GeodesicSample]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for s in samples {
        let conn = connection(&field.metric_jet(&s.x), &field.form_jet(&s.x));
        let gtt = quad(&conn.gamma, &s.t);
        let pa = transverse(&s.acc, &s.t);
        let pg = transverse(&gtt, &s.t);
        num += norm2(&[0, 1, 2].map(|i| pa[i] + pg[i]));
        den += norm2(&pa) + norm2(&pg);
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

/// RK4 integration of x'' = −Γ(x', x') with a real step, sampling position,
/// velocity and acceleration after every step.
pub fn integrate_geodesic(field: &dyn WeylField, x0: V3, t0: V3, h: f64, steps: usize) -> Vec<GeodesicSample> {
    let accel = |x: &V3, t: &V3| -> V3 {
        let conn = connection(&field.metric_jet(x), &field.form_jet(x));
        quad(&conn.gamma, t).map(|v| -v)
    };
    let add = |a: &V3, b: &V3, s: f64| -> V3 { [0, 1, 2].map(|i| a[i] + b[i] * s) };
    let (mut x, mut t) = (x0, t0);
    let mut out = vec![GeodesicSample { x, t, acc: accel(&x, &t) }];
    for _ in 0..steps {
        let k1x = t;
        let k1t = accel(&x, &t);
        let k2x = add(&t, &k1t, h / 2.0);
        let k2t = accel(&add(&x, &k1x, h / 2.0), &k2x);
        let k3x = add(&t, &k2t, h / 2.0);
        let k3t = accel(&add(&x, &k2x, h / 2.0), &k3x);
        let k4x = add(&t, &k3t, h);
        let k4t = accel(&add(&x, &k3x, h), &k4x);
        x = [0, 1, 2].map(|i| x[i] + (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]) * (h / 6.0));
        t = [0, 1, 2].map(|i| t[i] + (k1t[i] + 2.0 * k2t[i] + 2.0 * k3t[i] + k4t[i]) * (h / 6.0));
        out.push(GeodesicSample { x, t, acc: accel(&x, &t) });
    }
    out
}

/// The conformally flat space form g = 4 δ / (1 + κ|x|²)² with a = 0, where
/// |x|² = Σ x_i² is the holomorphic square. Einstein with Λ = 2κ.
#[derive(Clone, Copy, Debug)]
pub struct SpaceForm {
    pub kappa: f64,
}

impl WeylField for SpaceForm {
    fn metric_jet(&self, x: &V3) -> MetricJet {
        let k = self.kappa;
        let w = ONE + k * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
        let phi = 4.0 / (w * w);
        let dphi = x.map(|v| -16.0 * k * v / (w * w * w));
        let mut mj = MetricJet { g: [[ZERO; 3]; 3], dg: [[[ZERO; 3]; 3]; 3], ddg: [[[[ZERO; 3]; 3]; 3]; 3] };
        for i in 0..3 {
            mj.g[i][i] = phi;
            for m in 0..3 {
                mj.dg[m][i][i] = dphi[m];
                for l in 0..3 {
                    mj.ddg[m][l][i][i] = -16.0 * k * delta(m, l) / (w * w * w) + 96.0 * k * k * x[m] * x[l] / (w * w * w * w);
                }
            }
        }
        mj
    }

    fn form_jet(&self, _: &V3) -> FormJet {
        FormJet::zero()
    }
}
