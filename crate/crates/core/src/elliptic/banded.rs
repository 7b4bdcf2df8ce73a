//! Symmetric periodic band matrices and their solvers.
//!
//! Entries are stored by wrapped offset, `A[i][j]` with `(j - i) mod M` mapped
//! into `[-b, b]`, so a matrix of size `M` needs `M > 2b + 1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, WireError};

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicBandMatrix {
    pub size: usize,
    pub half_bandwidth: usize,
    data: Vec<f64>,
}

impl PeriodicBandMatrix {
    pub fn zeros(size: usize, half_bandwidth: usize) -> Self {
        assert!(size > 2 * half_bandwidth + 1, "band wraps onto itself");
        Self { size, half_bandwidth, data: vec![0.0; size * (2 * half_bandwidth + 1)] }
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let m = self.size as isize;
        let b = self.half_bandwidth as isize;
        let mut off = (j as isize - i as isize).rem_euclid(m);
        if off > m / 2 {
            off -= m;
        }
        (off.abs() <= b).then(|| i * (2 * self.half_bandwidth + 1) + (off + b) as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j).expect("entry outside the band");
        self.data[s] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let b = self.half_bandwidth as isize;
        let m = self.size as isize;
        let w = 2 * self.half_bandwidth + 1;
        (0..self.size)
            .map(|i| {
                let row = &self.data[i * w..(i + 1) * w];
                let mut s = 0.0;
                for (t, a) in row.iter().enumerate() {
                    if *a != 0.0 {
                        let j = (i as isize + t as isize - b).rem_euclid(m) as usize;
                        s += a * x[j];
                    }
                }
                s
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.size, self.size, |i, j| self.get(i, j))
    }

    /// Largest `|A[i][j] - A[j][i]|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.size {
            for d in 1..=self.half_bandwidth {
                let j = (i + d) % self.size;
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Direct solve for symmetric positive definite matrices: band Cholesky on
    /// the leading block, with the last `b` unknowns (which carry the periodic
    /// coupling) eliminated through a dense Schur complement.
    pub fn solve_spd(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let m = self.size;
        let b = self.half_bandwidth;
        if m < 3 * b.max(1) {
            return self.solve_dense(rhs);
        }
        let m1 = m - b;
        let chol = BandCholesky::factor(m1, b, |i, j| self.get(i, j))?;

        // Coupling columns A12: rows of the leading block, columns m1..m.
        let mut y = vec![vec![0.0; m1]; b];
        for (c, col) in y.iter_mut().enumerate() {
            let j = m1 + c;
            for (i, v) in col.iter_mut().enumerate() {
                *v = self.get(i, j);
            }
        }
        let a12 = y.clone();
        for col in y.iter_mut() {
            chol.solve_in_place(col);
        }
        let mut schur = DMatrix::from_fn(b, b, |r, c| self.get(m1 + r, m1 + c));
        for r in 0..b {
            for c in 0..b {
                let dotp: f64 = a12[r].iter().zip(&y[c]).map(|(p, q)| p * q).sum();
                schur[(r, c)] -= dotp;
            }
        }
        let mut y1 = rhs[..m1].to_vec();
        chol.solve_in_place(&mut y1);
        let r2 = DVector::from_fn(b, |r, _| {
            rhs[m1 + r] - a12[r].iter().zip(&y1).map(|(p, q)| p * q).sum::<f64>()
        });
        let x2 = match schur.clone().cholesky() {
            Some(c) => c.solve(&r2),
            None => schur.lu().solve(&r2).ok_or_else(|| WireError::Numerical {
                message: "singular Schur complement in periodic band solve".into(),
                condition: f64::INFINITY,
            })?,
        };
        let mut x = y1;
        for (c, col) in y.iter().enumerate() {
            for (xi, v) in x.iter_mut().zip(col) {
                *xi -= v * x2[c];
            }
        }
        x.extend(x2.iter());
        Ok(x)
    }

    pub fn solve_dense(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        dense_solve(self.to_dense(), rhs)
    }

    /// Jacobi-preconditioned conjugate gradients.
    pub fn solve_cg(&self, rhs: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let m = self.size;
        let diag: Vec<f64> = (0..m).map(|i| self.get(i, i)).collect();
        if diag.iter().any(|d| *d <= 0.0) {
            return Err(WireError::Numerical {
                message: "non-positive diagonal in conjugate gradients".into(),
                condition: f64::INFINITY,
            });
        }
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let target = tol * norm(rhs).max(f64::MIN_POSITIVE);
        let mut x = vec![0.0; m];
        let mut r = rhs.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        for _ in 0..max_iter {
            if norm(&r) <= target {
                return Ok(x);
            }
            let ap = self.matvec(&p);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            if pap <= 0.0 {
                return Err(WireError::Numerical {
                    message: "operator is not positive definite".into(),
                    condition: f64::INFINITY,
                });
            }
            let alpha = rz / pap;
            for i in 0..m {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            z = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..m {
                p[i] = z[i] + beta * p[i];
            }
        }
        if norm(&r) <= target {
            return Ok(x);
        }
        Err(WireError::Numerical {
            message: format!("conjugate gradients did not converge in {max_iter} iterations"),
            condition: f64::NAN,
        })
    }
}

/// Dense LU solve with a condition estimate on failure.
pub fn dense_solve(a: DMatrix<f64>, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    let cond = || {
        let sv = a.clone().singular_values();
        let max = sv.iter().copied().fold(0.0, f64::max);
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if min > 0.0 {
            max / min
        } else {
            f64::INFINITY
        }
    };
    let lu = a.clone().lu();
    match lu.solve(&DVector::from_column_slice(rhs)) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x.iter().copied().collect()),
        _ => Err(WireError::Numerical {
            message: format!("dense factorization of a {n}x{n} system failed"),
            condition: cond(),
        }),
    }
}

/// Cholesky factor of a symmetric band matrix, lower band stored by row.
struct BandCholesky {
    size: usize,
    half: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    fn factor(size: usize, half: usize, a: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let w = half + 1;
        let mut l = vec![0.0; size * w];
        let idx = |i: usize, j: usize| i * w + (i - j);
        let (mut dmin, mut dmax) = (f64::INFINITY, 0.0f64);
        for i in 0..size {
            let lo = i.saturating_sub(half);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(half));
                let mut s = a(i, j);
                for k in klo..j {
                    s -= l[idx(i, k)] * l[idx(j, k)];
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return Err(WireError::Numerical {
                            message: format!("band Cholesky pivot {s:.3e} at row {i}"),
                            condition: if dmin.is_finite() { (dmax / dmin).powi(2) } else { f64::INFINITY },
                        });
                    }
                    let d = s.sqrt();
                    dmin = dmin.min(d);
                    dmax = dmax.max(d);
                    l[idx(i, i)] = d;
                } else {
                    l[idx(i, j)] = s / l[idx(j, j)];
                }
            }
        }
        Ok(Self { size, half, l })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let w = self.half + 1;
        let idx = |i: usize, j: usize| i * w + (i - j);
        for i in 0..self.size {
            let mut s = x[i];
            for k in i.saturating_sub(self.half)..i {
                s -= self.l[idx(i, k)] * x[k];
            }
            x[i] = s / self.l[idx(i, i)];
        }
        for i in (0..self.size).rev() {
            let mut s = x[i];
            for k in i + 1..(i + self.half + 1).min(self.size) {
                s -= self.l[idx(k, i)] * x[k];
            }
            x[i] = s / self.l[idx(i, i)];
        }
    }
}
