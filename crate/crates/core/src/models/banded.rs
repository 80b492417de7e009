//! LU factorization of banded matrices without pivoting.
//!
//! Meant for matrices whose symmetric part is positive definite, for which
//! elimination without pivoting is well defined.

use super::ModelError;

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    /// Row-major, `lower + upper + 1` entries per row; entry `(i, j)` lives at
    /// `i * width + (j + lower - i)`.
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self {
            n,
            lower,
            upper,
            data: vec![0.0; n * (lower + upper + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(
            j + self.lower >= i && j <= i + self.upper,
            "({i}, {j}) outside band"
        );
        i * self.width() + (j + self.lower - i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.lower < i || j > i + self.upper {
            0.0
        } else {
            self.data[self.index(i, j)]
        }
    }

    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let k = self.index(i, j);
        self.data[k] += value;
    }

    /// `s A + diag(d)`.
    pub fn scaled_plus_diagonal(&self, s: f64, d: &[f64]) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|x| *x *= s);
        for (i, v) in d.iter().enumerate() {
            out.add(i, i, *v);
        }
        out
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.lower);
            let hi = (i + self.upper).min(self.n - 1);
            y[i] = (lo..=hi).map(|j| self.data[self.index(i, j)] * x[j]).sum();
        }
    }

    /// In-place LU factorization (unit lower triangle stored below the
    /// diagonal).
    pub fn factor(mut self) -> Result<BandLu, ModelError> {
        let n = self.n;
        for k in 0..n {
            let pivot = self.data[self.index(k, k)];
            if !(pivot.abs() > 0.0) || !pivot.is_finite() {
                return Err(ModelError::InvalidSpec(format!(
                    "banded factorization hit a zero pivot in row {k}"
                )));
            }
            let row_end = (k + self.lower).min(n - 1);
            let col_end = (k + self.upper).min(n - 1);
            for i in k + 1..=row_end {
                let ik = self.index(i, k);
                let factor = self.data[ik] / pivot;
                self.data[ik] = factor;
                for j in k + 1..=col_end {
                    let kj = self.data[self.index(k, j)];
                    let ij = self.index(i, j);
                    self.data[ij] -= factor * kj;
                }
            }
        }
        Ok(BandLu { a: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    a: BandMatrix,
}

impl BandLu {
    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [f64]) {
        let a = &self.a;
        let n = a.n;
        for i in 0..n {
            let lo = i.saturating_sub(a.lower);
            let mut s = b[i];
            for j in lo..i {
                s -= a.data[a.index(i, j)] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + a.upper).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=hi {
                s -= a.data[a.index(i, j)] * b[j];
            }
            b[i] = s / a.data[a.index(i, i)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_against_dense_product() {
        let n = 23;
        let (kl, ku) = (3, 2);
        let mut a = BandMatrix::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v = if i == j {
                    10.0
                } else {
                    ((i * 7 + j * 3) % 5) as f64 - 2.0
                };
                a.add(i, j, v);
            }
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&x, &mut b);
        let lu = a.factor().unwrap();
        lu.solve(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let a = BandMatrix::zeros(3, 1, 1);
        assert!(a.factor().is_err());
    }
}
