//! Row-major band storage with an in-place LU factorisation (partial
//! pivoting), laid out like LAPACK's `gbtrf`: row `i` keeps columns
//! `i - kl ..= i + ku + kl` so pivoting fill-in has room.

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.kl
    }

    pub fn upper(&self) -> usize {
        self.ku
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    /// Whether `(i, j)` lies inside the declared `kl`/`ku` band.
    #[inline]
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.index(i, j)]
        } else {
            0.0
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = self.index(i, j);
        self.data[k] = v;
    }

    /// Columns of row `i` inside the declared band.
    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Infinity norm over the declared band.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row_range(i).map(|j| self.get(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Factorises in place. Returns `None` when a pivot is below
    /// `rel_tol * ||A||_inf`.
    pub fn lu(mut self, rel_tol: f64) -> Option<BandLu> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let threshold = rel_tol * self.norm_inf();
        let mut pivots = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.index(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.index(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > threshold) || best == 0.0 {
                return None;
            }
            pivots[k] = p;
            let last_col = (k + ku + kl).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (self.index(k, j), self.index(p, j));
                    self.data.swap(a, b);
                }
            }
            let diag = self.data[self.index(k, k)];
            for i in k + 1..=last_row {
                let ik = self.index(i, k);
                let l = self.data[ik] / diag;
                self.data[ik] = l;
                if l == 0.0 {
                    continue;
                }
                let (row_i, row_k) = (i * self.width, k * self.width);
                for j in k + 1..=last_col {
                    let kj = row_k + (j + kl - k);
                    let ij = row_i + (j + kl - i);
                    self.data[ij] -= l * self.data[kj];
                }
            }
        }
        Some(BandLu {
            factors: self,
            pivots,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    factors: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let a = &self.factors;
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let mut x = rhs.to_vec();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk != 0.0 {
                for i in k + 1..=(k + kl).min(n - 1) {
                    x[i] -= a.data[a.index(i, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for j in k + 1..=(k + ku + kl).min(n - 1) {
                acc -= a.data[a.index(k, j)] * x[j];
            }
            x[k] = acc / a.data[a.index(k, k)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};

    #[test]
    fn matches_dense_solve_with_pivoting() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(5);
        for &(n, kl, ku) in &[(1, 0, 0), (7, 1, 1), (30, 3, 5), (40, 6, 2), (25, 24, 24)] {
            let mut band = BandMatrix::zeros(n, kl, ku);
            let mut dense = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                for j in band.row_range(i) {
                    // small diagonal forces row interchanges
                    let v = if i == j { rng.gen_range(-0.01..0.01) } else { rng.gen_range(-1.0..1.0) };
                    band.set(i, j, v);
                    dense[(i, j)] = v;
                }
            }
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let expected = dense.clone().lu().solve(&DVector::from_vec(b.clone())).unwrap();
            let x = band.clone().lu(1e-300).unwrap().solve(&b);
            for i in 0..n {
                assert!((x[i] - expected[i]).abs() < 1e-8 * (1.0 + expected[i].abs()), "n={n} i={i}");
            }
            let back = band.mul_vec(&x);
            for i in 0..n {
                assert!((back[i] - b[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn detects_singular_matrix() {
        let mut band = BandMatrix::zeros(3, 1, 1);
        for i in 0..3 {
            for j in band.row_range(i) {
                band.set(i, j, 1.0);
            }
        }
        // last row vanishes
        band.set(2, 1, 0.0);
        band.set(2, 2, 0.0);
        assert!(band.lu(1e-14).is_none());
    }
}
