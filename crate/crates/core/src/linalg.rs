//! Banded linear algebra for the radial operators. Every operator on the grid
//! is tridiagonal; products of two of them are pentadiagonal.

use nalgebra::ComplexField;

/// Tridiagonal matrix. Row `j` reads `lower[j] x[j-1] + diag[j] x[j] + upper[j] x[j+1]`;
/// `lower[0]` and `upper[n-1]` are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal<T> {
    pub lower: Vec<T>,
    pub diag: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: ComplexField<RealField = f64> + Copy> Tridiagonal<T> {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); x.len()];
        self.apply_into(x, &mut y);
        y
    }

    pub fn apply_into(&self, x: &[T], y: &mut [T]) {
        let n = self.len();
        debug_assert_eq!(x.len(), n);
        for j in 0..n {
            let mut acc = self.diag[j] * x[j];
            if j > 0 {
                acc += self.lower[j] * x[j - 1];
            }
            if j + 1 < n {
                acc += self.upper[j] * x[j + 1];
            }
            y[j] = acc;
        }
    }

    /// LU with partial pivoting (the `gtsv` scheme). Returns `None` on an
    /// exactly singular pivot.
    pub fn factor(&self) -> Option<TridiagonalLu<T>> {
        let n = self.len();
        let mut dl: Vec<T> = self.lower.iter().skip(1).copied().collect();
        let mut d = self.diag.clone();
        let mut du: Vec<T> = self.upper.iter().take(n.saturating_sub(1)).copied().collect();
        let mut du2 = vec![T::zero(); n.saturating_sub(2)];
        let mut swapped = vec![false; n];
        for i in 0..n.saturating_sub(1) {
            if d[i].modulus() >= dl[i].modulus() {
                if d[i].modulus() == 0.0 {
                    return None;
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if n > 0 && d[n - 1].modulus() == 0.0 {
            return None;
        }
        Some(TridiagonalLu { dl, d, du, du2, swapped })
    }

    pub fn solve(&self, rhs: &[T]) -> Option<Vec<T>> {
        self.factor().map(|lu| lu.solve(rhs))
    }
}

#[derive(Debug, Clone)]
pub struct TridiagonalLu<T> {
    dl: Vec<T>,
    d: Vec<T>,
    du: Vec<T>,
    du2: Vec<T>,
    swapped: Vec<bool>,
}

impl<T: ComplexField<RealField = f64> + Copy> TridiagonalLu<T> {
    /// Smallest pivot magnitude relative to the largest, a cheap conditioning hint.
    pub fn pivot_ratio(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, 0f64);
        for p in &self.d {
            let m = p.modulus();
            lo = lo.min(m);
            hi = hi.max(m);
        }
        if hi == 0.0 {
            0.0
        } else {
            lo / hi
        }
    }

    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.d.len();
        let mut b = rhs.to_vec();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                let t = b[i];
                b[i + 1] -= self.dl[i] * t;
            }
        }
        if n == 0 {
            return b;
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            let t = b[n - 1];
            b[n - 2] = (b[n - 2] - self.du[n - 2] * t) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            let v = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
            b[i] = v;
        }
        b
    }
}

/// General real band matrix with `kl` sub- and `ku` super-diagonals, stored by rows.
#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    /// row `i`, column `j` lives at `rows[i][j + kl - i]`
    rows: Vec<Vec<f64>>,
}

impl Banded {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, rows: vec![vec![0.0; kl + ku + 1]; n] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.rows[i][j + self.kl - i]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let kl = self.kl;
        self.rows[i][j + kl - i] = v;
    }

    /// Product of two real tridiagonal matrices.
    pub fn product(a: &Tridiagonal<f64>, b: &Tridiagonal<f64>) -> Self {
        let n = a.len();
        let mut out = Self::zeros(n, 2, 2);
        let entry = |t: &Tridiagonal<f64>, i: usize, j: usize| -> f64 {
            if i == j {
                t.diag[i]
            } else if j + 1 == i {
                t.lower[i]
            } else if i + 1 == j {
                t.upper[i]
            } else {
                0.0
            }
        };
        for i in 0..n {
            let lo = i.saturating_sub(2);
            let hi = (i + 2).min(n - 1);
            for j in lo..=hi {
                let klo = i.saturating_sub(1).max(j.saturating_sub(1));
                let khi = (i + 1).min(j + 1).min(n - 1);
                let mut s = 0.0;
                for k in klo..=khi {
                    s += entry(a, i, k) * entry(b, k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    pub fn scale(&mut self, c: f64) {
        for row in &mut self.rows {
            for v in row.iter_mut() {
                *v *= c;
            }
        }
    }

    pub fn add_diagonal(&mut self, c: f64) {
        for i in 0..self.n {
            let v = self.get(i, i);
            self.set(i, i, v + c);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Gaussian elimination with partial pivoting on a dense window of the band.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let width = kl + ku + kl + 1; // fill-in widens the upper band by kl
        // a[i][k] holds column i - kl + k
        let mut a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut row = vec![0.0; width];
                for (k, v) in row.iter_mut().enumerate() {
                    let j = i as isize - kl as isize + k as isize;
                    if j >= 0 && (j as usize) < n {
                        *v = self.get(i, j as usize);
                    }
                }
                row
            })
            .collect();
        let col = |i: usize, j: usize| -> usize { j + kl - i };
        let mut b = rhs.to_vec();
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut piv = k;
            let mut best = a[k][col(k, k)].abs();
            for i in k + 1..=last {
                let v = a[i][col(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            let jmax = (k + kl + ku).min(n - 1);
            if piv != k {
                for j in k..=jmax {
                    let t = a[k][col(k, j)];
                    a[k][col(k, j)] = a[piv][col(piv, j)];
                    a[piv][col(piv, j)] = t;
                }
                b.swap(k, piv);
            }
            let pivot = a[k][col(k, k)];
            for i in k + 1..=last {
                let factor = a[i][col(i, k)] / pivot;
                if factor == 0.0 {
                    continue;
                }
                a[i][col(i, k)] = 0.0;
                for j in k + 1..=jmax {
                    a[i][col(i, j)] -= factor * a[k][col(k, j)];
                }
                b[i] -= factor * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let jmax = (k + kl + ku).min(n - 1);
            let mut s = b[k];
            for j in k + 1..=jmax {
                s -= a[k][col(k, j)] * x[j];
            }
            x[k] = s / a[k][col(k, k)];
        }
        Some(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tri(n: usize, rng: &mut ChaCha8Rng) -> Tridiagonal<f64> {
        Tridiagonal {
            lower: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            // indefinite and not diagonally dominant
            diag: (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect(),
            upper: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    fn dense(t: &Tridiagonal<f64>) -> DMatrix<f64> {
        let n = t.len();
        DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                t.diag[i]
            } else if j + 1 == i {
                t.lower[i]
            } else if i + 1 == j {
                t.upper[i]
            } else {
                0.0
            }
        })
    }

    #[test]
    fn pivoted_solve_matches_dense_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 3, 9, 40] {
            let t = random_tri(n, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = t.solve(&b).unwrap();
            let xd = dense(&t).lu().solve(&DVector::from_vec(b.clone())).unwrap();
            for i in 0..n {
                assert!((x[i] - xd[i]).abs() < 1e-9 * (1.0 + xd[i].abs()), "n={n}");
            }
        }
    }

    #[test]
    fn complex_solve_residual() {
        let n = 50;
        let t = Tridiagonal {
            lower: vec![Complex64::new(1.0, 0.0); n],
            diag: (0..n).map(|j| Complex64::new(-2.0 + 0.01 * j as f64, 3.0)).collect(),
            upper: vec![Complex64::new(1.0, 0.0); n],
        };
        let b: Vec<Complex64> = (0..n).map(|j| Complex64::new(j as f64, 1.0)).collect();
        let x = t.solve(&b).unwrap();
        let r = t.apply(&x);
        for j in 0..n {
            assert!((r[j] - b[j]).norm() < 1e-10);
        }
    }

    #[test]
    fn banded_product_and_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 30;
        let a = random_tri(n, &mut rng);
        let b = random_tri(n, &mut rng);
        let p = Banded::product(&a, &b);
        let pd = dense(&a) * dense(&b);
        for i in 0..n {
            for j in 0..n {
                assert!((p.get(i, j) - pd[(i, j)]).abs() < 1e-13);
            }
        }
        let rhs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = p.solve(&rhs).unwrap();
        let back = p.apply(&x);
        for i in 0..n {
            assert!((back[i] - rhs[i]).abs() < 1e-8);
        }
    }
}
