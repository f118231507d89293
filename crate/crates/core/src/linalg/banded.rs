use nalgebra::DMatrix;
use num_complex::Complex64;

/// Real symmetric band matrix stored by lower diagonals.
///
/// Entry `(i, j)` with `0 <= i - j <= kd` lives at `data[i * (kd + 1) + (i - j)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymBand {
    n: usize,
    kd: usize,
    data: Vec<f64>,
}

impl SymBand {
    pub fn zeros(n: usize, kd: usize) -> Self {
        Self {
            n,
            kd,
            data: vec![0.0; n * (kd + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of sub-diagonals.
    pub fn bandwidth(&self) -> usize {
        self.kd
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> Option<usize> {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        let d = i - j;
        (d <= self.kd).then(|| i * (self.kd + 1) + d)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.idx(i, j).map_or(0.0, |k| self.data[k])
    }

    /// Adds `v` to entry `(i, j)` (and, implicitly, `(j, i)`).
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .idx(i, j)
            .unwrap_or_else(|| panic!("({i}, {j}) outside band of width {}", self.kd));
        self.data[k] += v;
    }

    /// `a * self + b * other`, both with identical shape.
    pub fn combine(&self, a: f64, other: &SymBand, b: f64) -> SymBand {
        assert_eq!((self.n, self.kd), (other.n, other.kd));
        SymBand {
            n: self.n,
            kd: self.kd,
            data: self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> SymBand {
        SymBand {
            n: self.n,
            kd: self.kd,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    /// Largest deviation from symmetry is zero by construction; this reports the
    /// largest absolute entry, used for relative tolerances.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for d in 0..=self.kd.min(i) {
                let v = self.data[i * (self.kd + 1) + d];
                m[(i, i - d)] = v;
                m[(i - d, i)] = v;
            }
        }
        m
    }

    /// `y = A x` for a real vector.
    pub fn mul_real(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        let w = self.kd + 1;
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            let mut acc = row[0] * x[i];
            for d in 1..=self.kd.min(i) {
                acc += row[d] * x[i - d];
                y[i - d] += row[d] * x[i];
            }
            y[i] += acc;
        }
        y
    }

    /// `y = A x` for a complex vector, written into `y`.
    pub fn mul_complex_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        let w = self.kd + 1;
        y.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for i in 0..self.n {
            let row = &self.data[i * w..(i + 1) * w];
            let xi = x[i];
            let mut acc = xi * row[0];
            for d in 1..=self.kd.min(i) {
                acc += x[i - d] * row[d];
                y[i - d] += xi * row[d];
            }
            y[i] += acc;
        }
    }

    /// Bilinear form `u^T A v` for real vectors.
    pub fn bilinear(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(self.mul_real(v)).map(|(a, b)| a * b).sum()
    }
}

/// `out = (s + i a h) x` for real symmetric band `s`, `h` of equal shape.
pub fn apply_pencil(s: &SymBand, h: &SymBand, a: f64, x: &[Complex64], out: &mut [Complex64]) {
    assert_eq!((s.n, s.kd), (h.n, h.kd));
    let w = s.kd + 1;
    out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
    for i in 0..s.n {
        let srow = &s.data[i * w..(i + 1) * w];
        let hrow = &h.data[i * w..(i + 1) * w];
        let xi = x[i];
        let mut acc = xi * Complex64::new(srow[0], a * hrow[0]);
        for d in 1..=s.kd.min(i) {
            let m = Complex64::new(srow[d], a * hrow[d]);
            acc += x[i - d] * m;
            out[i - d] += xi * m;
        }
        out[i] += acc;
    }
}

/// `L D L^T` factorization of the complex symmetric band matrix
/// `s + i * h`, with real symmetric `s` and `h` sharing one band shape.
///
/// No pivoting is performed; the factorization exists whenever `s` is
/// positive definite, which holds for every B-spline overlap matrix.
#[derive(Debug, Clone)]
pub struct ComplexSymBandLdl {
    n: usize,
    kd: usize,
    /// Unit-lower factor, same layout as [`SymBand`]; diagonal slot unused.
    l: Vec<Complex64>,
    d_inv: Vec<Complex64>,
}

impl ComplexSymBandLdl {
    /// Factorizes `s + i * scale * h`.
    pub fn factor(s: &SymBand, h: &SymBand, scale: f64) -> Option<Self> {
        assert_eq!((s.n, s.kd), (h.n, h.kd));
        let mut out = Self {
            n: s.n,
            kd: s.kd,
            l: vec![Complex64::new(0.0, 0.0); s.data.len()],
            d_inv: vec![Complex64::new(0.0, 0.0); s.n],
        };
        out.refactor(s, h, scale).then_some(out)
    }

    /// Recomputes the factorization in place; returns false on a zero pivot.
    pub fn refactor(&mut self, s: &SymBand, h: &SymBand, scale: f64) -> bool {
        let n = self.n;
        let kd = self.kd;
        let w = kd + 1;
        // Row-oriented (Crout) elimination. For row i and column j < i:
        // L_ij d_j = A_ij - sum_{k<j} L_ik L_jk d_k.
        let mut t = vec![Complex64::new(0.0, 0.0); w];
        for i in 0..n {
            let j0 = i.saturating_sub(kd);
            // t[k - j0] holds L_ik d_k for the already finished k in [j0, i).
            for j in j0..i {
                let mut acc = Complex64::new(s.data[i * w + i - j], scale * h.data[i * w + i - j]);
                let kmin = j0.max(j.saturating_sub(kd));
                for k in kmin..j {
                    acc -= t[k - j0] * self.l[j * w + j - k];
                }
                t[j - j0] = acc;
                self.l[i * w + i - j] = acc * self.d_inv[j];
            }
            let mut di = Complex64::new(s.data[i * w], scale * h.data[i * w]);
            for k in j0..i {
                di -= t[k - j0] * self.l[i * w + i - k];
            }
            if di.norm() == 0.0 || !di.is_finite() {
                return false;
            }
            self.d_inv[i] = di.inv();
        }
        true
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) {
        let n = self.n;
        let kd = self.kd;
        let w = kd + 1;
        for i in 0..n {
            let mut acc = b[i];
            for k in i.saturating_sub(kd)..i {
                acc -= self.l[i * w + i - k] * b[k];
            }
            b[i] = acc;
        }
        for i in 0..n {
            b[i] *= self.d_inv[i];
        }
        for i in (0..n).rev() {
            let xi = b[i];
            for k in i.saturating_sub(kd)..i {
                let lik = self.l[i * w + i - k];
                b[k] -= lik * xi;
            }
        }
    }
}
