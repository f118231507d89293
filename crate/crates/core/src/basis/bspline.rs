/// Knot vector of a clamped B-spline family of order `k` (degree `k - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    order: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    /// Clamped knots: `k`-fold multiplicity at both ends of `breakpoints`.
    pub fn clamped(breakpoints: &[f64], order: usize) -> Self {
        let mut knots = Vec::with_capacity(breakpoints.len() + 2 * (order - 1));
        knots.extend(std::iter::repeat_n(breakpoints[0], order - 1));
        knots.extend_from_slice(breakpoints);
        knots.extend(std::iter::repeat_n(*breakpoints.last().unwrap(), order - 1));
        Self { order, knots }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of B-splines in the full (unclamped-at-boundary) family.
    pub fn count(&self) -> usize {
        self.knots.len() - self.order
    }

    /// Index `mu` with `t[mu] <= x < t[mu + 1]`, clamped into the valid range.
    pub fn span(&self, x: f64) -> usize {
        let k = self.order;
        let n = self.count();
        if x >= self.knots[n] {
            return n - 1;
        }
        // First knot strictly greater than x, minus one.
        let pos = self.knots[k - 1..=n].partition_point(|&t| t <= x);
        (pos + k - 2).clamp(k - 1, n - 1)
    }

    /// Values and first derivatives of the `k` splines nonzero on span `mu`,
    /// i.e. `B_{mu-k+1} .. B_mu`, evaluated at `x`.
    pub fn eval(&self, mu: usize, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        let k = self.order;
        let t = &self.knots;
        let mut left = vec![0.0; k];
        let mut right = vec![0.0; k];
        let mut lower = vec![0.0; k];
        values[0] = 1.0;
        for j in 1..k {
            if j == k - 1 {
                lower[..k - 1].copy_from_slice(&values[..k - 1]);
            }
            left[j] = x - t[mu + 1 - j];
            right[j] = t[mu + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = values[r] / (right[r + 1] + left[j - r]);
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        if k == 1 {
            derivs[0] = 0.0;
            return;
        }
        // B'_{i,k} = (k-1) [B_{i,k-1}/(t_{i+k-1}-t_i) - B_{i+1,k-1}/(t_{i+k}-t_{i+1})]
        let first = mu + 1 - k;
        for a in 0..k {
            let i = first + a;
            let mut d = 0.0;
            if a >= 1 {
                let den = t[i + k - 1] - t[i];
                if den > 0.0 {
                    d += lower[a - 1] / den;
                }
            }
            if a < k - 1 {
                let den = t[i + k] - t[i + 1];
                if den > 0.0 {
                    d -= lower[a] / den;
                }
            }
            derivs[a] = (k - 1) as f64 * d;
        }
    }
}
