//! B-spline radial basis, field-free hydrogenic eigensystems and dipole
//! couplings.

mod bspline;
mod cache;
mod eigen;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{gauss_legendre, SymBand};

pub use bspline::KnotVector;
pub use cache::EigenCache;
pub use eigen::{initial_state, solve_channel, ChannelEigensystem};

/// How breakpoints are distributed on `[0, r_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridLaw {
    Linear,
    /// Quadratic spacing up to `inner_radius`, joined with matching slope to a
    /// uniform outer grid.
    QuadraticLinear {
        inner_radius: f64,
    },
}

impl GridLaw {
    pub fn breakpoints(&self, box_radius: f64, count: usize) -> Vec<f64> {
        let intervals = (count - 1) as f64;
        let mut pts: Vec<f64> = match *self {
            GridLaw::Linear => (0..count).map(|i| box_radius * i as f64 / intervals).collect(),
            GridLaw::QuadraticLinear { inner_radius } => {
                // r(x) = h x^2 / (2 x0) for x <= x0, h (x - x0/2) beyond.
                let h = (box_radius + inner_radius) / intervals;
                let x0 = 2.0 * inner_radius / h;
                (0..count)
                    .map(|i| {
                        let x = i as f64;
                        if x <= x0 {
                            h * x * x / (2.0 * x0)
                        } else {
                            h * (x - 0.5 * x0)
                        }
                    })
                    .collect()
            }
        };
        pts[0] = 0.0;
        *pts.last_mut().unwrap() = box_radius;
        pts
    }
}

/// Parameters defining a radial basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisParams {
    pub box_radius: f64,
    pub breakpoints: usize,
    pub spline_order: usize,
    pub grid: GridLaw,
}

impl Default for BasisParams {
    fn default() -> Self {
        Self {
            box_radius: 400.0,
            breakpoints: 300,
            spline_order: 7,
            grid: GridLaw::QuadraticLinear { inner_radius: 30.0 },
        }
    }
}

/// Values of the nonzero splines at one quadrature node.
#[derive(Debug, Clone)]
struct Node {
    r: f64,
    weight: f64,
    /// Reduced index of the first spline in `values`; may be -1 for the
    /// removed boundary spline.
    first: isize,
    values: Vec<f64>,
}

/// B-spline radial basis with hard walls at `r = 0` and `r = r_max`.
///
/// The first and last splines of the clamped family are removed so every
/// basis function vanishes at both ends.
#[derive(Debug, Clone)]
pub struct RadialBasis {
    params: BasisParams,
    knots: KnotVector,
    breakpoints: Vec<f64>,
    nodes: Vec<Node>,
    overlap: SymBand,
    kinetic: SymBand,
    inv_r: SymBand,
    inv_r2: SymBand,
    r: SymBand,
    r2: SymBand,
    hash: String,
}

fn within_band(a: isize, b: isize, kd: usize) -> bool {
    (a - b).unsigned_abs() <= kd
}

impl RadialBasis {
    pub fn build(params: BasisParams) -> Result<Self> {
        let BasisParams {
            box_radius,
            breakpoints: n_bp,
            spline_order: k,
            grid,
        } = params;
        if !(box_radius > 0.0) || !box_radius.is_finite() {
            return Err(Error::Basis(format!("box radius must be positive, got {box_radius}")));
        }
        if k < 4 {
            return Err(Error::Basis(format!("spline order must be >= 4, got {k}")));
        }
        if n_bp < k + 2 {
            return Err(Error::Basis(format!(
                "need at least {} breakpoints for order {k}, got {n_bp}",
                k + 2
            )));
        }
        if let GridLaw::QuadraticLinear { inner_radius } = grid {
            if !(inner_radius > 0.0) || inner_radius >= box_radius {
                return Err(Error::Basis(format!(
                    "inner radius {inner_radius} must lie inside the box"
                )));
            }
        }
        let breakpoints = grid.breakpoints(box_radius, n_bp);
        Self::from_breakpoints(params, breakpoints)
    }

    /// Builds a basis on explicit breakpoints (strictly increasing, starting at 0).
    pub fn from_breakpoints(params: BasisParams, breakpoints: Vec<f64>) -> Result<Self> {
        let k = params.spline_order;
        if breakpoints.first() != Some(&0.0) {
            return Err(Error::Basis("breakpoints must start at r = 0".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) || breakpoints.iter().any(|x| !x.is_finite()) {
            return Err(Error::Basis("degenerate or non-increasing breakpoints".into()));
        }
        let knots = KnotVector::clamped(&breakpoints, k);
        let n_full = knots.count();
        let n = n_full - 2;
        let kd = k - 1;

        let n_gauss = k + 5;
        let (gx, gw) = gauss_legendre(n_gauss);
        let mut nodes = Vec::with_capacity((breakpoints.len() - 1) * n_gauss);
        let mut overlap = SymBand::zeros(n, kd);
        let mut kinetic = SymBand::zeros(n, kd);
        let mut inv_r = SymBand::zeros(n, kd);
        let mut inv_r2 = SymBand::zeros(n, kd);
        let mut r_mat = SymBand::zeros(n, kd);
        let mut r2_mat = SymBand::zeros(n, kd);
        let mut vals = vec![0.0; k];
        let mut ders = vec![0.0; k];
        for iv in 0..breakpoints.len() - 1 {
            let (a, b) = (breakpoints[iv], breakpoints[iv + 1]);
            let mu = iv + k - 1;
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, w) in gx.iter().zip(&gw) {
                let r = mid + half * x;
                let weight = half * w;
                knots.eval(mu, r, &mut vals, &mut ders);
                // Full index of vals[0] is mu - k + 1; reduced index is one less.
                let first = (mu + 1 - k) as isize - 1;
                for p in 0..k {
                    let ip = first + p as isize;
                    if ip < 0 || ip >= n as isize {
                        continue;
                    }
                    for q in 0..=p {
                        let iq = first + q as isize;
                        if iq < 0 || iq >= n as isize || !within_band(ip, iq, kd) {
                            continue;
                        }
                        let (i, j) = (ip as usize, iq as usize);
                        let bb = weight * vals[p] * vals[q];
                        overlap.add(i, j, bb);
                        kinetic.add(i, j, 0.5 * weight * ders[p] * ders[q]);
                        inv_r.add(i, j, bb / r);
                        inv_r2.add(i, j, bb / (r * r));
                        r_mat.add(i, j, bb * r);
                        r2_mat.add(i, j, bb * r * r);
                    }
                }
                nodes.push(Node {
                    r,
                    weight,
                    first,
                    values: vals.clone(),
                });
            }
        }

        let mut hasher = Sha256::new();
        hasher.update((k as u64).to_le_bytes());
        for x in &breakpoints {
            hasher.update(x.to_bits().to_le_bytes());
        }
        let digest = hasher.finalize();
        let hash = digest.iter().take(8).map(|b| format!("{b:02x}")).collect();

        Ok(Self {
            params,
            knots,
            breakpoints,
            nodes,
            overlap,
            kinetic,
            inv_r,
            inv_r2,
            r: r_mat,
            r2: r2_mat,
            hash,
        })
    }

    pub fn params(&self) -> &BasisParams {
        &self.params
    }

    pub fn spline_order(&self) -> usize {
        self.knots.order()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn box_radius(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// Number of basis functions after removing both boundary splines.
    pub fn n_basis(&self) -> usize {
        self.overlap.dim()
    }

    /// Sub-diagonal count of every basis matrix (`order - 1`).
    pub fn bandwidth(&self) -> usize {
        self.overlap.bandwidth()
    }

    /// Stable short digest of the spline order and breakpoints.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn overlap(&self) -> &SymBand {
        &self.overlap
    }

    /// `½ ∫ B_i' B_j' dr`.
    pub fn kinetic(&self) -> &SymBand {
        &self.kinetic
    }

    pub fn inv_r(&self) -> &SymBand {
        &self.inv_r
    }

    pub fn inv_r2(&self) -> &SymBand {
        &self.inv_r2
    }

    /// `∫ B_i r B_j dr`.
    pub fn r(&self) -> &SymBand {
        &self.r
    }

    pub fn r2(&self) -> &SymBand {
        &self.r2
    }

    /// Radial Hamiltonian `-½ d²/dr² + l(l+1)/(2r²) - Z/r`.
    pub fn hamiltonian(&self, charge: f64, l: usize) -> SymBand {
        let centrifugal = 0.5 * (l * (l + 1)) as f64;
        self.kinetic
            .combine(1.0, &self.inv_r2, centrifugal)
            .combine(1.0, &self.inv_r, -charge)
    }

    /// Samples `u(r) = Σ c_i B_i(r)` at every quadrature node as `(r, weight, u)`.
    pub fn sample(&self, coeffs: &[f64]) -> Vec<(f64, f64, f64)> {
        let n = self.n_basis() as isize;
        self.nodes
            .iter()
            .map(|node| {
                let u = node
                    .values
                    .iter()
                    .enumerate()
                    .filter_map(|(p, v)| {
                        let i = node.first + p as isize;
                        (0..n).contains(&i).then(|| v * coeffs[i as usize])
                    })
                    .sum();
                (node.r, node.weight, u)
            })
            .collect()
    }

    /// `∫_{r0}^{r_max} B_i B_j dr`, used to monitor population near the wall.
    pub fn overlap_beyond(&self, r0: f64) -> SymBand {
        let n = self.n_basis() as isize;
        let kd = self.bandwidth();
        let mut m = SymBand::zeros(self.n_basis(), kd);
        for node in self.nodes.iter().filter(|nd| nd.r >= r0) {
            for (p, vp) in node.values.iter().enumerate() {
                let ip = node.first + p as isize;
                if !(0..n).contains(&ip) {
                    continue;
                }
                for (q, vq) in node.values.iter().enumerate().take(p + 1) {
                    let iq = node.first + q as isize;
                    if (0..n).contains(&iq) {
                        m.add(ip as usize, iq as usize, node.weight * vp * vq);
                    }
                }
            }
        }
        m
    }

    /// `∫ B_i(r) f(r) dr` for every basis function.
    pub fn load_vector(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let n = self.n_basis() as isize;
        let mut out = vec![0.0; self.n_basis()];
        for node in &self.nodes {
            let fw = f(node.r) * node.weight;
            for (p, v) in node.values.iter().enumerate() {
                let i = node.first + p as isize;
                if (0..n).contains(&i) {
                    out[i as usize] += v * fw;
                }
            }
        }
        out
    }

    /// Evaluates `u(r)` at arbitrary radii.
    pub fn evaluate(&self, coeffs: &[f64], r: f64) -> f64 {
        let k = self.spline_order();
        if !(0.0..=self.box_radius()).contains(&r) {
            return 0.0;
        }
        let mu = self.knots.span(r);
        let mut v = vec![0.0; k];
        let mut d = vec![0.0; k];
        self.knots.eval(mu, r, &mut v, &mut d);
        let first = (mu + 1 - k) as isize - 1;
        let n = self.n_basis() as isize;
        (0..k)
            .filter_map(|p| {
                let i = first + p as isize;
                (0..n).contains(&i).then(|| v[p] * coeffs[i as usize])
            })
            .sum()
    }
}

/// Angular factor `⟨l+1, 0| cos θ |l, 0⟩ = (l+1)/sqrt((2l+1)(2l+3))`.
pub fn angular_factor(l_lower: usize) -> f64 {
    let l = l_lower as f64;
    (l + 1.0) / ((2.0 * l + 1.0) * (2.0 * l + 3.0)).sqrt()
}

/// Length-gauge dipole block `⟨B_i, l| z |B_j, l'⟩` for `m = 0`.
pub fn dipole_matrix(basis: &RadialBasis, l: usize, l_prime: usize) -> Result<SymBand> {
    if l.abs_diff(l_prime) != 1 {
        return Err(Error::SelectionRule(l, l_prime));
    }
    Ok(basis.r().scaled(angular_factor(l.min(l_prime))))
}

/// Nuclear charge and initial bound state of a one-electron ion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydrogenicSpec {
    pub nuclear_charge: u32,
    pub n: u32,
    pub l: u32,
}

impl HydrogenicSpec {
    pub fn new(nuclear_charge: u32, n: u32, l: u32) -> Result<Self> {
        if nuclear_charge == 0 {
            return Err(Error::Domain("nuclear charge must be positive".into()));
        }
        if l >= n {
            return Err(Error::Domain(format!("invalid state n={n}, l={l}")));
        }
        if !matches!((n, l), (1, 0) | (2, 0)) {
            return Err(Error::Domain(format!(
                "unsupported initial state n={n}, l={l}; expected 1s or 2s"
            )));
        }
        Ok(Self { nuclear_charge, n, l })
    }

    pub fn charge(&self) -> f64 {
        self.nuclear_charge as f64
    }

    /// Exact binding energy `-Z²/(2n²)`.
    pub fn exact_energy(&self) -> f64 {
        -self.charge().powi(2) / (2.0 * (self.n as f64).powi(2))
    }

    pub fn ionization_potential(&self) -> f64 {
        -self.exact_energy()
    }
}
