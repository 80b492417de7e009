//! Stochastic 1D acoustic wave problem.
//!
//! Solves `rho v_t - p_x = 0`, `p_t / kappa - v_x = g` on `(0, 1)` with walls
//! `v(0) = v(1) = 0`, a log-normal density and a Ricker-wavelet source.
//! Space is discretized with an upwind discontinuous Galerkin method on a
//! Legendre basis and time with the implicit midpoint rule.

use std::f64::consts::PI;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::banded::{BandLu, BandMatrix};
use super::field::{CovSpec, FieldSampler};
use super::quadrature::{gauss_legendre, legendre_with_derivatives};
use super::{ModelError, ProblemDescriptor, SampleOutput, SampleProblem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Wave1dSpec {
    pub kappa: f64,
    pub density: CovSpec,
    /// Polynomial degree of the dG space.
    pub degree: usize,
    /// Ratio of time step to mesh width.
    pub cfl_ratio: f64,
    pub h0: f64,
    pub final_time: f64,
    pub ricker_amplitude: f64,
    pub ricker_width: f64,
    /// The source is switched off for `t > source_cutoff`.
    pub source_cutoff: Option<f64>,
    pub source_center: f64,
    pub source_radius: f64,
    pub qoi_region: [f64; 2],
    /// Modeled cost of one time step of one cell per basis function.
    pub cost_scale: f64,
}

impl Default for Wave1dSpec {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            density: CovSpec::default(),
            degree: 1,
            cfl_ratio: 0.125,
            h0: 1.0 / 32.0,
            final_time: 1.0,
            ricker_amplitude: 10.0,
            ricker_width: PI / 10.0,
            source_cutoff: None,
            source_center: 0.5,
            source_radius: 0.1,
            qoi_region: [0.25, 0.75],
            cost_scale: 1e-7,
        }
    }
}

impl Wave1dSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        self.density.validate()?;
        let invalid = |msg: String| Err(ModelError::InvalidSpec(msg));
        if !(self.kappa > 0.0) {
            return invalid(format!("kappa must be positive, got {}", self.kappa));
        }
        if self.degree > 4 {
            return invalid(format!(
                "dG degree {} is not supported (max 4)",
                self.degree
            ));
        }
        if !(self.cfl_ratio > 0.0) || !(self.final_time > 0.0) || !(self.cost_scale > 0.0) {
            return invalid("cfl_ratio, final_time and cost_scale must be positive".into());
        }
        let cells = 1.0 / self.h0;
        if !(self.h0 > 0.0) || (cells - cells.round()).abs() > 1e-9 {
            return invalid(format!(
                "h0 = {} does not divide the unit interval",
                self.h0
            ));
        }
        if !(self.source_radius > 0.0) {
            return invalid("source_radius must be positive".into());
        }
        let [a, b] = self.qoi_region;
        if !(0.0 <= a && a < b && b <= 1.0) {
            return invalid(format!("qoi_region {a}..{b} is not inside (0, 1)"));
        }
        Ok(())
    }

    pub fn cells(&self, level: usize) -> usize {
        (1.0 / self.h0).round() as usize * (1usize << level)
    }

    pub fn steps(&self, level: usize) -> usize {
        let h = self.h0 * (-(level as f64)).exp2();
        ((self.final_time / (self.cfl_ratio * h)).round() as usize).max(1)
    }

    fn solve_cost(&self, level: usize) -> f64 {
        self.cost_scale * (self.steps(level) * self.cells(level) * (self.degree + 1)) as f64
    }

    /// Ricker wavelet, zero after the cutoff.
    pub fn ricker(&self, t: f64) -> f64 {
        if self.source_cutoff.is_some_and(|c| t > c) {
            return 0.0;
        }
        let r = t / self.ricker_width;
        self.ricker_amplitude * (1.0 - r * r) * (-0.5 * r * r).exp()
    }
}

/// Unnormalized smooth bump `exp(-1 / (1 - r^2))` for `r < 1`.
fn bump(x: f64, center: f64, radius: f64) -> f64 {
    let r = (x - center) / radius;
    if r.abs() < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

/// Composite Gauss-Legendre integral of `f` over `[a, b]`.
fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> f64 {
    let (nodes, weights) = gauss_legendre(10);
    let h = (b - a) / pieces as f64;
    (0..pieces)
        .map(|k| {
            let c = a + (k as f64 + 0.5) * h;
            nodes
                .iter()
                .zip(&weights)
                .map(|(x, w)| w * f(c + 0.5 * h * x))
                .sum::<f64>()
                * 0.5
                * h
        })
        .sum()
}

/// State layout: cell `c` owns `2 (degree + 1)` entries, the Legendre
/// coefficients of `v` followed by those of `p`.
pub struct WaveSolver {
    n_cells: usize,
    degree: usize,
    h: f64,
    tau: f64,
    steps: usize,
    mass: Vec<f64>,
    operator: BandMatrix,
    lu: BandLu,
    /// Values of `P_i` at the quadrature nodes used for projections.
    nodes: Vec<f64>,
    weights: Vec<f64>,
    basis_at_nodes: Vec<Vec<f64>>,
}

impl std::fmt::Debug for WaveSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WaveSolver")
            .field("n_cells", &self.n_cells)
            .field("degree", &self.degree)
            .field("tau", &self.tau)
            .field("steps", &self.steps)
            .finish()
    }
}

/// Quadrature points per cell for projections and error norms.
const PROJECTION_POINTS: usize = 8;

impl WaveSolver {
    /// Assembles and factors the midpoint system for cell-wise densities `rho`.
    pub fn new(
        rho: &[f64],
        kappa: f64,
        degree: usize,
        tau: f64,
        steps: usize,
    ) -> Result<Self, ModelError> {
        let n_cells = rho.len();
        if n_cells == 0 {
            return Err(ModelError::InvalidSpec(
                "wave solver needs at least one cell".into(),
            ));
        }
        if rho.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(ModelError::InvalidSpec(
                "density must be positive and finite".into(),
            ));
        }
        let nb = degree + 1;
        let block = 2 * nb;
        let n = n_cells * block;
        let h = 1.0 / n_cells as f64;
        let band = 2 * block - 1;

        // D_ij = int_{-1}^{1} P_i P_j' on the reference cell.
        let (gx, gw) = gauss_legendre(nb + 1);
        let mut d = vec![vec![0.0; nb]; nb];
        for (x, w) in gx.iter().zip(&gw) {
            let (p, dp) = legendre_with_derivatives(degree, *x);
            for i in 0..nb {
                for j in 0..nb {
                    d[i][j] += w * p[i] * dp[j];
                }
            }
        }
        // P_i(+1) = 1, P_i(-1) = (-1)^i.
        let end_value = |i: usize, side: f64| if side > 0.0 || i % 2 == 0 { 1.0 } else { -1.0 };
        let vi = |c: usize, i: usize| c * block + i;
        let pi = |c: usize, i: usize| c * block + nb + i;

        let mut mass = vec![0.0; n];
        let mut a = BandMatrix::zeros(n, band, band);
        let z: Vec<f64> = rho.iter().map(|r| (kappa * r).sqrt()).collect();
        for c in 0..n_cells {
            for i in 0..nb {
                let m = 0.5 * h * 2.0 / (2.0 * i as f64 + 1.0);
                mass[vi(c, i)] = rho[c] * m;
                mass[pi(c, i)] = m / kappa;
                for j in 0..nb {
                    a.add(vi(c, i), pi(c, j), -d[i][j]);
                    a.add(pi(c, i), vi(c, j), -d[i][j]);
                }
            }
        }
        // Interior faces, seen from both sides.
        for f in 1..n_cells {
            let (left, right) = (f - 1, f);
            for (own, other, n_own, xi_own, xi_other) in [
                (left, right, 1.0, 1.0, -1.0),
                (right, left, -1.0, -1.0, 1.0),
            ] {
                let coef = -1.0 / (z[own] + z[other]);
                for i in 0..nb {
                    let ti = end_value(i, xi_own);
                    // (jump_p + Z_other n jump_v) tested with psi_i and Z_own n phi_i.
                    for (row, scale) in [(pi(own, i), ti), (vi(own, i), z[own] * n_own * ti)] {
                        for j in 0..nb {
                            let to = end_value(j, xi_other);
                            let tc = end_value(j, xi_own);
                            a.add(row, pi(other, j), coef * scale * to);
                            a.add(row, pi(own, j), -coef * scale * tc);
                            a.add(row, vi(other, j), coef * scale * z[other] * n_own * to);
                            a.add(row, vi(own, j), -coef * scale * z[other] * n_own * tc);
                        }
                    }
                }
            }
        }
        // Walls: (v n, psi + Z n phi).
        for (c, n_out, xi) in [(0, -1.0, -1.0), (n_cells - 1, 1.0, 1.0)] {
            for i in 0..nb {
                let ti = end_value(i, xi);
                for j in 0..nb {
                    let tj = end_value(j, xi);
                    a.add(pi(c, i), vi(c, j), ti * n_out * tj);
                    a.add(vi(c, i), vi(c, j), z[c] * ti * tj);
                }
            }
        }

        let system = a.scaled_plus_diagonal(0.5 * tau, &mass);
        let lu = system.factor()?;

        let (nodes, weights) = gauss_legendre(PROJECTION_POINTS);
        let basis_at_nodes = nodes
            .iter()
            .map(|x| legendre_with_derivatives(degree, *x).0)
            .collect();
        Ok(Self {
            n_cells,
            degree,
            h,
            tau,
            steps,
            mass,
            operator: a,
            lu,
            nodes,
            weights,
            basis_at_nodes,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dofs(&self) -> usize {
        self.mass.len()
    }

    pub fn time_step(&self) -> f64 {
        self.tau
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn nb(&self) -> usize {
        self.degree + 1
    }

    fn cell_center(&self, c: usize) -> f64 {
        (c as f64 + 0.5) * self.h
    }

    /// L2 projection of `(v, p)` onto the dG space.
    pub fn project(&self, v: impl Fn(f64) -> f64, p: impl Fn(f64) -> f64) -> Vec<f64> {
        let nb = self.nb();
        let mut u = vec![0.0; self.dofs()];
        for c in 0..self.n_cells {
            let xc = self.cell_center(c);
            for (q, (x, w)) in self.nodes.iter().zip(&self.weights).enumerate() {
                let xq = xc + 0.5 * self.h * x;
                let (fv, fp) = (v(xq), p(xq));
                for i in 0..nb {
                    let s = (2.0 * i as f64 + 1.0) / 2.0 * w * self.basis_at_nodes[q][i];
                    u[c * 2 * nb + i] += s * fv;
                    u[c * 2 * nb + nb + i] += s * fp;
                }
            }
        }
        u
    }

    /// Load vector of a source `g(x)` in the `p` equation.
    pub fn load(&self, g: impl Fn(f64) -> f64) -> Vec<f64> {
        let (nodes, weights) = gauss_legendre(12);
        let nb = self.nb();
        let mut b = vec![0.0; self.dofs()];
        for c in 0..self.n_cells {
            let xc = self.cell_center(c);
            for (x, w) in nodes.iter().zip(&weights) {
                let gq = g(xc + 0.5 * self.h * x);
                if gq == 0.0 {
                    continue;
                }
                let (p, _) = legendre_with_derivatives(self.degree, *x);
                for i in 0..nb {
                    b[c * 2 * nb + nb + i] += 0.5 * self.h * w * gq * p[i];
                }
            }
        }
        b
    }

    /// Advances `u` from `t = 0` through all steps with source
    /// `amplitude(t) * load`. `observer` sees the state after every step.
    pub fn run(
        &self,
        u: &mut [f64],
        amplitude: impl Fn(f64) -> f64,
        load: &[f64],
        mut observer: impl FnMut(usize, &[f64]),
    ) -> Result<(), usize> {
        let n = self.dofs();
        let mut rhs = vec![0.0; n];
        for step in 1..=self.steps {
            self.operator.mul_vec(u, &mut rhs);
            let g = self.tau * amplitude((step as f64 - 0.5) * self.tau);
            for k in 0..n {
                rhs[k] = self.mass[k] * u[k] - 0.5 * self.tau * rhs[k] + g * load[k];
            }
            self.lu.solve(&mut rhs);
            u.copy_from_slice(&rhs);
            observer(step, u);
        }
        if u.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(self.steps)
        }
    }

    /// `(1/2) u^T M u`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        0.5 * u
            .iter()
            .zip(&self.mass)
            .map(|(x, m)| m * x * x)
            .sum::<f64>()
    }

    fn eval_cell(&self, u: &[f64], c: usize, xi: f64) -> (f64, f64) {
        let nb = self.nb();
        let (p, _) = legendre_with_derivatives(self.degree, xi);
        let base = c * 2 * nb;
        let v = (0..nb).map(|i| u[base + i] * p[i]).sum();
        let q = (0..nb).map(|i| u[base + nb + i] * p[i]).sum();
        (v, q)
    }

    /// `(v, p)` at `x`.
    pub fn evaluate(&self, u: &[f64], x: f64) -> (f64, f64) {
        let c = ((x / self.h) as usize).min(self.n_cells - 1);
        let xi = (x - self.cell_center(c)) / (0.5 * self.h);
        self.eval_cell(u, c, xi)
    }

    /// `sqrt(int_a^b v^2 + p^2 dx)`, exact for the discrete solution.
    pub fn region_norm(&self, u: &[f64], a: f64, b: f64) -> f64 {
        let (nodes, weights) = gauss_legendre(self.nb());
        let mut sum = 0.0;
        for c in 0..self.n_cells {
            let (x0, x1) = (c as f64 * self.h, (c + 1) as f64 * self.h);
            let (lo, hi) = (x0.max(a), x1.min(b));
            if hi <= lo {
                continue;
            }
            for (x, w) in nodes.iter().zip(&weights) {
                let xq = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
                let xi = (xq - self.cell_center(c)) / (0.5 * self.h);
                let (v, p) = self.eval_cell(u, c, xi);
                sum += 0.5 * (hi - lo) * w * (v * v + p * p);
            }
        }
        sum.sqrt()
    }

    /// `||(v, p) - (v_exact, p_exact)||_{L2(0, 1)}`.
    pub fn l2_error(
        &self,
        u: &[f64],
        v_exact: impl Fn(f64) -> f64,
        p_exact: impl Fn(f64) -> f64,
    ) -> f64 {
        let mut sum = 0.0;
        for c in 0..self.n_cells {
            let xc = self.cell_center(c);
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                let (v, p) = self.eval_cell(u, c, *x);
                let xq = xc + 0.5 * self.h * x;
                sum += 0.5 * self.h * w * ((v - v_exact(xq)).powi(2) + (p - p_exact(xq)).powi(2));
            }
        }
        sum.sqrt()
    }
}

/// Levels for which field samplers are cached.
const CACHED_LEVELS: usize = 16;

/// The stochastic wave problem as a [`SampleProblem`].
pub struct Wave1d {
    spec: Wave1dSpec,
    /// Normalization of the source bump to unit mass.
    bump_scale: f64,
    samplers: Vec<OnceLock<Result<FieldSampler, String>>>,
}

impl std::fmt::Debug for Wave1d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Wave1d").field("spec", &self.spec).finish()
    }
}

impl Wave1d {
    pub fn new(spec: Wave1dSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        let (c, r) = (spec.source_center, spec.source_radius);
        let mass = integrate(|x| bump(x, c, r), c - r, c + r, 64);
        Ok(Self {
            bump_scale: 1.0 / mass,
            samplers: (0..CACHED_LEVELS).map(|_| OnceLock::new()).collect(),
            spec,
        })
    }

    pub fn spec(&self) -> &Wave1dSpec {
        &self.spec
    }

    /// Spatial source profile with unit L1 mass.
    pub fn source_profile(&self, x: f64) -> f64 {
        self.bump_scale * bump(x, self.spec.source_center, self.spec.source_radius)
    }

    fn build_sampler(&self, level: usize) -> Result<FieldSampler, ModelError> {
        let n = self.spec.cells(level);
        let h = 1.0 / n as f64;
        if level == 0 {
            FieldSampler::new(&self.spec.density, n, h)
        } else {
            FieldSampler::new(&self.spec.density, 2 * n - 1, 0.5 * h)
        }
    }

    fn with_sampler<T>(
        &self,
        level: usize,
        f: impl FnOnce(&FieldSampler) -> T,
    ) -> Result<T, ModelError> {
        if let Some(slot) = self.samplers.get(level) {
            match slot.get_or_init(|| self.build_sampler(level).map_err(|e| e.to_string())) {
                Ok(s) => Ok(f(s)),
                Err(msg) => Err(ModelError::InvalidSpec(msg.clone())),
            }
        } else {
            Ok(f(&self.build_sampler(level)?))
        }
    }

    /// Cell densities for the fine grid of `level` and, from the same
    /// realization, for the grid of `level - 1`.
    ///
    /// For `level >= 1` the Gaussian field is drawn on a grid of spacing
    /// `h / 2`, which contains the midpoints of both the fine and the coarse
    /// cells, so both densities are point values of one field.
    pub fn densities(&self, level: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = self.with_sampler(level, |s| s.sample_gaussian(&mut rng))?;
        if level == 0 {
            return Ok((g.into_iter().map(f64::exp).collect(), Vec::new()));
        }
        let n = self.spec.cells(level);
        let fine = (0..n).map(|j| g[2 * j].exp()).collect();
        let coarse = (0..n / 2).map(|i| g[4 * i + 1].exp()).collect();
        Ok((fine, coarse))
    }

    pub fn solver(&self, level: usize, rho: &[f64]) -> Result<WaveSolver, ModelError> {
        let h = self.spec.h0 * (-(level as f64)).exp2();
        let steps = self.spec.steps(level);
        WaveSolver::new(
            rho,
            self.spec.kappa,
            self.spec.degree,
            self.spec.final_time / steps as f64,
            steps,
        )
        .map_err(|e| match e {
            ModelError::InvalidSpec(msg) => {
                ModelError::InvalidSpec(format!("level {level} (h = {h}): {msg}"))
            }
            other => other,
        })
    }

    /// Final state of the solve on `level` for densities `rho`, with an
    /// optional observer called after every step.
    pub fn solve(
        &self,
        level: usize,
        rho: &[f64],
        seed: u64,
        observer: impl FnMut(usize, &[f64]),
    ) -> Result<(WaveSolver, Vec<f64>), ModelError> {
        let solver = self.solver(level, rho).map_err(|e| ModelError::Diverged {
            level,
            seed,
            detail: e.to_string(),
        })?;
        let load = solver.load(|x| self.source_profile(x));
        let mut u = vec![0.0; solver.dofs()];
        solver
            .run(&mut u, |t| self.spec.ricker(t), &load, observer)
            .map_err(|step| ModelError::Diverged {
                level,
                seed,
                detail: format!("non-finite state after step {step}"),
            })?;
        Ok((solver, u))
    }

    fn qoi(&self, level: usize, rho: &[f64], seed: u64) -> Result<f64, ModelError> {
        let (solver, u) = self.solve(level, rho, seed, |_, _| {})?;
        let [a, b] = self.spec.qoi_region;
        let q = solver.region_norm(&u, a, b);
        if q.is_finite() {
            Ok(q)
        } else {
            Err(ModelError::Diverged {
                level,
                seed,
                detail: "non-finite quantity of interest".into(),
            })
        }
    }
}

impl SampleProblem for Wave1d {
    fn descriptor(&self) -> ProblemDescriptor {
        ProblemDescriptor {
            dimension: 1,
            coarsest_width: self.spec.h0,
        }
    }

    fn evaluate(&self, level: usize, seed: u64) -> Result<SampleOutput, ModelError> {
        let (fine, coarse) = self.densities(level, seed)?;
        let q_fine = self.qoi(level, &fine, seed)?;
        let q_coarse = if level == 0 {
            0.0
        } else {
            self.qoi(level - 1, &coarse, seed)?
        };
        Ok(SampleOutput {
            q_fine,
            q_coarse,
            cost: self.modeled_cost(level).unwrap_or(0.0),
        })
    }

    /// Both solves of a level pair are counted.
    fn modeled_cost(&self, level: usize) -> Option<f64> {
        let coarse = if level == 0 {
            0.0
        } else {
            self.spec.solve_cost(level - 1)
        };
        Some(self.spec.solve_cost(level) + coarse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_solver(n: usize, degree: usize, cfl: f64) -> WaveSolver {
        let h = 1.0 / n as f64;
        let steps = (1.0 / (cfl * h)).round() as usize;
        WaveSolver::new(&vec![1.0; n], 1.0, degree, 1.0 / steps as f64, steps).unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let s = uniform_solver(16, 1, 0.125);
        let mut u = vec![0.0; s.dofs()];
        let load = vec![0.0; s.dofs()];
        s.run(&mut u, |_| 1.0, &load, |_, _| {}).unwrap();
        assert!(u.iter().all(|&x| x == 0.0));
        assert_eq!(s.region_norm(&u, 0.25, 0.75), 0.0);
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let s = uniform_solver(8, 2, 0.5);
        let u = s.project(|x| 1.0 + x - x * x, |x| 2.0 * x);
        let (v, p) = s.evaluate(&u, 0.3);
        assert!((v - (1.0 + 0.3 - 0.09)).abs() < 1e-13);
        assert!((p - 0.6).abs() < 1e-13);
        assert!(s.l2_error(&u, |x| 1.0 + x - x * x, |x| 2.0 * x) < 1e-13);
    }

    #[test]
    fn region_norm_of_constant() {
        let s = uniform_solver(8, 1, 0.5);
        let u = s.project(|_| 3.0, |_| 4.0);
        // |(3, 4)| = 5 over a region of length 0.5.
        assert!((s.region_norm(&u, 0.25, 0.75) - 5.0 * 0.5f64.sqrt()).abs() < 1e-13);
        // Region boundaries that cut through cells.
        assert!((s.region_norm(&u, 0.3, 0.71) - 5.0 * 0.41f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn energy_does_not_grow_without_source() {
        let n = 32;
        let rho: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (i as f64).sin()).collect();
        let s = WaveSolver::new(&rho, 2.0, 1, 1.0 / 128.0, 128).unwrap();
        let mut u = s.project(|x| (-100.0 * (x - 0.4).powi(2)).exp(), |_| 0.0);
        let load = vec![0.0; s.dofs()];
        let mut prev = s.energy(&u);
        s.run(
            &mut u,
            |_| 0.0,
            &load,
            |_, state| {
                let e = s.energy(state);
                assert!(e <= prev * (1.0 + 1e-12));
                prev = e;
            },
        )
        .unwrap();
        assert!(prev > 0.0);
    }

    #[test]
    fn source_profile_has_unit_mass() {
        let model = Wave1d::new(Wave1dSpec::default()).unwrap();
        let m = integrate(|x| model.source_profile(x), 0.0, 1.0, 400);
        assert!((m - 1.0).abs() < 1e-12);
        assert_eq!(model.source_profile(0.3), 0.0);
    }

    #[test]
    fn coarse_density_comes_from_the_fine_realization() {
        let model = Wave1d::new(Wave1dSpec::default()).unwrap();
        let (fine, coarse) = model.densities(2, 17).unwrap();
        assert_eq!(fine.len(), 128);
        assert_eq!(coarse.len(), 64);
        let (fine2, coarse2) = model.densities(2, 17).unwrap();
        assert_eq!(fine, fine2);
        assert_eq!(coarse, coarse2);
        let (level0, none) = model.densities(0, 17).unwrap();
        assert_eq!(level0.len(), 32);
        assert!(none.is_empty());
    }

    #[test]
    fn modeled_cost_counts_both_solves() {
        let spec = Wave1dSpec {
            cost_scale: 1.0,
            ..Wave1dSpec::default()
        };
        let model = Wave1d::new(spec).unwrap();
        assert_eq!(model.modeled_cost(0), Some((256 * 32 * 2) as f64));
        assert_eq!(
            model.modeled_cost(1),
            Some((512 * 64 * 2 + 256 * 32 * 2) as f64)
        );
    }

    #[test]
    fn ricker_cutoff() {
        let spec = Wave1dSpec {
            source_cutoff: Some(0.5),
            ..Wave1dSpec::default()
        };
        assert_eq!(spec.ricker(0.0), 10.0);
        assert_eq!(spec.ricker(0.6), 0.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        let bad_h = Wave1dSpec {
            h0: 0.3,
            ..Wave1dSpec::default()
        };
        assert!(Wave1d::new(bad_h).is_err());
        let bad_region = Wave1dSpec {
            qoi_region: [0.8, 0.2],
            ..Wave1dSpec::default()
        };
        assert!(Wave1d::new(bad_region).is_err());
    }
}
