//! Steady 2D viscous Burgers flow on the unit square with an uncertain inlet
//! profile, its exit kinetic-energy QoI and the continuous adjoint.
//!
//! Direct problem: `u u_x + v u_y = Δu / Re`, `u v_x + v v_y = Δv / Re` with
//! `u = v = 0` on `y ∈ {0, 1}`, inlet `u(0, y) = Σ s_i y^i`,
//! `v(0, y) = y² - y³` and `∂u/∂x = ∂v/∂x = 0` at `x = 1`. The inlet
//! polynomial has `s_0 = 0` and `s_{m+1} = -Σ_{i=1}^m s_i` so that the corners
//! stay at rest; only `s_1..s_m` are free.
//!
//! Second-order central differences on an N × N node grid; the exit Neumann
//! condition uses the one-sided stencil `(3f_N - 4f_{N-1} + f_{N-2}) / 2h`.
//! The nonlinear system is solved by damped Newton with an analytic Jacobian,
//! preceded by a few Picard (frozen-advection) steps.
//!
//! The adjoint fields `(u⁺, v⁺)` solve
//!
//! ```text
//! u⁺ v_y + u u⁺_x + v u⁺_y + Δu⁺ / Re = v⁺ v_x
//! v⁺ u_x + u v⁺_x + v v⁺_y + Δv⁺ / Re = u⁺ u_y
//! ```
//!
//! with homogeneous Dirichlet data at the inlet and walls and the Robin exit
//! conditions `u⁺ u + u⁺_x / Re + u = 0`, `v⁺ u + v⁺_x / Re + v = 0`. They are
//! discretized with central differences, advection written in flux form
//! (continuous adjoint), so gradients agree with finite differences of the
//! discrete QoI only up to O(h²). [`BurgersState::discrete_gradient`] gives
//! the exact discrete derivative for comparison.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::linalg::BandMatrix;
use crate::models::Model;
use crate::space::{Marginal, StochasticSpace};

/// Inlet-coefficient means used for the m = 10 study.
pub const NOMINAL_COEFFICIENTS: [f64; 10] =
    [-0.5, -0.1, 0.1, 0.01, -0.25, 0.15, 0.15, -0.1, 0.01, -0.25];

#[derive(Debug, Clone)]
pub struct BurgersSolver {
    /// Nodes per direction.
    pub grid: usize,
    pub re: f64,
    /// Residual ∞-norm at convergence.
    pub tol: f64,
    pub max_iter: usize,
    /// Leading frozen-advection iterations before switching to Newton.
    pub picard_iters: usize,
}

impl Default for BurgersSolver {
    fn default() -> Self {
        Self { grid: 31, re: 250.0, tol: 1e-10, max_iter: 60, picard_iters: 2 }
    }
}

/// Converged (or synthetic) Burgers fields on the full grid, `f[i * N + j]`
/// with `i` along x and `j` along y.
#[derive(Debug, Clone)]
pub struct BurgersState {
    pub grid: usize,
    pub re: f64,
    /// Inlet coefficients s_0..s_{m+1}.
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub residual_norm: f64,
    /// Residual ∞-norm before each iteration, ending with the converged value.
    pub residual_history: Vec<f64>,
}

/// Adjoint fields and the QoI gradient with respect to the free coefficients.
#[derive(Debug, Clone)]
pub struct AdjointSolution {
    pub u_adj: Vec<f64>,
    pub v_adj: Vec<f64>,
    /// Total derivative dk_e/ds_i, i = 1..m, including the s_{m+1} closure.
    pub gradient: Vec<f64>,
    /// Same integrals with u⁺_x taken pointwise on the inlet by the one-sided
    /// second-order difference. Much less accurate when the flow leaves
    /// through the inlet at high Re.
    pub gradient_pointwise: Vec<f64>,
}

/// Full inlet polynomial from the free coefficients.
pub fn inlet_coefficients(free: &[f64]) -> Vec<f64> {
    let mut s = Vec::with_capacity(free.len() + 2);
    s.push(0.0);
    s.extend_from_slice(free);
    s.push(-free.iter().sum::<f64>());
    s
}

fn poly(s: &[f64], y: f64) -> f64 {
    s.iter().rev().fold(0.0, |acc, c| acc * y + c)
}

fn inlet_v(y: f64) -> f64 {
    y * y - y * y * y
}

struct Grid {
    n: usize,
    ny: usize,
    h: f64,
    nu: f64,
}

impl Grid {
    fn new(n: usize, re: f64) -> Self {
        Self { n, ny: n - 2, h: 1.0 / (n - 1) as f64, nu: 1.0 / re }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// Unknown index of component `c` at node (i, j), i ≥ 1, 1 ≤ j ≤ N - 2.
    #[inline]
    fn unk(&self, i: usize, j: usize, c: usize) -> usize {
        ((i - 1) * self.ny + (j - 1)) * 2 + c
    }

    fn unknowns(&self) -> usize {
        (self.n - 1) * self.ny * 2
    }

    fn is_unknown(&self, i: usize, j: usize) -> bool {
        i >= 1 && j >= 1 && j + 1 < self.n
    }

    fn band(&self) -> BandMatrix {
        BandMatrix::new(self.unknowns(), 4 * self.ny + 1, 2 * self.ny + 1)
    }

    fn trapezoid(&self, f: impl Fn(usize) -> f64) -> f64 {
        let inner: f64 = (1..self.n - 1).map(&f).sum();
        self.h * (inner + 0.5 * (f(0) + f(self.n - 1)))
    }
}

impl BurgersSolver {
    pub fn new(grid: usize, re: f64) -> Result<Self> {
        let s = Self { grid, re, ..Self::default() };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        if self.grid < 5 {
            return Err(invalid(format!("Burgers grid needs at least 5 nodes, got {}", self.grid)));
        }
        if !(self.re > 0.0) {
            return Err(invalid(format!("Reynolds number must be positive, got {}", self.re)));
        }
        Ok(())
    }

    /// State with boundary data applied and the inlet profile extended
    /// through the domain as the initial guess.
    pub fn initial_state(&self, free: &[f64]) -> BurgersState {
        let n = self.grid;
        let g = Grid::new(n, self.re);
        let s = inlet_coefficients(free);
        let mut u = vec![0.0; n * n];
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            for j in 1..n - 1 {
                let y = j as f64 * g.h;
                u[g.at(i, j)] = poly(&s, y);
                v[g.at(i, j)] = inlet_v(y);
            }
        }
        BurgersState { grid: n, re: self.re, s, u, v, residual_norm: f64::INFINITY, residual_history: vec![] }
    }

    /// Solve for free inlet coefficients `s_1..s_m`.
    pub fn solve(&self, free: &[f64]) -> Result<BurgersState> {
        self.solve_from(self.initial_state(free))
    }

    /// Solve starting from `guess` (its inlet coefficients define the problem).
    pub fn solve_from(&self, mut st: BurgersState) -> Result<BurgersState> {
        self.validate()?;
        if st.grid != self.grid {
            return Err(invalid("initial guess grid differs from solver grid"));
        }
        st.re = self.re;
        let g = Grid::new(self.grid, self.re);
        let mut history = Vec::new();
        let mut r = residual(&g, &st.u, &st.v);
        let mut rn = inf_norm(&r);
        for it in 0..self.max_iter {
            history.push(rn);
            if rn <= self.tol {
                st.residual_norm = rn;
                st.residual_history = history;
                return Ok(st);
            }
            let newton = it >= self.picard_iters;
            let mut step = solve_step(&g, &st, &r, newton)?;
            let mut accepted = try_step(&g, &st, &step, rn);
            if accepted.is_none() && newton {
                step = solve_step(&g, &st, &r, false)?;
                accepted = try_step(&g, &st, &step, rn);
            }
            let (u, v, r_new, rn_new) = match accepted {
                Some(a) => a,
                None => {
                    // take the full step anyway; the next iteration may recover
                    let (u, v) = apply_step(&g, &st, &step, 1.0);
                    let r_new = residual(&g, &u, &v);
                    let rn_new = inf_norm(&r_new);
                    (u, v, r_new, rn_new)
                }
            };
            if !rn_new.is_finite() {
                return Err(Error::SolverDivergence { iterations: it + 1, residual: rn_new });
            }
            st.u = u;
            st.v = v;
            r = r_new;
            rn = rn_new;
        }
        history.push(rn);
        if rn <= self.tol {
            st.residual_norm = rn;
            st.residual_history = history;
            return Ok(st);
        }
        Err(Error::SolverDivergence { iterations: self.max_iter, residual: rn })
    }
}

fn inf_norm(r: &[f64]) -> f64 {
    r.iter().fold(0.0f64, |a, b| if b.is_nan() { f64::NAN } else { a.max(b.abs()) })
}

fn residual(g: &Grid, u: &[f64], v: &[f64]) -> Vec<f64> {
    let n = g.n;
    let (h, nu) = (g.h, g.nu);
    let mut r = vec![0.0; g.unknowns()];
    for i in 1..n {
        for j in 1..n - 1 {
            let p = g.at(i, j);
            if i == n - 1 {
                let (w, ww) = (g.at(i - 1, j), g.at(i - 2, j));
                r[g.unk(i, j, 0)] = (3.0 * u[p] - 4.0 * u[w] + u[ww]) / (2.0 * h);
                r[g.unk(i, j, 1)] = (3.0 * v[p] - 4.0 * v[w] + v[ww]) / (2.0 * h);
                continue;
            }
            let (e, w, nn, s) = (g.at(i + 1, j), g.at(i - 1, j), g.at(i, j + 1), g.at(i, j - 1));
            let lap_u = (u[e] + u[w] + u[nn] + u[s] - 4.0 * u[p]) / (h * h);
            let lap_v = (v[e] + v[w] + v[nn] + v[s] - 4.0 * v[p]) / (h * h);
            r[g.unk(i, j, 0)] =
                u[p] * (u[e] - u[w]) / (2.0 * h) + v[p] * (u[nn] - u[s]) / (2.0 * h) - nu * lap_u;
            r[g.unk(i, j, 1)] =
                u[p] * (v[e] - v[w]) / (2.0 * h) + v[p] * (v[nn] - v[s]) / (2.0 * h) - nu * lap_v;
        }
    }
    r
}

/// Newton Jacobian (`newton = true`) or frozen-advection Picard matrix.
fn assemble(g: &Grid, u: &[f64], v: &[f64], newton: bool) -> BandMatrix {
    let n = g.n;
    let (h, nu) = (g.h, g.nu);
    let mut a = g.band();
    let d = nu / (h * h);
    for i in 1..n {
        for j in 1..n - 1 {
            let ru = g.unk(i, j, 0);
            let rv = g.unk(i, j, 1);
            if i == n - 1 {
                for c in 0..2 {
                    let row = g.unk(i, j, c);
                    a.add(row, g.unk(i, j, c), 3.0 / (2.0 * h));
                    a.add(row, g.unk(i - 1, j, c), -4.0 / (2.0 * h));
                    if i - 2 >= 1 {
                        a.add(row, g.unk(i - 2, j, c), 1.0 / (2.0 * h));
                    }
                }
                continue;
            }
            let p = g.at(i, j);
            let (e, w, nn, s) = (g.at(i + 1, j), g.at(i - 1, j), g.at(i, j + 1), g.at(i, j - 1));
            let (up, vp) = (u[p], v[p]);
            let neighbors = [
                (i + 1, j, up / (2.0 * h) - d),
                (i - 1, j, -up / (2.0 * h) - d),
                (i, j + 1, vp / (2.0 * h) - d),
                (i, j - 1, -vp / (2.0 * h) - d),
            ];
            a.add(ru, g.unk(i, j, 0), 4.0 * d);
            a.add(rv, g.unk(i, j, 1), 4.0 * d);
            for &(ii, jj, coef) in &neighbors {
                if g.is_unknown(ii, jj) {
                    a.add(ru, g.unk(ii, jj, 0), coef);
                    a.add(rv, g.unk(ii, jj, 1), coef);
                }
            }
            if newton {
                let ux = (u[e] - u[w]) / (2.0 * h);
                let uy = (u[nn] - u[s]) / (2.0 * h);
                let vx = (v[e] - v[w]) / (2.0 * h);
                let vy = (v[nn] - v[s]) / (2.0 * h);
                a.add(ru, g.unk(i, j, 0), ux);
                a.add(ru, g.unk(i, j, 1), uy);
                a.add(rv, g.unk(i, j, 0), vx);
                a.add(rv, g.unk(i, j, 1), vy);
            }
        }
    }
    a
}

fn solve_step(g: &Grid, st: &BurgersState, r: &[f64], newton: bool) -> Result<Vec<f64>> {
    let lu = assemble(g, &st.u, &st.v, newton).factor().map_err(|e| match e {
        Error::SingularMatrix(_) => Error::SolverDivergence { iterations: 0, residual: inf_norm(r) },
        other => other,
    })?;
    let mut step: Vec<f64> = r.iter().map(|x| -x).collect();
    lu.solve(&mut step);
    Ok(step)
}

fn apply_step(g: &Grid, st: &BurgersState, step: &[f64], lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let mut u = st.u.clone();
    let mut v = st.v.clone();
    for i in 1..g.n {
        for j in 1..g.n - 1 {
            let p = g.at(i, j);
            u[p] += lambda * step[g.unk(i, j, 0)];
            v[p] += lambda * step[g.unk(i, j, 1)];
        }
    }
    (u, v)
}

type Trial = (Vec<f64>, Vec<f64>, Vec<f64>, f64);

/// Backtracking on the residual ∞-norm.
fn try_step(g: &Grid, st: &BurgersState, step: &[f64], rn: f64) -> Option<Trial> {
    let mut lambda = 1.0;
    while lambda >= 1.0 / 64.0 {
        let (u, v) = apply_step(g, st, step, lambda);
        let r = residual(g, &u, &v);
        let rn_new = inf_norm(&r);
        if rn_new < rn {
            return Some((u, v, r, rn_new));
        }
        lambda *= 0.5;
    }
    None
}

impl BurgersState {
    /// Synthetic state with prescribed fields (boundary values included).
    pub fn from_fields(grid: usize, re: f64, s: Vec<f64>, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if u.len() != grid * grid || v.len() != grid * grid {
            return Err(invalid("field length must be grid²"));
        }
        Ok(Self { grid, re, s, u, v, residual_norm: f64::NAN, residual_history: vec![] })
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.grid - 1) as f64
    }

    /// Free coefficients s_1..s_m.
    pub fn free_coefficients(&self) -> &[f64] {
        &self.s[1..self.s.len() - 1]
    }

    /// Exit kinetic energy `½ ∫ (u² + v²) dy` at x = 1 (trapezoidal rule).
    pub fn qoi(&self) -> f64 {
        let g = Grid::new(self.grid, self.re);
        let i = self.grid - 1;
        g.trapezoid(|j| {
            let p = g.at(i, j);
            0.5 * (self.u[p] * self.u[p] + self.v[p] * self.v[p])
        })
    }

    /// Residual ∞-norm of the discrete direct equations for this state.
    pub fn residual_inf_norm(&self) -> f64 {
        let g = Grid::new(self.grid, self.re);
        inf_norm(&residual(&g, &self.u, &self.v))
    }

    /// Solve the continuous adjoint and integrate the inlet sensitivities.
    pub fn adjoint(&self) -> Result<AdjointSolution> {
        let n = self.grid;
        let g = Grid::new(n, self.re);
        let (h, nu) = (g.h, g.nu);
        let (u, v) = (&self.u, &self.v);
        let d = nu / (h * h);
        let mut a = g.band();
        let mut rhs = vec![0.0; g.unknowns()];
        for i in 1..n {
            for j in 1..n - 1 {
                let p = g.at(i, j);
                let ra = g.unk(i, j, 0);
                let rb = g.unk(i, j, 1);
                if i == n - 1 {
                    for c in 0..2 {
                        let row = g.unk(i, j, c);
                        a.add(row, g.unk(i, j, c), u[p] + 3.0 * nu / (2.0 * h));
                        a.add(row, g.unk(i - 1, j, c), -4.0 * nu / (2.0 * h));
                        if i - 2 >= 1 {
                            a.add(row, g.unk(i - 2, j, c), nu / (2.0 * h));
                        }
                    }
                    rhs[ra] = -u[p];
                    rhs[rb] = -v[p];
                    continue;
                }
                let (e, w, nn, s) = (g.at(i + 1, j), g.at(i - 1, j), g.at(i, j + 1), g.at(i, j - 1));
                let ux = (u[e] - u[w]) / (2.0 * h);
                let uy = (u[nn] - u[s]) / (2.0 * h);
                let vx = (v[e] - v[w]) / (2.0 * h);
                let vy = (v[nn] - v[s]) / (2.0 * h);
                // E_u: a vy + u a_x + v a_y + ν Δa - b vx = 0
                // E_v: b ux + u b_x + v b_y + ν Δb - a uy = 0
                // advection in flux form: u a_x + v a_y + a v_y = (ua)_x + (va)_y - a u_x
                // and u b_x + v b_y + b u_x = (ub)_x + (vb)_y - b v_y
                a.add(ra, ra, -ux - 4.0 * d);
                a.add(rb, rb, -vy - 4.0 * d);
                a.add(ra, rb, -vx);
                a.add(rb, ra, -uy);
                let neighbors = [
                    (i + 1, j, 1.0, 0.0),
                    (i - 1, j, -1.0, 0.0),
                    (i, j + 1, 0.0, 1.0),
                    (i, j - 1, 0.0, -1.0),
                ];
                for &(ii, jj, sx, sy) in &neighbors {
                    if g.is_unknown(ii, jj) {
                        let q = g.at(ii, jj);
                        let coef = (sx * u[q] + sy * v[q]) / (2.0 * h) + d;
                        a.add(ra, g.unk(ii, jj, 0), coef);
                        a.add(rb, g.unk(ii, jj, 1), coef);
                    }
                }
            }
        }
        let lu = a.factor().map_err(|e| Error::AdjointSolve(e.to_string()))?;
        lu.solve(&mut rhs);
        if rhs.iter().any(|x| !x.is_finite()) {
            return Err(Error::AdjointSolve("non-finite adjoint field".into()));
        }
        let mut u_adj = vec![0.0; n * n];
        let mut v_adj = vec![0.0; n * n];
        for i in 1..n {
            for j in 1..n - 1 {
                u_adj[g.at(i, j)] = rhs[g.unk(i, j, 0)];
                v_adj[g.at(i, j)] = rhs[g.unk(i, j, 1)];
            }
        }

        // dk/ds_i = -∫ (u⁺ + v⁺) u y^i dy - (1/Re) ∫ u⁺_x y^i dy at x = 0; the
        // first integrand vanishes with u⁺ = v⁺ = 0 on the inlet.
        let m = self.s.len() - 2;
        let with_closure = |flux: &dyn Fn(usize) -> f64| -> Vec<f64> {
            let moment = |k: i32| g.trapezoid(|j| flux(j) * (j as f64 * h).powi(k));
            let closure = moment(m as i32 + 1);
            (1..=m).map(|k| moment(k as i32) - closure).collect()
        };
        // Inlet flux ν u⁺_x + ½ u u⁺ taken on the first interior line: the
        // weak-form (lifting) evaluation of the boundary integral. It tends to
        // ν u⁺_x at the wall but stays accurate when the inlet layer is
        // under-resolved.
        let gradient = with_closure(&|j| {
            let p = g.at(1, j);
            -(nu / h + 0.5 * u[p]) * u_adj[p]
        });
        let gradient_pointwise = with_closure(&|j| {
            let ax = (-3.0 * u_adj[g.at(0, j)] + 4.0 * u_adj[g.at(1, j)] - u_adj[g.at(2, j)]) / (2.0 * h);
            -(u_adj[g.at(0, j)] + v_adj[g.at(0, j)]) * u[g.at(0, j)] - nu * ax
        });
        Ok(AdjointSolution { u_adj, v_adj, gradient, gradient_pointwise })
    }

    /// Exact gradient of the discrete QoI with respect to the free
    /// coefficients, from the transposed Newton Jacobian.
    pub fn discrete_gradient(&self) -> Result<Vec<f64>> {
        let n = self.grid;
        let g = Grid::new(n, self.re);
        let (h, nu) = (g.h, g.nu);
        let lu = assemble(&g, &self.u, &self.v, true)
            .transpose()
            .factor()
            .map_err(|e| Error::AdjointSolve(e.to_string()))?;
        // -∂k/∂U: trapezoid weights on the exit nodes (walls carry no unknowns)
        let mut lam = vec![0.0; g.unknowns()];
        for j in 1..n - 1 {
            let p = g.at(n - 1, j);
            lam[g.unk(n - 1, j, 0)] = -h * self.u[p];
            lam[g.unk(n - 1, j, 1)] = -h * self.v[p];
        }
        lu.solve(&mut lam);
        // ∂R_u(1, j)/∂u(0, j) = -u/(2h) - ν/h²
        let dr: Vec<f64> = (0..n)
            .map(|j| {
                if j == 0 || j == n - 1 {
                    0.0
                } else {
                    lam[g.unk(1, j, 0)] * (-self.u[g.at(1, j)] / (2.0 * h) - nu / (h * h))
                }
            })
            .collect();
        let m = self.s.len() - 2;
        let moment = |k: i32| (1..n - 1).map(|j| dr[j] * (j as f64 * h).powi(k)).sum::<f64>();
        let closure = moment(m as i32 + 1);
        Ok((1..=m).map(|k| moment(k as i32) - closure).collect())
    }

    /// CSV dump of the fields: `x,y,u,v`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let h = self.spacing();
        writeln!(out, "x,y,u,v")?;
        for i in 0..self.grid {
            for j in 0..self.grid {
                let p = i * self.grid + j;
                writeln!(out, "{},{},{},{}", i as f64 * h, j as f64 * h, self.u[p], self.v[p])?;
            }
        }
        Ok(())
    }
}

/// Burgers exit kinetic energy as a function of Gaussian inlet coefficients.
#[derive(Debug, Clone)]
pub struct BurgersModel {
    pub solver: BurgersSolver,
    space: StochasticSpace,
}

impl BurgersModel {
    /// Coefficients `s_i ~ N(means_i, (rel_std·|means_i|)²)`.
    pub fn new(means: &[f64], rel_std: f64, solver: BurgersSolver) -> Result<Self> {
        solver.validate()?;
        let marginals = means
            .iter()
            .map(|&mu| Marginal::gaussian(mu, rel_std * mu.abs()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { solver, space: StochasticSpace::new(marginals)? })
    }

    /// Ten nominal coefficients, σ = |mean| / 5.
    pub fn nominal(grid: usize, re: f64) -> Result<Self> {
        Self::new(&NOMINAL_COEFFICIENTS, 0.2, BurgersSolver::new(grid, re)?)
    }

    pub fn with_space(mut self, space: StochasticSpace) -> Self {
        self.space = space;
        self
    }
}

impl Model for BurgersModel {
    fn name(&self) -> &str {
        "burgers"
    }

    fn space(&self) -> &StochasticSpace {
        &self.space
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.solver.solve(x)?.qoi())
    }

    fn supports_gradient(&self) -> bool {
        true
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let st = self.solver.solve(x)?;
        let adj = st.adjoint()?;
        Ok((st.qoi(), adj.gradient))
    }
}
