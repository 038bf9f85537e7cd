//! Characteristic roots, the Lopatinski determinant, auxiliary boundary symbols
//! and a finite-difference certifier for symbol classes.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SECTOR_SLACK: f64 = 1e-12;

/// Constant-coefficient physics of the linearized problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub alpha: f64,
    pub beta: f64,
    pub rho_star: f64,
    pub p_prime: f64,
}

impl Default for Material {
    fn default() -> Self {
        Material { alpha: 1.0, beta: 1.0, rho_star: 1.0, p_prime: 1.0 }
    }
}

impl Material {
    pub fn new(alpha: f64, beta: f64, rho_star: f64, p_prime: f64) -> Result<Self> {
        let m = Material { alpha, beta, rho_star, p_prime };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha, self.beta, self.rho_star, self.p_prime].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::Param("material constants must be finite".into()));
        }
        if self.alpha <= 0.0 {
            return Err(Error::Param(format!("alpha = {} must be positive", self.alpha)));
        }
        if self.alpha + self.beta <= 0.0 {
            return Err(Error::Param(format!("alpha + beta = {} must be positive", self.alpha + self.beta)));
        }
        if self.rho_star <= 0.0 || self.p_prime <= 0.0 {
            return Err(Error::Param("rho_star and p_prime must be positive".into()));
        }
        Ok(())
    }

    /// Checks rho1 < rho_star < rho2 and rho1 < p_prime < rho2.
    pub fn check_bracket(&self, rho1: f64, rho2: f64) -> Result<()> {
        let inside = |v: f64| rho1 < v && v < rho2;
        if !(inside(self.rho_star) && inside(self.p_prime)) {
            return Err(Error::Param(format!(
                "rho_star = {} and p_prime = {} must lie in ({rho1}, {rho2})",
                self.rho_star, self.p_prime
            )));
        }
        Ok(())
    }

    /// 1/(alpha+beta), the coefficient of lambda under the root A.
    pub fn gamma_a(&self) -> f64 {
        1.0 / (self.alpha + self.beta)
    }

    /// 1/alpha, the coefficient of lambda under the root B.
    pub fn gamma_b(&self) -> f64 {
        1.0 / self.alpha
    }

    /// gamma_b - gamma_a = beta / (alpha (alpha + beta)), without cancellation for small beta.
    pub fn gamma_gap(&self) -> f64 {
        self.beta / (self.alpha * (self.alpha + self.beta))
    }
}

/// Spectral parameter together with the sector it is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorPoint {
    pub lambda: C64,
    pub epsilon: f64,
    pub lambda0: f64,
}

pub fn in_sector(lambda: C64, epsilon: f64, lambda0: f64) -> bool {
    lambda.is_finite() && lambda.norm() >= lambda0 * (1.0 - SECTOR_SLACK) && lambda.arg().abs() <= PI - epsilon + SECTOR_SLACK
}

impl SectorPoint {
    pub fn new(lambda: C64, epsilon: f64, lambda0: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < PI / 2.0) {
            return Err(Error::Param(format!("sector aperture {epsilon} outside (0, pi/2)")));
        }
        if !(lambda0 > 0.0) {
            return Err(Error::Param(format!("sector radius {lambda0} must be positive")));
        }
        if !in_sector(lambda, epsilon, lambda0) {
            return Err(Error::Sector(format!(
                "lambda = {lambda} has |lambda| = {:.3e}, |arg| = {:.6} (need >= {lambda0}, <= {:.6})",
                lambda.norm(),
                lambda.arg().abs(),
                PI - epsilon
            )));
        }
        Ok(SectorPoint { lambda, epsilon, lambda0 })
    }

    /// The point c*lambda in the sector scaled by c > 0 (used for eta0*lambda).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        SectorPoint::new(self.lambda * c, self.epsilon, self.lambda0 * c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roots {
    pub a: C64,
    pub b: C64,
    pub xi_norm: f64,
}

/// Roots without the sector check. Used where lambda is perturbed off the
/// sampled point (finite differences, Cauchy circles, contour nodes).
pub fn roots_at(lambda: C64, xi_norm: f64, mat: &Material) -> Result<Roots> {
    if !(xi_norm >= 0.0) || !xi_norm.is_finite() {
        return Err(Error::Param(format!("|xi'| = {xi_norm} must be finite and nonnegative")));
    }
    let s = xi_norm * xi_norm;
    let a = (lambda * mat.gamma_a() + s).sqrt();
    let b = (lambda * mat.gamma_b() + s).sqrt();
    if !(a.re > 0.0 && b.re > 0.0) {
        return Err(Error::Branch(format!("lambda = {lambda}, |xi'| = {xi_norm}: A = {a}, B = {b}")));
    }
    Ok(Roots { a, b, xi_norm })
}

pub fn char_roots(point: &SectorPoint, xi_norm: f64, mat: &Material) -> Result<Roots> {
    roots_at(point.lambda, xi_norm, mat)
}

/// The natural scale |lambda|^{1/2} + |xi'| of every symbol estimate.
pub fn symbol_scale(lambda: C64, xi_norm: f64) -> f64 {
    lambda.norm().sqrt() + xi_norm
}

/// All boundary symbols at one point, evaluated in cancellation-free form.
///
/// With delta = B - A = lambda (1/alpha - 1/(alpha+beta)) / (A + B):
/// L = -(lambda/alpha)^2 - 4|xi|^2 B delta, m1 = lambda/alpha - 4 B delta,
/// m2 = lambda/alpha - 2 B delta, m3 = delta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySymbols {
    pub roots: Roots,
    pub lop: C64,
    pub m1: C64,
    pub m2: C64,
    pub m3: C64,
}

pub fn boundary_symbols_at(lambda: C64, xi_norm: f64, mat: &Material) -> Result<BoundarySymbols> {
    let roots = roots_at(lambda, xi_norm, mat)?;
    let (a, b) = (roots.a, roots.b);
    let s = xi_norm * xi_norm;
    let p = lambda * mat.gamma_b();
    let delta = lambda * mat.gamma_gap() / (a + b);
    let lop = -(p * p) - 4.0 * s * b * delta;
    Ok(BoundarySymbols {
        roots,
        lop,
        m1: p - 4.0 * b * delta,
        m2: p - 2.0 * b * delta,
        m3: delta,
    })
}

/// Default relative floor for |L| / (|lambda|^{1/2}+|xi'|)^4.
pub const LOP_FLOOR: f64 = 1e-13;

pub fn lopatinski(point: &SectorPoint, xi_norm: f64, mat: &Material) -> Result<C64> {
    lopatinski_checked(point, xi_norm, mat, LOP_FLOOR)
}

pub fn lopatinski_checked(point: &SectorPoint, xi_norm: f64, mat: &Material, floor: f64) -> Result<C64> {
    let sym = boundary_symbols_at(point.lambda, xi_norm, mat)?;
    let scale4 = symbol_scale(point.lambda, xi_norm).powi(4);
    if !(sym.lop.norm() >= floor * scale4) {
        return Err(Error::Nonvanishing(format!(
            "|L| = {:.3e} at lambda = {}, |xi'| = {xi_norm} (scale^4 = {scale4:.3e})",
            sym.lop.norm(),
            point.lambda
        )));
    }
    Ok(sym.lop)
}

pub fn m_symbols(point: &SectorPoint, xi_norm: f64, mat: &Material) -> Result<(C64, C64, C64)> {
    let sym = boundary_symbols_at(point.lambda, xi_norm, mat)?;
    Ok((sym.m1, sym.m2, sym.m3))
}

/// Below this value of |A-B| x the kernel uses its Taylor expansion.
pub const KERNEL_M_SWITCH: f64 = 1e-5;

/// M(x) = (e^{-Bx} - e^{-Ax}) / (B - A), stable as A -> B where it tends to -x e^{-Bx}.
pub fn kernel_m(roots: &Roots, x: f64) -> C64 {
    kernel_m_ab(roots.a, roots.b, x)
}

pub fn kernel_m_ab(a: C64, b: C64, x: f64) -> C64 {
    let eb = (-b * x).exp();
    let z = (a - b) * x;
    if z.norm() < KERNEL_M_SWITCH {
        // (1 - e^{-z}) / z = 1 - z/2 + z^2/6 - ...
        -x * eb * (1.0 - z / 2.0 + z * z / 6.0)
    } else {
        (eb - (-a * x).exp()) / (b - a)
    }
}

/// d^k/dx^k of D(x) = e^{-Ax} - e^{-Bx}, written through M so nothing cancels when A ~ B.
pub fn exp_difference_derivative(a: C64, b: C64, x: f64, k: u32) -> C64 {
    exp_difference_derivative_with(a, b, a - b, x, k)
}

/// Same, with A - B supplied by the caller (A - B = (A^2 - B^2)/(A + B) keeps
/// its digits when |xi'|^2 >> |lambda|).
pub fn exp_difference_derivative_with(a: C64, b: C64, a_minus_b: C64, x: f64, k: u32) -> C64 {
    let d = a_minus_b * kernel_m_ab(a, b, x);
    if k == 0 {
        return d;
    }
    // (-1)^k [(A^k - B^k) e^{-Ax} + B^k D(x)], with A^k - B^k = (A-B) sum A^i B^{k-1-i}
    let mut geo = C64::new(0.0, 0.0);
    for i in 0..k {
        geo += a.powu(i) * b.powu(k - 1 - i);
    }
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign * (a_minus_b * geo * (-a * x).exp() + b.powu(k) * d)
}

// ---------------------------------------------------------------------------
// Sampling grids and scans

/// Log-spaced sector sample set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub epsilon: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_per_decade: usize,
    pub n_args: usize,
    pub xi_min: f64,
    pub xi_max: f64,
    pub xi_per_decade: usize,
    pub include_zero_xi: bool,
    /// Dimension of the tangential frequency vector (N - 1).
    pub xi_dim: usize,
}

impl Default for SampleGrid {
    fn default() -> Self {
        SampleGrid {
            epsilon: PI / 6.0,
            lambda_min: 1.0,
            lambda_max: 1e4,
            lambda_per_decade: 4,
            n_args: 9,
            xi_min: 1e-2,
            xi_max: 1e2,
            xi_per_decade: 4,
            include_zero_xi: true,
            xi_dim: 1,
        }
    }
}

fn log_space(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = ((decades * per_decade as f64).round() as usize).max(1);
    (0..=n).map(|i| lo * 10f64.powf(decades * i as f64 / n as f64)).collect()
}

impl SampleGrid {
    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon > 0.0
            && self.epsilon < PI / 2.0
            && self.lambda_min > 0.0
            && self.lambda_max >= self.lambda_min
            && self.xi_min > 0.0
            && self.xi_max >= self.xi_min
            && self.lambda_per_decade > 0
            && self.xi_per_decade > 0
            && self.n_args >= 2
            && (1..=2).contains(&self.xi_dim);
        if ok {
            Ok(())
        } else {
            Err(Error::Param(format!("invalid sample grid {self:?}")))
        }
    }

    pub fn lambdas(&self) -> Vec<C64> {
        let theta = PI - self.epsilon;
        let mags = log_space(self.lambda_min, self.lambda_max, self.lambda_per_decade);
        let mut out = Vec::with_capacity(mags.len() * self.n_args);
        for &r in &mags {
            for k in 0..self.n_args {
                let arg = -theta + 2.0 * theta * k as f64 / (self.n_args - 1) as f64;
                out.push(C64::from_polar(r, arg));
            }
        }
        out
    }

    pub fn xi_norms(&self) -> Vec<f64> {
        let mut v = Vec::new();
        if self.include_zero_xi {
            v.push(0.0);
        }
        v.extend(log_space(self.xi_min, self.xi_max, self.xi_per_decade));
        v
    }

    /// Tangential frequency vectors: one direction for xi_dim = 1, two for xi_dim = 2.
    pub fn xi_vectors(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        for r in self.xi_norms() {
            if self.xi_dim == 1 {
                out.push(vec![r]);
            } else {
                out.push(vec![r, 0.0]);
                if r > 0.0 {
                    let c = (PI / 5.0).cos();
                    let s = (PI / 5.0).sin();
                    out.push(vec![r * c, r * s]);
                }
            }
        }
        out
    }

    /// Doubled density in every direction, same ranges.
    pub fn refined(&self) -> SampleGrid {
        SampleGrid {
            lambda_per_decade: self.lambda_per_decade * 2,
            xi_per_decade: self.xi_per_decade * 2,
            n_args: 2 * self.n_args - 1,
            ..self.clone()
        }
    }

    /// Doubled density and |lambda| extended by two decades upward, |xi'| by one
    /// decade at each end.
    pub fn refined_extended(&self) -> SampleGrid {
        SampleGrid {
            lambda_max: self.lambda_max * 100.0,
            xi_min: self.xi_min / 10.0,
            xi_max: self.xi_max * 10.0,
            ..self.refined()
        }
    }

    pub fn len(&self) -> usize {
        self.lambdas().len() * self.xi_vectors().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LopatinskiRow {
    pub lambda: C64,
    pub xi_norm: f64,
    pub ratio: f64,
}

/// Result of a sector scan of the determinant and the roots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LopatinskiScan {
    /// min |L| / (|lambda|^{1/2}+|xi'|)^4 over the whole scan.
    pub c2: f64,
    pub c2_lambda: C64,
    pub c2_xi: f64,
    /// The same minimum restricted to r|lambda| <= |xi'|^2 <= |lambda|/r.
    pub c2_middle: f64,
    pub middle_r: f64,
    /// min |L| / (|lambda| (|lambda|^{1/2}+|xi'|)^2), the lower bound behind M^{-1}.
    pub c_weighted: f64,
    /// Sandwich constants for E in {A, B}.
    pub d1: f64,
    pub d2: f64,
    pub rows: Vec<LopatinskiRow>,
}

pub fn lopatinski_scan(grid: &SampleGrid, mat: &Material, middle_r: f64) -> Result<LopatinskiScan> {
    grid.validate()?;
    mat.validate()?;
    let lambdas = grid.lambdas();
    let xis = grid.xi_norms();
    struct Local {
        rows: Vec<LopatinskiRow>,
        middle: f64,
        weighted: f64,
        d1: f64,
        d2: f64,
    }
    let per_lambda: Vec<Result<Local>> = lambdas
        .par_iter()
        .map(|&lam| {
            let mut loc = Local { rows: Vec::new(), middle: f64::INFINITY, weighted: f64::INFINITY, d1: f64::INFINITY, d2: 0.0 };
            let point = SectorPoint::new(lam, grid.epsilon, grid.lambda_min)?;
            for &xi in &xis {
                let sym = boundary_symbols_at(point.lambda, xi, mat)?;
                let scale = symbol_scale(lam, xi);
                let ratio = sym.lop.norm() / scale.powi(4);
                let s = xi * xi;
                if s >= middle_r * lam.norm() && s <= lam.norm() / middle_r {
                    loc.middle = loc.middle.min(ratio);
                }
                loc.weighted = loc.weighted.min(sym.lop.norm() / (lam.norm() * scale * scale));
                for e in [sym.roots.a, sym.roots.b] {
                    loc.d1 = loc.d1.min(e.re / scale);
                    loc.d2 = loc.d2.max(e.norm() / scale);
                }
                loc.rows.push(LopatinskiRow { lambda: lam, xi_norm: xi, ratio });
            }
            Ok(loc)
        })
        .collect();
    let mut scan = LopatinskiScan {
        c2: f64::INFINITY,
        c2_lambda: C64::new(0.0, 0.0),
        c2_xi: 0.0,
        c2_middle: f64::INFINITY,
        middle_r,
        c_weighted: f64::INFINITY,
        d1: f64::INFINITY,
        d2: 0.0,
        rows: Vec::new(),
    };
    for loc in per_lambda {
        let loc = loc?;
        for row in &loc.rows {
            if row.ratio < scan.c2 {
                scan.c2 = row.ratio;
                scan.c2_lambda = row.lambda;
                scan.c2_xi = row.xi_norm;
            }
        }
        scan.c2_middle = scan.c2_middle.min(loc.middle);
        scan.c_weighted = scan.c_weighted.min(loc.weighted);
        scan.d1 = scan.d1.min(loc.d1);
        scan.d2 = scan.d2.max(loc.d2);
        scan.rows.extend(loc.rows);
    }
    if !(scan.c2 > 0.0) {
        return Err(Error::Nonvanishing(format!("scan minimum {} at lambda = {}, |xi'| = {}", scan.c2, scan.c2_lambda, scan.c2_xi)));
    }
    Ok(scan)
}

// ---------------------------------------------------------------------------
// Symbol-class certifier

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Bounded,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaRatio {
    pub kappa: Vec<usize>,
    pub ratio: f64,
    pub lambda: C64,
    pub xi: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifierOptions {
    /// Relative step, h = eta (|lambda|^{1/2} + |xi'|).
    pub eta: f64,
    pub max_kappa: usize,
    /// Also certify d/dlambda at order - 2.
    pub lambda_derivative: bool,
    pub ceiling: f64,
    /// Allowed relative growth of a sup between the base and refined grids.
    pub growth_tol: f64,
    pub cauchy_nodes: usize,
    /// Radius of the Cauchy circle relative to |lambda|.
    pub cauchy_radius: f64,
}

impl Default for CertifierOptions {
    fn default() -> Self {
        CertifierOptions {
            eta: 1e-3,
            max_kappa: 3,
            lambda_derivative: false,
            ceiling: 1e8,
            growth_tol: 0.25,
            cauchy_nodes: 32,
            cauchy_radius: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymbolReport {
    pub order: i32,
    pub max_ratio_per_kappa: Vec<KappaRatio>,
    pub lambda_derivative_order: Option<i32>,
    pub lambda_derivative_ratios: Option<Vec<KappaRatio>>,
    /// The same sups on the refined and extended grid.
    pub refined_ratios: Vec<KappaRatio>,
    pub refined_lambda_derivative_ratios: Option<Vec<KappaRatio>>,
    pub verdict: Verdict,
    pub offending: Option<KappaRatio>,
    pub grid: SampleGrid,
    pub refined_grid: SampleGrid,
}

fn stencil(order: usize) -> &'static [(i32, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        _ => unreachable!("stencil order above 3"),
    }
}

/// Multi-indices kappa in N^d with |kappa| <= max, in graded order.
pub fn multi_indices(dim: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=max {
        let mut cur = vec![0; dim];
        fill(&mut out, &mut cur, 0, total);
    }
    fn fill(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, axis: usize, left: usize) {
        if axis + 1 == cur.len() {
            cur[axis] = left;
            out.push(cur.clone());
            return;
        }
        for k in (0..=left).rev() {
            cur[axis] = k;
            fill(out, cur, axis + 1, left - k);
        }
        cur[axis] = 0;
    }
    out
}

fn fd_xi<F>(f: &F, xi0: &[f64], kappa: &[usize], h: f64) -> Result<C64>
where
    F: Fn(&[f64]) -> Result<C64> + ?Sized,
{
    let stencils: Vec<&[(i32, f64)]> = kappa.iter().map(|&k| stencil(k)).collect();
    let mut idx = vec![0usize; kappa.len()];
    let mut acc = C64::new(0.0, 0.0);
    let mut xi = xi0.to_vec();
    loop {
        let mut w = 1.0;
        for (a, st) in stencils.iter().enumerate() {
            let (off, wt) = st[idx[a]];
            xi[a] = xi0[a] + off as f64 * h;
            w *= wt;
        }
        acc += w * f(&xi)?;
        // advance the mixed-radix counter
        let mut a = 0;
        loop {
            if a == kappa.len() {
                let total: usize = kappa.iter().sum();
                return Ok(acc / h.powi(total as i32));
            }
            idx[a] += 1;
            if idx[a] < stencils[a].len() {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

/// Richardson-extrapolated central difference D^kappa_xi f.
pub fn xi_derivative<F>(f: &F, xi0: &[f64], kappa: &[usize], h: f64) -> Result<C64>
where
    F: Fn(&[f64]) -> Result<C64> + ?Sized,
{
    if kappa.iter().all(|&k| k == 0) {
        return f(xi0);
    }
    let d1 = fd_xi(f, xi0, kappa, h)?;
    let d2 = fd_xi(f, xi0, kappa, h / 2.0)?;
    Ok((4.0 * d2 - d1) / 3.0)
}

/// d/dlambda by the trapezoid rule on a Cauchy circle around lambda.
pub fn lambda_derivative<F>(f: &F, lambda: C64, radius: f64, nodes: usize) -> Result<C64>
where
    F: Fn(C64) -> Result<C64> + ?Sized,
{
    let mut acc = C64::new(0.0, 0.0);
    for k in 0..nodes {
        let e = C64::from_polar(1.0, 2.0 * PI * (k as f64 + 0.5) / nodes as f64);
        acc += f(lambda + radius * e)? / e;
    }
    Ok(acc / (radius * nodes as f64))
}

fn sup_ratios<S>(symbol: &S, order: i32, grid: &SampleGrid, opts: &CertifierOptions, dlambda: bool) -> Result<Vec<KappaRatio>>
where
    S: Fn(C64, &[f64]) -> Result<C64> + Sync,
{
    let kappas = multi_indices(grid.xi_dim, opts.max_kappa);
    let xis = grid.xi_vectors();
    let lambdas = grid.lambdas();
    let eff_order = if dlambda { order - 2 } else { order };
    let partial: Vec<Result<Vec<KappaRatio>>> = lambdas
        .par_iter()
        .map(|&lam| {
            let mut best: Vec<KappaRatio> =
                kappas.iter().map(|k| KappaRatio { kappa: k.clone(), ratio: 0.0, lambda: lam, xi: xis[0].clone() }).collect();
            for xi in &xis {
                let xn = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
                let scale = symbol_scale(lam, xn);
                let h = opts.eta * scale;
                for (slot, kappa) in best.iter_mut().zip(&kappas) {
                    let order_k: usize = kappa.iter().sum();
                    let d = if dlambda {
                        let radius = opts.cauchy_radius * lam.norm();
                        let g = |x: &[f64]| lambda_derivative(&|l: C64| symbol(l, x), lam, radius, opts.cauchy_nodes);
                        xi_derivative(&g, xi, kappa, h)?
                    } else {
                        let g = |x: &[f64]| symbol(lam, x);
                        xi_derivative(&g, xi, kappa, h)?
                    };
                    let ratio = d.norm() * scale.powi(order_k as i32 - eff_order);
                    if !ratio.is_finite() {
                        return Err(Error::Input(format!("non-finite symbol derivative at lambda = {lam}, xi = {xi:?}")));
                    }
                    if ratio > slot.ratio {
                        *slot = KappaRatio { kappa: kappa.clone(), ratio, lambda: lam, xi: xi.clone() };
                    }
                }
            }
            Ok(best)
        })
        .collect();
    let mut out: Vec<KappaRatio> = kappas.iter().map(|k| KappaRatio { kappa: k.clone(), ratio: 0.0, lambda: lambdas[0], xi: xis[0].clone() }).collect();
    for p in partial {
        for (o, c) in out.iter_mut().zip(p?) {
            if c.ratio > o.ratio {
                *o = c;
            }
        }
    }
    Ok(out)
}

fn compare(base: &[KappaRatio], refined: &[KappaRatio], opts: &CertifierOptions) -> Option<KappaRatio> {
    let floor = base.iter().chain(refined).map(|r| r.ratio).fold(0.0, f64::max) * 1e-9;
    for (b, r) in base.iter().zip(refined) {
        if r.ratio > opts.ceiling {
            return Some(r.clone());
        }
        if r.ratio > floor && r.ratio > (1.0 + opts.growth_tol) * b.ratio {
            return Some(r.clone());
        }
    }
    None
}

/// Certifies |D^kappa m| (|lambda|^{1/2}+|xi'|)^{|kappa|-order} <= C for |kappa| <= max_kappa,
/// and optionally the same for d/dlambda m at order - 2.
///
/// The symbol receives lambda and the tangential frequency vector and must not
/// reject points slightly outside the sector.
pub fn symbol_class_check<S>(symbol: &S, order: i32, samples: &SampleGrid, opts: &CertifierOptions) -> Result<SymbolReport>
where
    S: Fn(C64, &[f64]) -> Result<C64> + Sync,
{
    samples.validate()?;
    if opts.max_kappa > 3 {
        return Err(Error::Param(format!("max_kappa = {} exceeds the finite-difference limit 3", opts.max_kappa)));
    }
    let refined_grid = samples.refined_extended();
    let base = sup_ratios(symbol, order, samples, opts, false)?;
    let refined = sup_ratios(symbol, order, &refined_grid, opts, false)?;
    let mut offending = compare(&base, &refined, opts);
    let (ld_base, ld_ref) = if opts.lambda_derivative {
        let b = sup_ratios(symbol, order, samples, opts, true)?;
        let r = sup_ratios(symbol, order, &refined_grid, opts, true)?;
        if offending.is_none() {
            offending = compare(&b, &r, opts);
        }
        (Some(b), Some(r))
    } else {
        (None, None)
    };
    Ok(SymbolReport {
        order,
        max_ratio_per_kappa: base,
        lambda_derivative_order: opts.lambda_derivative.then_some(order - 2),
        lambda_derivative_ratios: ld_base,
        refined_ratios: refined,
        refined_lambda_derivative_ratios: ld_ref,
        verdict: if offending.is_some() { Verdict::Unbounded } else { Verdict::Bounded },
        offending,
        grid: samples.clone(),
        refined_grid,
    })
}

/// Named symbols used by the solution formulas, as closures over a material.
pub fn named_symbol(name: &str, mat: Material) -> Result<impl Fn(C64, &[f64]) -> Result<C64> + Sync> {
    let which = match name {
        "one" => 0,
        "B" => 1,
        "A" => 2,
        "M_inv" => 3,
        "m1_over_lambda" => 4,
        "m2_over_lambda" => 5,
        "m3_over_lambda" => 6,
        "lop" => 7,
        _ => return Err(Error::Param(format!("unknown symbol {name}"))),
    };
    Ok(move |lam: C64, xi: &[f64]| -> Result<C64> {
        let xn = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if which == 0 {
            return Ok(C64::new(1.0, 0.0));
        }
        let s = boundary_symbols_at(lam, xn, &mat)?;
        Ok(match which {
            1 => s.roots.b,
            2 => s.roots.a,
            3 => lam / s.lop,
            4 => s.m1 / lam,
            5 => s.m2 / lam,
            6 => s.m3 / lam,
            _ => s.lop,
        })
    })
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Input("slope fit needs at least two paired samples".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Input("slope fit needs positive finite samples".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> Material {
        Material::new(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    fn pt(l: C64) -> SectorPoint {
        SectorPoint::new(l, PI / 6.0, 1.0).unwrap()
    }

    #[test]
    fn roots_zero_frequency() {
        let mat = Material::new(1.0, 0.0, 1.0, 1.0).unwrap();
        let r = char_roots(&pt(C64::new(1.0, 0.0)), 0.0, &mat).unwrap();
        assert_relative_eq!(r.a.re, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.b.re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn roots_reference_values() {
        let r = char_roots(&pt(C64::new(1.0, 0.0)), 1.0, &unit()).unwrap();
        assert_relative_eq!(r.a.re, 1.224744871391589, epsilon = 1e-14);
        assert_relative_eq!(r.b.re, std::f64::consts::SQRT_2, epsilon = 1e-14);
        let r = char_roots(&pt(C64::new(0.0, 1.0)), 1.0, &unit()).unwrap();
        // principal square roots of 1+0.5i and 1+i
        assert_relative_eq!(r.a.re, 1.0290855136357462, epsilon = 1e-14);
        assert_relative_eq!(r.a.im, 0.24293413587832283, epsilon = 1e-14);
        assert_relative_eq!(r.b.re, 1.0986841134678098, epsilon = 1e-14);
        assert_relative_eq!(r.b.im, 0.45508986056222733, epsilon = 1e-14);
    }

    #[test]
    fn sector_rejection() {
        assert!(matches!(SectorPoint::new(C64::new(-1.0, 0.0), PI / 6.0, 1.0), Err(Error::Sector(_))));
        assert!(matches!(SectorPoint::new(C64::new(0.5, 0.0), PI / 6.0, 1.0), Err(Error::Sector(_))));
        assert!(Material::new(1.0, -1.0, 1.0, 1.0).is_err());
        assert!(Material::new(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn lopatinski_reference_values() {
        let l = lopatinski(&pt(C64::new(1.0, 0.0)), 1.0, &unit()).unwrap();
        assert_relative_eq!(l.re, 4.0 * 3f64.sqrt() - 9.0, epsilon = 1e-14);
        let lam = C64::from_polar(3.0, 2.0);
        let l0 = lopatinski(&pt(lam), 0.0, &unit()).unwrap();
        assert!((l0 + lam * lam).norm() < 1e-13 * lam.norm_sqr());
        let (m1, _, _) = m_symbols(&pt(C64::new(1.0, 0.0)), 1.0, &unit()).unwrap();
        assert_relative_eq!(m1.re, -7.0 + 4.0 * 3f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn stable_forms_match_literal_formulas() {
        let mat = Material::new(1.3, 0.4, 1.0, 1.0).unwrap();
        for &(lam, xi) in &[(C64::new(2.0, 1.0), 0.7), (C64::from_polar(5.0, 2.5), 3.0), (C64::new(1.0, 0.0), 0.0)] {
            let s = boundary_symbols_at(lam, xi, &mat).unwrap();
            let (a, b, q) = (s.roots.a, s.roots.b, xi * xi);
            let lit = 4.0 * a * b * q - (b * b + q).powi(2);
            assert!((s.lop - lit).norm() < 1e-12 * lit.norm().max(1.0));
            assert!((s.m1 - (-3.0 * b * b - q + 4.0 * a * b)).norm() < 1e-12 * s.m1.norm().max(1.0));
            assert!((s.m2 - (2.0 * a * b - b * b - q)).norm() < 1e-12 * s.m2.norm().max(1.0));
            assert!((s.m3 - (b - a)).norm() < 1e-12);
        }
    }

    #[test]
    fn kernel_m_reference_values() {
        let v = kernel_m_ab(C64::new(2.0, 0.0), C64::new(1.0, 0.0), 1.0);
        assert_relative_eq!(v.re, (-2f64).exp() - (-1f64).exp(), epsilon = 1e-15);
        assert_eq!(kernel_m_ab(C64::new(2.0, 0.3), C64::new(1.0, 0.1), 0.0), C64::new(0.0, 0.0));
        let b = C64::new(1.5, 0.2);
        let v = kernel_m_ab(b, b, 2.0);
        let want = -2.0 * (-b * 2.0).exp();
        assert!((v - want).norm() < 1e-15);
    }

    #[test]
    fn exp_difference_derivatives_match_direct() {
        let (a, b) = (C64::new(1.7, 0.3), C64::new(1.1, -0.2));
        let x = 0.8;
        for k in 0..4u32 {
            let direct = (-a).powu(k) * (-a * x).exp() - (-b).powu(k) * (-b * x).exp();
            assert!((exp_difference_derivative(a, b, x, k) - direct).norm() < 1e-13);
        }
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(1, 3).len(), 4);
        assert_eq!(multi_indices(2, 3).len(), 10);
        assert_eq!(multi_indices(2, 2)[3], vec![2, 0]);
    }

    #[test]
    fn cauchy_derivative_of_polynomial() {
        let f = |l: C64| Ok(l * l * l);
        let d = lambda_derivative(&f, C64::new(2.0, 1.0), 0.4, 16).unwrap();
        let want = 3.0 * C64::new(2.0, 1.0).powu(2);
        assert!((d - want).norm() < 1e-12);
    }

    #[test]
    fn slope_fit_recovers_power() {
        let x: Vec<f64> = (0..20).map(|i| 1.0 + i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v.powf(-0.7)).collect();
        assert_relative_eq!(loglog_slope(&x, &y).unwrap(), -0.7, epsilon = 1e-12);
    }
}
