//! Periodic pseudospectral grid on `[0, L)^n`: fields, spectral transforms,
//! the Riesz multiplier, the bilinear interaction `g0` and the H^k / Y^l
//! norms.
//!
//! Coefficients follow `c(q) = N^{-n} Σ_x f(x) e^{-i ξ·x}` with `ξ = 2π q / L`,
//! so that `f(x) = Σ_q c(q) e^{i ξ·x}` and `‖f‖₂² = L^n Σ |c|²`.

use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("grid mismatch: expected {expected} values, got {got}")]
    Mismatch { expected: usize, got: usize },
    #[error("derivative order {order} is not resolvable on {size} points per axis")]
    Unresolvable { order: usize, size: usize },
    #[error("band radius {radius} exceeds the dealiased band {band}")]
    BandTooWide { radius: usize, band: usize },
}

/// Physical and discretization parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub n: usize,
    pub mu: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// Box side L.
    pub length: f64,
    /// Points per axis N.
    pub size: usize,
    pub k: usize,
    pub ell: usize,
    /// Enforce the analytic hypotheses on (n, mu, k, ell).
    pub strict: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            n: 3,
            mu: 1.0,
            gamma: 0.6,
            lambda: 1.0,
            length: 16.0 * std::f64::consts::PI,
            size: 16,
            k: 2,
            ell: 2,
            strict: true,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), GridError> {
        let bad = |m: String| Err(GridError::InvalidParams(m));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0,1], got {}", self.gamma));
        }
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.size < 4 || self.size % 2 != 0 {
            return bad(format!("N must be even and at least 4, got {}", self.size));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return bad(format!("L must be positive, got {}", self.length));
        }
        if !self.lambda.is_finite() {
            return bad("lambda must be finite".into());
        }
        if !(self.mu > 0.0 && self.mu < self.n as f64) {
            return bad(format!("mu must lie in (0, n), got {}", self.mu));
        }
        if self.strict {
            if self.n < 3 {
                return bad(format!("n must be at least 3 in strict mode, got {}", self.n));
            }
            if self.mu > self.n as f64 - 2.0 {
                return bad(format!("mu must not exceed n - 2 in strict mode, got {}", self.mu));
            }
            if !admissible(self.k, self.ell, self.n, self.mu) {
                return bad(format!("(k, ell) = ({}, {}) is not admissible", self.k, self.ell));
            }
        }
        Ok(())
    }
}

/// Whether `(k, ell)` is an admissible regularity pair for `(n, mu)`.
pub fn admissible(k: usize, ell: usize, n: usize, mu: f64) -> bool {
    let (kf, lf, nf) = (k as f64, ell as f64, n as f64);
    if k > ell || lf <= nf / 2.0 {
        return false;
    }
    let cap = (nf / 2.0 + 2.0 * kf).min(nf + kf);
    let lhs = lf + 2.0 + mu;
    if lhs > cap + 1e-12 {
        return false;
    }
    if (lhs - (nf + kf)).abs() <= 1e-12 && kf <= nf / 2.0 {
        return false;
    }
    if n % 2 == 0 && nf / 2.0 + 3.0 + mu >= cap - 1e-12 {
        return false;
    }
    true
}

/// Complex field on the lattice, row-major with the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileField {
    pub values: Vec<Complex64>,
}

/// Real field on the lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseField {
    pub values: Vec<f64>,
}

/// Transform-domain field: coefficients in the same flat layout as the
/// lattice, with axis index `i` carrying frequency `i` or `i - N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    pub coeffs: Vec<Complex64>,
}

impl ProfileField {
    pub fn zeros(len: usize) -> Self {
        Self { values: vec![Complex64::new(0.0, 0.0); len] }
    }

    pub fn from_phase(phi: &PhaseField) -> Self {
        Self { values: phi.values.iter().map(|&v| Complex64::new(v, 0.0)).collect() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a + b * c).collect() }
    }

    /// Pointwise `self * e^{i s theta}`.
    pub fn rotated(&self, theta: &PhaseField, s: f64) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&theta.values)
                .map(|(w, &th)| w * Complex64::from_polar(1.0, s * th))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

impl PhaseField {
    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    pub fn constant(len: usize, c: f64) -> Self {
        Self { values: vec![c; len] }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() }
    }

    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a + b * c).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

/// Gradient components and Laplacian of a real field on the lattice.
#[derive(Debug, Clone)]
pub struct PhaseDerivs {
    pub grad: Vec<Vec<f64>>,
    pub lap: Vec<f64>,
}

/// The lattice together with cached transforms and multipliers.
#[derive(Clone)]
pub struct Grid {
    params: ModelParams,
    total: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    /// Signed frequency per axis index, Nyquist as -N/2.
    freq: Vec<i64>,
    /// Wavenumber per axis index for odd derivatives (Nyquist zeroed).
    wave_odd: Vec<f64>,
    /// |ξ|² per flat index.
    wave_sq: Vec<f64>,
    /// 2/3-rule mask per flat index.
    mask: Vec<bool>,
    /// |ξ|^{mu-n} per flat index, zero at the origin.
    riesz: Vec<f64>,
    band: usize,
}

impl std::fmt::Debug for Grid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid").field("params", &self.params).finish()
    }
}

impl Grid {
    pub fn new(params: ModelParams) -> Result<Self, GridError> {
        params.validate()?;
        Ok(Self::build(params))
    }

    /// Builds a grid without the strict-mode hypothesis checks, for smoke
    /// tests in low dimension.
    pub fn new_unchecked(params: ModelParams) -> Result<Self, GridError> {
        let mut p = params.clone();
        p.strict = false;
        p.validate()?;
        Ok(Self::build(params))
    }

    fn build(params: ModelParams) -> Self {
        let n = params.n;
        let size = params.size;
        let total = size.pow(n as u32);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let unit = 2.0 * std::f64::consts::PI / params.length;
        let freq: Vec<i64> = (0..size)
            .map(|i| if i < size / 2 { i as i64 } else { i as i64 - size as i64 })
            .collect();
        let wave_odd: Vec<f64> = (0..size)
            .map(|i| if i == size / 2 { 0.0 } else { unit * freq[i] as f64 })
            .collect();
        let band = (size - 1) / 3;
        let mut wave_sq = vec![0.0; total];
        let mut mask = vec![true; total];
        let mut riesz = vec![0.0; total];
        let expo = params.mu - n as f64;
        for idx in 0..total {
            let mut rem = idx;
            let mut s = 0.0;
            let mut inside = true;
            for _ in 0..n {
                let q = freq[rem % size];
                rem /= size;
                s += (unit * q as f64).powi(2);
                if q.unsigned_abs() as usize > band {
                    inside = false;
                }
            }
            wave_sq[idx] = s;
            mask[idx] = inside;
            riesz[idx] = if idx == 0 { 0.0 } else { s.sqrt().powf(expo) };
        }
        Self { params, total, fwd, inv, freq, wave_odd, wave_sq, mask, riesz, band }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn size(&self) -> usize {
        self.params.size
    }

    pub fn length(&self) -> f64 {
        self.params.length
    }

    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// Largest |q_i| kept by the 2/3 rule.
    pub fn band(&self) -> usize {
        self.band
    }

    /// Highest derivative order treated as resolvable.
    pub fn max_derivative(&self) -> usize {
        self.params.size / 2
    }

    pub fn cell_volume(&self) -> f64 {
        (self.params.length / self.params.size as f64).powi(self.params.n as i32)
    }

    /// Signed integer frequency of flat index `idx` along each axis.
    pub fn mode(&self, idx: usize) -> Vec<i64> {
        let n = self.params.n;
        let size = self.params.size;
        let mut out = vec![0; n];
        let mut rem = idx;
        for d in (0..n).rev() {
            out[d] = self.freq[rem % size];
            rem /= size;
        }
        out
    }

    /// Flat index of a signed frequency vector.
    pub fn index_of_mode(&self, q: &[i64]) -> usize {
        let size = self.params.size as i64;
        q.iter().fold(0usize, |acc, &qi| acc * size as usize + qi.rem_euclid(size) as usize)
    }

    /// Physical coordinate of flat index `idx`.
    pub fn point(&self, idx: usize) -> Vec<f64> {
        let n = self.params.n;
        let size = self.params.size;
        let h = self.params.length / size as f64;
        let mut out = vec![0.0; n];
        let mut rem = idx;
        for d in (0..n).rev() {
            out[d] = h * (rem % size) as f64;
            rem /= size;
        }
        out
    }

    /// Coordinates centred in `[-L/2, L/2)`.
    pub fn centred_point(&self, idx: usize) -> Vec<f64> {
        let half = 0.5 * self.params.length;
        self.point(idx).into_iter().map(|x| if x >= half { x - self.params.length } else { x }).collect()
    }

    pub fn check_len(&self, len: usize) -> Result<(), GridError> {
        if len != self.total {
            return Err(GridError::Mismatch { expected: self.total, got: len });
        }
        Ok(())
    }

    fn transform_axes(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.params.n;
        let size = self.params.size;
        let lines = self.total / size;
        let mut buf = vec![Complex64::new(0.0, 0.0); self.total];
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        for axis in 0..n {
            let stride = size.pow((n - 1 - axis) as u32);
            if stride == 1 {
                plan.process_with_scratch(data, &mut scratch);
                continue;
            }
            let block = stride * size;
            let mut line = 0;
            for start in (0..self.total).step_by(block) {
                for off in 0..stride {
                    let base = start + off;
                    for j in 0..size {
                        buf[line * size + j] = data[base + j * stride];
                    }
                    line += 1;
                }
            }
            debug_assert_eq!(line, lines);
            plan.process_with_scratch(&mut buf, &mut scratch);
            line = 0;
            for start in (0..self.total).step_by(block) {
                for off in 0..stride {
                    let base = start + off;
                    for j in 0..size {
                        data[base + j * stride] = buf[line * size + j];
                    }
                    line += 1;
                }
            }
        }
    }

    /// Lattice values to coefficients.
    pub fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut data = values.to_vec();
        self.transform_axes(&mut data, &self.fwd);
        let scale = 1.0 / self.total as f64;
        for v in &mut data {
            *v *= scale;
        }
        data
    }

    /// Coefficients to lattice values.
    pub fn inverse(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let mut data = coeffs.to_vec();
        self.transform_axes(&mut data, &self.inv);
        data
    }

    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let c: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&c)
    }

    pub fn inverse_real(&self, coeffs: &[Complex64]) -> Vec<f64> {
        self.inverse(coeffs).into_iter().map(|v| v.re).collect()
    }

    pub fn spectral(&self, w: &ProfileField) -> SpectralField {
        SpectralField { coeffs: self.forward(&w.values) }
    }

    pub fn from_spectral(&self, s: &SpectralField) -> ProfileField {
        ProfileField { values: self.inverse(&s.coeffs) }
    }

    /// Zeroes coefficients outside the 2/3 band.
    pub fn dealias(&self, coeffs: &mut [Complex64]) {
        for (c, &keep) in coeffs.iter_mut().zip(&self.mask) {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn in_band(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    /// Projects a complex field onto the 2/3 band.
    pub fn project(&self, w: &ProfileField) -> ProfileField {
        let mut c = self.forward(&w.values);
        self.dealias(&mut c);
        ProfileField { values: self.inverse(&c) }
    }

    /// Projects a real field onto the 2/3 band.
    pub fn project_real(&self, phi: &PhaseField) -> PhaseField {
        let mut c = self.forward_real(&phi.values);
        self.dealias(&mut c);
        PhaseField { values: self.inverse_real(&c) }
    }

    /// Applies `|ξ|^{exponent}` with the zero mode set to zero.
    pub fn riesz_apply(&self, f: &ProfileField, exponent: f64) -> ProfileField {
        let mut c = self.forward(&f.values);
        let default = (exponent - (self.params.mu - self.params.n as f64)).abs() < 1e-15;
        for (idx, v) in c.iter_mut().enumerate() {
            let m = if idx == 0 {
                0.0
            } else if default {
                self.riesz[idx]
            } else {
                self.wave_sq[idx].sqrt().powf(exponent)
            };
            *v *= m;
        }
        ProfileField { values: self.inverse(&c) }
    }

    /// `lambda Re ω^{mu-n}(w1 conj(w2))` with the product dealiased, plus the
    /// dropped zero-mode density `lambda mean(Re w1 conj w2)`.
    pub fn g0_with_mean(&self, w1: &ProfileField, w2: &ProfileField) -> Result<(PhaseField, f64), GridError> {
        self.check_len(w1.values.len())?;
        self.check_len(w2.values.len())?;
        let prod: Vec<f64> = w1
            .values
            .iter()
            .zip(&w2.values)
            .map(|(a, b)| a.re * b.re + a.im * b.im)
            .collect();
        self.g0_density(&prod)
    }

    /// Adds `Re(w1 conj(w2))` into a density accumulator.
    pub fn density_accumulate(&self, w1: &ProfileField, w2: &ProfileField, acc: &mut [f64]) {
        for ((a, x), y) in acc.iter_mut().zip(&w1.values).zip(&w2.values) {
            *a += x.re * y.re + x.im * y.im;
        }
    }

    /// `lambda ω^{mu-n}` applied to a real density with the 2/3 mask, plus the
    /// dropped zero-mode density.
    pub fn g0_density(&self, density: &[f64]) -> Result<(PhaseField, f64), GridError> {
        self.check_len(density.len())?;
        let lambda = self.params.lambda;
        let mut c = self.forward_real(density);
        let mean = lambda * c[0].re;
        for (idx, v) in c.iter_mut().enumerate() {
            *v *= if self.mask[idx] { self.riesz[idx] } else { 0.0 };
        }
        let out = self.inverse_real(&c).into_iter().map(|v| lambda * v).collect();
        Ok((PhaseField { values: out }, mean))
    }

    pub fn g0(&self, w1: &ProfileField, w2: &ProfileField) -> Result<PhaseField, GridError> {
        self.g0_with_mean(w1, w2).map(|(f, _)| f)
    }

    /// Gradient of a real field, one component per axis.
    pub fn gradient(&self, phi: &PhaseField) -> Vec<PhaseField> {
        let c = self.forward_real(&phi.values);
        self.gradient_from_coeffs(&c)
            .into_iter()
            .map(|v| PhaseField { values: v.into_iter().map(|z| z.re).collect() })
            .collect()
    }

    /// Gradient of a complex field.
    pub fn gradient_complex(&self, w: &ProfileField) -> Vec<ProfileField> {
        let c = self.forward(&w.values);
        self.gradient_from_coeffs(&c).into_iter().map(|values| ProfileField { values }).collect()
    }

    fn gradient_from_coeffs(&self, c: &[Complex64]) -> Vec<Vec<Complex64>> {
        let n = self.params.n;
        let size = self.params.size;
        (0..n)
            .map(|axis| {
                let stride = size.pow((n - 1 - axis) as u32);
                let d: Vec<Complex64> = c
                    .iter()
                    .enumerate()
                    .map(|(idx, &v)| v * Complex64::new(0.0, self.wave_odd[(idx / stride) % size]))
                    .collect();
                self.inverse(&d)
            })
            .collect()
    }

    pub fn laplacian(&self, phi: &PhaseField) -> PhaseField {
        let c = self.forward_real(&phi.values);
        let d: Vec<Complex64> = c.iter().zip(&self.wave_sq).map(|(v, s)| -v * *s).collect();
        PhaseField { values: self.inverse_real(&d) }
    }

    pub fn laplacian_complex(&self, w: &ProfileField) -> ProfileField {
        let c = self.forward(&w.values);
        let d: Vec<Complex64> = c.iter().zip(&self.wave_sq).map(|(v, s)| -v * *s).collect();
        ProfileField { values: self.inverse(&d) }
    }

    /// Gradient and Laplacian of a real field from one forward transform.
    pub fn phase_derivs(&self, phi: &PhaseField) -> PhaseDerivs {
        let c = self.forward_real(&phi.values);
        let grad = self
            .gradient_from_coeffs(&c)
            .into_iter()
            .map(|v| v.into_iter().map(|z| z.re).collect())
            .collect();
        let d: Vec<Complex64> = c.iter().zip(&self.wave_sq).map(|(v, s)| -v * *s).collect();
        PhaseDerivs { grad, lap: self.inverse_real(&d) }
    }

    /// Unprojected `2∇φ·∇w + (Δφ) w`, added into `acc`.
    pub fn transport_accumulate(&self, d: &PhaseDerivs, w: &ProfileField, acc: &mut [Complex64]) {
        let gw = self.gradient_complex(w);
        for (i, a) in acc.iter_mut().enumerate() {
            let mut s = w.values[i] * d.lap[i];
            for (gp, gwc) in d.grad.iter().zip(&gw) {
                s += gwc.values[i] * (2.0 * gp[i]);
            }
            *a += s;
        }
    }

    /// Dealiased `2∇φ·∇w + (Δφ) w`.
    pub fn transport_apply(&self, d: &PhaseDerivs, w: &ProfileField) -> ProfileField {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.total];
        self.transport_accumulate(d, w, &mut acc);
        self.project(&ProfileField { values: acc })
    }

    /// Unprojected `∇φ₁·∇φ₂`, added into `acc`.
    pub fn grad_dot_accumulate(&self, d1: &PhaseDerivs, d2: &PhaseDerivs, acc: &mut [f64]) {
        for (g1, g2) in d1.grad.iter().zip(&d2.grad) {
            for ((a, x), y) in acc.iter_mut().zip(g1).zip(g2) {
                *a += x * y;
            }
        }
    }

    /// Dealiased `∇φ₁·∇φ₂`.
    pub fn grad_dot(&self, d1: &PhaseDerivs, d2: &PhaseDerivs) -> PhaseField {
        let mut acc = vec![0.0; self.total];
        self.grad_dot_accumulate(d1, d2, &mut acc);
        self.project_real(&PhaseField { values: acc })
    }

    /// Exact free profile flow `e^{i Δ (1/ta - 1/tb) / 2}` from `ta` to `tb`.
    pub fn free_flow(&self, w: &ProfileField, ta: f64, tb: f64) -> ProfileField {
        let mut c = self.forward(&w.values);
        self.free_flow_coeffs(&mut c, ta, tb);
        ProfileField { values: self.inverse(&c) }
    }

    pub fn free_flow_coeffs(&self, c: &mut [Complex64], ta: f64, tb: f64) {
        let span = 0.5 * (1.0 / ta - 1.0 / tb);
        for (v, s) in c.iter_mut().zip(&self.wave_sq) {
            *v *= Complex64::from_polar(1.0, -s * span);
        }
    }

    /// `|ξ|²` at flat index.
    pub fn wave_sq(&self, idx: usize) -> f64 {
        self.wave_sq[idx]
    }

    /// Discrete L² norm.
    pub fn l2(&self, w: &ProfileField) -> f64 {
        (self.cell_volume() * w.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn l2_real(&self, phi: &PhaseField) -> f64 {
        (self.cell_volume() * phi.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Discrete L^r norm, `r = ∞` allowed.
    pub fn lr_real(&self, f: &[f64], r: f64) -> f64 {
        if r.is_infinite() {
            return f.iter().map(|v| v.abs()).fold(0.0, f64::max);
        }
        (self.cell_volume() * f.iter().map(|v| v.abs().powf(r)).sum::<f64>()).powf(1.0 / r)
    }

    pub fn lr_complex(&self, f: &[Complex64], r: f64) -> f64 {
        if r.is_infinite() {
            return f.iter().map(|v| v.norm()).fold(0.0, f64::max);
        }
        (self.cell_volume() * f.iter().map(|v| v.norm().powf(r)).sum::<f64>()).powf(1.0 / r)
    }

    fn check_order(&self, order: usize) -> Result<(), GridError> {
        if order > self.max_derivative() {
            return Err(GridError::Unresolvable { order, size: self.params.size });
        }
        Ok(())
    }

    /// `‖∂^j f‖₂ = Σ_{|α|=j} ‖∂^α f‖₂` from coefficients.
    fn seminorm_from_coeffs(&self, c: &[Complex64], j: usize) -> f64 {
        let n = self.params.n;
        let size = self.params.size;
        let unit = 2.0 * std::f64::consts::PI / self.params.length;
        let vol = self.params.length.powi(n as i32);
        let power: Vec<f64> = c.iter().map(|v| v.norm_sqr()).collect();
        let mut total = 0.0;
        for alpha in multi_indices(n, j) {
            let mut s = 0.0;
            for (idx, p) in power.iter().enumerate() {
                if *p == 0.0 {
                    continue;
                }
                let mut rem = idx;
                let mut weight = 1.0;
                for d in (0..n).rev() {
                    let xi = unit * self.freq[rem % size] as f64;
                    rem /= size;
                    if alpha[d] > 0 {
                        weight *= xi.powi(2 * alpha[d] as i32);
                    }
                }
                s += p * weight;
            }
            total += (vol * s).sqrt();
        }
        total
    }

    /// `‖∂^j w‖₂` for a complex field.
    pub fn seminorm(&self, w: &ProfileField, j: usize) -> Result<f64, GridError> {
        self.check_len(w.values.len())?;
        self.check_order(j)?;
        Ok(self.seminorm_from_coeffs(&self.forward(&w.values), j))
    }

    /// `|w|_k = Σ_{0≤j≤k} ‖∂^j w‖₂`.
    pub fn hk_norm(&self, w: &ProfileField, k: usize) -> Result<f64, GridError> {
        self.check_len(w.values.len())?;
        self.check_order(k)?;
        let c = self.forward(&w.values);
        Ok((0..=k).map(|j| self.seminorm_from_coeffs(&c, j)).sum())
    }

    /// `‖∂φ‖_r = Σ_i ‖∂_i φ‖_r`.
    pub fn gradient_lr(&self, phi: &PhaseField, r: f64) -> f64 {
        self.gradient(phi).iter().map(|g| self.lr_real(&g.values, r)).sum()
    }

    /// `|φ|_ℓ = ‖φ‖_∞ + ‖∂φ‖_{r0} + ‖∂^{ℓ0+1} φ‖₂ + ‖∂^{ℓ+2} φ‖₂`.
    pub fn yl_norm(&self, phi: &PhaseField, ell: isize) -> Result<f64, GridError> {
        self.check_len(phi.values.len())?;
        let n = self.params.n;
        let l0 = (n / 2) as isize;
        if ell < l0 - 1 {
            return Err(GridError::InvalidParams(format!("ell = {ell} is below ell0 - 1 = {}", l0 - 1)));
        }
        let top = (ell + 2) as usize;
        self.check_order(top)?;
        let r0 = if n % 2 == 1 { 2.0 * n as f64 } else { f64::INFINITY };
        let c = self.forward_real(&phi.values);
        Ok(phi.max_abs()
            + self.gradient_lr(phi, r0)
            + self.seminorm_from_coeffs(&c, (l0 + 1) as usize)
            + self.seminorm_from_coeffs(&c, top))
    }

    /// Deterministic random complex field on modes `|q|_∞ <= radius`,
    /// Gaussian coefficients with envelope `exp(-|q|²/radius²)`, rescaled to
    /// `|w|_k = target`.
    pub fn random_band_limited(&self, seed: u64, radius: usize, target: f64, k: usize) -> Result<ProfileField, GridError> {
        let c = self.random_coeffs(seed, radius)?;
        let w = ProfileField { values: self.inverse(&c) };
        if target == 0.0 {
            return Ok(ProfileField::zeros(self.total));
        }
        let norm = self.hk_norm(&w, k)?;
        Ok(w.scaled(target / norm))
    }

    /// Real counterpart of [`Grid::random_band_limited`], rescaled to
    /// `|φ|_ℓ = target`.
    pub fn random_band_limited_real(&self, seed: u64, radius: usize, target: f64, ell: isize) -> Result<PhaseField, GridError> {
        let c = self.random_coeffs(seed, radius)?;
        let phi = PhaseField { values: self.inverse_real(&c) };
        if target == 0.0 {
            return Ok(PhaseField::zeros(self.total));
        }
        let norm = self.yl_norm(&phi, ell)?;
        Ok(phi.scaled(target / norm))
    }

    fn random_coeffs(&self, seed: u64, radius: usize) -> Result<Vec<Complex64>, GridError> {
        if radius > self.band {
            return Err(GridError::BandTooWide { radius, band: self.band });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = vec![Complex64::new(0.0, 0.0); self.total];
        let r2 = (radius.max(1) as f64).powi(2);
        for (idx, slot) in c.iter_mut().enumerate() {
            let q = self.mode(idx);
            if q.iter().any(|&qi| qi.unsigned_abs() as usize > radius) {
                continue;
            }
            let q2: f64 = q.iter().map(|&qi| (qi * qi) as f64).sum();
            let env = (-q2 / r2).exp();
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            *slot = Complex64::new(re, im) * env;
        }
        Ok(c)
    }
}

/// All multi-indices `α ∈ ℕ^n` with `|α| = j`.
pub fn multi_indices(n: usize, j: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, j: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n - 1 {
            prefix.push(j);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for a in 0..=j {
            prefix.push(a);
            rec(n, j - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, j, &mut Vec::with_capacity(n), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid3() -> Grid {
        Grid::new(ModelParams::default()).unwrap()
    }

    fn grid1(size: usize) -> Grid {
        Grid::new_unchecked(ModelParams { n: 1, mu: 0.5, size, strict: false, ..ModelParams::default() }).unwrap()
    }

    fn single_mode(g: &Grid, q: &[i64], amp: f64) -> PhaseField {
        let unit = 2.0 * PI / g.length();
        PhaseField {
            values: (0..g.len())
                .map(|i| {
                    let x = g.point(i);
                    amp * (unit * q.iter().zip(&x).map(|(a, b)| *a as f64 * b).sum::<f64>()).cos()
                })
                .collect(),
        }
    }

    #[test]
    fn admissible_examples() {
        assert!(admissible(2, 2, 3, 1.0));
        for ell in 0..10 {
            for n in 3..7 {
                for mu in [0.5, 1.0, (n - 2) as f64] {
                    assert!(!admissible(1, ell, n, mu));
                }
            }
        }
        assert!(!admissible(3, 2, 3, 1.0));
    }

    #[test]
    fn mu_max_admits_only_diagonal_pairs() {
        for n in 3..7usize {
            let mu = (n - 2) as f64;
            for k in 0..10 {
                for ell in 0..10 {
                    if admissible(k, ell, n, mu) {
                        assert_eq!(k, ell, "n={n} k={k} ell={ell}");
                        assert!(ell as f64 > n as f64 / 2.0);
                    }
                }
            }
        }
    }

    #[test]
    fn params_validation() {
        let ok = ModelParams::default();
        assert!(ok.validate().is_ok());
        let e = ModelParams { gamma: 1.5, ..ok.clone() }.validate().unwrap_err();
        assert!(e.to_string().contains("gamma must lie in (0,1]"));
        assert!(ModelParams { n: 2, ..ok.clone() }.validate().is_err());
        assert!(ModelParams { n: 2, strict: false, ..ok.clone() }.validate().is_ok());
        assert!(ModelParams { size: 15, ..ok.clone() }.validate().is_err());
        assert!(ModelParams { k: 1, ell: 1, ..ok.clone() }.validate().is_err());
        assert!(ModelParams { mu: 1.5, ..ok }.validate().is_err());
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = grid3();
        let w = g.random_band_limited(3, 5, 1.0, 0).unwrap();
        let back = g.inverse(&g.forward(&w.values));
        let err: f64 = back.iter().zip(&w.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-12 * w.max_abs());
        let c = g.forward(&w.values);
        let coeff = (g.length().powi(3) * c.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt();
        assert!((coeff - g.l2(&w)).abs() <= 1e-12 * coeff);
    }

    #[test]
    fn forward_matches_direct_dft_in_3d() {
        let g = Grid::new(ModelParams { size: 4, ..ModelParams::default() }).unwrap_or_else(|_| {
            Grid::new_unchecked(ModelParams { size: 4, strict: false, ..ModelParams::default() }).unwrap()
        });
        let w = ProfileField {
            values: (0..g.len()).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect(),
        };
        let c = g.forward(&w.values);
        let unit = 2.0 * PI / g.length();
        for idx in [0usize, 5, 17, 42, 63] {
            let q = g.mode(idx);
            let mut s = Complex64::new(0.0, 0.0);
            for (j, v) in w.values.iter().enumerate() {
                let x = g.point(j);
                let ph: f64 = q.iter().zip(&x).map(|(a, b)| *a as f64 * unit * b).sum();
                s += v * Complex64::from_polar(1.0, -ph);
            }
            s /= g.len() as f64;
            assert!((s - c[idx]).norm() < 1e-13, "idx={idx}");
        }
    }

    #[test]
    fn mode_index_round_trip() {
        let g = grid3();
        for idx in [0, 1, 15, 16, 255, 4095, 1234] {
            assert_eq!(g.index_of_mode(&g.mode(idx)), idx);
        }
    }

    #[test]
    fn riesz_kills_constants_and_acts_diagonally() {
        let g = grid3();
        let c = ProfileField { values: vec![Complex64::new(2.5, -1.0); g.len()] };
        assert!(g.riesz_apply(&c, -2.0).max_abs() < 1e-15);
        let q = [1i64, 2, 0];
        let f = ProfileField::from_phase(&single_mode(&g, &q, 1.0));
        let out = g.riesz_apply(&f, -2.0);
        let xi = 2.0 * PI / g.length() * (5.0f64).sqrt();
        let expected = f.scaled(xi.powf(-2.0));
        let err = out.sub(&expected).max_abs();
        assert!(err < 1e-12 * expected.max_abs());
        assert!(out.values.iter().all(|v| v.im.abs() < 1e-14));
    }

    #[test]
    fn riesz_is_linear() {
        let g = grid3();
        let a = g.random_band_limited(1, 4, 1.0, 0).unwrap();
        let b = g.random_band_limited(2, 4, 1.0, 0).unwrap();
        let lhs = g.riesz_apply(&a.scaled(2.0).axpy(-0.5, &b), -2.0);
        let rhs = g.riesz_apply(&a, -2.0).scaled(2.0).axpy(-0.5, &g.riesz_apply(&b, -2.0));
        assert!(lhs.sub(&rhs).max_abs() <= 1e-12 * rhs.max_abs());
    }

    #[test]
    fn g0_single_harmonic() {
        let g = grid3();
        let c = 0.7;
        let q = [1i64, 0, 1];
        let w = ProfileField::from_phase(&single_mode(&g, &q, c));
        let out = g.g0(&w, &w).unwrap();
        let lambda = g.params().lambda;
        let xi2 = 4.0 * PI / g.length() * (2.0f64).sqrt();
        let expected = single_mode(&g, &[2, 0, 2], lambda * c * c / 2.0 * xi2.powf(-2.0));
        let err = out.sub(&expected).max_abs();
        assert!(err < 1e-12 * expected.max_abs(), "{err}");
    }

    #[test]
    fn g0_zero_symmetry_and_phase_invariance() {
        let g = grid3();
        let w = g.random_band_limited(7, 5, 1.0, 2).unwrap();
        let v = g.random_band_limited(8, 5, 1.0, 2).unwrap();
        let z = ProfileField::zeros(g.len());
        assert!(g.g0(&z, &w).unwrap().max_abs() == 0.0);
        assert_eq!(g.g0(&w, &v).unwrap(), g.g0(&v, &w).unwrap());
        let sigma = PhaseField::constant(g.len(), 0.83);
        let wr = w.rotated(&sigma, 1.0);
        let d = g.g0(&wr, &wr).unwrap().sub(&g.g0(&w, &w).unwrap()).max_abs();
        assert!(d <= 1e-12 * g.g0(&w, &w).unwrap().max_abs());
        let out = g.g0(&w, &v).unwrap();
        let mean = out.values.iter().sum::<f64>() / g.len() as f64;
        assert!(mean.abs() < 1e-15 * out.max_abs().max(1.0));
        assert!(g.g0(&w, &ProfileField::zeros(10)).is_err());
    }

    #[test]
    fn g0_reports_dropped_mean() {
        let g = grid3();
        let w = g.random_band_limited(9, 3, 1.0, 0).unwrap();
        let (_, mean) = g.g0_with_mean(&w, &w).unwrap();
        let direct = g.params().lambda * w.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / g.len() as f64;
        assert!((mean - direct).abs() < 1e-14 * direct);
    }

    #[test]
    fn dealiased_g0_matches_double_resolution() {
        let g = grid3();
        let fine = Grid::new(ModelParams { size: 32, ..ModelParams::default() }).unwrap();
        let w1 = g.random_band_limited(11, 5, 1.0, 0).unwrap();
        let w2 = g.random_band_limited(12, 5, 1.0, 0).unwrap();
        let embed = |w: &ProfileField| {
            let c = g.forward(&w.values);
            let mut cf = vec![Complex64::new(0.0, 0.0); fine.len()];
            for (idx, v) in c.iter().enumerate() {
                cf[fine.index_of_mode(&g.mode(idx))] = *v;
            }
            ProfileField { values: fine.inverse(&cf) }
        };
        let coarse = g.forward_real(&g.g0(&w1, &w2).unwrap().values);
        let fine_c = fine.forward_real(&fine.g0(&embed(&w1), &embed(&w2)).unwrap().values);
        let scale = coarse.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (idx, v) in coarse.iter().enumerate() {
            let q = g.mode(idx);
            let f = if g.in_band(idx) { fine_c[fine.index_of_mode(&q)] } else { Complex64::new(0.0, 0.0) };
            assert!((v - f).norm() <= 1e-10 * scale, "mode {q:?}");
        }
    }

    #[test]
    fn hk_norm_single_mode_1d() {
        let g = grid1(16);
        let q = 3i64;
        let unit = 2.0 * PI / g.length();
        let w = ProfileField {
            values: (0..g.len()).map(|i| Complex64::from_polar(1.0, unit * q as f64 * g.point(i)[0])).collect(),
        };
        let expected = (1.0 + unit * q as f64) * g.length().sqrt();
        assert!((g.hk_norm(&w, 1).unwrap() - expected).abs() < 1e-12 * expected);
        assert_eq!(g.hk_norm(&ProfileField::zeros(g.len()), 3).unwrap(), 0.0);
        assert!(g.hk_norm(&w, 9).is_err());
    }

    #[test]
    fn hk_norm_counts_each_multi_index() {
        let g = grid3();
        let w = g.random_band_limited(5, 4, 1.0, 0).unwrap();
        let grads = g.gradient_complex(&w);
        let direct: f64 = grads.iter().map(|d| g.l2(d)).sum();
        assert!((g.seminorm(&w, 1).unwrap() - direct).abs() < 1e-12 * direct);
        assert_eq!(multi_indices(3, 2).len(), 6);
        assert_eq!(multi_indices(3, 4).len(), 15);
    }

    #[test]
    fn yl_norm_cases() {
        let g = grid3();
        assert_eq!(g.yl_norm(&PhaseField::zeros(g.len()), 2).unwrap(), 0.0);
        let c = PhaseField::constant(g.len(), -1.7);
        assert!((g.yl_norm(&c, 2).unwrap() - 1.7).abs() < 1e-12);
        // sin(2π x1/L): ‖φ‖∞ = 1, ‖∂φ‖_6 = κ (L²·∫sin⁶·L/(2π))^{1/6}...
        let kappa = 2.0 * PI / g.length();
        let l = g.length();
        let phi = PhaseField {
            values: (0..g.len()).map(|i| (kappa * g.point(i)[0]).sin()).collect(),
        };
        // ∫ |cos|^6 over a period equals 5/16 of the period
        let grad6 = kappa * (l.powi(3) * 5.0 / 16.0).powf(1.0 / 6.0);
        // ‖∂^j φ‖₂ = κ^j (L³/2)^{1/2}: only α = (j,0,0) survives
        let l2 = |j: i32| kappa.powi(j) * (l.powi(3) / 2.0).sqrt();
        let expected = 1.0 + grad6 + l2(2) + l2(4);
        let got = g.yl_norm(&phi, 2).unwrap();
        assert!((got - expected).abs() < 1e-10 * expected, "{got} vs {expected}");
        assert!(g.yl_norm(&phi, -1).is_err());
        assert!(g.yl_norm(&phi, 7).is_err());
    }

    #[test]
    fn random_fields() {
        let g = grid3();
        let a = g.random_band_limited(42, 3, 1.0, 2).unwrap();
        let b = g.random_band_limited(42, 3, 1.0, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(g.random_band_limited(42, 3, 0.0, 2).unwrap().max_abs(), 0.0);
        for seed in 0..10 {
            let w = g.random_band_limited(seed, 4, 1.0, 2).unwrap();
            assert!((g.hk_norm(&w, 2).unwrap() - 1.0).abs() < 1e-9);
        }
        assert!(g.random_band_limited(0, 6, 1.0, 0).is_err());
        let phi = g.random_band_limited_real(3, 3, 0.5, 2).unwrap();
        assert!((g.yl_norm(&phi, 2).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn transport_operator_is_skew_on_band_limited_data() {
        let g = grid3();
        let w = g.random_band_limited(21, 2, 1.0, 0).unwrap();
        let phi = g.random_band_limited_real(22, 2, 1.0, 2).unwrap();
        let d = g.phase_derivs(&phi);
        let tw = g.transport_apply(&d, &w);
        let inner: f64 = w.values.iter().zip(&tw.values).map(|(a, b)| (a.conj() * b).re).sum();
        let scale: f64 = tw.values.iter().map(|v| v.norm()).sum::<f64>() * w.max_abs();
        assert!(inner.abs() < 1e-13 * scale, "{inner}");
    }

    #[test]
    fn transport_operator_single_modes() {
        // φ = cos(κx₁), w = e^{iκx₂}: 2∇φ·∇w = 0, Δφ w = -κ² cos(κx₁) e^{iκx₂}
        let g = grid3();
        let k = 2.0 * PI / g.length();
        let phi = PhaseField { values: (0..g.len()).map(|i| (k * g.point(i)[0]).cos()).collect() };
        let w = ProfileField {
            values: (0..g.len()).map(|i| Complex64::from_polar(1.0, k * g.point(i)[1])).collect(),
        };
        let out = g.transport_apply(&g.phase_derivs(&phi), &w);
        for (i, v) in out.values.iter().enumerate() {
            let expected = w.values[i] * (-k * k * phi.values[i]);
            assert!((v - expected).norm() < 1e-14);
        }
        // φ = sin(κx₁), w = e^{iκx₁}: 2 κ cos · iκ e + (-κ² sin) e
        let phi = PhaseField { values: (0..g.len()).map(|i| (k * g.point(i)[0]).sin()).collect() };
        let w = ProfileField {
            values: (0..g.len()).map(|i| Complex64::from_polar(1.0, k * g.point(i)[0])).collect(),
        };
        let out = g.transport_apply(&g.phase_derivs(&phi), &w);
        for (i, v) in out.values.iter().enumerate() {
            let x = k * g.point(i)[0];
            let expected = w.values[i] * Complex64::new(-k * k * x.sin(), 2.0 * k * k * x.cos());
            assert!((v - expected).norm() < 1e-14);
        }
        let dot = g.grad_dot(&g.phase_derivs(&phi), &g.phase_derivs(&phi));
        for (i, v) in dot.values.iter().enumerate() {
            let x = k * g.point(i)[0];
            assert!((v - k * k * x.cos().powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn free_flow_is_unitary_and_composes() {
        let g = grid3();
        let w = g.random_band_limited(4, 5, 1.0, 0).unwrap();
        let a = g.free_flow(&g.free_flow(&w, 1.0, 3.0), 3.0, 10.0);
        let b = g.free_flow(&w, 1.0, 10.0);
        assert!(a.sub(&b).max_abs() < 1e-13);
        assert!((g.l2(&b) - g.l2(&w)).abs() < 1e-13);
    }
}
