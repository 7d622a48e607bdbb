//! A classical particle dragging a sound-wave field on a periodic box.
//!
//! Field convention: `β(x) = L^{−d} Σ_k β̂(k) e^{ik·x}` and
//! `Ŵ(k) = ∫ W e^{−ik·x}`. The equations of motion are
//!
//! ```text
//! Ẋ = P / M0,   Ṗ = F − 2 ∇_X ∫ W(X − x) Re β(x) dx,
//! i ∂t β̂(k) = ω(k) β̂(k) + Ŵ(k) e^{−ik·X},
//! ```
//!
//! with `ω(k) = |k|²` (ideal gas) or `|k| √(|k|² + 2 v*²)` (Bogoliubov).
//! The coupling `W` is a radial Gaussian; its transform is zeroed on the
//! Nyquist planes so every mode sum is symmetric under `k → −k`.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::par::{self, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dispersion {
    Ideal,
    Bogoliubov,
}

/// `W(x) = w0 exp(−|x|² / 2a²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Potential {
    pub w0: f64,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "ModelSpec")]
pub struct FrictionModel {
    pub d: usize,
    #[serde(rename = "L")]
    pub l: f64,
    /// Grid points per axis.
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M0")]
    pub m0: f64,
    /// Constant external force; empty means zero.
    #[serde(rename = "F", default)]
    pub force: Vec<f64>,
    #[serde(rename = "W")]
    pub potential: Potential,
    pub dispersion: Dispersion,
    #[serde(default)]
    pub vstar: f64,
    pub dt: f64,
    pub eps_reg: f64,
}

/// Regularization used when a config leaves `eps_reg` out.
pub const DEFAULT_EPS_REG: f64 = 0.1;
/// A config without `dt` gets `dt · max ω = DEFAULT_DT_FRACTION`.
pub const DEFAULT_DT_FRACTION: f64 = 0.4;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSpec {
    d: usize,
    #[serde(rename = "L")]
    l: f64,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M0")]
    m0: f64,
    #[serde(rename = "F", default)]
    force: Vec<f64>,
    #[serde(rename = "W")]
    potential: Potential,
    dispersion: Dispersion,
    #[serde(default)]
    vstar: f64,
    dt: Option<f64>,
    eps_reg: Option<f64>,
}

impl From<ModelSpec> for FrictionModel {
    fn from(s: ModelSpec) -> Self {
        let mut m = FrictionModel {
            d: s.d,
            l: s.l,
            n: s.n,
            m0: s.m0,
            force: s.force,
            potential: s.potential,
            dispersion: s.dispersion,
            vstar: s.vstar,
            dt: 0.0,
            eps_reg: s.eps_reg.unwrap_or(DEFAULT_EPS_REG),
        };
        m.dt = s.dt.unwrap_or_else(|| DEFAULT_DT_FRACTION / m.max_grid_omega());
        m
    }
}

fn pad(v: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    out[..v.len().min(3)].copy_from_slice(&v[..v.len().min(3)]);
    out
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

impl FrictionModel {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::Validation(format!("d must be 1, 2 or 3, got {}", self.d)));
        }
        if self.n < 8 || !self.n.is_multiple_of(2) {
            return Err(Error::Validation(format!("N must be even and at least 8, got {}", self.n)));
        }
        for (name, v) in [("L", self.l), ("M0", self.m0), ("a", self.potential.a), ("dt", self.dt), ("eps_reg", self.eps_reg)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.potential.w0 == 0.0 || !self.potential.w0.is_finite() {
            return Err(Error::Validation("w0 must be finite and nonzero so that W has nonzero integral".into()));
        }
        if self.potential.a < 2.0 * self.dx() {
            return Err(Error::Validation(format!(
                "potential width {} is below two grid spacings ({})",
                self.potential.a,
                2.0 * self.dx()
            )));
        }
        if !(self.vstar >= 0.0 && self.vstar.is_finite()) {
            return Err(Error::Validation("vstar must be nonnegative".into()));
        }
        if !self.force.is_empty() && self.force.len() != self.d {
            return Err(Error::Structural(format!("F has {} components for d = {}", self.force.len(), self.d)));
        }
        if self.force.iter().any(|f| !f.is_finite()) {
            return Err(Error::Validation("F must be finite".into()));
        }
        if self.n.checked_pow(self.d as u32).is_none_or(|m| m > 1 << 24) {
            return Err(Error::Parameter("grid is too large".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.l / self.n as f64
    }

    pub fn n_modes(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// `ω` at the grid corner, the largest frequency the field carries.
    pub fn max_grid_omega(&self) -> f64 {
        let k = PI / self.dx();
        self.omega(self.d as f64 * k * k)
    }

    pub fn external_force(&self) -> [f64; 3] {
        pad(&self.force)
    }

    pub fn omega(&self, k2: f64) -> f64 {
        match self.dispersion {
            Dispersion::Ideal => k2,
            Dispersion::Bogoliubov => (k2 * (k2 + 2.0 * self.vstar * self.vstar)).sqrt(),
        }
    }

    /// `dω/d|k|`.
    pub fn group_speed(&self, k: f64) -> f64 {
        match self.dispersion {
            Dispersion::Ideal => 2.0 * k,
            Dispersion::Bogoliubov => {
                let s = 2.0 * self.vstar * self.vstar;
                (2.0 * k * k + s) / (k * k + s).sqrt()
            }
        }
    }

    /// `lim ω(k)/|k|` at small `k`: the speed below which no sound is
    /// emitted.
    pub fn sound_speed(&self) -> f64 {
        match self.dispersion {
            Dispersion::Ideal => 0.0,
            Dispersion::Bogoliubov => 2f64.sqrt() * self.vstar,
        }
    }

    /// `Ŵ(0) = w0 (2π a²)^{d/2}`.
    pub fn w_hat0(&self) -> f64 {
        let a = self.potential.a;
        self.potential.w0 * (2.0 * PI * a * a).powf(self.d as f64 / 2.0)
    }

    /// Continuum transform of `W` at `|k|² = k2`.
    pub fn w_hat(&self, k2: f64) -> f64 {
        let a = self.potential.a;
        self.w_hat0() * (-0.5 * a * a * k2).exp()
    }

    /// Grid momenta along one axis in FFT order, with the Gaussian factor
    /// `e^{−a²k²/2}` (zero at the Nyquist index).
    fn axis(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let a = self.potential.a;
        let k: Vec<f64> = (0..n)
            .map(|i| {
                let m = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
                2.0 * PI * m / self.l
            })
            .collect();
        let g = k.iter().enumerate().map(|(i, k)| if i == n / 2 { 0.0 } else { (-0.5 * a * a * k * k).exp() }).collect();
        (k, g)
    }

    fn modes(&self) -> Modes {
        let (axis_k, axis_g) = self.axis();
        let n = self.n;
        let d = self.d;
        let w0 = self.w_hat0();
        let count = self.n_modes();
        let mut k = Vec::with_capacity(count);
        let mut w = Vec::with_capacity(count);
        let mut omega = Vec::with_capacity(count);
        for flat in 0..count {
            let mut kv = [0.0; 3];
            let mut g = 1.0;
            let mut rest = flat;
            for slot in kv.iter_mut().take(d) {
                let i = rest % n;
                rest /= n;
                *slot = axis_k[i];
                g *= axis_g[i];
            }
            k.push(kv);
            w.push(w0 * g);
            omega.push(self.omega(dot(kv, kv)));
        }
        Modes { k, w, omega, axis_k, volume: self.l.powi(d as i32) }
    }
}

struct Modes {
    k: Vec<[f64; 3]>,
    w: Vec<f64>,
    omega: Vec<f64>,
    axis_k: Vec<f64>,
    volume: f64,
}

impl Modes {
    /// `e^{−ik·X}` for every mode, built from per-axis factors.
    fn phases(&self, model: &FrictionModel, x: [f64; 3]) -> Vec<C64> {
        let n = model.n;
        let per_axis: Vec<Vec<C64>> =
            (0..model.d).map(|a| self.axis_k.iter().map(|k| C64::from_polar(1.0, -k * x[a])).collect()).collect();
        (0..self.k.len())
            .map(|flat| {
                let mut rest = flat;
                let mut z = C64::new(1.0, 0.0);
                for axis in &per_axis {
                    z *= axis[rest % n];
                    rest /= n;
                }
                z
            })
            .collect()
    }
}

/// Spectral field in FFT order, flat index `i0 + N i1 + N² i2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub n: usize,
    pub d: usize,
    pub beta_hat: Vec<C64>,
}

impl FieldState {
    pub fn zero(model: &FrictionModel) -> Self {
        FieldState { n: model.n, d: model.d, beta_hat: vec![C64::new(0.0, 0.0); model.n_modes()] }
    }

    fn check(&self, model: &FrictionModel) -> Result<()> {
        if self.n != model.n || self.d != model.d || self.beta_hat.len() != model.n_modes() {
            return Err(Error::Structural("field does not match the model grid".into()));
        }
        if self.beta_hat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("field has non-finite entries".into()));
        }
        Ok(())
    }

    /// Values on the real-space grid `x_j = j · L/N`.
    pub fn to_real(&self, model: &FrictionModel) -> Vec<C64> {
        let mut data = self.beta_hat.clone();
        fft_nd(&mut data, self.n, self.d, true);
        let scale = 1.0 / model.l.powi(self.d as i32);
        data.iter_mut().for_each(|z| *z *= scale);
        data
    }
}

fn fft_nd(data: &mut [C64], n: usize, d: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    let mut line = vec![C64::new(0.0, 0.0); n];
    for axis in 0..d {
        let stride = n.pow(axis as u32);
        let lines = data.len() / n;
        for l in 0..lines {
            let base = (l % stride) + (l / stride) * stride * n;
            for (j, z) in line.iter_mut().enumerate() {
                *z = data[base + j * stride];
            }
            fft.process(&mut line);
            for (j, z) in line.iter().enumerate() {
                data[base + j * stride] = *z;
            }
        }
    }
}

/// The field that moves rigidly with a particle at velocity `v` located at
/// the origin: `γ̂_v(k) = Ŵ(k) / (v·k − ω(k) + iε)` with `ε = eps_reg`.
pub fn stationary_profile(v: &[f64], model: &FrictionModel) -> Result<FieldState> {
    model.validate()?;
    if v.len() != model.d {
        return Err(Error::Structural(format!("velocity has {} components for d = {}", v.len(), model.d)));
    }
    let v = pad(v);
    let modes = model.modes();
    let eps = model.eps_reg;
    let beta_hat = (0..modes.k.len())
        .map(|i| modes.w[i] / C64::new(dot(v, modes.k[i]) - modes.omega[i], eps))
        .collect();
    Ok(FieldState { n: model.n, d: model.d, beta_hat })
}

/// The dressed rest state `−Ŵ(k) e^{−ik·X} / ω(k)` of a particle at `x`;
/// the `k = 0` mode, where `Δ⁻¹` is undefined, is left at zero.
pub fn rest_profile(model: &FrictionModel, x: &[f64]) -> Result<FieldState> {
    model.validate()?;
    let modes = model.modes();
    let ph = modes.phases(model, pad(x));
    let beta_hat = (0..modes.k.len())
        .map(|i| if modes.omega[i] > 0.0 { -ph[i] * (modes.w[i] / modes.omega[i]) } else { C64::new(0.0, 0.0) })
        .collect();
    Ok(FieldState { n: model.n, d: model.d, beta_hat })
}

/// Largest `|γ̂_0(k) ω(k) + Ŵ(k)|` over nonzero modes.
pub fn rest_profile_deviation(model: &FrictionModel) -> Result<f64> {
    let gamma = stationary_profile(&vec![0.0; model.d], model)?;
    let modes = model.modes();
    Ok((0..modes.k.len())
        .filter(|&i| modes.omega[i] > 0.0)
        .map(|i| (gamma.beta_hat[i] * modes.omega[i] + modes.w[i]).norm())
        .fold(0.0, f64::max))
}

/// Force `2 L^{−d} Σ_k k Ŵ Im(β̂ e^{ik·X})` that `field` exerts on a
/// particle at `x`.
pub fn field_force(model: &FrictionModel, field: &FieldState, x: &[f64]) -> Result<Vec<f64>> {
    model.validate()?;
    field.check(model)?;
    let modes = model.modes();
    let ph = modes.phases(model, pad(x));
    let mut acc = [0.0; 3];
    for i in 0..modes.k.len() {
        let im = (field.beta_hat[i] * ph[i].conj()).im * modes.w[i];
        for a in 0..3 {
            acc[a] += modes.k[i][a] * im;
        }
    }
    Ok(acc[..model.d].iter().map(|f| 2.0 * f / modes.volume).collect())
}

/// The same force by direct quadrature on the real-space grid,
/// `−2 Σ_j dx^d ∇W(X − x_j) Re β(x_j)`, summed over the nearest periodic
/// images.
pub fn field_force_real_space(model: &FrictionModel, field: &FieldState, x: &[f64]) -> Result<Vec<f64>> {
    model.validate()?;
    field.check(model)?;
    let beta = field.to_real(model);
    let (n, d, dx, l) = (model.n, model.d, model.dx(), model.l);
    let a2 = model.potential.a * model.potential.a;
    let xp = pad(x);
    let mut acc = [0.0; 3];
    for (flat, b) in beta.iter().enumerate() {
        let mut r = [0.0; 3];
        let mut rest = flat;
        for (ax, slot) in r.iter_mut().enumerate().take(d) {
            let sep = xp[ax] - (rest % n) as f64 * dx;
            rest /= n;
            *slot = sep - l * (sep / l).round();
        }
        for image in 0..3usize.pow(d as u32) {
            let mut s = r;
            let mut code = image;
            for slot in s.iter_mut().take(d) {
                *slot += l * ((code % 3) as f64 - 1.0);
                code /= 3;
            }
            let w = model.potential.w0 * (-dot(s, s) / (2.0 * a2)).exp();
            for ax in 0..3 {
                acc[ax] += s[ax] / a2 * w * b.re;
            }
        }
    }
    let cell = dx.powi(d as i32);
    Ok(acc[..d].iter().map(|f| 2.0 * f * cell).collect())
}

/// Startup check of the Fourier conventions: spectral and real-space
/// forces on a moving profile must agree. Returns the relative deviation.
pub fn force_self_test(model: &FrictionModel) -> Result<f64> {
    let v: Vec<f64> = [0.7, -0.4, 0.25][..model.d].to_vec();
    let field = stationary_profile(&v, model)?;
    let x: Vec<f64> = [0.37, 0.61, -0.23][..model.d].iter().map(|f| f * model.dx()).collect();
    let spectral = field_force(model, &field, &x)?;
    let direct = field_force_real_space(model, &field, &x)?;
    let scale = norm(pad(&spectral)).max(f64::MIN_POSITIVE);
    let dev = norm(pad(&spectral.iter().zip(&direct).map(|(a, b)| a - b).collect::<Vec<_>>())) / scale;
    if dev > 1e-6 {
        return Err(Error::Numerical(format!(
            "spectral force {spectral:?} disagrees with real-space quadrature {direct:?} (relative {dev:.3e})"
        )));
    }
    Ok(dev)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceMethod {
    /// Grid sum with Lorentzian width `ε`, extrapolated from `ε` and `ε/2`.
    EpsLimit,
    /// Continuum integral over the resonance shell `ω(k) = v·k`.
    ShellQuadrature,
}

/// Grid friction at regularization `eps`:
/// `−2 L^{−d} Σ_k k Ŵ² ε / ((k·v − ω)² + ε²)`.
fn eps_force(model: &FrictionModel, v: [f64; 3], eps: f64) -> [f64; 3] {
    let (axis_k, axis_g) = model.axis();
    let n = model.n;
    let d = model.d;
    let w0 = model.w_hat0();
    let chunk = 1 << 14;
    let sum = par::reduce_chunks(
        Exec::Sequential,
        model.n_modes(),
        chunk,
        [0.0; 3],
        |range| {
            let mut acc = [0.0; 3];
            for flat in range {
                let mut k = [0.0; 3];
                let mut g = 1.0;
                let mut rest = flat;
                for slot in k.iter_mut().take(d) {
                    let i = rest % n;
                    rest /= n;
                    *slot = axis_k[i];
                    g *= axis_g[i];
                }
                if g == 0.0 {
                    continue;
                }
                let w = w0 * g;
                let detune = dot(k, v) - model.omega(dot(k, k));
                let weight = w * w * eps / (detune * detune + eps * eps);
                for a in 0..3 {
                    acc[a] += k[a] * weight;
                }
            }
            acc
        },
        |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]],
    );
    let scale = -2.0 / model.l.powi(d as i32);
    [sum[0] * scale, sum[1] * scale, sum[2] * scale]
}

const SHELL_PANELS: usize = 4096;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

/// Continuum shell integral. Both dispersions have `ω(k)/k` increasing,
/// so the shell is nonempty for `|k| < k_b` with `ω(k_b) = k_b |v|`.
fn shell_force(model: &FrictionModel, v: [f64; 3]) -> [f64; 3] {
    let speed = norm(v);
    let c0 = model.sound_speed();
    if speed <= c0 {
        return [0.0; 3];
    }
    let k_b = match model.dispersion {
        Dispersion::Ideal => speed,
        Dispersion::Bogoliubov => (speed * speed - c0 * c0).sqrt(),
    };
    let w2 = |k: f64| model.w_hat(k * k).powi(2);
    let along = match model.d {
        1 => {
            let slope = model.group_speed(k_b);
            -k_b * w2(k_b) / (speed - slope).abs()
        }
        2 => {
            // k = k_b sin θ removes the inverse square root at the shell edge
            let integrand = |theta: f64| {
                let k = k_b * theta.sin();
                if k <= 0.0 {
                    return 0.0;
                }
                let om = model.omega(k * k);
                let c = (om / (k * speed)).min(1.0);
                let root = (1.0 - c * c).sqrt();
                if root == 0.0 {
                    // limit of cos θ / sqrt(1 − c²) at the edge
                    let dc = (model.group_speed(k_b) * k_b - om) / (k_b * k_b * speed);
                    return om * w2(k) * k_b / (2.0 * dc * k_b).sqrt();
                }
                om * w2(k) * k_b * theta.cos() / root
            };
            -simpson(integrand, 0.0, PI / 2.0, SHELL_PANELS) / (PI * speed * speed)
        }
        _ => -simpson(|k| k * model.omega(k * k) * w2(k), 0.0, k_b, SHELL_PANELS) / (2.0 * PI * speed * speed),
    };
    [along * v[0] / speed, along * v[1] / speed, along * v[2] / speed]
}

/// Friction force on a particle moving at constant velocity `v` inside
/// its own stationary field profile.
pub fn friction_force(v: &[f64], model: &FrictionModel, method: ForceMethod) -> Result<Vec<f64>> {
    model.validate()?;
    if v.len() != model.d || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Structural(format!("velocity must have {} finite components", model.d)));
    }
    let vp = pad(v);
    if norm(vp) == 0.0 {
        return Ok(vec![0.0; model.d]);
    }
    let f = match method {
        ForceMethod::ShellQuadrature => shell_force(model, vp),
        ForceMethod::EpsLimit => {
            let eps = model.eps_reg;
            let (f1, f2) = (eps_force(model, vp, eps), eps_force(model, vp, eps / 2.0));
            [2.0 * f2[0] - f1[0], 2.0 * f2[1] - f1[1], 2.0 * f2[2] - f1[2]]
        }
    };
    Ok(f[..model.d].to_vec())
}

/// Both quadratures; fails if they differ by more than 5% of the larger.
pub fn friction_force_checked(v: &[f64], model: &FrictionModel) -> Result<(Vec<f64>, Vec<f64>)> {
    let shell = friction_force(v, model, ForceMethod::ShellQuadrature)?;
    let eps = friction_force(v, model, ForceMethod::EpsLimit)?;
    let diff = norm(pad(&shell)).max(norm(pad(&eps)));
    let gap: f64 = shell.iter().zip(&eps).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    if gap > 0.05 * diff {
        return Err(Error::Resolution(format!("shell quadrature {shell:?} and eps limit {eps:?} disagree by more than 5%")));
    }
    Ok((shell, eps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveSettings {
    /// Unit direction of motion; defaults to the first axis.
    #[serde(default)]
    pub direction: Vec<f64>,
    pub method: ForceMethod,
    /// Bisection stops when `|F(v) − F| ≤ tol · F_max`.
    pub tol: f64,
}

impl Default for CurveSettings {
    fn default() -> Self {
        CurveSettings { direction: Vec::new(), method: ForceMethod::ShellQuadrature, tol: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceCurve {
    pub direction: Vec<f64>,
    pub method: ForceMethod,
    pub v: Vec<f64>,
    /// `|f(v)|` along `direction`.
    pub force: Vec<f64>,
    /// `f(v)·v̂`; nonpositive for a dissipative force.
    pub power_sign: Vec<f64>,
    pub f_max: f64,
    pub v_peak: f64,
    /// Interior local maxima `(v, F)` found on the grid.
    pub local_maxima: Vec<(f64, f64)>,
}

impl ForceCurve {
    pub fn unimodal(&self) -> bool {
        self.local_maxima.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Branches {
    /// Stable `v_minus` and run-away `v_plus`. At `F = 0` the upper root is
    /// the tail `v → ∞`, reported as infinity.
    Stationary { force: f64, v_minus: f64, v_plus: f64 },
    /// `F > F_max`: the particle accelerates for ever.
    NoStationarySolution { force: f64, f_max: f64 },
    MultiModal { force: f64, maxima: Vec<(f64, f64)> },
}

fn unit_direction(model: &FrictionModel, dir: &[f64]) -> Result<[f64; 3]> {
    if dir.is_empty() {
        return Ok([1.0, 0.0, 0.0]);
    }
    if dir.len() != model.d {
        return Err(Error::Structural("direction has the wrong number of components".into()));
    }
    let d = pad(dir);
    let len = norm(d);
    if !(len > 0.0 && len.is_finite()) {
        return Err(Error::Validation("direction must be a nonzero vector".into()));
    }
    Ok([d[0] / len, d[1] / len, d[2] / len])
}

fn speed_force(model: &FrictionModel, dir: [f64; 3], method: ForceMethod, speed: f64) -> Result<(f64, f64)> {
    let v: Vec<f64> = dir[..model.d].iter().map(|x| x * speed).collect();
    let f = friction_force(&v, model, method)?;
    let along: f64 = f.iter().zip(&dir).map(|(f, e)| f * e).sum();
    Ok((pad(&f).iter().map(|x| x * x).sum::<f64>().sqrt(), along))
}

/// Evaluates `F(v) = |f(v)|` on `v_grid` and refines the peak by
/// golden-section search.
pub fn force_speed_curve(model: &FrictionModel, v_grid: &[f64], settings: &CurveSettings, exec: Exec) -> Result<ForceCurve> {
    model.validate()?;
    if v_grid.len() < 3 || v_grid[0] <= 0.0 || v_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("v_grid must be strictly increasing, positive and have at least 3 points".into()));
    }
    let dir = unit_direction(model, &settings.direction)?;
    let pts = par::map_slice(exec, v_grid, |&s| speed_force(model, dir, settings.method, s));
    let pts: Vec<(f64, f64)> = pts.into_iter().collect::<Result<_>>()?;
    let force: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let power_sign: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let scale = force.iter().cloned().fold(0.0, f64::max);
    let mut local = Vec::new();
    for i in 1..force.len() - 1 {
        if force[i] > force[i - 1] + 1e-12 * scale && force[i] >= force[i + 1] {
            let (v, f) = golden_max(model, dir, settings.method, v_grid[i - 1], v_grid[i + 1])?;
            local.push((v, f.max(force[i])));
        }
    }
    let (v_peak, f_max) = local.iter().cloned().fold((f64::NAN, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    if local.is_empty() {
        return Err(Error::Domain("force curve has no interior maximum on the grid".into()));
    }
    Ok(ForceCurve {
        direction: dir[..model.d].to_vec(),
        method: settings.method,
        v: v_grid.to_vec(),
        force,
        power_sign,
        f_max,
        v_peak,
        local_maxima: local,
    })
}

fn golden_max(model: &FrictionModel, dir: [f64; 3], method: ForceMethod, mut lo: f64, mut hi: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let f = |s: f64| speed_force(model, dir, method, s).map(|p| p.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    for _ in 0..80 {
        if hi - lo <= 1e-10 * hi {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2)?;
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1)?;
        }
    }
    Ok(if f1 > f2 { (x1, f1) } else { (x2, f2) })
}

/// Stationary speeds for external force magnitude `force`.
pub fn branches(model: &FrictionModel, curve: &ForceCurve, force: f64, tol: f64) -> Result<Branches> {
    if !(force >= 0.0 && force.is_finite()) {
        return Err(Error::Parameter(format!("force magnitude must be nonnegative, got {force}")));
    }
    if !curve.unimodal() {
        return Ok(Branches::MultiModal { force, maxima: curve.local_maxima.clone() });
    }
    if force > curve.f_max {
        return Ok(Branches::NoStationarySolution { force, f_max: curve.f_max });
    }
    if force == 0.0 {
        return Ok(Branches::Stationary { force, v_minus: 0.0, v_plus: f64::INFINITY });
    }
    let dir = pad(&curve.direction);
    let f = |s: f64| speed_force(model, dir, curve.method, s).map(|p| p.0);
    let target = |s: f64| f(s).map(|x| x - force);
    let limit = tol * curve.f_max;
    let v_minus = bisect(&target, 0.0, curve.v_peak, limit, true)?;
    let mut hi = curve.v_peak * 2.0;
    let mut tries = 0;
    while target(hi)? > 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(Error::Numerical("upper branch not bracketed".into()));
        }
    }
    let v_plus = bisect(&target, curve.v_peak, hi, limit, false)?;
    Ok(Branches::Stationary { force, v_minus, v_plus })
}

/// Root of `g` on `[lo, hi]` where `g` is increasing (`rising`) or
/// decreasing.
fn bisect(g: &dyn Fn(f64) -> Result<f64>, mut lo: f64, mut hi: f64, limit: f64, rising: bool) -> Result<f64> {
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let val = g(mid)?;
        if val.abs() <= limit && hi - lo <= 1e-9 * hi.max(1e-300) {
            break;
        }
        if (val < 0.0) == rising {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub t_max: f64,
    /// Steps between records.
    pub record_every: usize,
    /// Modes with `Ŵ(k) ≥ wrap_threshold · Ŵ(0)` set the radiation front
    /// speed.
    pub wrap_threshold: f64,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings { t_max: 200.0, record_every: 10, wrap_threshold: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumTrajectory {
    pub times: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    /// Total energy including `−F·X`.
    pub energy: Vec<f64>,
    /// `‖β_t − Δ⁻¹W(X_t − ·)‖_∞` on the grid, `k = 0` excluded; absent for
    /// the memory solver.
    pub residual: Vec<f64>,
    /// Time at which the radiation front comes within `2a` of the
    /// particle's periodic image.
    pub wrap_time: Option<f64>,
    pub warning: Option<String>,
}

impl MomentumTrajectory {
    pub fn momentum_norm(&self) -> Vec<f64> {
        self.p.iter().map(|p| p.iter().map(|x| x * x).sum::<f64>().sqrt()).collect()
    }

    /// Largest `|H(t) − H(0)| / |H(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let h0 = self.energy[0];
        self.energy.iter().map(|h| (h - h0).abs()).fold(0.0, f64::max) / h0.abs().max(f64::MIN_POSITIVE)
    }
}

/// Speed of the fastest mode that carries a non-negligible share of `Ŵ`.
fn front_speed(model: &FrictionModel, threshold: f64) -> f64 {
    let a = model.potential.a;
    let k_cut = (2.0 * (1.0 / threshold).ln()).sqrt() / a;
    let (axis_k, _) = model.axis();
    let k_grid = axis_k.iter().cloned().fold(0.0, f64::max) * (model.d as f64).sqrt();
    model.group_speed(k_cut.min(k_grid))
}

fn wrap_time(model: &FrictionModel, threshold: f64) -> f64 {
    (model.l - 2.0 * model.potential.a) / front_speed(model, threshold)
}

fn energy(model: &FrictionModel, modes: &Modes, x: [f64; 3], p: [f64; 3], beta: &[C64], ph: &[C64]) -> f64 {
    let mut coupling = 0.0;
    let mut field = 0.0;
    for i in 0..beta.len() {
        coupling += modes.w[i] * (beta[i] * ph[i].conj()).re;
        field += modes.omega[i] * beta[i].norm_sqr();
    }
    dot(p, p) / (2.0 * model.m0) - dot(model.external_force(), x) + (2.0 * coupling + field) / modes.volume
}

fn residual(model: &FrictionModel, modes: &Modes, beta: &[C64], ph: &[C64]) -> f64 {
    let diff: Vec<C64> = (0..beta.len())
        .map(|i| if modes.omega[i] > 0.0 { beta[i] + ph[i] * (modes.w[i] / modes.omega[i]) } else { C64::new(0.0, 0.0) })
        .collect();
    let real = FieldState { n: model.n, d: model.d, beta_hat: diff }.to_real(model);
    real.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Per-mode coefficients of the exact field flow over `dt` with the
/// particle frozen: `e^{−iωdt}`, `(e^{−iωdt} − 1)/ω`, and the time
/// integrals `∫e^{−iωs}ds` and `∫(e^{−iωs} − 1)/ω ds`.
fn flow_coefficients(omega: f64, dt: f64) -> (C64, C64, C64, C64) {
    let z = omega * dt;
    let e = C64::from_polar(1.0, -z);
    if z.abs() < 1e-3 {
        // series in z to avoid cancellation
        let i = C64::new(0.0, 1.0);
        let src = dt * (-i - z / 2.0 + i * z * z / 6.0 + z * z * z / 24.0);
        let phi1 = dt * (1.0 - i * z / 2.0 - z * z / 6.0 + i * z * z * z / 24.0);
        let phi2 = dt * dt * (-i / 2.0 - z / 6.0 + i * z * z / 24.0 + z * z * z / 120.0);
        return (e, src, phi1, phi2);
    }
    let i = C64::new(0.0, 1.0);
    let src = (e - 1.0) / omega;
    let phi1 = (1.0 - e) / (i * omega);
    let phi2 = (phi1 - dt) / omega;
    (e, src, phi1, phi2)
}

/// Strang splitting: half a step of free motion under `F`, a full step of
/// the field with the particle frozen (exact in Fourier space, with the
/// momentum impulse integrated along the field), half a step of free
/// motion.
pub fn evolve_coupled(model: &FrictionModel, init: &ParticleState, field: &FieldState, settings: &RunSettings) -> Result<MomentumTrajectory> {
    model.validate()?;
    field.check(model)?;
    if init.x.len() != model.d || init.p.len() != model.d {
        return Err(Error::Structural("particle state has the wrong dimension".into()));
    }
    if !(settings.t_max > 0.0) || settings.record_every == 0 {
        return Err(Error::Parameter("t_max must be positive and record_every nonzero".into()));
    }
    let modes = model.modes();
    let max_omega = model.max_grid_omega();
    if model.dt * max_omega > 0.5 {
        return Err(Error::Parameter(format!(
            "dt = {} does not resolve the grid: dt · max ω = {:.3} > 0.5",
            model.dt,
            model.dt * max_omega
        )));
    }
    let n_steps = (settings.t_max / model.dt).round() as usize;
    let dt = model.dt;
    let coeffs: Vec<(C64, C64, C64, C64)> = modes.omega.iter().map(|&w| flow_coefficients(w, dt)).collect();
    let force = model.external_force();
    let m0 = model.m0;
    let inv_vol = 1.0 / modes.volume;
    let mut x = pad(&init.x);
    let mut p = pad(&init.p);
    let mut beta = field.beta_hat.clone();
    let t_wrap = wrap_time(model, settings.wrap_threshold);

    let mut traj = MomentumTrajectory {
        times: Vec::new(),
        p: Vec::new(),
        x: Vec::new(),
        energy: Vec::new(),
        residual: Vec::new(),
        wrap_time: None,
        warning: None,
    };
    let record = |t: f64, x: [f64; 3], p: [f64; 3], beta: &[C64], traj: &mut MomentumTrajectory| {
        let ph = modes.phases(model, x);
        traj.times.push(t);
        traj.p.push(p[..model.d].to_vec());
        traj.x.push(x[..model.d].to_vec());
        traj.energy.push(energy(model, &modes, x, p, beta, &ph));
        traj.residual.push(residual(model, &modes, beta, &ph));
        if t >= t_wrap && traj.wrap_time.is_none() {
            traj.wrap_time = Some(t);
            traj.warning = Some(format!(
                "box too small: radiation front reaches the periodic image from t = {t:.3} (L = {})",
                model.l
            ));
        }
    };
    record(0.0, x, p, &beta, &mut traj);
    let free = |x: &mut [f64; 3], p: &mut [f64; 3], h: f64| {
        for a in 0..3 {
            x[a] += p[a] / m0 * h + force[a] * h * h / (2.0 * m0);
            p[a] += force[a] * h;
        }
    };
    for step in 1..=n_steps {
        free(&mut x, &mut p, dt / 2.0);
        let ph = modes.phases(model, x);
        let mut impulse = [0.0; 3];
        for i in 0..beta.len() {
            let w = modes.w[i];
            if w == 0.0 {
                continue;
            }
            let (e, src, phi1, phi2) = coeffs[i];
            let s = ph[i] * w;
            let integral = beta[i] * phi1 + s * phi2;
            let im = (integral * ph[i].conj()).im * w;
            let k = modes.k[i];
            for a in 0..3 {
                impulse[a] += k[a] * im;
            }
            beta[i] = beta[i] * e + s * src;
        }
        for a in 0..3 {
            p[a] += 2.0 * inv_vol * impulse[a];
        }
        free(&mut x, &mut p, dt / 2.0);
        if p.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("particle state became non-finite at step {step}")));
        }
        if step % settings.record_every == 0 || step == n_steps {
            record(step as f64 * dt, x, p, &beta, &mut traj);
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemorySettings {
    pub t_max: f64,
    /// Quadrature step of the history integral; an integer multiple of
    /// the model's `dt`.
    pub history_step: f64,
}

/// Solves the closed momentum equation obtained by eliminating the field
/// with its Duhamel solution,
///
/// ```text
/// Ṗ_t = F + 2L^{−d} Σ_k k Ŵ Im(e^{−iωt} β̂_0 e^{ik·X_t})
///       − 2L^{−d} ∫₀ᵗ Σ_k k Ŵ² cos(k·(X_t − X_s) − ω(t − s)) ds,
/// ```
///
/// with trapezoid quadrature in `s` and velocity-Verlet steps. For the
/// ideal dispersion the mode sum factorizes over axes.
pub fn memory_evolve(model: &FrictionModel, init: &ParticleState, field: &FieldState, settings: &MemorySettings) -> Result<MomentumTrajectory> {
    model.validate()?;
    field.check(model)?;
    if model.dispersion != Dispersion::Ideal {
        return Err(Error::Parameter("the memory solver factorizes only for the ideal dispersion".into()));
    }
    if init.x.len() != model.d || init.p.len() != model.d {
        return Err(Error::Structural("particle state has the wrong dimension".into()));
    }
    let h = settings.history_step;
    let ratio = h / model.dt;
    if !(h > 0.0) || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
        return Err(Error::Parameter(format!("history step {h} is not a positive multiple of dt = {}", model.dt)));
    }
    let n_steps = (settings.t_max / h).round() as usize;
    let d = model.d;
    let n = model.n;
    let (axis_k, axis_g) = model.axis();
    let g2: Vec<f64> = axis_g.iter().map(|g| g * g).collect();
    let w0sq = model.w_hat0().powi(2);
    let volume = model.l.powi(d as i32);
    let lag_phase: Vec<Vec<C64>> =
        (0..=n_steps).map(|j| axis_k.iter().map(|k| C64::from_polar(1.0, -k * k * j as f64 * h)).collect()).collect();
    let has_initial = field.beta_hat.iter().any(|z| z.norm_sqr() > 0.0);
    let modes = has_initial.then(|| model.modes());
    let force = model.external_force();
    let m0 = model.m0;

    // e^{ik_m X_a} per recorded time and axis
    let mut pos_phase: Vec<Vec<Vec<C64>>> = Vec::with_capacity(n_steps + 1);
    let axis_phase = |x: [f64; 3]| -> Vec<Vec<C64>> {
        (0..d).map(|a| axis_k.iter().map(|k| C64::from_polar(1.0, k * x[a])).collect()).collect()
    };

    let accel = |t_idx: usize, x: [f64; 3], pos_phase: &Vec<Vec<Vec<C64>>>| -> [f64; 3] {
        let mut out = force;
        if let Some(modes) = &modes {
            let t = t_idx as f64 * h;
            let ph = modes.phases(model, x);
            let mut acc = [0.0; 3];
            for i in 0..modes.k.len() {
                let z = field.beta_hat[i] * C64::from_polar(1.0, -modes.omega[i] * t) * ph[i].conj();
                for a in 0..3 {
                    acc[a] += modes.k[i][a] * modes.w[i] * z.im;
                }
            }
            for a in 0..3 {
                out[a] += 2.0 * acc[a] / volume;
            }
        }
        let now = &pos_phase[t_idx];
        let mut hist = [0.0; 3];
        for j in 0..t_idx {
            let then = &pos_phase[j];
            let lag = &lag_phase[t_idx - j];
            let mut b = [C64::new(0.0, 0.0); 3];
            let mut a_sum = [C64::new(0.0, 0.0); 3];
            for ax in 0..d {
                for m in 0..n {
                    if g2[m] == 0.0 {
                        continue;
                    }
                    let z = now[ax][m] * then[ax][m].conj() * lag[m] * g2[m];
                    b[ax] += z;
                    a_sum[ax] += z * axis_k[m];
                }
            }
            let weight = if j == 0 { 0.5 } else { 1.0 };
            for ax in 0..d {
                let mut prod = a_sum[ax];
                for other in 0..d {
                    if other != ax {
                        prod *= b[other];
                    }
                }
                hist[ax] += weight * prod.re;
            }
        }
        for a in 0..3 {
            out[a] -= 2.0 * w0sq * h * hist[a] / volume;
        }
        out
    };

    let mut x = pad(&init.x);
    let mut p = pad(&init.p);
    pos_phase.push(axis_phase(x));
    let mut f_now = accel(0, x, &pos_phase);
    let mut traj = MomentumTrajectory {
        times: vec![0.0],
        p: vec![p[..d].to_vec()],
        x: vec![x[..d].to_vec()],
        energy: Vec::new(),
        residual: Vec::new(),
        wrap_time: None,
        warning: None,
    };
    for step in 1..=n_steps {
        for a in 0..3 {
            x[a] += p[a] / m0 * h + f_now[a] * h * h / (2.0 * m0);
        }
        pos_phase.push(axis_phase(x));
        let f_next = accel(step, x, &pos_phase);
        for a in 0..3 {
            p[a] += 0.5 * h * (f_now[a] + f_next[a]);
        }
        f_now = f_next;
        if p.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("momentum became non-finite at step {step}")));
        }
        traj.times.push(step as f64 * h);
        traj.p.push(p[..d].to_vec());
        traj.x.push(x[..d].to_vec());
    }
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Exponent `α` of `|P_t| ~ t^α` fitted on the envelope.
    pub alpha: f64,
    /// 95% interval from the regression standard error.
    pub ci: (f64, f64),
    pub window: (f64, f64),
    /// Per-bin maxima `(t, |P|)` used for the fit.
    pub envelope: Vec<(f64, f64)>,
    /// `sup_t (1 + t)^{1/2 + δ} |P_t|` for each probed `δ`.
    pub bdelta: Vec<(f64, f64)>,
    /// Log-log slope of the field residual over the window.
    pub residual_slope: f64,
    pub residual_decreasing: bool,
}

/// Envelope bins per octave of time.
pub const BINS_PER_OCTAVE: f64 = 2.0;

/// Power-law fit of the `|P_t|` envelope on the last decade of time.
pub fn decay_fit(traj: &MomentumTrajectory, delta_probe: &[f64]) -> Result<DecayFit> {
    let t_end = *traj.times.last().ok_or_else(|| Error::Parameter("empty trajectory".into()))?;
    let t_start = t_end / 10.0;
    if let Some(tw) = traj.wrap_time {
        if tw <= t_end {
            return Err(Error::Precondition(format!(
                "wrap-around from t = {tw:.3} lies inside the fit window [{t_start:.3}, {t_end:.3}]"
            )));
        }
    }
    let pn = traj.momentum_norm();
    let ratio = 2f64.powf(1.0 / BINS_PER_OCTAVE);
    let mut envelope = Vec::new();
    let mut lo = t_start;
    while lo < t_end * (1.0 - 1e-12) {
        let hi = (lo * ratio).min(t_end);
        let best = traj
            .times
            .iter()
            .zip(&pn)
            .filter(|(t, _)| **t >= lo && **t <= hi)
            .fold(None, |acc: Option<(f64, f64)>, (t, p)| match acc {
                Some(a) if a.1 >= *p => Some(a),
                _ => Some((*t, *p)),
            });
        if let Some(b) = best {
            if b.1 > 0.0 {
                envelope.push(b);
            }
        }
        lo = hi;
    }
    if envelope.len() < 3 {
        return Err(Error::Parameter("fewer than three envelope points in the last decade".into()));
    }
    let (alpha, se) = ols(&envelope.iter().map(|(t, p)| (t.ln(), p.ln())).collect::<Vec<_>>());
    let bdelta = delta_probe
        .iter()
        .map(|&dl| (dl, traj.times.iter().zip(&pn).map(|(t, p)| (1.0 + t).powf(0.5 + dl) * p).fold(0.0, f64::max)))
        .collect();
    let (residual_slope, residual_decreasing) = if traj.residual.is_empty() {
        (f64::NAN, false)
    } else {
        let pts: Vec<(f64, f64)> = traj
            .times
            .iter()
            .zip(&traj.residual)
            .filter(|(t, r)| **t >= t_start && **r > 0.0)
            .map(|(t, r)| (t.ln(), r.ln()))
            .collect();
        let slope = if pts.len() >= 2 { ols(&pts).0 } else { f64::NAN };
        let first = traj.times.iter().position(|&t| t >= t_start).unwrap_or(0);
        let last = traj.residual.len() - 1;
        (slope, slope < 0.0 && traj.residual[last] < traj.residual[first])
    };
    Ok(DecayFit {
        alpha,
        ci: (alpha - 1.96 * se, alpha + 1.96 * se),
        window: (t_start, t_end),
        envelope,
        bdelta,
        residual_slope,
        residual_decreasing,
    })
}

/// Least-squares slope and its standard error.
fn ols(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    let se = if pts.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (slope, se)
}

/// Bundled models.
pub mod bundled {
    use super::*;

    /// Three-dimensional ideal gas on a grid fine enough for the grid sum
    /// to track the continuum shell within a few percent for `|v| ≥ 1`.
    pub fn model_g() -> FrictionModel {
        FrictionModel {
            d: 3,
            l: 96.0,
            n: 192,
            m0: 1.0,
            force: Vec::new(),
            potential: Potential { w0: 1.0, a: 1.0 },
            dispersion: Dispersion::Ideal,
            vstar: 0.0,
            dt: 0.004,
            eps_reg: 0.1,
        }
    }

    /// Model G with a Bogoliubov dispersion; sound speed `√2 · 2`.
    pub fn model_bogoliubov() -> FrictionModel {
        FrictionModel { dispersion: Dispersion::Bogoliubov, vstar: 2.0, ..model_g() }
    }

    /// Weakly coupled heavy particle on a 48³ grid. The box is wide enough
    /// that the radiation front stays clear of the periodic image up to
    /// `t = 200`.
    pub fn model_3d() -> FrictionModel {
        FrictionModel {
            d: 3,
            l: 180.0,
            n: 48,
            m0: 5.0,
            force: Vec::new(),
            potential: Potential { w0: 0.002, a: 7.5 },
            dispersion: Dispersion::Ideal,
            vstar: 0.0,
            dt: 0.2,
            eps_reg: 0.1,
        }
    }

    /// Particle at the origin with a small kick, field at rest.
    pub fn initial_3d(model: &FrictionModel) -> (ParticleState, FieldState) {
        (ParticleState { x: vec![0.0; 3], p: vec![0.25, 0.0, 0.0] }, FieldState::zero(model))
    }
}
