//! Singular repulsive particles on the line.
//!
//! `N` ordered particles repel pairwise with force `|gap|^{−α}` and feel a
//! confinement force `−Q'`:
//!
//! ```text
//! dX^i = (1/N)[Σ_{j<i} (X^i − X^j)^{−α} − Σ_{j>i} (X^j − X^i)^{−α}] dt − Q'(X^i) dt + √(2σ/N) dW^i
//! ```
//!
//! The state lives in the ordered cone `D_N = {x_1 < x_2 < … < x_N}` and the
//! interaction is the gradient of
//! `U_N(x) = (1/N) Σ_{i<j} |x^i − x^j|^{1−α} / (α − 1)`.
//! The Lyapunov functions are
//! `V_N = c + N^{2/(α−1)} U_N^{(α+1)/(α−1)}` and
//! `V̂_N = c + N^{3/(α−1)} U_N^{(α+2)/(α−1)}`.
//!
//! Particle numbers in errors and gap summaries are 1-based.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sde::{LyapunovDerivatives, LyapunovKind, SdeModel, SdeProblem};

/// Gaps at or below this are treated as coincident particles.
pub const MIN_GAP: f64 = 1e-14;

type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Confinement potential `Q`, given through `Q'` and `Q''`.
#[derive(Clone)]
pub enum Confinement {
    None,
    /// `Q(x) = k x² / 2`, so `Q'(x) = k x` with Lipschitz constant `k`.
    Quadratic { stiffness: f64 },
    Custom { derivative: ScalarMap, second_derivative: ScalarMap, lipschitz: f64 },
}

impl fmt::Debug for Confinement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Confinement::None => write!(f, "None"),
            Confinement::Quadratic { stiffness } => f.debug_struct("Quadratic").field("stiffness", stiffness).finish(),
            Confinement::Custom { lipschitz, .. } => f.debug_struct("Custom").field("lipschitz", lipschitz).finish(),
        }
    }
}

impl Confinement {
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Confinement::None => 0.0,
            Confinement::Quadratic { stiffness } => stiffness * x,
            Confinement::Custom { derivative, .. } => derivative(x),
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match self {
            Confinement::None => 0.0,
            Confinement::Quadratic { stiffness } => *stiffness,
            Confinement::Custom { second_derivative, .. } => second_derivative(x),
        }
    }

    /// Declared Lipschitz constant `L_Q` of `Q'`.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Confinement::None => 0.0,
            Confinement::Quadratic { stiffness } => stiffness.abs(),
            Confinement::Custom { lipschitz, .. } => *lipschitz,
        }
    }
}

/// Parameters of the particle system.
#[derive(Debug, Clone)]
pub struct ParticleSystemSpec {
    pub particle_count: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub confinement: Confinement,
    pub initial_positions: Vec<f64>,
    /// Additive constant `c` in `V_N` and `V̂_N`.
    pub lyapunov_constant: f64,
}

impl ParticleSystemSpec {
    /// Quadratic confinement with unit stiffness, `c = 1`, and `N` particles
    /// spaced `spacing` apart, centred on the origin.
    pub fn equispaced(particle_count: usize, alpha: f64, sigma: f64, spacing: f64) -> Self {
        ParticleSystemSpec {
            particle_count,
            alpha,
            sigma,
            confinement: Confinement::Quadratic { stiffness: 1.0 },
            initial_positions: equispaced_positions(particle_count, spacing),
            lyapunov_constant: 1.0,
        }
    }

    /// Noise intensity `β = √(2σ/N)`.
    pub fn noise_intensity(&self) -> f64 {
        (2.0 * self.sigma / self.particle_count as f64).sqrt()
    }
}

/// `N` points with the given spacing, symmetric about zero.
pub fn equispaced_positions(count: usize, spacing: f64) -> Vec<f64> {
    let centre = (count as f64 - 1.0) / 2.0;
    (0..count).map(|k| (k as f64 - centre) * spacing).collect()
}

/// Smallest consecutive gap, capped at one.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GapSummary {
    /// `l(x) = min(raw_min, 1)`.
    pub min_gap: f64,
    /// 1-based number of the upper particle of the smallest gap, in `2..=N`.
    pub argmin_index: usize,
    pub raw_min: f64,
    /// `false` when the raw minimum is not positive (or below [`MIN_GAP`]).
    pub in_domain: bool,
}

pub fn min_gap(x: &[f64]) -> Result<GapSummary> {
    if x.len() < 2 {
        return Err(Error::usage(format!("min gap needs at least two particles, got {}", x.len())));
    }
    let (argmin, raw_min) = x
        .windows(2)
        .map(|w| w[1] - w[0])
        .enumerate()
        .fold((0, f64::INFINITY), |best, (k, g)| if g < best.1 { (k, g) } else { best });
    Ok(GapSummary {
        min_gap: raw_min.min(1.0),
        argmin_index: argmin + 2,
        raw_min,
        in_domain: raw_min > MIN_GAP,
    })
}

/// `g^{−α}` with an integer fast path.
#[derive(Debug, Clone, Copy)]
struct InversePower {
    alpha: f64,
    integer: Option<i32>,
}

impl InversePower {
    fn new(alpha: f64) -> Self {
        let integer = (alpha.fract() == 0.0 && alpha <= 32.0).then_some(alpha as i32);
        InversePower { alpha, integer }
    }

    #[inline]
    fn eval(&self, g: f64) -> f64 {
        match self.integer {
            Some(k) => 1.0 / g.powi(k),
            None => g.powf(-self.alpha),
        }
    }
}

/// The validated particle system; an [`SdeModel`] on `D_N`.
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    spec: ParticleSystemSpec,
    power: InversePower,
    n: f64,
}

impl ParticleSystem {
    pub fn new(spec: ParticleSystemSpec) -> Result<Self> {
        if spec.particle_count < 2 {
            return Err(Error::usage(format!("particle_count must be at least 2, got {}", spec.particle_count)));
        }
        if !(spec.alpha > 1.0 && spec.alpha.is_finite()) {
            return Err(Error::usage(format!("alpha must exceed 1, got {}", spec.alpha)));
        }
        if !(spec.sigma > 0.0 && spec.sigma.is_finite()) {
            return Err(Error::usage(format!("sigma must be positive, got {}", spec.sigma)));
        }
        if !(spec.lyapunov_constant > 0.0 && spec.lyapunov_constant.is_finite()) {
            return Err(Error::usage(format!("lyapunov_constant must be positive, got {}", spec.lyapunov_constant)));
        }
        if spec.initial_positions.len() != spec.particle_count {
            return Err(Error::usage(format!(
                "initial positions have {} entries for {} particles",
                spec.initial_positions.len(),
                spec.particle_count
            )));
        }
        let sys = ParticleSystem { power: InversePower::new(spec.alpha), n: spec.particle_count as f64, spec };
        sys.check_ordered(&sys.spec.initial_positions)
            .map_err(|e| Error::usage(format!("initial positions must be strictly increasing: {e}")))?;
        Ok(sys)
    }

    pub fn spec(&self) -> &ParticleSystemSpec {
        &self.spec
    }

    pub fn particle_count(&self) -> usize {
        self.spec.particle_count
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha
    }

    /// Exponents `(r, s)` with `V = c + N^r U_N^s`.
    pub fn lyapunov_exponents(&self, kind: LyapunovKind) -> (f64, f64) {
        let a = self.spec.alpha - 1.0;
        match kind {
            LyapunovKind::Primary => (2.0 / a, 1.0 + 2.0 / a),
            LyapunovKind::Hat => (3.0 / a, 1.0 + 3.0 / a),
        }
    }

    fn ordered(&self, x: &[f64]) -> bool {
        x.len() == self.spec.particle_count && x.iter().all(|v| v.is_finite()) && x.windows(2).all(|w| w[1] - w[0] > MIN_GAP)
    }

    /// `Ok` iff `x ∈ D_N` (with gaps above [`MIN_GAP`]).
    pub fn check_ordered(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.spec.particle_count {
            return Err(Error::usage(format!(
                "configuration has {} positions for {} particles",
                x.len(),
                self.spec.particle_count
            )));
        }
        if let Some(bad) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::usage(format!("position {} is not finite", bad + 1)));
        }
        for (k, w) in x.windows(2).enumerate() {
            let gap = w[1] - w[0];
            if gap <= MIN_GAP {
                return Err(Error::DomainBoundary { lower: k + 1, upper: k + 2, gap });
            }
        }
        Ok(())
    }

    /// Adds the interaction force `−∇U_N` into `force` and returns
    /// `Σ_{i<j} g^{1−α}`.
    fn accumulate(&self, x: &[f64], force: &mut [f64]) -> f64 {
        let mut energy = 0.0;
        let inv_n = 1.0 / self.n;
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                let g = x[j] - x[i];
                let f = self.power.eval(g);
                energy += f * g;
                force[i] -= f * inv_n;
                force[j] += f * inv_n;
            }
        }
        energy
    }

    fn energy_from_sums(&self, pair_sum: f64) -> f64 {
        pair_sum / ((self.spec.alpha - 1.0) * self.n)
    }

    fn lyapunov_from_energy(&self, kind: LyapunovKind, u: f64) -> f64 {
        let (r, s) = self.lyapunov_exponents(kind);
        self.spec.lyapunov_constant + self.n.powf(r) * u.powf(s)
    }

    /// `U_N(x)`.
    pub fn interaction_energy(&self, x: &[f64]) -> Result<f64> {
        self.check_ordered(x)?;
        let mut scratch = vec![0.0; x.len()];
        Ok(self.energy_from_sums(self.accumulate(x, &mut scratch)))
    }

    /// `∇U_N(x)`.
    pub fn interaction_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_ordered(x)?;
        let mut force = vec![0.0; x.len()];
        self.accumulate(x, &mut force);
        Ok(force.into_iter().map(|f| -f).collect())
    }

    /// Row-major Hessian of `U_N`.
    pub fn interaction_hessian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_ordered(x)?;
        Ok(self.hessian_unchecked(x))
    }

    fn hessian_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut h = vec![0.0; d * d];
        let a = self.spec.alpha;
        for i in 0..d {
            for j in i + 1..d {
                let g = x[j] - x[i];
                // u''(g) for the pair term g^{1−α}/((α−1)N)
                let c = a * self.power.eval(g) / g / self.n;
                h[i * d + i] += c;
                h[j * d + j] += c;
                h[i * d + j] -= c;
                h[j * d + i] -= c;
            }
        }
        h
    }

    /// `ΔU_N(x)`.
    pub fn interaction_laplacian(&self, x: &[f64]) -> Result<f64> {
        self.check_ordered(x)?;
        Ok(self.laplacian_unchecked(x))
    }

    fn laplacian_unchecked(&self, x: &[f64]) -> f64 {
        let a = self.spec.alpha;
        let mut total = 0.0;
        for i in 0..x.len() {
            for j in i + 1..x.len() {
                let g = x[j] - x[i];
                total += 2.0 * a * self.power.eval(g) / g;
            }
        }
        total / self.n
    }

    /// `b(x) = −∇U_N(x) − (Q'(x^1), …, Q'(x^N))`.
    pub fn drift(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_ordered(x)?;
        let mut out = vec![0.0; x.len()];
        SdeModel::drift(self, x, &mut out);
        Ok(out)
    }

    /// Row-major Jacobian of the drift, `−∇²U_N − diag(Q'')`.
    pub fn drift_jacobian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_ordered(x)?;
        Ok(self.jacobian_unchecked(x))
    }

    fn jacobian_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut jac = self.hessian_unchecked(x);
        jac.iter_mut().for_each(|v| *v = -*v);
        for (i, &xi) in x.iter().enumerate() {
            jac[i * d + i] -= self.spec.confinement.second_derivative(xi);
        }
        jac
    }

    /// `V_N(x)`.
    pub fn lyapunov_vn(&self, x: &[f64]) -> Result<f64> {
        Ok(self.lyapunov_from_energy(LyapunovKind::Primary, self.interaction_energy(x)?))
    }

    /// `V̂_N(x)`.
    pub fn lyapunov_vn_hat(&self, x: &[f64]) -> Result<f64> {
        Ok(self.lyapunov_from_energy(LyapunovKind::Hat, self.interaction_energy(x)?))
    }

    /// Value, gradient and Laplacian of `V = c + K U^s`:
    /// `∇V = K s U^{s−1} ∇U`, `ΔV = K s [(s−1) U^{s−2} |∇U|² + U^{s−1} ΔU]`.
    pub fn lyapunov_derivatives_at(&self, kind: LyapunovKind, x: &[f64]) -> Result<LyapunovDerivatives> {
        self.check_ordered(x)?;
        let grad_u = self.interaction_gradient(x)?;
        let u = self.interaction_energy(x)?;
        let lap_u = self.laplacian_unchecked(x);
        let (r, s) = self.lyapunov_exponents(kind);
        let k = self.n.powf(r);
        let grad_sq: f64 = grad_u.iter().map(|g| g * g).sum();
        let outer = k * s * u.powf(s - 1.0);
        Ok(LyapunovDerivatives {
            value: self.spec.lyapunov_constant + k * u.powf(s),
            gradient: grad_u.iter().map(|g| outer * g).collect(),
            laplacian: k * s * ((s - 1.0) * u.powf(s - 2.0) * grad_sq + u.powf(s - 1.0) * lap_u),
        })
    }
}

impl SdeModel for ParticleSystem {
    fn dimension(&self) -> usize {
        self.spec.particle_count
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        self.ordered(x)
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        self.lyapunov_and_drift(x, out);
    }

    fn lyapunov(&self, x: &[f64]) -> f64 {
        let mut scratch = vec![0.0; x.len()];
        let u = self.energy_from_sums(self.accumulate(x, &mut scratch));
        self.lyapunov_from_energy(LyapunovKind::Primary, u)
    }

    fn lyapunov_hat(&self, x: &[f64]) -> Option<f64> {
        let mut scratch = vec![0.0; x.len()];
        let u = self.energy_from_sums(self.accumulate(x, &mut scratch));
        Some(self.lyapunov_from_energy(LyapunovKind::Hat, u))
    }

    fn lyapunov_and_drift(&self, x: &[f64], drift: &mut [f64]) -> f64 {
        drift.fill(0.0);
        let sums = self.accumulate(x, drift);
        for (b, &xi) in drift.iter_mut().zip(x) {
            *b -= self.spec.confinement.derivative(xi);
        }
        self.lyapunov_from_energy(LyapunovKind::Primary, self.energy_from_sums(sums))
    }

    fn drift_jacobian(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(self.jacobian_unchecked(x))
    }

    fn lyapunov_derivatives(&self, kind: LyapunovKind, x: &[f64]) -> Option<LyapunovDerivatives> {
        self.lyapunov_derivatives_at(kind, x).ok()
    }

    fn name(&self) -> String {
        "particles".to_string()
    }
}

/// The particle system as an [`SdeProblem`] over `[0, horizon]`, with
/// `β = √(2σ/N)` and `x0` the initial positions.
pub fn build_problem(spec: &ParticleSystemSpec, horizon: f64) -> Result<SdeProblem> {
    let system = ParticleSystem::new(spec.clone())?;
    let x0 = spec.initial_positions.clone();
    SdeProblem::new(Arc::new(system), spec.noise_intensity(), x0, horizon)
}
