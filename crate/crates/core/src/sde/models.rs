use crate::sde::{LyapunovDerivatives, LyapunovKind, SdeModel};

/// Componentwise double-well drift `b_i(x) = x_i − x_i³` on `ℝ^d` with the
/// polynomial Lyapunov functions `V(x) = c(1 + |x|^l)` and
/// `V̂(x) = c(1 + |x|^{l+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialDrift {
    dimension: usize,
    lyapunov_constant: f64,
    lyapunov_power: f64,
}

impl PolynomialDrift {
    /// Quadratic Lyapunov function (`l = 2`).
    pub fn new(dimension: usize, lyapunov_constant: f64) -> Self {
        Self::with_power(dimension, lyapunov_constant, 2.0)
    }

    pub fn with_power(dimension: usize, lyapunov_constant: f64, lyapunov_power: f64) -> Self {
        PolynomialDrift { dimension, lyapunov_constant, lyapunov_power }
    }

    pub fn lyapunov_constant(&self) -> f64 {
        self.lyapunov_constant
    }

    pub fn lyapunov_power(&self) -> f64 {
        self.lyapunov_power
    }

    fn radial(&self, x: &[f64], power: f64) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.lyapunov_constant * (1.0 + r2.powf(power / 2.0))
    }
}

impl SdeModel for PolynomialDrift {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = v - v * v * v;
        }
    }

    fn lyapunov(&self, x: &[f64]) -> f64 {
        self.radial(x, self.lyapunov_power)
    }

    fn lyapunov_hat(&self, x: &[f64]) -> Option<f64> {
        Some(self.radial(x, self.lyapunov_power + 1.0))
    }

    fn drift_jacobian(&self, x: &[f64]) -> Option<Vec<f64>> {
        let d = self.dimension;
        let mut jac = vec![0.0; d * d];
        for (i, &v) in x.iter().enumerate() {
            jac[i * d + i] = 1.0 - 3.0 * v * v;
        }
        Some(jac)
    }

    fn lyapunov_derivatives(&self, kind: LyapunovKind, x: &[f64]) -> Option<LyapunovDerivatives> {
        let l = match kind {
            LyapunovKind::Primary => self.lyapunov_power,
            LyapunovKind::Hat => self.lyapunov_power + 1.0,
        };
        let c = self.lyapunov_constant;
        let d = self.dimension as f64;
        let r2: f64 = x.iter().map(|v| v * v).sum();
        // ∇|x|^l = l|x|^{l−2} x,  Δ|x|^l = l(l + d − 2)|x|^{l−2}
        let r_pow = if r2 == 0.0 {
            if l == 2.0 {
                1.0
            } else if l > 2.0 {
                0.0
            } else {
                return None;
            }
        } else {
            r2.powf((l - 2.0) / 2.0)
        };
        Some(LyapunovDerivatives {
            value: c * (1.0 + r2.powf(l / 2.0)),
            gradient: x.iter().map(|v| c * l * r_pow * v).collect(),
            laplacian: c * l * (l + d - 2.0) * r_pow,
        })
    }

    fn name(&self) -> String {
        "polynomial".to_string()
    }
}

/// Linear drift `b(x) = −λx` with constant Lyapunov functions `V ≡ V̂ ≡ c`.
/// An Ornstein–Uhlenbeck process, used to calibrate the harness.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDrift {
    dimension: usize,
    rate: f64,
    lyapunov_level: f64,
}

impl LinearDrift {
    pub fn new(dimension: usize, rate: f64, lyapunov_level: f64) -> Self {
        LinearDrift { dimension, rate, lyapunov_level }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl SdeModel for LinearDrift {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite())
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = -self.rate * v;
        }
    }

    fn lyapunov(&self, _x: &[f64]) -> f64 {
        self.lyapunov_level
    }

    fn lyapunov_hat(&self, _x: &[f64]) -> Option<f64> {
        Some(self.lyapunov_level)
    }

    fn drift_jacobian(&self, _x: &[f64]) -> Option<Vec<f64>> {
        let d = self.dimension;
        let mut jac = vec![0.0; d * d];
        for i in 0..d {
            jac[i * d + i] = -self.rate;
        }
        Some(jac)
    }

    fn lyapunov_derivatives(&self, _kind: LyapunovKind, _x: &[f64]) -> Option<LyapunovDerivatives> {
        Some(LyapunovDerivatives {
            value: self.lyapunov_level,
            gradient: vec![0.0; self.dimension],
            laplacian: 0.0,
        })
    }

    fn name(&self) -> String {
        "linear".to_string()
    }
}

type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type DomainFn = dyn Fn(&[f64]) -> bool + Send + Sync;

/// A model assembled from closures. The domain defaults to all of `ℝ^d`.
pub struct FnModel {
    dimension: usize,
    drift: Box<DriftFn>,
    lyapunov: Box<ScalarFn>,
    lyapunov_hat: Option<Box<ScalarFn>>,
    domain: Option<Box<DomainFn>>,
}

impl FnModel {
    pub fn new(
        dimension: usize,
        drift: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        lyapunov: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        FnModel { dimension, drift: Box::new(drift), lyapunov: Box::new(lyapunov), lyapunov_hat: None, domain: None }
    }

    pub fn with_domain(mut self, domain: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Box::new(domain));
        self
    }

    pub fn with_lyapunov_hat(mut self, lyapunov_hat: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        self.lyapunov_hat = Some(Box::new(lyapunov_hat));
        self
    }
}

impl SdeModel for FnModel {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        match &self.domain {
            Some(domain) => domain(x),
            None => x.iter().all(|v| v.is_finite()),
        }
    }

    fn drift(&self, x: &[f64], out: &mut [f64]) {
        (self.drift)(x, out)
    }

    fn lyapunov(&self, x: &[f64]) -> f64 {
        (self.lyapunov)(x)
    }

    fn lyapunov_hat(&self, x: &[f64]) -> Option<f64> {
        self.lyapunov_hat.as_ref().map(|f| f(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_well_values() {
        let m = PolynomialDrift::new(1, 1.0);
        let mut b = [0.0];
        m.drift(&[2.0], &mut b);
        assert_eq!(b[0], -6.0);
        assert_eq!(m.lyapunov(&[2.0]), 5.0);
        assert_eq!(m.lyapunov_hat(&[2.0]), Some(9.0));
    }

    #[test]
    fn polynomial_derivatives_match_closed_form() {
        let m = PolynomialDrift::new(2, 1.5);
        let ld = m.lyapunov_derivatives(LyapunovKind::Primary, &[1.0, -2.0]).unwrap();
        assert_eq!(ld.value, 1.5 * 6.0);
        assert_eq!(ld.gradient, vec![3.0, -6.0]);
        assert_eq!(ld.laplacian, 1.5 * 2.0 * 2.0);
        // |x|³ in d = 2: ∇ = 3|x| x, Δ = 9|x|
        let ld = m.lyapunov_derivatives(LyapunovKind::Hat, &[3.0, 4.0]).unwrap();
        assert!((ld.gradient[0] - 1.5 * 3.0 * 5.0 * 3.0).abs() < 1e-12);
        assert!((ld.laplacian - 1.5 * 9.0 * 5.0).abs() < 1e-12);
    }

    #[test]
    fn linear_is_ou() {
        let m = LinearDrift::new(2, 0.5, 1.0);
        let mut b = [0.0; 2];
        m.drift(&[2.0, -4.0], &mut b);
        assert_eq!(b, [-1.0, 2.0]);
        assert_eq!(m.lyapunov(&[100.0, 0.0]), 1.0);
    }
}
