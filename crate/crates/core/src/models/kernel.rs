//! Connection kernels of the weight-dependent random connection model.

use crate::error::{Error, Result};
use crate::geometry::unit_ball_volume;
use crate::quadrature::{integrate, integrate_with_breaks};

/// Profile function `ρ`, always scaled as `min(1, amplitude · ρ(t))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    /// `ρ(t) = min(1, t^{-δ})`
    Polynomial { delta: f64 },
    /// `ρ(t) = 1[t ≤ 1]`, the `δ = ∞` case.
    Indicator,
}

/// Kernel `ρ((u_x ∧ u_y)^γ (u_x ∨ u_y)^γ' |x−y|^d)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConnectionKernel {
    pub gamma: f64,
    pub gamma_prime: f64,
    pub profile: Profile,
    pub amplitude: f64,
}

impl ConnectionKernel {
    /// `delta = f64::INFINITY` selects the indicator profile.
    pub fn new(gamma: f64, gamma_prime: f64, delta: f64) -> Result<Self> {
        let profile = if delta == f64::INFINITY {
            Profile::Indicator
        } else {
            Profile::Polynomial { delta }
        };
        let k = ConnectionKernel {
            gamma,
            gamma_prime,
            profile,
            amplitude: 1.0,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn gilbert() -> Self {
        ConnectionKernel {
            gamma: 0.0,
            gamma_prime: 0.0,
            profile: Profile::Indicator,
            amplitude: 1.0,
        }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Result<Self> {
        self.amplitude = amplitude;
        self.validate()?;
        Ok(self)
    }

    pub fn delta(&self) -> f64 {
        match self.profile {
            Profile::Polynomial { delta } => delta,
            Profile::Indicator => f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::param(format!("gamma must lie in [0,1), got {}", self.gamma)));
        }
        if !(self.gamma_prime >= 0.0 && self.gamma_prime < 2.0 - self.gamma) {
            return Err(Error::param(format!(
                "gamma' must lie in [0, 2-gamma), got {}",
                self.gamma_prime
            )));
        }
        if let Profile::Polynomial { delta } = self.profile {
            if !(delta > 1.0) || delta.is_nan() {
                return Err(Error::param(format!("delta must exceed 1, got {delta}")));
            }
        }
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::param(format!("amplitude must be nonnegative, got {}", self.amplitude)));
        }
        Ok(())
    }

    /// The scaled profile `min(1, A ρ(t))`.
    #[inline]
    pub fn rho(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        match self.profile {
            Profile::Indicator => {
                if t <= 1.0 {
                    self.amplitude.min(1.0)
                } else {
                    0.0
                }
            }
            Profile::Polynomial { delta } => {
                if t <= 0.0 {
                    return 1.0;
                }
                (self.amplitude * t.powf(-delta)).min(1.0)
            }
        }
    }

    /// Mark factor `(u∧v)^γ (u∨v)^γ'`.
    #[inline]
    pub fn mark_weight(&self, u: f64, v: f64) -> f64 {
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        lo.powf(self.gamma) * hi.powf(self.gamma_prime)
    }

    /// Connection probability of two vertices at Euclidean distance `r`.
    #[inline]
    pub fn probability(&self, u: f64, v: f64, r: f64, dim: usize) -> f64 {
        self.rho(self.mark_weight(u, v) * r.powi(dim as i32))
    }

    /// Upper bound on the probability of any pair whose smaller mark is `u`.
    #[inline]
    pub fn envelope(&self, u: f64, r: f64, dim: usize) -> f64 {
        self.rho(u.powf(self.gamma + self.gamma_prime) * r.powi(dim as i32))
    }

    /// Distance beyond which a vertex with the smaller mark `u` has no edges.
    pub fn reach(&self, u: f64, dim: usize) -> f64 {
        match self.profile {
            Profile::Indicator if self.amplitude > 0.0 => {
                u.powf(-(self.gamma + self.gamma_prime) / dim as f64)
            }
            Profile::Indicator => 0.0,
            Profile::Polynomial { .. } if self.amplitude == 0.0 => 0.0,
            Profile::Polynomial { .. } => f64::INFINITY,
        }
    }

    /// Kink of `ρ`: the argument where `A ρ(t)` crosses 1 or the indicator drops.
    pub(crate) fn kink(&self) -> f64 {
        match self.profile {
            Profile::Indicator => 1.0,
            Profile::Polynomial { delta } => self.amplitude.max(f64::MIN_POSITIVE).powf(1.0 / delta),
        }
    }

    /// `∫_x^∞ ρ(s) ds` in closed form.
    pub fn profile_tail(&self, x: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let x = x.max(0.0);
        match self.profile {
            Profile::Indicator => self.amplitude.min(1.0) * (1.0 - x).max(0.0),
            Profile::Polynomial { delta } => {
                let s = self.kink();
                let tail = |y: f64| self.amplitude * y.powf(1.0 - delta) / (delta - 1.0);
                if x < s {
                    (s - x) + tail(s)
                } else {
                    tail(x)
                }
            }
        }
    }

    /// `∫_0^∞ ρ(s) ds` by quadrature (kink placed on a node, tail mapped to (0,1]).
    pub fn profile_integral(&self) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        let s = self.kink();
        match self.profile {
            Profile::Indicator => integrate(|t| self.rho(t), 0.0, 1.0, 1e-12, 0.0).value,
            Profile::Polynomial { .. } => {
                let head = integrate(|t| self.rho(t), 0.0, s, 1e-12, 0.0).value;
                let tail = integrate(
                    |t: f64| if t <= 0.0 { 0.0 } else { self.rho(s / t) * s / (t * t) },
                    0.0,
                    1.0,
                    1e-11,
                    0.0,
                )
                .value;
                head + tail
            }
        }
    }

    /// `∫_0^1 ∫_0^1 ψ(w) / w du dv` with `w = (u∧v)^γ (u∨v)^γ'`, for bounded `ψ`.
    ///
    /// The inner variable is mapped through `s = u^{1-γ}` and the outer through
    /// `v = t^k`, which removes the integrable singularities at the origin.
    pub fn mark_integral<F: Fn(f64) -> f64>(&self, psi: F) -> f64 {
        let g = self.gamma;
        let gp = self.gamma_prime;
        let k = (2.0 / (2.0 - g - gp)).max(1.0);
        let inner = |v: f64| -> f64 {
            if v <= 0.0 {
                return 0.0;
            }
            let upper = v.powf(1.0 - g);
            let vw = v.powf(gp);
            let q = integrate(
                |s: f64| {
                    let u = if g == 0.0 { s } else { s.powf(1.0 / (1.0 - g)) };
                    psi(u.powf(g) * vw)
                },
                0.0,
                upper,
                1e-9,
                1e-300,
            );
            q.value * v.powf(-gp) / (1.0 - g)
        };
        let outer = integrate(
            |t: f64| {
                if t <= 0.0 {
                    return 0.0;
                }
                let v = t.powf(k);
                inner(v) * k * t.powf(k - 1.0)
            },
            0.0,
            1.0,
            1e-8,
            1e-300,
        );
        2.0 * outer.value
    }

    /// Mean number of neighbours beyond distance `radius` of a typical vertex
    /// in a Poisson cloud of the given intensity.
    pub fn neighbor_tail(&self, intensity: f64, dim: usize, radius: f64) -> f64 {
        let rd = radius.powi(dim as i32);
        intensity * unit_ball_volume(dim) * self.mark_integral(|w| self.profile_tail(w * rd))
    }
}

/// `λ ∫_{R^d} ∫_0^1 ∫_0^1 ρ((u∧v)^γ (u∨v)^γ' |z|^d) du dv dz`.
///
/// The spatial integral is reduced radially to `V_d / w · ∫_0^∞ ρ(s) ds`; the
/// remaining mark integral is evaluated by adaptive quadrature.
pub fn expected_degree(kernel: &ConnectionKernel, intensity: f64, dim: usize) -> Result<f64> {
    kernel.validate()?;
    if !(intensity > 0.0) {
        return Err(Error::param("intensity must be positive"));
    }
    if dim == 0 {
        return Err(Error::param("dimension must be at least 1"));
    }
    // γ < 1 and γ + γ' < 2 are enforced by validate(); both are needed for
    // the mark integral, δ > 1 for the radial one.
    if kernel.gamma >= 1.0 || kernel.gamma + kernel.gamma_prime >= 2.0 {
        return Err(Error::param("divergent degree integral"));
    }
    let radial = kernel.profile_integral();
    let marks = kernel.mark_integral(|_| 1.0);
    Ok(intensity * unit_ball_volume(dim) * radial * marks)
}

/// Kink locations of `u ↦ ρ(u^a · c)` on a log scale, clipped to `(lo, hi)`.
pub(crate) fn log_kinks(kernel: &ConnectionKernel, exponent: f64, scale: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut v = vec![lo];
    if exponent > 0.0 && scale > 0.0 {
        let t = kernel.kink();
        let x = ((t / scale).ln()) / exponent;
        if x > lo && x < hi {
            v.push(x);
        }
    }
    v.push(hi);
    v
}

/// Nested log-scale quadrature of `∫∫_{[lo,1]^2} f(u, v) du dv` exploiting symmetry
/// in `(u, v)`; `f` receives `(min, max)`.
///
/// `kinks(b)` lists the inner break points (log scale, from `ln lo` to `b`)
/// for `max = e^b`, and `outer` those of the outer integrand, from `ln lo` to 0.
pub(crate) fn symmetric_log_integral<F, K>(f: F, kinks: K, outer: &[f64], tol: f64) -> f64
where
    F: Fn(f64, f64) -> f64,
    K: Fn(f64) -> Vec<f64>,
{
    let inner = |b: f64| -> f64 {
        let v = b.exp();
        let breaks = kinks(b);
        let mut g = |a: f64| f(a.exp(), v) * a.exp();
        integrate_with_breaks(&mut g, &breaks, tol, 1e-300, 4000).value
    };
    let mut outer_fn = |b: f64| inner(b) * b.exp();
    2.0 * integrate_with_breaks(&mut outer_fn, outer, tol * 10.0, 1e-300, 4000).value
}
