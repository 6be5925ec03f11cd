//! Model parameters, the split double-well potential, source-term switches,
//! the Ginzburg-Landau energy and the scaling to dimensionless form.

use crate::error::{Error, Result};
use crate::fem::{nonlinear_load, FeSpace};
use crate::field::NodalField;
use crate::scalar::Scalar;

/// Coefficients of the discrete tumour model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub p0: f64,
    pub delta: f64,
    pub d_phi: f64,
    pub d_sigma: f64,
    pub gamma: f64,
    pub chi: f64,
    pub eps: f64,
    /// Apoptosis plus therapy rate.
    pub c: f64,
    /// Optional static nodal override of `c`.
    pub c_field: Option<NodalField>,
    pub kappa: f64,
    pub proliferation: Rate,
    pub death: Rate,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            p0: 0.1,
            delta: 0.001,
            d_phi: 0.00053,
            d_sigma: 0.001,
            gamma: 2.5,
            chi: 0.5,
            eps: 0.025,
            c: 0.02,
            c_field: None,
            kappa: 0.12,
            proliferation: Rate::Clamp,
            death: Rate::Clamp,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("P0", self.p0),
            ("delta", self.delta),
            ("D_phi", self.d_phi),
            ("D_sigma", self.d_sigma),
            ("Gamma", self.gamma),
            ("chi", self.chi),
            ("eps", self.eps),
            ("c", self.c),
            ("kappa", self.kappa),
        ];
        for (name, v) in named {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        for (name, v) in [("delta", self.delta), ("Gamma", self.gamma), ("eps", self.eps)] {
            if v == 0.0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if let Some(f) = &self.c_field {
            if f.values().iter().any(|&v| v < 0.0) {
                return Err(Error::Config("c field must be non-negative".into()));
            }
        }
        Ok(())
    }

    /// Death rate at a node.
    pub fn c_at(&self, node: usize) -> f64 {
        match &self.c_field {
            Some(f) => f[node],
            None => self.c,
        }
    }
}

/// A bounded switching function used for proliferation and death.
#[derive(Debug, Clone, Copy)]
pub enum Rate {
    /// `clamp(s, 0, 1)`.
    Clamp,
    /// Function and its derivative.
    Custom(fn(f64) -> f64, fn(f64) -> f64),
}

impl PartialEq for Rate {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Rate::Clamp, Rate::Clamp) => true,
            (Rate::Custom(f, df), Rate::Custom(g, dg)) => std::ptr::fn_addr_eq(*f, *g) && std::ptr::fn_addr_eq(*df, *dg),
            _ => false,
        }
    }
}

impl Rate {
    #[inline]
    pub fn value(&self, s: f64) -> f64 {
        match self {
            Rate::Clamp => proliferation(s),
            Rate::Custom(f, _) => f(s),
        }
    }

    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        match self {
            Rate::Clamp => proliferation_prime(s),
            Rate::Custom(_, df) => df(s),
        }
    }
}

/// `F(r) = r^2 (r - 1)^2`.
#[inline]
pub fn potential<S: Scalar>(r: S) -> S {
    let t = r * (r - S::one());
    t * t
}

/// `F'(r) = 2r(r-1)(2r-1)`.
#[inline]
pub fn potential_prime<S: Scalar>(r: S) -> S {
    S::lit(2.0) * r * (r - S::one()) * (S::lit(2.0) * r - S::one())
}

/// Convex/concave parts of `F'` and their derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSplit<S> {
    pub dplus: S,
    pub dminus: S,
    pub ddplus: S,
    pub ddminus: S,
}

#[inline]
pub fn dpotential_plus<S: Scalar>(r: S) -> S {
    let m = r.min(S::zero());
    S::lit(4.0) * r * r * r + S::lit(2.0) * r - S::lit(6.0) * m * m
}

#[inline]
pub fn dpotential_minus<S: Scalar>(r: S) -> S {
    let m = r.max(S::zero());
    -S::lit(6.0) * m * m
}

#[inline]
pub fn ddpotential_plus<S: Scalar>(r: S) -> S {
    S::lit(12.0) * r * r + S::lit(2.0) - S::lit(12.0) * r.min(S::zero())
}

#[inline]
pub fn ddpotential_minus<S: Scalar>(r: S) -> S {
    -S::lit(12.0) * r.max(S::zero())
}

pub fn potential_split<S: Scalar>(r: S) -> PotentialSplit<S> {
    PotentialSplit {
        dplus: dpotential_plus(r),
        dminus: dpotential_minus(r),
        ddplus: ddpotential_plus(r),
        ddminus: ddpotential_minus(r),
    }
}

/// `P(s) = clamp(s, 0, 1)`.
#[inline]
pub fn proliferation<S: Scalar>(s: S) -> S {
    s.max(S::zero()).min(S::one())
}

/// Zero at the kinks.
#[inline]
pub fn proliferation_prime<S: Scalar>(s: S) -> S {
    if s > S::zero() && s < S::one() {
        S::one()
    } else {
        S::zero()
    }
}

#[inline]
pub fn death_term<S: Scalar>(s: S) -> S {
    proliferation(s)
}

#[inline]
pub fn death_prime<S: Scalar>(s: S) -> S {
    proliferation_prime(s)
}

/// `Q[Gamma F(phi)] + eps^2/2 phi^T K phi`.
pub fn gl_energy(space: &FeSpace, params: &ModelParams, phi: &NodalField) -> Result<f64> {
    let bulk: f64 = nonlinear_load(space, potential::<f64>, phi)?.iter().sum();
    let grad = space.stiffness().inner(phi.values(), phi.values());
    Ok(params.gamma * bulk + 0.5 * params.eps * params.eps * grad)
}

/// Dimensional parameters of the continuous model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nondimensionalizer {
    pub m_phi: f64,
    pub m_sigma: f64,
    pub p0: f64,
    pub gamma: f64,
    pub chi: f64,
    pub eps: f64,
    pub delta: f64,
    pub c: f64,
    pub kappa: f64,
}

impl Nondimensionalizer {
    /// Nutrient penetration length `sqrt(M_sigma Gamma / P0)`.
    pub fn length_scale(&self) -> Result<f64> {
        if !(self.p0 > 0.0) || !(self.m_sigma > 0.0) || !(self.gamma > 0.0) {
            return Err(Error::Config("P0, M_sigma and Gamma must be positive".into()));
        }
        Ok((self.m_sigma * self.gamma / self.p0).sqrt())
    }

    pub fn time_scale(&self) -> Result<f64> {
        self.length_scale()?;
        Ok(1.0 / self.p0)
    }

    /// Dimensionless coefficients. Time is in units of `1/P0` and space in
    /// units of the penetration length, so `P0 = Gamma = 1` and the nutrient
    /// diffusion `D_sigma / delta` is one.
    pub fn nondimensionalize(&self) -> Result<ModelParams> {
        let l = self.length_scale()?;
        let delta = self.delta * self.gamma;
        Ok(ModelParams {
            p0: 1.0,
            delta,
            d_phi: self.m_phi / self.m_sigma,
            d_sigma: delta,
            gamma: 1.0,
            chi: self.chi / self.gamma,
            eps: self.eps / (self.gamma.sqrt() * l),
            c: self.c / self.p0,
            c_field: None,
            kappa: self.kappa / self.p0,
            proliferation: Rate::Clamp,
            death: Rate::Clamp,
        })
    }

    /// Inverse of [`Self::nondimensionalize`] given the three reference scales.
    pub fn from_dimensionless(params: &ModelParams, p0: f64, gamma: f64, m_sigma: f64) -> Result<Self> {
        let mut nd = Nondimensionalizer {
            m_phi: params.d_phi * m_sigma,
            m_sigma,
            p0,
            gamma,
            chi: params.chi * gamma,
            eps: 0.0,
            delta: params.delta / gamma,
            c: params.c * p0,
            kappa: params.kappa * p0,
        };
        nd.eps = params.eps * gamma.sqrt() * nd.length_scale()?;
        Ok(nd)
    }

    pub fn to_dimensionless_time(&self, t: f64) -> Result<f64> {
        Ok(t / self.time_scale()?)
    }

    pub fn to_dimensionless_length(&self, x: f64) -> Result<f64> {
        Ok(x / self.length_scale()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::make_box_mesh;
    use proptest::prelude::*;
    use std::sync::Arc;

    #[test]
    fn split_values() {
        for r in [0.0f64, 0.5, 1.0] {
            assert_eq!(potential_prime(r), 0.0);
            let s = potential_split(r);
            assert!((s.dplus + s.dminus).abs() < 1e-15);
        }
        let s = potential_split(1.0);
        assert_eq!((s.dplus, s.dminus, s.ddplus, s.ddminus), (6.0, -6.0, 14.0, -12.0));
        let s = potential_split(-1.0);
        assert_eq!((s.dplus, s.dminus), (-12.0, 0.0));
        assert_eq!(potential_prime(-1.0), -12.0);
        assert_eq!(potential(0.5), 0.0625);
        assert_eq!(potential(0.5f32), 0.0625f32);
    }

    #[test]
    fn switches() {
        assert_eq!((proliferation(0.5), proliferation_prime(0.5)), (0.5, 1.0));
        assert_eq!((proliferation(-1.0), proliferation(2.0), proliferation_prime(2.0)), (0.0, 1.0, 0.0));
        assert_eq!((proliferation_prime(0.0), proliferation_prime(1.0)), (0.0, 0.0));
        assert_eq!(death_term(0.0), 0.0);
        assert_eq!((death_term(0.5), death_prime(0.5), death_term(-1.0), death_term(2.0)), (0.5, 1.0, 0.0, 1.0));
        let r = Rate::Custom(|s| s * s, |s| 2.0 * s);
        assert_eq!((r.value(3.0), r.derivative(3.0)), (9.0, 6.0));
    }

    #[test]
    fn proliferation_integrates_its_derivative() {
        // midpoint rule on [-2, s]
        let n = 40_000;
        for &s in &[-1.5, 0.0, 0.3, 0.99, 1.7, 2.0] {
            let h = (s + 2.0) / n as f64;
            let integral: f64 = (0..n).map(|i| proliferation_prime(-2.0 + (i as f64 + 0.5) * h) * h).sum();
            // midpoint error is at most one cell width per kink
            assert!((integral - (proliferation(s) - proliferation(-2.0))).abs() <= 2.0 * h);
        }
    }

    proptest! {
        #[test]
        fn split_monotonicity(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(dpotential_plus(lo) <= dpotential_plus(hi));
            prop_assert!(dpotential_minus(lo) >= dpotential_minus(hi));
            prop_assert!(ddpotential_minus(a) <= 0.0);
            let s = potential_split(a);
            prop_assert!((s.dplus + s.dminus - potential_prime(a)).abs() < 1e-9 * (1.0 + a.abs().powi(3)));
            prop_assert!((s.ddplus + s.ddminus - (12.0 * a * a - 12.0 * a + 2.0)).abs() < 1e-9 * (1.0 + a * a));
        }

        #[test]
        fn potential_nonnegative(r in -3.0f64..3.0) {
            prop_assert!(potential(r) >= 0.0);
            if r != 0.0 && r != 1.0 {
                prop_assert!(potential(r) > 0.0);
            }
        }

        #[test]
        fn switches_bounded(s in -1e3f64..1e3) {
            prop_assert!((0.0..=1.0).contains(&proliferation(s)));
            prop_assert!((0.0..=1.0).contains(&death_term(s)));
            let inside = s > 0.0 && s < 1.0;
            prop_assert_eq!(proliferation_prime(s) * if inside { 0.0 } else { 1.0 }, 0.0);
        }
    }

    #[test]
    fn potential_roots_are_three() {
        let mut sign_changes = 0;
        let mut prev = potential_prime(-1.0f64);
        for i in 1..=3000 {
            let v = potential_prime(-1.0 + i as f64 * 1e-3 + 1e-7);
            if v.signum() != prev.signum() {
                sign_changes += 1;
            }
            prev = v;
        }
        assert_eq!(sign_changes, 3);
    }

    #[test]
    fn energy_examples() {
        let mesh = Arc::new(make_box_mesh(2, &[-5.0, -5.0], &[5.0, 5.0], &[8, 8]).unwrap());
        let space = FeSpace::new(mesh).unwrap();
        let p = ModelParams::default();
        assert_eq!(gl_energy(&space, &p, &space.constant(0.0)).unwrap(), 0.0);
        assert!(gl_energy(&space, &p, &space.constant(1.0)).unwrap().abs() < 1e-14);
        assert!((gl_energy(&space, &p, &space.constant(0.5)).unwrap() - 15.625).abs() < 1e-10);
        let wavy = space.interpolate(|x| 0.5 + (x[0] * 1.3).sin() * (x[1] * 0.7).cos());
        assert!(gl_energy(&space, &p, &wavy).unwrap() > 0.0);
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::default().validate().is_ok());
        assert!(ModelParams { delta: 0.0, ..Default::default() }.validate().is_err());
        assert!(ModelParams { kappa: -1.0, ..Default::default() }.validate().is_err());
        assert!(ModelParams { c: f64::NAN, ..Default::default() }.validate().is_err());
    }

    fn sample() -> Nondimensionalizer {
        Nondimensionalizer {
            m_phi: 0.3,
            m_sigma: 0.7,
            p0: 0.1,
            gamma: 2.5,
            chi: 1.25,
            eps: 0.04,
            delta: 0.0004,
            c: 0.02,
            kappa: 0.12,
        }
    }

    #[test]
    fn nondimensional_round_trip() {
        let nd = sample();
        let p = nd.nondimensionalize().unwrap();
        let back = Nondimensionalizer::from_dimensionless(&p, nd.p0, nd.gamma, nd.m_sigma).unwrap();
        for (a, b) in [
            (nd.m_phi, back.m_phi),
            (nd.chi, back.chi),
            (nd.eps, back.eps),
            (nd.delta, back.delta),
            (nd.c, back.c),
            (nd.kappa, back.kappa),
        ] {
            assert!(((a - b) / a).abs() < 1e-12);
        }
        assert!((p.delta - 0.001).abs() < 1e-15);
        assert!((p.d_sigma / p.delta - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nondimensional_examples() {
        let mut nd = Nondimensionalizer { gamma: 1.0, m_phi: 0.7, kappa: 0.1, ..sample() };
        nd.eps = nd.length_scale().unwrap();
        let p = nd.nondimensionalize().unwrap();
        assert!((p.eps - 1.0).abs() < 1e-14);
        assert!((p.kappa - 1.0).abs() < 1e-14);
        assert_eq!(p.d_phi, 1.0);
        nd.chi = 0.0;
        assert_eq!(nd.nondimensionalize().unwrap().chi, 0.0);
        assert!(Nondimensionalizer { p0: 0.0, ..sample() }.nondimensionalize().is_err());
        assert!(Nondimensionalizer { m_sigma: 0.0, ..sample() }.nondimensionalize().is_err());
    }
}
