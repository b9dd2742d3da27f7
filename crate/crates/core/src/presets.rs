//! Named one-dimensional coefficient presets with analytic derivatives.
//!
//! | name         | A(q)        | b(q)      | c(q)          |
//! |--------------|-------------|-----------|---------------|
//! | `constant`   | 1           | 0         | 0             |
//! | `sin-mass`   | 2 + sin q   | 0         | 0             |
//! | `bump-drift` | 1           | e^{−q²}   | 0             |
//! | `well`       | 1           | 0         | q²/(1 + q²)   |
//!
//! `bump-drift` carries a first-order term, so its operator depends on the Fourier sign
//! convention (`e^{ip·(q−q₁)}` here); the others are even in p.

use std::fmt;
use std::str::FromStr;

use crate::symbols::{CoefficientField, HamiltonSymbol, LevySpec, Mat, Point, QuadraticSymbol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    Constant,
    SinMass,
    BumpDrift,
    Well,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Constant, Preset::SinMass, Preset::BumpDrift, Preset::Well];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Constant => "constant",
            Preset::SinMass => "sin-mass",
            Preset::BumpDrift => "bump-drift",
            Preset::Well => "well",
        }
    }

    pub fn quadratic(self) -> QuadraticSymbol<1> {
        let m = Mat::<1>::new;
        let v = Point::<1>::new;
        let one = || CoefficientField::constant(m(1.0));
        let no_drift = || CoefficientField::constant(v(0.0));
        let no_potential = || CoefficientField::constant(0.0);
        let built = match self {
            Preset::Constant => QuadraticSymbol::new(one(), no_drift(), no_potential(), 1.0, 1.0),
            Preset::SinMass => QuadraticSymbol::new(
                CoefficientField::from_fn(move |q| m(2.0 + q[0].sin()))
                    .with_grad(move |q| [m(q[0].cos())])
                    .with_hess(move |q| [[m(-q[0].sin())]]),
                no_drift(),
                no_potential(),
                1.0,
                3.0,
            ),
            Preset::BumpDrift => QuadraticSymbol::new(
                one(),
                CoefficientField::from_fn(move |q| v((-q[0] * q[0]).exp()))
                    .with_grad(move |q| [v(-2.0 * q[0] * (-q[0] * q[0]).exp())])
                    .with_hess(move |q| {
                        let x = q[0];
                        [[v((4.0 * x * x - 2.0) * (-x * x).exp())]]
                    }),
                no_potential(),
                1.0,
                1.0,
            ),
            Preset::Well => QuadraticSymbol::new(
                one(),
                no_drift(),
                CoefficientField::from_fn(|q| {
                    let x2 = q[0] * q[0];
                    x2 / (1.0 + x2)
                })
                .with_grad(|q| {
                    let x = q[0];
                    [2.0 * x / (1.0 + x * x).powi(2)]
                })
                .with_hess(|q| {
                    let x2 = q[0] * q[0];
                    [[(2.0 - 6.0 * x2) / (1.0 + x2).powi(3)]]
                }),
                1.0,
                1.0,
            ),
        };
        built.expect("shipped presets satisfy their own construction checks")
    }

    pub fn symbol(self, levy: Option<LevySpec<1>>) -> HamiltonSymbol<1> {
        HamiltonSymbol::new(self.quadratic(), levy)
    }

    /// Infimum of `c` over the real line.
    pub fn min_potential(self) -> f64 {
        0.0
    }

    pub fn has_drift(self) -> bool {
        matches!(self, Preset::BumpDrift)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownPreset(pub String);

impl fmt::Display for UnknownPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown preset `{}` (expected constant, sin-mass, bump-drift or well)", self.0)
    }
}

impl std::error::Error for UnknownPreset {}

impl FromStr for Preset {
    type Err = UnknownPreset;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| UnknownPreset(s.to_string()))
    }
}
