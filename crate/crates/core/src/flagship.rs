//! The one-dimensional reference configuration shared by tests, the
//! acceptance suite and the CLI defaults.
//!
//! Stable part: `α = 1.2`, `μ = 15 δ_{+1} + 10 δ_{-1}` (heavy weights keep
//! the Hölder moduli of `R_λ` small, so that `λ₀` is moderate).
//! Kernel: `β = 0.5`, one-sided small jumps `0.2 κ(x) y^{-1-0.3} dy` on
//! `(0, 1]` with `κ(x) = 1 + sin(x)/2`, and one big-jump atom of mass 1/2 at
//! `y = -1.5` with `η ≡ 1`; `B_M = 2`.

use crate::kernel::{JumpKernelModel, Modulator, PiAtom, Ray, SmallJumpLaw};
use crate::symbol::{Atom, LevyTriple, SpectralMeasure, StablePart};

pub const ALPHA: f64 = 1.2;
pub const BETA: f64 = 0.5;
pub const BETA_PRIME: f64 = 0.3;

pub fn stable() -> StablePart {
    let mu = SpectralMeasure::new(vec![
        Atom {
            direction: vec![1.0],
            weight: 15.0,
        },
        Atom {
            direction: vec![-1.0],
            weight: 10.0,
        },
    ])
    .expect("valid measure");
    StablePart::new(ALPHA, mu).expect("valid stable part")
}

pub fn triple() -> LevyTriple {
    LevyTriple::pure_stable(stable())
}

pub fn kernel() -> JumpKernelModel {
    JumpKernelModel::new(
        1,
        BETA,
        SmallJumpLaw {
            beta_prime: BETA_PRIME,
            rays: vec![Ray {
                direction: vec![1.0],
                weight: 0.2,
            }],
        },
        Modulator::sine(1, 1.0, 0.5, 1.0),
        Modulator::constant(1.0),
        vec![PiAtom {
            y: vec![-1.5],
            mass: 0.5,
        }],
    )
    .expect("valid kernel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_bound() {
        assert!((kernel().beta_moment_bound() - 2.0).abs() < 1e-12);
        assert!(kernel().check_against(ALPHA).is_ok());
    }
}
