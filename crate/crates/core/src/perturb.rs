//! Synthetic tracking noise: i.i.d. Gaussian perturbations of translation,
//! pose or both, drawn independently for every frame.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::hand::HandSequence;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    TranslationDominant,
    PoseDominant,
    Balanced,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// Per-component standard deviation of translation noise (m).
    pub sigma_trans: f64,
    /// Per-component standard deviation of axis-angle noise (rad).
    pub sigma_pose: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn translation(sigma: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::TranslationDominant,
            sigma_trans: sigma,
            sigma_pose: 0.0,
            seed,
        }
    }

    pub fn pose(sigma: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::PoseDominant,
            sigma_trans: 0.0,
            sigma_pose: sigma,
            seed,
        }
    }

    pub fn balanced(sigma_trans: f64, sigma_pose: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::Balanced,
            sigma_trans,
            sigma_pose,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |s: f64| s.is_finite() && s >= 0.0;
        if !ok(self.sigma_trans) || !ok(self.sigma_pose) {
            return Err(Error::InvalidArgument(format!(
                "noise sigmas must be finite and non-negative (trans {}, pose {})",
                self.sigma_trans, self.sigma_pose
            )));
        }
        Ok(())
    }

    fn sigmas(&self) -> (f64, f64) {
        match self.kind {
            NoiseKind::TranslationDominant => (self.sigma_trans, 0.0),
            NoiseKind::PoseDominant => (0.0, self.sigma_pose),
            NoiseKind::Balanced => (self.sigma_trans, self.sigma_pose),
        }
    }
}

/// Add noise to every frame; shape is untouched. Perturbed rotations are
/// wrapped back to norm at most π.
pub fn perturb_sequence(seq: &HandSequence, spec: &NoiseSpec) -> Result<HandSequence> {
    spec.validate()?;
    let (st, sp) = spec.sigmas();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gauss = move || -> f64 { StandardNormal.sample(&mut rng) };
    seq.map_frames(|_, f| {
        let mut out = f.clone();
        if st > 0.0 {
            out.trans += Vec3::new(gauss(), gauss(), gauss()) * st;
        }
        if sp > 0.0 {
            for v in &mut out.pose {
                *v += Vec3::new(gauss(), gauss(), gauss()) * sp;
            }
            out.canonicalize();
        }
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hand::HandFrame;

    fn seq(t: usize) -> HandSequence {
        let frame = HandFrame {
            pose: vec![Vec3::new(0.1, 0.2, 0.3); 4],
            trans: Vec3::new(0.0, 0.1, 0.2),
            shape: vec![0.05, -0.02],
        };
        HandSequence::new(vec![frame; t], 30.0).unwrap()
    }

    #[test]
    fn zero_sigma_is_identity() {
        let s = seq(5);
        for spec in [
            NoiseSpec::translation(0.0, 1),
            NoiseSpec::pose(0.0, 1),
            NoiseSpec::balanced(0.0, 0.0, 1),
        ] {
            assert_eq!(perturb_sequence(&s, &spec).unwrap(), s);
        }
    }

    #[test]
    fn kinds_touch_only_their_parameters() {
        let s = seq(5);
        let t = perturb_sequence(&s, &NoiseSpec::translation(0.01, 3)).unwrap();
        let p = perturb_sequence(&s, &NoiseSpec::pose(0.1, 3)).unwrap();
        for ((a, b), c) in s.frames().iter().zip(t.frames()).zip(p.frames()) {
            assert_eq!(a.pose, b.pose);
            assert_ne!(a.trans, b.trans);
            assert_eq!(a.trans, c.trans);
            assert_ne!(a.pose, c.pose);
            assert_eq!(a.shape, b.shape);
            assert_eq!(a.shape, c.shape);
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let s = seq(3);
        let spec = NoiseSpec::balanced(0.01, 0.1, 9);
        assert_eq!(
            perturb_sequence(&s, &spec).unwrap(),
            perturb_sequence(&s, &spec).unwrap()
        );
        assert_ne!(
            perturb_sequence(&s, &spec).unwrap(),
            perturb_sequence(&s, &NoiseSpec { seed: 10, ..spec }).unwrap()
        );
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(perturb_sequence(&seq(1), &NoiseSpec::translation(-1.0, 0)).is_err());
    }
}
