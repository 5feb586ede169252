//! Loss gradients with respect to site parameters, by exact contraction
//! (generator insertion on the ket or bra) and by central finite
//! differences, cross-validated against each other.
//!
//! Three parameterizations are supported:
//!   * `theta` — every site carries an ordered product of exponential
//!     factors; the derivative direction is one angle θ_k on one site.
//!   * `haar_split` — the derivative site is drawn as two independent Haar
//!     unitaries U⁻, U⁺ with a single fixed Hermitian direction G between
//!     them; all other sites are plain Haar unitaries.
//!   * `raw_tensor` — site tensors are free complex arrays; the parameters
//!     are the individual real and imaginary parts, and only finite
//!     differences apply.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::{evaluate_loss, overlap, LossData, LossKind};
use crate::mps::{
    inner_product, local_matrix_element, norm_sq, site_tensor_from_matrix, MpsState,
    NORM_DEGENERACY_THRESHOLD,
};
use crate::tensor::DenseTensor;
use crate::unitary::{
    build_unitary, derivative_factors, haar_sample, HaarSplitSite, ParamUnitarySite,
};

pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradMode {
    Theta,
    HaarSplit,
    RawTensor,
}

/// One derivative direction: a site and a parameter index within that
/// site's parameterization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GradTarget {
    pub site: usize,
    pub param_index: usize,
}

/// A concrete random draw of the state together with its parameterization.
#[derive(Clone, Debug)]
pub enum StateConfig {
    Theta {
        sites: Vec<ParamUnitarySite>,
        d: usize,
        bond: usize,
    },
    HaarSplit {
        /// Site unitaries; the entry at `split_site` is the composed U⁻·U⁺.
        units: Vec<DenseTensor>,
        split: HaarSplitSite,
        split_site: usize,
        d: usize,
        bond: usize,
    },
    Raw {
        state: MpsState,
        complex_entries: bool,
    },
}

impl StateConfig {
    pub fn sample_theta(n: usize, d: usize, bond: usize, rng: &mut impl Rng) -> Result<Self> {
        let sites = (0..n)
            .map(|_| ParamUnitarySite::sample_uniform(d * bond, rng))
            .collect::<Result<_>>()?;
        Ok(Self::Theta { sites, d, bond })
    }

    pub fn sample_haar_split(
        n: usize,
        d: usize,
        bond: usize,
        split_site: usize,
        generator: DenseTensor,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if split_site >= n {
            return Err(Error::IndexOutOfRange {
                what: "site",
                index: split_site + 1,
                max: n,
            });
        }
        let split = HaarSplitSite::sample(d * bond, generator, rng)?;
        let mut units = Vec::with_capacity(n);
        for i in 0..n {
            if i == split_site {
                units.push(split.unitary()?);
            } else {
                units.push(haar_sample(d * bond, rng)?);
            }
        }
        Ok(Self::HaarSplit {
            units,
            split,
            split_site,
            d,
            bond,
        })
    }

    pub fn sample_raw(
        n: usize,
        d: usize,
        bond: usize,
        complex_entries: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        Ok(Self::Raw {
            state: MpsState::random_raw(n, d, bond, complex_entries, rng)?,
            complex_entries,
        })
    }

    pub fn mode(&self) -> GradMode {
        match self {
            Self::Theta { .. } => GradMode::Theta,
            Self::HaarSplit { .. } => GradMode::HaarSplit,
            Self::Raw { .. } => GradMode::RawTensor,
        }
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Theta { sites, .. } => sites.len(),
            Self::HaarSplit { units, .. } => units.len(),
            Self::Raw { state, .. } => state.n(),
        }
    }

    /// Number of derivative directions hosted by `site`.
    pub fn param_count(&self, site: usize) -> usize {
        match self {
            Self::Theta { sites, .. } => sites.get(site).map_or(0, |s| s.num_params()),
            Self::HaarSplit { split_site, .. } => usize::from(site == *split_site),
            Self::Raw {
                state,
                complex_entries,
            } => {
                if site < state.n() {
                    let entries = state.physical_dim() * state.bond_dim() * state.bond_dim();
                    if *complex_entries {
                        2 * entries
                    } else {
                        entries
                    }
                } else {
                    0
                }
            }
        }
    }

    /// The MPS at the current parameter values.
    pub fn build_state(&self) -> Result<MpsState> {
        match self {
            Self::Theta { sites, d, bond } => {
                let tensors = sites
                    .iter()
                    .map(|s| {
                        let u = build_unitary(s)?;
                        site_tensor_from_matrix(&u, *d, *bond)
                    })
                    .collect::<Result<_>>()?;
                MpsState::from_sites(tensors)
            }
            Self::HaarSplit { units, d, bond, .. } => {
                let tensors = units
                    .iter()
                    .map(|u| site_tensor_from_matrix(u, *d, *bond))
                    .collect::<Result<_>>()?;
                MpsState::from_sites(tensors)
            }
            Self::Raw { state, .. } => Ok(state.clone()),
        }
    }

    fn check_target(&self, target: &GradTarget) -> Result<()> {
        if target.site >= self.n() {
            return Err(Error::IndexOutOfRange {
                what: "site",
                index: target.site + 1,
                max: self.n(),
            });
        }
        let count = self.param_count(target.site);
        if target.param_index >= count {
            return Err(Error::IndexOutOfRange {
                what: "parameter",
                index: target.param_index + 1,
                max: count,
            });
        }
        Ok(())
    }

    /// The deformed state ψ_G with the generator inserted at the derivative
    /// direction, so that ∂ψ = i·ψ_G. Not defined in raw-tensor mode.
    pub fn derivative_state(&self, target: &GradTarget) -> Result<MpsState> {
        let psi = self.build_state()?;
        self.derivative_state_from(target, &psi)
    }

    /// As [`Self::derivative_state`], reusing an already-built base state.
    pub fn derivative_state_from(&self, target: &GradTarget, psi: &MpsState) -> Result<MpsState> {
        self.check_target(target)?;
        match self {
            Self::Theta { sites, d, bond } => {
                let (left, g, right) =
                    derivative_factors(&sites[target.site], target.param_index)?;
                let core = left.contract(&g, &[(1, 0)])?.contract(&right, &[(1, 0)])?;
                let deformed = site_tensor_from_matrix(&core, *d, *bond)?;
                psi.with_site_tensor(target.site, deformed)
            }
            Self::HaarSplit { split, d, bond, .. } => {
                let core = split.derivative_core()?;
                let deformed = site_tensor_from_matrix(&core, *d, *bond)?;
                psi.with_site_tensor(target.site, deformed)
            }
            Self::Raw { .. } => Err(Error::UnsupportedGradMode {
                detail: "raw_tensor mode has no generator insertion; use finite differences",
            }),
        }
    }

    /// The state with one parameter shifted by `delta` (finite differences).
    pub fn state_with_param_shift(&self, target: &GradTarget, delta: f64) -> Result<MpsState> {
        self.check_target(target)?;
        match self {
            Self::Theta { sites, d, bond } => {
                let mut shifted = sites[target.site].clone();
                shifted.angles[target.param_index] += delta;
                let u = build_unitary(&shifted)?;
                let tensor = site_tensor_from_matrix(&u, *d, *bond)?;
                self.build_state()?.with_site_tensor(target.site, tensor)
            }
            Self::HaarSplit { split, d, bond, .. } => {
                // U(δ) = U⁻ · exp(iδG) · U⁺ around δ = 0.
                let factor = crate::unitary::exp_i_theta_g(&split.generator, delta)?;
                let u = split
                    .u_minus
                    .contract(&factor, &[(1, 0)])?
                    .contract(&split.u_plus, &[(1, 0)])?;
                let tensor = site_tensor_from_matrix(&u, *d, *bond)?;
                self.build_state()?.with_site_tensor(target.site, tensor)
            }
            Self::Raw {
                state,
                complex_entries,
            } => {
                let (entry, part) = raw_param_split(target.param_index, *complex_entries);
                let site = &state.sites()[target.site];
                let shape = site.shape().to_vec();
                let mut data = site.data().to_vec();
                data[entry] += if part == 0 {
                    Complex64::new(delta, 0.0)
                } else {
                    Complex64::new(0.0, delta)
                };
                state.with_site_tensor(target.site, DenseTensor::new(shape, data)?)
            }
        }
    }
}

/// Raw parameter index → (flat entry, 0 = real part / 1 = imaginary part).
pub fn raw_param_split(param_index: usize, complex_entries: bool) -> (usize, usize) {
    if complex_entries {
        (param_index / 2, param_index % 2)
    } else {
        (param_index, 0)
    }
}

/// Loss gradient by generator insertion: two contractions, one with G on
/// the ket and one on the bra, combined by the quotient rule where the loss
/// carries a norm denominator.
pub fn analytic_grad(
    kind: LossKind,
    cfg: &StateConfig,
    data: &LossData,
    target: &GradTarget,
) -> Result<f64> {
    let psi = cfg.build_state()?;
    analytic_grad_with_state(kind, cfg, data, target, &psi)
}

/// As [`analytic_grad`] but reusing an already-built state (the base state
/// does not depend on the derivative direction).
pub fn analytic_grad_with_state(
    kind: LossKind,
    cfg: &StateConfig,
    data: &LossData,
    target: &GradTarget,
    psi: &MpsState,
) -> Result<f64> {
    if cfg.mode() == GradMode::RawTensor {
        return Err(Error::UnsupportedGradMode {
            detail: "analytic gradient undefined in raw_tensor mode; use finite_diff_grad",
        });
    }
    let psi_g = cfg.derivative_state_from(target, psi)?;
    let i = Complex64::new(0.0, 1.0);

    match (kind, data) {
        (LossKind::GlobalFidelity, LossData::Target(phi)) => {
            let s = overlap(psi, phi)?;
            let ds = i * overlap(&psi_g, phi)?;
            Ok(-2.0 * (s.conj() * ds).re)
        }
        (LossKind::NormalizedGlobal, LossData::Target(phi)) => {
            let z = norm_sq(psi)?;
            if z < NORM_DEGENERACY_THRESHOLD {
                return Err(Error::DegenerateNorm { norm: z });
            }
            let s = overlap(psi, phi)?;
            let ds = i * overlap(&psi_g, phi)?;
            let d_overlap_sq = 2.0 * (s.conj() * ds).re;
            let dz = 2.0 * (i * inner_product(&psi_g, psi)?).re;
            Ok(-(d_overlap_sq * z - s.norm_sqr() * dz) / (z * z))
        }
        (LossKind::Kl, LossData::Target(phi)) => {
            let z = norm_sq(psi)?;
            if z < NORM_DEGENERACY_THRESHOLD {
                return Err(Error::DegenerateNorm { norm: z });
            }
            let s = overlap(psi, phi)?;
            if s.norm_sqr() <= 1e-300 {
                return Err(Error::DivergentKl { p: s.norm() });
            }
            let ds = i * overlap(&psi_g, phi)?;
            let dz = 2.0 * (i * inner_product(&psi_g, psi)?).re;
            Ok(-(s.conj() * ds).re / s.norm_sqr() + dz / (2.0 * z))
        }
        (LossKind::Local, LossData::Observable(obs)) => {
            let z = norm_sq(psi)?;
            if z < NORM_DEGENERACY_THRESHOLD {
                return Err(Error::DegenerateNorm { norm: z });
            }
            let e = local_matrix_element(psi, psi, obs)?.re;
            let de = 2.0 * (i * local_matrix_element(&psi_g, psi, obs)?).re;
            let dz = 2.0 * (i * inner_product(&psi_g, psi)?).re;
            Ok((de * z - e * dz) / (z * z))
        }
        (LossKind::LocalNumerator, LossData::Observable(obs)) => {
            Ok(2.0 * (i * local_matrix_element(&psi_g, psi, obs)?).re)
        }
        _ => Err(Error::InvalidConfig {
            detail: format!("loss kind {kind:?} incompatible with supplied problem data"),
        }),
    }
}

/// Central difference `(f(+h) − f(−h)) / 2h` with O(h²) bias.
pub fn central_difference(mut f: impl FnMut(f64) -> Result<f64>, h: f64) -> Result<f64> {
    Ok((f(h)? - f(-h)?) / (2.0 * h))
}

/// Loss gradient by central finite differences; the only gradient available
/// in raw-tensor mode, and the oracle for [`analytic_grad`] elsewhere.
pub fn finite_diff_grad(
    kind: LossKind,
    cfg: &StateConfig,
    data: &LossData,
    target: &GradTarget,
    h: f64,
) -> Result<f64> {
    if h <= 0.0 {
        return Err(Error::InvalidConfig {
            detail: format!("finite-difference step must be positive, got {h}"),
        });
    }
    central_difference(
        |delta| {
            let shifted = cfg.state_with_param_shift(target, delta)?;
            evaluate_loss(kind, &shifted, data)
        },
        h,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{local_loss, TargetRepr, TargetState};
    use crate::mps::LocalObservable;
    use crate::unitary::default_split_generator;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pauli_x() -> DenseTensor {
        let mut m = DenseTensor::zeros(vec![2, 2]);
        m.set(&[0, 1], Complex64::ONE);
        m.set(&[1, 0], Complex64::ONE);
        m
    }

    #[test]
    fn central_difference_on_quadratic() {
        let grad = central_difference(|delta| Ok((1.0 + delta) * (1.0 + delta)), 1e-3).unwrap();
        assert!((grad - 2.0).abs() < 1e-6);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = StateConfig::sample_raw(4, 2, 2, true, &mut rng).unwrap();
        let obs = LocalObservable::new(DenseTensor::zeros(vec![2, 2]), 1).unwrap();
        let data = LossData::Observable(obs);
        let target = GradTarget {
            site: 0,
            param_index: 3,
        };
        let g = finite_diff_grad(LossKind::Local, &cfg, &data, &target, 1e-4).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn norm_gradient_vanishes_at_zero_angles() {
        // At θ = 0 the embedding is the identity; ∂Z = 2·Re(i·⟨ψ|ψ_G⟩)
        // vanishes because the partial trace of a Hermitian G is real.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = StateConfig::sample_theta(3, 2, 2, &mut rng).unwrap();
        let StateConfig::Theta { mut sites, d, bond } = cfg else {
            unreachable!()
        };
        for s in &mut sites {
            s.angles.iter_mut().for_each(|a| *a = 0.0);
        }
        let cfg = StateConfig::Theta { sites, d, bond };
        let psi = cfg.build_state().unwrap();
        for k in 0..4 {
            let target = GradTarget {
                site: 1,
                param_index: k,
            };
            let psi_g = cfg.derivative_state(&target).unwrap();
            let dz = 2.0 * (Complex64::new(0.0, 1.0) * inner_product(&psi_g, &psi).unwrap()).re;
            assert!(dz.abs() < 1e-12, "param {k}: dZ = {dz}");
        }
    }

    #[test]
    fn stationary_point_of_fidelity_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = StateConfig::sample_theta(3, 2, 2, &mut rng).unwrap();
        let StateConfig::Theta { mut sites, d, bond } = cfg else {
            unreachable!()
        };
        for s in &mut sites {
            s.angles.iter_mut().for_each(|a| *a = 0.0);
        }
        let cfg = StateConfig::Theta { sites, d, bond };
        let psi = cfg.build_state().unwrap();
        let phi = TargetState::new(TargetRepr::Mps(psi.clone()), true).unwrap();
        let data = LossData::Target(phi);
        for k in [0, 5, 10] {
            let target = GradTarget {
                site: 2,
                param_index: k,
            };
            let a = analytic_grad(LossKind::GlobalFidelity, &cfg, &data, &target).unwrap();
            let f = finite_diff_grad(LossKind::GlobalFidelity, &cfg, &data, &target, 1e-5).unwrap();
            assert!((a - f).abs() < 1e-7, "param {k}: analytic {a} vs fd {f}");
        }
    }

    #[test]
    fn analytic_matches_finite_differences_all_losses_theta_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 6;
        let phi = TargetState::uniform_product(n, 2, true).unwrap();
        let obs = LocalObservable::new(pauli_x(), n / 2).unwrap();
        for trial in 0..5 {
            let cfg = StateConfig::sample_theta(n, 2, 2, &mut rng).unwrap();
            let target = GradTarget {
                site: trial % n,
                param_index: (3 * trial) % 16,
            };
            for kind in [
                LossKind::GlobalFidelity,
                LossKind::NormalizedGlobal,
                LossKind::Kl,
                LossKind::Local,
                LossKind::LocalNumerator,
            ] {
                let data = if kind.is_local() {
                    LossData::Observable(obs.clone())
                } else {
                    LossData::Target(phi.clone())
                };
                let a = analytic_grad(kind, &cfg, &data, &target).unwrap();
                let f = finite_diff_grad(kind, &cfg, &data, &target, 1e-5).unwrap();
                assert!(
                    (a - f).abs() < 1e-7,
                    "{kind:?} trial {trial}: analytic {a} vs fd {f}"
                );
            }
        }
    }

    #[test]
    fn analytic_matches_finite_differences_haar_split() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 4;
        let phi = TargetState::uniform_product(n, 2, true).unwrap();
        for trial in 0..10 {
            let cfg = StateConfig::sample_haar_split(
                n,
                2,
                2,
                trial % n,
                default_split_generator(4),
                &mut rng,
            )
            .unwrap();
            let target = GradTarget {
                site: trial % n,
                param_index: 0,
            };
            let data = LossData::Target(phi.clone());
            let a = analytic_grad(LossKind::GlobalFidelity, &cfg, &data, &target).unwrap();
            let f = finite_diff_grad(LossKind::GlobalFidelity, &cfg, &data, &target, 1e-5).unwrap();
            assert!((a - f).abs() < 1e-7, "trial {trial}: {a} vs {f}");
        }
    }

    #[test]
    fn richardson_consistency() {
        // |analytic − central difference| = C·h² with C stable across h.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 4;
        let phi = TargetState::uniform_product(n, 2, true).unwrap();
        let data = LossData::Target(phi);
        let mut checked = 0;
        for trial in 0..10 {
            let cfg = StateConfig::sample_theta(n, 2, 2, &mut rng).unwrap();
            let target = GradTarget {
                site: trial % n,
                param_index: trial % 16,
            };
            let a = analytic_grad(LossKind::NormalizedGlobal, &cfg, &data, &target).unwrap();
            let err3 = (finite_diff_grad(LossKind::NormalizedGlobal, &cfg, &data, &target, 1e-3)
                .unwrap()
                - a)
                .abs();
            let err4 = (finite_diff_grad(LossKind::NormalizedGlobal, &cfg, &data, &target, 1e-4)
                .unwrap()
                - a)
                .abs();
            // Skip directions whose h² coefficient sits at the noise floor.
            if err3 < 1e-9 {
                continue;
            }
            let c3 = err3 / 1e-6;
            let c4 = err4 / 1e-8;
            let ratio = c3 / c4.max(1e-12);
            assert!(
                (0.02..50.0).contains(&ratio),
                "trial {trial}: C(1e-3)={c3:.3e} vs C(1e-4)={c4:.3e}"
            );
            checked += 1;
        }
        assert!(checked >= 3, "too few informative directions: {checked}");
    }

    #[test]
    fn raw_mode_rejects_analytic_and_supports_fd() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = StateConfig::sample_raw(5, 2, 2, true, &mut rng).unwrap();
        let obs = LocalObservable::new(pauli_x(), 2).unwrap();
        let target = GradTarget {
            site: 1,
            param_index: 9,
        };
        assert!(matches!(
            analytic_grad(
                LossKind::Local,
                &cfg,
                &LossData::Observable(obs.clone()),
                &target
            ),
            Err(Error::UnsupportedGradMode { .. })
        ));
        // FD equals an explicitly perturbed pair evaluated by the loss API.
        let h = 1e-5;
        let g = finite_diff_grad(LossKind::Local, &cfg, &LossData::Observable(obs.clone()), &target, h)
            .unwrap();
        let plus = cfg.state_with_param_shift(&target, h).unwrap();
        let minus = cfg.state_with_param_shift(&target, -h).unwrap();
        let expect = (local_loss(&plus, &obs).unwrap() - local_loss(&minus, &obs).unwrap())
            / (2.0 * h);
        assert_eq!(g, expect);
    }

    #[test]
    fn global_phase_direction_has_zero_gradient() {
        // The identity generator only shifts the global phase; normalized
        // losses are invariant.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 4;
        let phi = TargetState::uniform_product(n, 2, true).unwrap();
        let data = LossData::Target(phi);
        let cfg = StateConfig::sample_theta(n, 2, 2, &mut rng).unwrap();
        let identity_index = 15; // last basis element of U(4)
        let target = GradTarget {
            site: 2,
            param_index: identity_index,
        };
        let g = analytic_grad(LossKind::NormalizedGlobal, &cfg, &data, &target).unwrap();
        assert!(g.abs() < 1e-10, "phase gradient {g}");
        let g = analytic_grad(LossKind::Kl, &cfg, &data, &target).unwrap();
        assert!(g.abs() < 1e-10, "phase gradient {g}");
    }

    #[test]
    fn haar_split_gradient_mean_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 4;
        let draws = 10_000;
        let phi = TargetState::uniform_product(n, 2, true).unwrap();
        let obs = LocalObservable::new(pauli_x(), 2).unwrap();
        let g = default_split_generator(4);
        let target = GradTarget {
            site: 0,
            param_index: 0,
        };
        for (kind, data) in [
            (LossKind::GlobalFidelity, LossData::Target(phi)),
            (LossKind::LocalNumerator, LossData::Observable(obs)),
        ] {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..draws {
                let cfg = StateConfig::sample_haar_split(n, 2, 2, 0, g.clone(), &mut rng).unwrap();
                let v = analytic_grad(kind, &cfg, &data, &target).unwrap();
                sum += v;
                sum_sq += v * v;
            }
            let mean = sum / draws as f64;
            let var = sum_sq / draws as f64 - mean * mean;
            let se = (var / draws as f64).sqrt();
            assert!(mean.abs() < 4.0 * se, "{kind:?}: mean {mean}, se {se}");
        }
    }

    #[test]
    fn target_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let cfg = StateConfig::sample_theta(3, 2, 2, &mut rng).unwrap();
        let phi = TargetState::uniform_product(3, 2, true).unwrap();
        let data = LossData::Target(phi);
        let bad_site = GradTarget {
            site: 5,
            param_index: 0,
        };
        assert!(analytic_grad(LossKind::GlobalFidelity, &cfg, &data, &bad_site).is_err());
        let bad_param = GradTarget {
            site: 0,
            param_index: 99,
        };
        assert!(analytic_grad(LossKind::GlobalFidelity, &cfg, &data, &bad_param).is_err());

        // haar_split: only the split site hosts a direction.
        let cfg = StateConfig::sample_haar_split(3, 2, 2, 1, default_split_generator(4), &mut rng)
            .unwrap();
        assert_eq!(cfg.param_count(1), 1);
        assert_eq!(cfg.param_count(0), 0);
    }
}
