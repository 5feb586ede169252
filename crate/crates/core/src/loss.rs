//! The loss functions under study, each a pure function of a state and
//! fixed problem data (a target state or a local observable).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mps::{
    self, inner_product, local_matrix_element, norm_sq, to_statevector, LocalObservable, MpsState,
    NORM_DEGENERACY_THRESHOLD,
};
use crate::tensor::DenseTensor;

/// A fixed target state |φ⟩, held either as an MPS or as a dense vector.
#[derive(Clone, Debug)]
pub struct TargetState {
    repr: TargetRepr,
    norm: f64,
    normalized: bool,
}

#[derive(Clone, Debug)]
pub enum TargetRepr {
    Mps(MpsState),
    Dense(DenseTensor),
}

impl TargetState {
    pub fn new(repr: TargetRepr, normalize: bool) -> Result<Self> {
        let norm_sq = match &repr {
            TargetRepr::Mps(phi) => norm_sq(phi)?,
            TargetRepr::Dense(v) => v.data().iter().map(|z| z.norm_sqr()).sum(),
        };
        if normalize && norm_sq < NORM_DEGENERACY_THRESHOLD {
            return Err(Error::DegenerateNorm { norm: norm_sq });
        }
        let mut target = Self {
            repr,
            norm: norm_sq.sqrt(),
            normalized: false,
        };
        if normalize {
            match &mut target.repr {
                TargetRepr::Mps(phi) => {
                    // Spread the rescaling across sites so a product target
                    // stays translation invariant.
                    let per_site =
                        Complex64::new((1.0 / target.norm).powf(1.0 / phi.n() as f64), 0.0);
                    let sites: Vec<DenseTensor> =
                        phi.sites().iter().map(|s| s.scale(per_site)).collect();
                    *phi = MpsState::from_sites(sites)?;
                }
                TargetRepr::Dense(v) => *v = v.scale(Complex64::new(1.0 / target.norm, 0.0)),
            }
            target.norm = 1.0;
            target.normalized = true;
        }
        Ok(target)
    }

    /// The all-ones product target of bond dimension 1: every amplitude
    /// equal before normalization.
    pub fn uniform_product(n: usize, d: usize, normalize: bool) -> Result<Self> {
        let site = DenseTensor::from_fn(vec![d, 1, 1], |_| Complex64::ONE);
        let phi = MpsState::from_sites(vec![site; n])?;
        Self::new(TargetRepr::Mps(phi), normalize)
    }

    pub fn repr(&self) -> &TargetRepr {
        &self.repr
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Per-site vector when the target is a translation-invariant product
    /// MPS of bond dimension 1.
    pub fn product_site_vector(&self) -> Option<Vec<Complex64>> {
        match &self.repr {
            TargetRepr::Mps(phi) if phi.bond_dim() == 1 => {
                let first = &phi.sites()[0];
                if phi.sites().iter().all(|s| s == first) {
                    Some(
                        (0..phi.physical_dim())
                            .map(|j| first.get(&[j, 0, 0]))
                            .collect(),
                    )
                } else {
                    None
                }
            }
            _ => None,
        }
    }
}

/// `⟨φ|ψ⟩`.
pub fn overlap(psi: &MpsState, phi: &TargetState) -> Result<Complex64> {
    match &phi.repr {
        TargetRepr::Mps(phi_mps) => inner_product(psi, phi_mps),
        TargetRepr::Dense(v) => {
            let sv = to_statevector(psi)?;
            if sv.len() != v.len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{}", v.len()),
                    got: format!("{}", sv.len()),
                });
            }
            Ok(sv
                .data()
                .iter()
                .zip(v.data())
                .map(|(p, t)| t.conj() * p)
                .sum())
        }
    }
}

/// `L_g = 1 − |⟨ψ|φ⟩|²`, with no normalization of ψ.
pub fn global_fidelity_loss(psi: &MpsState, phi: &TargetState) -> Result<f64> {
    Ok(1.0 - overlap(psi, phi)?.norm_sqr())
}

/// Normalized square loss `L_{g,1} = 1 − |⟨φ|ψ⟩|² / Z_g`.
pub fn normalized_global_loss(psi: &MpsState, phi: &TargetState) -> Result<f64> {
    let z = norm_sq(psi)?;
    if z < NORM_DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateNorm { norm: z });
    }
    Ok(1.0 - overlap(psi, phi)?.norm_sqr() / z)
}

/// KL divergence of the accept/reject hypothesis: `D_KL(Q‖P) = −ln P_accept`
/// with `P_accept = |⟨φ|ψ⟩| / (√Z_g · ‖φ‖)`. The hypothesis probability uses
/// the overlap modulus, not its square.
pub fn kl_loss(psi: &MpsState, phi: &TargetState) -> Result<f64> {
    let z = norm_sq(psi)?;
    if z < NORM_DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateNorm { norm: z });
    }
    let p = overlap(psi, phi)?.norm() / (z.sqrt() * phi.norm);
    if p <= 1e-300 {
        return Err(Error::DivergentKl { p });
    }
    // Cauchy-Schwarz caps p at 1; rounding may push it epsilon over.
    Ok(-p.min(1.0).ln())
}

/// `L_l = ⟨ψ|Ô_m|ψ⟩ / ⟨ψ|ψ⟩`.
pub fn local_loss(psi: &MpsState, obs: &LocalObservable) -> Result<f64> {
    mps::local_expectation(psi, obs)
}

/// The unnormalized local bilinear `⟨ψ|Ô_m|ψ⟩`; the quantity the exact
/// Haar-moment oracle averages.
pub fn local_numerator(psi: &MpsState, obs: &LocalObservable) -> Result<f64> {
    let v = local_matrix_element(psi, psi, obs)?;
    debug_assert!(v.im.abs() <= 1e-10 * (1.0 + v.norm()));
    Ok(v.re)
}

/// Which loss a configuration studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `1 − |⟨ψ|φ⟩|²` (unnormalized overlap bilinear).
    GlobalFidelity,
    /// `1 − |⟨φ|ψ⟩|²/Z_g`.
    NormalizedGlobal,
    /// `−ln(|⟨φ|ψ⟩| / (√Z_g ‖φ‖))`.
    Kl,
    /// `⟨ψ|Ô_m|ψ⟩ / Z`.
    Local,
    /// `⟨ψ|Ô_m|ψ⟩` without the norm denominator.
    LocalNumerator,
}

impl LossKind {
    pub fn is_local(self) -> bool {
        matches!(self, LossKind::Local | LossKind::LocalNumerator)
    }
}

/// Problem data a loss needs besides the state.
#[derive(Clone, Debug)]
pub enum LossData {
    Target(TargetState),
    Observable(LocalObservable),
}

pub fn evaluate_loss(kind: LossKind, psi: &MpsState, data: &LossData) -> Result<f64> {
    match (kind, data) {
        (LossKind::GlobalFidelity, LossData::Target(phi)) => global_fidelity_loss(psi, phi),
        (LossKind::NormalizedGlobal, LossData::Target(phi)) => normalized_global_loss(psi, phi),
        (LossKind::Kl, LossData::Target(phi)) => kl_loss(psi, phi),
        (LossKind::Local, LossData::Observable(obs)) => local_loss(psi, obs),
        (LossKind::LocalNumerator, LossData::Observable(obs)) => local_numerator(psi, obs),
        _ => Err(Error::InvalidConfig {
            detail: format!("loss kind {kind:?} incompatible with supplied problem data"),
        }),
    }
}
