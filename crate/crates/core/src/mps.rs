//! Matrix product states with periodic boundary, built from raw site tensors
//! or by embedding Dd×Dd unitaries, with transfer-matrix contraction for
//! inner products and local expectation values.
//!
//! Site tensors have shape `(d, D, D)` ordered (physical, bond-left,
//! bond-right). The embedding convention is fixed once and used everywhere,
//! including the oracles: the composite Dd index orders the physical slot
//! first, the reference state pins the physical input to |0⟩, and
//! `A_j[l, r] = ⟨j, r| U |0, l⟩`, i.e. `A_j[l, r] = U[j·D + r, l]`.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;
use crate::unitary::{hermiticity_deviation, unitarity_deviation, HERMITIAN_TOL, UNITARY_TOL};

/// Norms below this are treated as degenerate before any division.
pub const NORM_DEGENERACY_THRESHOLD: f64 = 1e-14;

/// Where the site tensors came from.
#[derive(Clone, Debug)]
pub enum Origin {
    Raw,
    /// The Dd×Dd unitaries the tensors were extracted from.
    Embedded(Vec<DenseTensor>),
}

#[derive(Clone, Debug)]
pub struct MpsState {
    n: usize,
    d: usize,
    bond: usize,
    sites: Vec<DenseTensor>,
    origin: Origin,
}

impl MpsState {
    /// Build from raw site tensors, each of shape `(d, D, D)`.
    pub fn from_sites(sites: Vec<DenseTensor>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidConfig {
                detail: "MPS needs at least one site".into(),
            });
        }
        let shape = sites[0].shape().to_vec();
        if shape.len() != 3 || shape[1] != shape[2] {
            return Err(Error::ShapeMismatch {
                expected: "(d, D, D)".into(),
                got: format!("{shape:?}"),
            });
        }
        for s in &sites {
            if s.shape() != shape {
                return Err(Error::ShapeMismatch {
                    expected: format!("{shape:?}"),
                    got: format!("{:?}", s.shape()),
                });
            }
        }
        Ok(Self {
            n: sites.len(),
            d: shape[0],
            bond: shape[1],
            sites,
            origin: Origin::Raw,
        })
    }

    /// Raw-mode random initialization: every real and imaginary part of
    /// every tensor element independently uniform on [−0.5, 0.5]. With
    /// `complex_entries = false` the imaginary parts are left at zero.
    pub fn random_raw(
        n: usize,
        d: usize,
        bond: usize,
        complex_entries: bool,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let sites = (0..n)
            .map(|_| {
                DenseTensor::from_fn(vec![d, bond, bond], |_| {
                    let re = rng.random_range(-0.5..0.5);
                    let im = if complex_entries {
                        rng.random_range(-0.5..0.5)
                    } else {
                        0.0
                    };
                    Complex64::new(re, im)
                })
            })
            .collect();
        Self::from_sites(sites)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn physical_dim(&self) -> usize {
        self.d
    }

    pub fn bond_dim(&self) -> usize {
        self.bond
    }

    pub fn sites(&self) -> &[DenseTensor] {
        &self.sites
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    /// Copy of the state with site `site` (0-based) replaced.
    pub fn with_site_tensor(&self, site: usize, tensor: DenseTensor) -> Result<Self> {
        if site >= self.n {
            return Err(Error::IndexOutOfRange {
                what: "site",
                index: site + 1,
                max: self.n,
            });
        }
        if tensor.shape() != [self.d, self.bond, self.bond] {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", [self.d, self.bond, self.bond]),
                got: format!("{:?}", tensor.shape()),
            });
        }
        let mut sites = self.sites.clone();
        sites[site] = tensor;
        Ok(Self {
            n: self.n,
            d: self.d,
            bond: self.bond,
            sites,
            origin: Origin::Raw,
        })
    }
}

/// Extract the `(d, D, D)` site tensor of an arbitrary Dd×Dd matrix under
/// the fixed index convention. No unitarity requirement; gradient code uses
/// this to embed derivative insertions like `U⁻·G·U⁺`.
pub fn site_tensor_from_matrix(u: &DenseTensor, d: usize, bond: usize) -> Result<DenseTensor> {
    let nn = d * bond;
    if u.shape() != [nn, nn] {
        return Err(Error::ShapeMismatch {
            expected: format!("[{nn}, {nn}]"),
            got: format!("{:?}", u.shape()),
        });
    }
    Ok(DenseTensor::from_fn(vec![d, bond, bond], |ix| {
        let (j, l, r) = (ix[0], ix[1], ix[2]);
        u.get(&[j * bond + r, l])
    }))
}

/// Build the embedded MPS from `n` unitaries of size Dd×Dd.
pub fn embed_unitary_mps(units: Vec<DenseTensor>, d: usize, bond: usize) -> Result<MpsState> {
    if units.is_empty() {
        return Err(Error::InvalidConfig {
            detail: "need at least one unitary".into(),
        });
    }
    let mut sites = Vec::with_capacity(units.len());
    for u in &units {
        let dev = unitarity_deviation(u)?;
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary { deviation: dev });
        }
        sites.push(site_tensor_from_matrix(u, d, bond)?);
    }
    let mut state = MpsState::from_sites(sites)?;
    state.origin = Origin::Embedded(units);
    Ok(state)
}

/// A Hermitian observable acting on one site (0-based).
#[derive(Clone, Debug)]
pub struct LocalObservable {
    pub matrix: DenseTensor,
    pub site: usize,
    traceless: bool,
}

impl LocalObservable {
    pub fn new(matrix: DenseTensor, site: usize) -> Result<Self> {
        let dev = hermiticity_deviation(&matrix)?;
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        let traceless = matrix.trace()?.norm() < HERMITIAN_TOL;
        Ok(Self {
            matrix,
            site,
            traceless,
        })
    }

    /// Whether Tr(O) vanished at construction. The distance-decay theorem
    /// assumes a traceless observable; trace-ful ones are allowed but flagged.
    pub fn is_traceless(&self) -> bool {
        self.traceless
    }
}

/// Transfer matrix for one site pair: composite row (l̄·D_ket + l) maps to
/// composite column (r̄·D_ket + r), entries Σ_{j,j'} conj(B_{j'}[l̄,r̄])
/// · W[j', j] · A_j[l,r] with W the observable (or identity pairing).
fn site_transfer(
    ket_site: &DenseTensor,
    bra_site: &DenseTensor,
    obs: Option<&DenseTensor>,
) -> Result<DenseTensor> {
    let bra_conj = bra_site.conj();
    let weighted = match obs {
        // W[j', j] · A_j[l, r] -> (j', l, r)
        Some(w) => w.contract(ket_site, &[(1, 0)])?,
        None => ket_site.clone(),
    };
    // conj(B)[j', l̄, r̄] × weighted[j', l, r] over j' -> (l̄, r̄, l, r)
    let t = bra_conj.contract(&weighted, &[(0, 0)])?;
    // -> (l̄, l, r̄, r)
    t.transpose(&[0, 2, 1, 3])
}

/// Multiply the chain of transfer matrices and trace the periodic closure.
fn transfer_product_trace(transfers: &[DenseTensor]) -> Result<Complex64> {
    let first = &transfers[0];
    let (db, dk) = (first.shape()[0], first.shape()[1]);
    let mut acc = first.reshape(&[db * dk, db * dk])?;
    for t in &transfers[1..] {
        let m = t.reshape(&[db * dk, db * dk])?;
        acc = acc.contract(&m, &[(1, 0)])?;
    }
    acc.trace()
}

/// `⟨phi|psi⟩` by sequential transfer-matrix multiplication.
pub fn inner_product(psi: &MpsState, phi: &MpsState) -> Result<Complex64> {
    if psi.n != phi.n || psi.d != phi.d {
        return Err(Error::ShapeMismatch {
            expected: format!("n={}, d={}", psi.n, psi.d),
            got: format!("n={}, d={}", phi.n, phi.d),
        });
    }
    let transfers: Vec<DenseTensor> = psi
        .sites
        .iter()
        .zip(&phi.sites)
        .map(|(a, b)| site_transfer(a, b, None))
        .collect::<Result<_>>()?;
    transfer_product_trace(&transfers)
}

/// `⟨phi|O_m|psi⟩` with the observable spliced into site m's transfer.
pub fn local_matrix_element(
    psi: &MpsState,
    phi: &MpsState,
    obs: &LocalObservable,
) -> Result<Complex64> {
    if psi.n != phi.n || psi.d != phi.d {
        return Err(Error::ShapeMismatch {
            expected: format!("n={}, d={}", psi.n, psi.d),
            got: format!("n={}, d={}", phi.n, phi.d),
        });
    }
    if obs.site >= psi.n {
        return Err(Error::IndexOutOfRange {
            what: "observable site",
            index: obs.site + 1,
            max: psi.n,
        });
    }
    if obs.matrix.shape() != [psi.d, psi.d] {
        return Err(Error::ShapeMismatch {
            expected: format!("[{0}, {0}]", psi.d),
            got: format!("{:?}", obs.matrix.shape()),
        });
    }
    let transfers: Vec<DenseTensor> = psi
        .sites
        .iter()
        .zip(&phi.sites)
        .enumerate()
        .map(|(i, (a, b))| {
            let w = if i == obs.site { Some(&obs.matrix) } else { None };
            site_transfer(a, b, w)
        })
        .collect::<Result<_>>()?;
    transfer_product_trace(&transfers)
}

/// `⟨psi|psi⟩`, checked real.
pub fn norm_sq(psi: &MpsState) -> Result<f64> {
    let z = inner_product(psi, psi)?;
    debug_assert!(z.im.abs() <= 1e-10 * (1.0 + z.re.abs()), "norm not real: {z}");
    Ok(z.re)
}

/// Normalized expectation `⟨psi|O_m|psi⟩ / ⟨psi|psi⟩`.
pub fn local_expectation(psi: &MpsState, obs: &LocalObservable) -> Result<f64> {
    let norm = norm_sq(psi)?;
    if norm < NORM_DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateNorm { norm });
    }
    let num = local_matrix_element(psi, psi, obs)?;
    debug_assert!(
        num.im.abs() <= 1e-10 * (1.0 + num.norm()),
        "expectation not real: {num}"
    );
    Ok(num.re / norm)
}

/// Expand to the dense statevector of length dⁿ (testing oracle; guarded).
pub fn to_statevector(psi: &MpsState) -> Result<DenseTensor> {
    let dim = (psi.d as f64).powi(psi.n as i32);
    if dim > (1u64 << 20) as f64 {
        return Err(Error::SizeGuard {
            detail: format!("d^n = {}^{} exceeds 2^20", psi.d, psi.n),
        });
    }
    // Accumulate T[(j_1..j_i), l, r], starting from the bond identity.
    let mut acc = DenseTensor::identity(psi.bond).reshape(&[1, psi.bond, psi.bond])?;
    for site in &psi.sites {
        // acc[(J, l, m)] × site[(j, m, r)] over m -> (J, l, j, r)
        let next = acc.contract(site, &[(2, 1)])?;
        let next = next.transpose(&[0, 2, 1, 3])?;
        let (jj, d, b) = (acc.shape()[0], psi.d, psi.bond);
        acc = next.reshape(&[jj * d, b, b])?;
    }
    // Periodic closure: amplitude(J) = Σ_l acc[J, l, l].
    let total = acc.shape()[0];
    let out = DenseTensor::from_fn(vec![total], |ix| {
        (0..psi.bond).map(|l| acc.get(&[ix[0], l, l])).sum()
    });
    Ok(out)
}
