//! Haar-random unitaries, Hermitian generator bases, and the parameterized
//! site unitary `U = U⁻·U⁺` together with its derivative factorization.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const UNITARY_TOL: f64 = 1e-10;

/// Max-entry deviation of `U U† − I`.
pub fn unitarity_deviation(u: &DenseTensor) -> Result<f64> {
    let m = u.to_matrix()?;
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{:?}", u.shape()),
        });
    }
    let prod = &m * m.adjoint();
    let mut dev: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            let target = if r == c { Complex64::ONE } else { Complex64::ZERO };
            dev = dev.max((prod[(r, c)] - target).norm());
        }
    }
    Ok(dev)
}

/// Max-entry deviation of `A − A†`.
pub fn hermiticity_deviation(a: &DenseTensor) -> Result<f64> {
    let m = a.to_matrix()?;
    if m.nrows() != m.ncols() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{:?}", a.shape()),
        });
    }
    let diff = &m - m.adjoint();
    Ok(diff.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Draw one Haar-distributed element of U(N): complex Ginibre matrix, QR,
/// then the R-diagonal phases divided out (plain QR alone is not Haar).
pub fn haar_sample(n: usize, rng: &mut impl Rng) -> Result<DenseTensor> {
    if n == 0 {
        return Err(Error::InvalidConfig {
            detail: "haar_sample requires N >= 1".into(),
        });
    }
    let ginibre = DMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re, im)
    });
    let qr = ginibre.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() == 0.0 { Complex64::ONE } else { d / d.norm() };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    Ok(DenseTensor::from_matrix(&q))
}

/// Generalized Gell-Mann basis of N×N Hermitian matrices: the N²−1 traceless
/// generators (symmetric pairs, antisymmetric pairs, diagonal), each with
/// Tr(G²) = 2, followed by the identity.
pub fn hermitian_basis(n: usize) -> Result<Vec<DenseTensor>> {
    if n < 2 {
        return Err(Error::InvalidConfig {
            detail: "hermitian_basis requires N >= 2".into(),
        });
    }
    let mut basis = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in (a + 1)..n {
            let mut sym = DenseTensor::zeros(vec![n, n]);
            sym.set(&[a, b], Complex64::ONE);
            sym.set(&[b, a], Complex64::ONE);
            basis.push(sym);
            let mut asym = DenseTensor::zeros(vec![n, n]);
            asym.set(&[a, b], Complex64::new(0.0, -1.0));
            asym.set(&[b, a], Complex64::new(0.0, 1.0));
            basis.push(asym);
        }
    }
    for l in 1..n {
        let norm = (2.0 / (l as f64 * (l + 1) as f64)).sqrt();
        let mut diag = DenseTensor::zeros(vec![n, n]);
        for k in 0..l {
            diag.set(&[k, k], Complex64::new(norm, 0.0));
        }
        diag.set(&[l, l], Complex64::new(-(l as f64) * norm, 0.0));
        basis.push(diag);
    }
    basis.push(DenseTensor::identity(n));
    Ok(basis)
}

/// The default fixed derivative direction on the composite Dd space: the
/// first symmetric generator (the Pauli-x analog), traceless with Tr(G²)=2.
pub fn default_split_generator(n: usize) -> DenseTensor {
    let mut g = DenseTensor::zeros(vec![n, n]);
    g.set(&[0, 1], Complex64::ONE);
    g.set(&[1, 0], Complex64::ONE);
    g
}

/// `exp(iθG)` for Hermitian `G`, through the eigendecomposition
/// `G = V Λ V†`, so the result is unitary by construction.
pub fn exp_i_theta_g(g: &DenseTensor, theta: f64) -> Result<DenseTensor> {
    let dev = hermiticity_deviation(g)?;
    if dev > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let m = g.to_matrix()?;
    let eig = m.symmetric_eigen();
    let phases = DMatrix::from_diagonal(
        &eig.eigenvalues
            .map(|lambda| Complex64::new(0.0, theta * lambda).exp()),
    );
    let out = &eig.eigenvectors * phases * eig.eigenvectors.adjoint();
    Ok(DenseTensor::from_matrix(&out))
}

/// One site's parameterized unitary: an ordered product of exponential
/// factors `exp(iθ_ξ G_ξ)` with a split index λ separating the U⁻ block
/// (factors 1..λ) from the U⁺ block (the rest).
#[derive(Clone, Debug)]
pub struct ParamUnitarySite {
    pub dim: usize,
    pub generators: Vec<DenseTensor>,
    pub angles: Vec<f64>,
    pub split: usize,
}

impl ParamUnitarySite {
    pub fn new(generators: Vec<DenseTensor>, angles: Vec<f64>, split: usize) -> Result<Self> {
        if generators.is_empty() || generators.len() != angles.len() {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "generator/angle count mismatch: {} vs {}",
                    generators.len(),
                    angles.len()
                ),
            });
        }
        if split == 0 || split >= generators.len() {
            return Err(Error::InvalidConfig {
                detail: format!(
                    "split index {} must satisfy 1 <= split < {}",
                    split,
                    generators.len()
                ),
            });
        }
        let dim = generators[0].shape()[0];
        for g in &generators {
            if g.shape() != [dim, dim] {
                return Err(Error::ShapeMismatch {
                    expected: format!("[{dim}, {dim}]"),
                    got: format!("{:?}", g.shape()),
                });
            }
            let dev = hermiticity_deviation(g)?;
            if dev > HERMITIAN_TOL {
                return Err(Error::NotHermitian { deviation: dev });
            }
        }
        Ok(Self {
            dim,
            generators,
            angles,
            split,
        })
    }

    /// Full Gell-Mann basis (plus identity), angles uniform on [−π, π),
    /// split at half the generator count.
    pub fn sample_uniform(dim: usize, rng: &mut impl Rng) -> Result<Self> {
        let generators = hermitian_basis(dim)?;
        let angles: Vec<f64> = (0..generators.len())
            .map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        let split = generators.len() / 2;
        Self::new(generators, angles, split)
    }

    pub fn num_params(&self) -> usize {
        self.generators.len()
    }
}

/// Product of the exponential factors in generator order.
pub fn build_unitary(site: &ParamUnitarySite) -> Result<DenseTensor> {
    let mut u = DMatrix::identity(site.dim, site.dim);
    for (g, &theta) in site.generators.iter().zip(&site.angles) {
        let factor = exp_i_theta_g(g, theta)?.to_matrix()?;
        u *= factor;
    }
    Ok(DenseTensor::from_matrix(&u))
}

/// Factor the derivative of [`build_unitary`] with respect to parameter `k`
/// (0-based) as `∂_k U = i · left · G_k · right`, with the generator placed
/// immediately after its own exponential factor (they commute), so that at
/// `k = λ − 1` the factors are exactly `left = U⁻`, `right = U⁺`.
pub fn derivative_factors(
    site: &ParamUnitarySite,
    k: usize,
) -> Result<(DenseTensor, DenseTensor, DenseTensor)> {
    if k >= site.num_params() {
        return Err(Error::IndexOutOfRange {
            what: "parameter",
            index: k + 1,
            max: site.num_params(),
        });
    }
    let mut left = DMatrix::identity(site.dim, site.dim);
    for idx in 0..=k {
        left *= exp_i_theta_g(&site.generators[idx], site.angles[idx])?.to_matrix()?;
    }
    let mut right = DMatrix::identity(site.dim, site.dim);
    for idx in (k + 1)..site.num_params() {
        right *= exp_i_theta_g(&site.generators[idx], site.angles[idx])?.to_matrix()?;
    }
    Ok((
        DenseTensor::from_matrix(&left),
        site.generators[k].clone(),
        DenseTensor::from_matrix(&right),
    ))
}

/// One site drawn in the split form used for averaging: the two unitary
/// halves sampled independently from the Haar measure and a fixed Hermitian
/// derivative direction between them.
#[derive(Clone, Debug)]
pub struct HaarSplitSite {
    pub u_minus: DenseTensor,
    pub u_plus: DenseTensor,
    pub generator: DenseTensor,
}

impl HaarSplitSite {
    pub fn new(u_minus: DenseTensor, u_plus: DenseTensor, generator: DenseTensor) -> Result<Self> {
        for u in [&u_minus, &u_plus] {
            let dev = unitarity_deviation(u)?;
            if dev > UNITARY_TOL {
                return Err(Error::NotUnitary { deviation: dev });
            }
        }
        let dev = hermiticity_deviation(&generator)?;
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation: dev });
        }
        Ok(Self {
            u_minus,
            u_plus,
            generator,
        })
    }

    pub fn sample(dim: usize, generator: DenseTensor, rng: &mut impl Rng) -> Result<Self> {
        Self::new(haar_sample(dim, rng)?, haar_sample(dim, rng)?, generator)
    }

    /// The full site unitary `U⁻·U⁺`.
    pub fn unitary(&self) -> Result<DenseTensor> {
        self.u_minus.contract(&self.u_plus, &[(1, 0)])
    }

    /// The derivative insertion `U⁻·G·U⁺` (without the factor of i).
    pub fn derivative_core(&self) -> Result<DenseTensor> {
        self.u_minus
            .contract(&self.generator, &[(1, 0)])?
            .contract(&self.u_plus, &[(1, 0)])
    }
}
