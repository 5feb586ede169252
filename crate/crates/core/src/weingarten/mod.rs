//! Exact Haar-moment machinery: integer partitions, symmetric-group
//! characters by the Murnaghan–Nakayama rule, U(N) irrep dimensions,
//! Weingarten functions in exact rational arithmetic, and the explicit
//! first/second moment tensors assembled from δ-patterns.
//!
//! Everything up to the moment tensors is exact; doubles only appear when a
//! [`MomentTensor`] is materialized for contraction.

pub mod oracle;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

pub use oracle::{exact_grad_mean, exact_grad_variance, OracleConfig, OracleLoss};

/// A non-increasing sequence of positive parts summing to `total()`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    parts: Vec<usize>,
}

impl Partition {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.iter().any(|&p| p == 0) || parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig {
                detail: format!("not a partition: {parts:?}"),
            });
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn total(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, p) in self.parts.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, ")")
    }
}

/// All partitions of `t`, in descending lexicographic order.
pub fn partitions_of(t: usize) -> Vec<Partition> {
    fn rec(remaining: usize, max_part: usize, prefix: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if remaining == 0 {
            out.push(Partition {
                parts: prefix.clone(),
            });
            return;
        }
        for part in (1..=remaining.min(max_part)).rev() {
            prefix.push(part);
            rec(remaining - part, part, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(t, t, &mut Vec::new(), &mut out);
    out
}

/// Dimension of the S_t irrep indexed by `eta`: the hook length formula
/// `|η|! / Π h(i,j)`.
pub fn hook_dimension(eta: &Partition) -> u128 {
    let t = eta.total();
    if t == 0 {
        return 1;
    }
    // column heights: number of rows whose length exceeds j
    let width = eta.parts[0];
    let col_height = |j: usize| eta.parts.iter().filter(|&&p| p > j).count();
    let mut hooks: u128 = 1;
    for (i, &row) in eta.parts.iter().enumerate() {
        for j in 0..row {
            let h = (row - j) + (col_height(j) - i) - 1;
            hooks *= h as u128;
        }
    }
    let mut fact: u128 = 1;
    for k in 2..=t {
        fact *= k as u128;
    }
    fact / hooks
}

/// Dimension of the U(N) irrep indexed by `eta` (the Schur polynomial at
/// `(1,…,1)`): `Π_{i<j} (λ_i − λ_j + j − i) / (j − i)` with λ padded to N.
pub fn schur_dimension(eta: &Partition, n: usize) -> Result<BigInt> {
    if eta.len() > n {
        return Err(Error::RepresentationVanishes {
            len: eta.len(),
            n,
        });
    }
    let lambda: Vec<i64> = (0..n)
        .map(|i| eta.parts.get(i).copied().unwrap_or(0) as i64)
        .collect();
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..n {
        for j in (i + 1)..n {
            num *= BigInt::from(lambda[i] - lambda[j] + j as i64 - i as i64);
            den *= BigInt::from((j - i) as i64);
        }
    }
    Ok(num / den)
}

/// A permutation of {0,…,t−1}.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Perm {
    images: Vec<usize>,
}

impl Perm {
    pub fn identity(t: usize) -> Self {
        Self {
            images: (0..t).collect(),
        }
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let t = images.len();
        let mut seen = vec![false; t];
        for &x in &images {
            if x >= t || std::mem::replace(&mut seen[x], true) {
                return Err(Error::InvalidConfig {
                    detail: format!("not a permutation: {images:?}"),
                });
            }
        }
        Ok(Self { images })
    }

    /// The transposition (a b) in S_t.
    pub fn transposition(t: usize, a: usize, b: usize) -> Self {
        let mut images: Vec<usize> = (0..t).collect();
        images.swap(a, b);
        Self { images }
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    pub fn apply(&self, x: usize) -> usize {
        self.images[x]
    }

    /// `(self ∘ other)(x) = self(other(x))`.
    pub fn compose(&self, other: &Perm) -> Perm {
        Perm {
            images: other.images.iter().map(|&x| self.images[x]).collect(),
        }
    }

    pub fn inverse(&self) -> Perm {
        let mut images = vec![0; self.images.len()];
        for (x, &y) in self.images.iter().enumerate() {
            images[y] = x;
        }
        Perm { images }
    }

    pub fn cycle_count(&self) -> usize {
        let t = self.images.len();
        let mut seen = vec![false; t];
        let mut cycles = 0;
        for start in 0..t {
            if seen[start] {
                continue;
            }
            cycles += 1;
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                x = self.images[x];
            }
        }
        cycles
    }

    pub fn cycle_type(&self) -> Partition {
        let t = self.images.len();
        let mut seen = vec![false; t];
        let mut lens = Vec::new();
        for start in 0..t {
            if seen[start] {
                continue;
            }
            let mut len = 0;
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                x = self.images[x];
                len += 1;
            }
            lens.push(len);
        }
        lens.sort_unstable_by(|a, b| b.cmp(a));
        Partition { parts: lens }
    }

    /// Every element of S_t.
    pub fn all(t: usize) -> Vec<Perm> {
        let mut out = Vec::new();
        let mut images: Vec<usize> = (0..t).collect();
        heap_permutations(&mut images, t, &mut out);
        out
    }
}

fn heap_permutations(arr: &mut Vec<usize>, k: usize, out: &mut Vec<Perm>) {
    if k <= 1 {
        out.push(Perm {
            images: arr.clone(),
        });
        return;
    }
    for i in 0..k {
        heap_permutations(arr, k - 1, out);
        if k % 2 == 0 {
            arr.swap(i, k - 1);
        } else {
            arr.swap(0, k - 1);
        }
    }
}

/// Irreducible character `χ^η(σ)` by the Murnaghan–Nakayama rule, run on
/// beta-numbers: removing a border strip of length L is moving one beta
/// number down by L, with sign from the number of occupied slots jumped.
pub fn character(eta: &Partition, sigma: &Perm) -> i64 {
    assert_eq!(
        eta.total(),
        sigma.degree(),
        "partition weight must match permutation degree"
    );
    let cycles = sigma.cycle_type();
    let rows = eta.len().max(1);
    let beta: Vec<usize> = (0..rows)
        .map(|i| eta.parts.get(i).copied().unwrap_or(0) + (rows - 1 - i))
        .collect();
    mn_recurse(&beta, cycles.parts())
}

fn mn_recurse(beta: &[usize], cycles: &[usize]) -> i64 {
    let Some((&len, rest)) = cycles.split_first() else {
        return 1;
    };
    let mut total = 0i64;
    for (slot, &b) in beta.iter().enumerate() {
        if b < len {
            continue;
        }
        let target = b - len;
        if beta.contains(&target) {
            continue;
        }
        // parity: occupied beta numbers strictly between target and b
        let jumped = beta
            .iter()
            .filter(|&&x| x > target && x < b)
            .count();
        let sign = if jumped % 2 == 0 { 1 } else { -1 };
        let mut next: Vec<usize> = beta.to_vec();
        next[slot] = target;
        total += sign * mn_recurse(&next, rest);
    }
    total
}

/// Exact Weingarten function `Wg(σ, N)` for `σ ∈ S_t`, valid for `N ≥ t`.
pub fn weingarten(sigma: &Perm, n: usize) -> Result<BigRational> {
    let t = sigma.degree();
    if n < t {
        return Err(Error::DegenerateRegime { n, t });
    }
    let mut sum = BigRational::zero();
    for eta in partitions_of(t) {
        if eta.len() > n {
            continue;
        }
        let chi_id = BigInt::from(hook_dimension(&eta));
        let chi_sigma = BigInt::from(character(&eta, sigma));
        let schur = schur_dimension(&eta, n)?;
        sum += BigRational::new(&chi_id * &chi_id * chi_sigma, schur);
    }
    let mut t_fact = BigInt::one();
    for k in 2..=t {
        t_fact *= BigInt::from(k as u64);
    }
    Ok(sum / BigRational::from(&t_fact * &t_fact))
}

/// Exact first (t = 1) or second (t = 2) Haar moment tensor of U(N):
/// rank-4t with axis order `(i₁, j₁, …, i_t, j_t, i′₁, j′₁, …, i′_t, j′_t)`,
/// where `(i, j)` indexes `U_{i,j}` and primes mark conjugated factors.
#[derive(Clone, Debug)]
pub struct MomentTensor {
    pub order: usize,
    pub dim: usize,
    pub data: DenseTensor,
}

pub fn moment_tensor(n: usize, t: usize) -> Result<MomentTensor> {
    if !(1..=2).contains(&t) {
        return Err(Error::UnsupportedMomentOrder { t });
    }
    if n < t {
        return Err(Error::DegenerateRegime { n, t });
    }
    let perms = Perm::all(t);
    // Exact rational accumulation per entry, materialized to doubles once.
    let len = n.pow(4 * t as u32);
    let mut entries = vec![BigRational::zero(); len];
    let shape = vec![n; 4 * t];
    let stride = |axis: usize| n.pow((4 * t - 1 - axis) as u32);

    let mut index = vec![0usize; 2 * t]; // free indices: i_1..i_t, j_1..j_t
    for sigma in &perms {
        for tau in &perms {
            let wg = weingarten(&tau.compose(&sigma.inverse()), n)?;
            // enumerate all (i_λ, j_λ); primes are then determined
            let total = n.pow(2 * t as u32);
            for flat in 0..total {
                let mut rest = flat;
                for slot in (0..2 * t).rev() {
                    index[slot] = rest % n;
                    rest /= n;
                }
                let (is, js) = index.split_at(t);
                let mut pos = 0usize;
                for lam in 0..t {
                    pos += is[lam] * stride(2 * lam);
                    pos += js[lam] * stride(2 * lam + 1);
                }
                // i′_{σ(λ)} = i_λ and j′_{τ(λ)} = j_λ
                for lam in 0..t {
                    pos += is[lam] * stride(2 * t + 2 * sigma.apply(lam));
                    pos += js[lam] * stride(2 * t + 2 * tau.apply(lam) + 1);
                }
                entries[pos] += &wg;
            }
        }
    }
    let data: Vec<Complex64> = entries
        .iter()
        .map(|r| Complex64::new(r.to_f64().expect("rational fits in f64"), 0.0))
        .collect();
    Ok(MomentTensor {
        order: t,
        dim: n,
        data: DenseTensor::new(shape, data)?,
    })
}

/// Pretty rational for reports.
pub fn rational_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        format!("{}", r.numer())
    } else if r.numer().is_negative() {
        format!("-{}/{}", r.numer().abs(), r.denom())
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unitary::haar_sample;
    use num_traits::FromPrimitive;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rat(num: i64, den: i64) -> BigRational {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    #[test]
    fn partition_enumeration() {
        let p1 = partitions_of(1);
        assert_eq!(p1, vec![Partition::new(vec![1]).unwrap()]);
        let p2 = partitions_of(2);
        assert_eq!(
            p2,
            vec![
                Partition::new(vec![2]).unwrap(),
                Partition::new(vec![1, 1]).unwrap()
            ]
        );
        // independent counter: p(n) via the standard two-variable recursion
        fn count(n: i64, max: i64) -> usize {
            if n == 0 {
                return 1;
            }
            if n < 0 || max == 0 {
                return 0;
            }
            count(n - max, max) + count(n, max - 1)
        }
        for t in 1..=8 {
            assert_eq!(partitions_of(t).len(), count(t as i64, t as i64), "t={t}");
        }
        assert_eq!(partitions_of(5).len(), 7);
    }

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![2, 3]).is_err());
        assert!(Partition::new(vec![2, 0]).is_err());
        assert!(Partition::new(vec![3, 1, 1]).is_ok());
    }

    #[test]
    fn hook_dimensions() {
        for t in 1..=6 {
            assert_eq!(hook_dimension(&Partition::new(vec![t]).unwrap()), 1);
            assert_eq!(hook_dimension(&Partition::new(vec![1; t]).unwrap()), 1);
        }
        // brute force count of standard Young tableaux for (2,1)
        let mut tableaux = 0;
        // fill cells (0,0),(0,1),(1,0) with 1..3, rows/cols increasing
        let cells = [(0, 0), (0, 1), (1, 0)];
        let perms = Perm::all(3);
        for p in &perms {
            let value = |cell: usize| p.apply(cell);
            let ok = value(0) < value(1) && value(0) < value(2);
            let _ = cells;
            if ok {
                tableaux += 1;
            }
        }
        assert_eq!(hook_dimension(&Partition::new(vec![2, 1]).unwrap()) as usize, tableaux);
        // a泛 larger spot check: dim of (3,2) in S_5 is 5
        assert_eq!(hook_dimension(&Partition::new(vec![3, 2]).unwrap()), 5);
    }

    #[test]
    fn schur_dimensions() {
        for n in 2..=6 {
            let def = schur_dimension(&Partition::new(vec![1]).unwrap(), n).unwrap();
            assert_eq!(def, BigInt::from(n));
            let sym = schur_dimension(&Partition::new(vec![2]).unwrap(), n).unwrap();
            assert_eq!(sym, BigInt::from(n * (n + 1) / 2));
            let asym = schur_dimension(&Partition::new(vec![1, 1]).unwrap(), n).unwrap();
            assert_eq!(asym, BigInt::from(n * (n - 1) / 2));
        }
        assert!(matches!(
            schur_dimension(&Partition::new(vec![1, 1, 1]).unwrap(), 2),
            Err(Error::RepresentationVanishes { .. })
        ));
    }

    #[test]
    fn characters_at_identity_and_sign() {
        for t in 1..=5 {
            let id = Perm::identity(t);
            for eta in partitions_of(t) {
                assert_eq!(
                    character(&eta, &id),
                    hook_dimension(&eta) as i64,
                    "eta={eta}"
                );
            }
        }
        let swap = Perm::transposition(2, 0, 1);
        assert_eq!(character(&Partition::new(vec![1, 1]).unwrap(), &swap), -1);
        assert_eq!(character(&Partition::new(vec![2]).unwrap(), &swap), 1);
    }

    #[test]
    fn s3_character_table_vs_permutation_matrices() {
        // Independent oracle: the defining permutation representation on 3
        // points decomposes as trivial ⊕ standard, so the standard character
        // is (#fixed points − 1); trivial is 1 and sign is the parity.
        let perms = Perm::all(3);
        let trivial = Partition::new(vec![3]).unwrap();
        let standard = Partition::new(vec![2, 1]).unwrap();
        let sign = Partition::new(vec![1, 1, 1]).unwrap();
        for p in &perms {
            let fixed = (0..3).filter(|&x| p.apply(x) == x).count() as i64;
            let parity = if (3 - p.cycle_count()) % 2 == 0 { 1 } else { -1 };
            assert_eq!(character(&trivial, p), 1);
            assert_eq!(character(&standard, p), fixed - 1, "perm {p:?}");
            assert_eq!(character(&sign, p), parity, "perm {p:?}");
        }
    }

    #[test]
    fn weingarten_t1_and_t2_closed_forms() {
        for n in 2..=8usize {
            let id1 = Perm::identity(1);
            assert_eq!(weingarten(&id1, n).unwrap(), rat(1, n as i64));

            let id2 = Perm::identity(2);
            let swap = Perm::transposition(2, 0, 1);
            let nn = n as i64;
            assert_eq!(weingarten(&id2, n).unwrap(), rat(1, nn * nn - 1));
            assert_eq!(
                weingarten(&swap, n).unwrap(),
                rat(-1, nn * (nn * nn - 1))
            );
        }
        // spec'd spot values at N = 4
        assert_eq!(weingarten(&Perm::identity(2), 4).unwrap(), rat(1, 15));
        assert_eq!(
            weingarten(&Perm::transposition(2, 0, 1), 4).unwrap(),
            rat(-1, 60)
        );
    }

    #[test]
    fn weingarten_degenerate_regime_rejected() {
        assert!(matches!(
            weingarten(&Perm::identity(3), 2),
            Err(Error::DegenerateRegime { .. })
        ));
    }

    #[test]
    fn gram_identity() {
        // Σ_τ N^{cycles(σ⁻¹τ)} · Wg(τ⁻¹π, N) = δ_{σπ}, exactly in rationals.
        for t in [2usize, 3] {
            for n in [3usize, 4, 5] {
                let perms = Perm::all(t);
                for sigma in &perms {
                    for pi in &perms {
                        let mut sum = BigRational::zero();
                        for tau in &perms {
                            let cycles = sigma.inverse().compose(tau).cycle_count();
                            let gram = BigRational::from_u64((n as u64).pow(cycles as u32))
                                .unwrap();
                            sum += gram * weingarten(&tau.inverse().compose(pi), n).unwrap();
                        }
                        let expect = if sigma == pi {
                            BigRational::one()
                        } else {
                            BigRational::zero()
                        };
                        assert_eq!(sum, expect, "t={t} N={n} σ={sigma:?} π={pi:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn moment_tensor_t1_entries() {
        let m = moment_tensor(2, 1).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                for ip in 0..2 {
                    for jp in 0..2 {
                        let expect = if i == ip && j == jp { 0.5 } else { 0.0 };
                        assert_eq!(m.data.get(&[i, j, ip, jp]), Complex64::new(expect, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn moment_tensor_t2_matches_closed_form() {
        // Eq. form: 1/(N²−1)·(S-S + A-A patterns) − 1/(N(N²−1))·(S-A + A-S).
        let n = 4;
        let m = moment_tensor(n, 2).unwrap();
        let c1 = 1.0 / ((n * n - 1) as f64);
        let c2 = -1.0 / ((n * (n * n - 1)) as f64);
        let mut checked = 0;
        for idx in 0..m.data.len() {
            let mut digits = [0usize; 8];
            let mut rest = idx;
            for slot in (0..8).rev() {
                digits[slot] = rest % n;
                rest /= n;
            }
            let [i0, j0, i1, j1, i0p, j0p, i1p, j1p] = digits;
            let s_rows = i0 == i0p && i1 == i1p;
            let a_rows = i0 == i1p && i1 == i0p;
            let s_cols = j0 == j0p && j1 == j1p;
            let a_cols = j0 == j1p && j1 == j0p;
            let mut expect = 0.0;
            if s_rows && s_cols {
                expect += c1;
            }
            if a_rows && a_cols {
                expect += c1;
            }
            if s_rows && a_cols {
                expect += c2;
            }
            if a_rows && s_cols {
                expect += c2;
            }
            let got = m.data.data()[idx];
            assert!(
                (got - Complex64::new(expect, 0.0)).norm() < 1e-15,
                "idx {digits:?}: {got} vs {expect}"
            );
            if expect != 0.0 {
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn moment_tensor_replica_swap_symmetry() {
        let m = moment_tensor(3, 2).unwrap();
        // simultaneous swap of replica 1 and 2 in both U and Ū slots:
        // axes (i1 j1 i2 j2 i1' j1' i2' j2') -> (i2 j2 i1 j1 i2' j2' i1' j1')
        let swapped = m.data.transpose(&[2, 3, 0, 1, 6, 7, 4, 5]).unwrap();
        assert_eq!(swapped, m.data);
    }

    #[test]
    fn moment_tensor_fourth_moment_value() {
        // E|U00|⁴ at N=4: sum of the two S/A terms at coincident indices.
        let m = moment_tensor(4, 2).unwrap();
        let v = m.data.get(&[0; 8]);
        assert!((v.re - 0.1).abs() < 1e-15, "got {v}");
    }

    #[test]
    fn moment_tensor_rejects_bad_orders() {
        assert!(matches!(
            moment_tensor(4, 3),
            Err(Error::UnsupportedMomentOrder { t: 3 })
        ));
        assert!(matches!(
            moment_tensor(1, 2),
            Err(Error::DegenerateRegime { .. })
        ));
    }

    #[test]
    fn moment_tensor_t1_matches_sampled_average() {
        let n = 3;
        let samples = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut acc = vec![Complex64::ZERO; n * n * n * n];
        let mut acc_sq = vec![0.0f64; n * n * n * n];
        for _ in 0..samples {
            let u = haar_sample(n, &mut rng).unwrap();
            for i in 0..n {
                for j in 0..n {
                    for ip in 0..n {
                        for jp in 0..n {
                            let v = u.get(&[i, j]) * u.get(&[ip, jp]).conj();
                            let pos = ((i * n + j) * n + ip) * n + jp;
                            acc[pos] += v;
                            acc_sq[pos] += v.norm_sqr();
                        }
                    }
                }
            }
        }
        let m = moment_tensor(n, 1).unwrap();
        let ns = samples as f64;
        for (pos, &mean) in acc.iter().enumerate() {
            let mean = mean / ns;
            let var = acc_sq[pos] / ns - mean.norm_sqr();
            let se = (var / ns).sqrt().max(1e-12);
            let expect = m.data.data()[pos];
            assert!(
                (mean - expect).norm() < 5.0 * se,
                "pos {pos}: {mean} vs {expect} (se {se:.2e})"
            );
        }
    }
}
