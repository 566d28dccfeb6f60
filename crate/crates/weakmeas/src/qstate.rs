//! Spin-1/2 state vectors, observables, Born sampling, and reduced states.
//!
//! Everything here is plain dense linear algebra over `Complex64`. Kets are
//! column vectors, operators are row-major square matrices. The only
//! quantum-specific conventions live in `spin_observable` (the Pauli form
//! σ·n) and in the eigenvector phase rule: the first component of magnitude
//! above 1e-10 is made real and positive, so eigenbases are reproducible
//! across runs and platforms.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};

/// Complex double, the amplitude type used throughout.
pub type C64 = Complex64;

const PHASE_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-12;

/// A pure state vector of arbitrary finite dimension.
///
/// `Ket` does not force normalization at construction; `normalized` returns
/// a unit-norm copy and the measurement ops check completeness of the
/// probability mass they see, which catches un-normalized input where it
/// matters.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amps: Vec<C64>,
}

impl Ket {
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::BadDim {
                expected: 1,
                got: 0,
            });
        }
        Ok(Ket { amps })
    }

    pub fn from_reals(amps: &[f64]) -> Result<Self> {
        Ket::new(amps.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Computational basis state |idx⟩ in a `dim`-dimensional space.
    pub fn basis_state(dim: usize, idx: usize) -> Result<Self> {
        if idx >= dim {
            return Err(Error::BadDim {
                expected: dim,
                got: idx,
            });
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[idx] = C64::new(1.0, 0.0);
        Ok(Ket { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amp(&self, i: usize) -> C64 {
        self.amps[i]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Unit-norm copy. The global phase is left untouched.
    pub fn normalized(&self) -> Result<Ket> {
        let n = self.norm();
        if n < 1e-300 {
            return Err(Error::ZeroVector);
        }
        Ok(Ket {
            amps: self.amps.iter().map(|a| a / n).collect(),
        })
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn scaled(&self, factor: C64) -> Ket {
        Ket {
            amps: self.amps.iter().map(|a| a * factor).collect(),
        }
    }

    /// Largest component-wise distance to `other`, ignoring nothing: global
    /// phase is significant here. Useful for exact-collapse assertions.
    pub fn max_component_distance(&self, other: &Ket) -> f64 {
        assert_eq!(self.dim(), other.dim());
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// ⟨bra|ket⟩ with the conjugate on the first argument.
pub fn inner(bra: &Ket, ket: &Ket) -> Result<C64> {
    if bra.dim() != ket.dim() {
        return Err(Error::DimMismatch(bra.dim(), ket.dim()));
    }
    Ok(bra
        .amps
        .iter()
        .zip(&ket.amps)
        .map(|(a, b)| a.conj() * b)
        .sum())
}

/// Kronecker product |k1⟩⊗|k2⟩; the first factor varies slowest.
pub fn tensor(k1: &Ket, k2: &Ket) -> Ket {
    let mut amps = Vec::with_capacity(k1.dim() * k2.dim());
    for a in &k1.amps {
        for b in &k2.amps {
            amps.push(a * b);
        }
    }
    Ket { amps }
}

/// A unit vector on the Bloch sphere. Construction normalizes the input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochDirection {
    n: [f64; 3],
}

impl BlochDirection {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if norm < 1e-12 {
            return Err(Error::ZeroVector);
        }
        Ok(BlochDirection {
            n: [x / norm, y / norm, z / norm],
        })
    }

    pub fn x() -> Self {
        BlochDirection { n: [1.0, 0.0, 0.0] }
    }

    pub fn y() -> Self {
        BlochDirection { n: [0.0, 1.0, 0.0] }
    }

    pub fn z() -> Self {
        BlochDirection { n: [0.0, 0.0, 1.0] }
    }

    pub fn components(&self) -> [f64; 3] {
        self.n
    }

    pub fn opposite(&self) -> Self {
        BlochDirection {
            n: [-self.n[0], -self.n[1], -self.n[2]],
        }
    }

    /// Normalized eigenket of σ·n with eigenvalue +1, in the fixed phase
    /// convention.
    pub fn plus_eigenket(&self) -> Ket {
        let basis = eigenbasis(&spin_observable(self)).expect("σ·n is Hermitian 2x2");
        basis[0].1.clone()
    }

    /// Normalized eigenket of σ·n with eigenvalue −1.
    pub fn minus_eigenket(&self) -> Ket {
        let basis = eigenbasis(&spin_observable(self)).expect("σ·n is Hermitian 2x2");
        basis[1].1.clone()
    }
}

/// Dense square matrix, row-major. `hermitian` records whether the entries
/// were verified Hermitian at construction; ops that need Hermiticity check
/// the flag instead of re-scanning.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    entries: Vec<C64>,
    hermitian: bool,
}

impl Operator {
    pub fn new(dim: usize, entries: Vec<C64>, require_hermitian: bool) -> Result<Self> {
        if entries.len() != dim * dim || dim == 0 {
            return Err(Error::BadDim {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        let mut hermitian = true;
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                let diff = (entries[i * dim + j] - entries[j * dim + i].conj()).norm();
                worst = worst.max(diff);
            }
        }
        if worst > HERMITIAN_TOL {
            hermitian = false;
            if require_hermitian {
                return Err(Error::NotHermitian(worst));
            }
        }
        Ok(Operator {
            dim,
            entries,
            hermitian,
        })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![C64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = C64::new(1.0, 0.0);
        }
        Operator {
            dim,
            entries,
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.dim + j]
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn apply(&self, k: &Ket) -> Result<Ket> {
        if k.dim() != self.dim {
            return Err(Error::DimMismatch(self.dim, k.dim()));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        for (i, slot) in out.iter_mut().enumerate() {
            for j in 0..self.dim {
                *slot += self.entry(i, j) * k.amp(j);
            }
        }
        Ket::new(out)
    }

    pub fn adjoint(&self) -> Operator {
        let mut entries = vec![C64::new(0.0, 0.0); self.dim * self.dim];
        for i in 0..self.dim {
            for j in 0..self.dim {
                entries[j * self.dim + i] = self.entry(i, j).conj();
            }
        }
        Operator {
            dim: self.dim,
            entries,
            hermitian: self.hermitian,
        }
    }

    /// Matrix product self · other.
    pub fn compose(&self, other: &Operator) -> Result<Operator> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        let d = self.dim;
        let mut entries = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for k in 0..d {
                let aik = self.entry(i, k);
                for j in 0..d {
                    entries[i * d + j] += aik * other.entry(k, j);
                }
            }
        }
        Operator::new(d, entries, false)
    }

    /// Entry-wise sum.
    pub fn add(&self, other: &Operator) -> Result<Operator> {
        if self.dim != other.dim {
            return Err(Error::DimMismatch(self.dim, other.dim));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a + b)
            .collect();
        Operator::new(self.dim, entries, false)
    }
}

/// The spin observable σ·n = n_x σ_x + n_y σ_y + n_z σ_z.
pub fn spin_observable(n: &BlochDirection) -> Operator {
    let [nx, ny, nz] = n.components();
    let entries = vec![
        C64::new(nz, 0.0),
        C64::new(nx, -ny),
        C64::new(nx, ny),
        C64::new(-nz, 0.0),
    ];
    Operator {
        dim: 2,
        entries,
        hermitian: true,
    }
}

fn phase_fix(mut v: [C64; 2]) -> [C64; 2] {
    for c in v {
        if c.norm() > PHASE_TOL {
            let phase = c.conj() / c.norm();
            v = [v[0] * phase, v[1] * phase];
            break;
        }
    }
    v
}

/// Analytic spectral decomposition of a Hermitian 2×2 matrix.
/// Returns ((λ_hi, v_hi), (λ_lo, v_lo)) with λ_hi ≥ λ_lo, orthonormal
/// eigenvectors in the fixed phase convention. The larger column of
/// (A − λ_lo I) is used for v_hi, which stays numerically stable when the
/// off-diagonal entry is small.
fn eig2(alpha: f64, beta: C64, delta: f64) -> ((f64, [C64; 2]), (f64, [C64; 2])) {
    let scale = alpha.abs().max(delta.abs()).max(beta.norm()).max(1.0);
    if beta.norm() <= 1e-15 * scale {
        let e0 = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let e1 = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        return if alpha >= delta {
            ((alpha, e0), (delta, e1))
        } else {
            ((delta, e1), (alpha, e0))
        };
    }
    let mid = 0.5 * (alpha + delta);
    let half_gap = 0.5 * (alpha - delta);
    let radius = (half_gap * half_gap + beta.norm_sqr()).sqrt();
    let (lo, hi) = (mid - radius, mid + radius);

    // Columns of (A − lo·I); both are +eigenvectors of the hi eigenvalue.
    let col1 = [C64::new(alpha - lo, 0.0), beta.conj()];
    let col2 = [beta, C64::new(delta - lo, 0.0)];
    let n1 = col1[0].norm_sqr() + col1[1].norm_sqr();
    let n2 = col2[0].norm_sqr() + col2[1].norm_sqr();
    let raw = if n1 >= n2 { col1 } else { col2 };
    let norm = (raw[0].norm_sqr() + raw[1].norm_sqr()).sqrt();
    let v_hi = phase_fix([raw[0] / norm, raw[1] / norm]);
    let v_lo = phase_fix([-v_hi[1].conj(), v_hi[0].conj()]);
    ((hi, v_hi), (lo, v_lo))
}

/// Eigen-decomposition of a Hermitian 2×2 operator, eigenvalues descending.
/// Each eigenvector has its first component of magnitude above 1e-10 made
/// real-positive, so repeated calls agree bit for bit.
pub fn eigenbasis(o: &Operator) -> Result<Vec<(f64, Ket)>> {
    if o.dim() != 2 {
        return Err(Error::BadDim {
            expected: 2,
            got: o.dim(),
        });
    }
    if !o.is_hermitian() {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((o.entry(i, j) - o.entry(j, i).conj()).norm());
            }
        }
        return Err(Error::NotHermitian(worst));
    }
    let ((hi, vh), (lo, vl)) = eig2(o.entry(0, 0).re, o.entry(0, 1), o.entry(1, 1).re);
    Ok(vec![
        (hi, Ket::new(vh.to_vec())?),
        (lo, Ket::new(vl.to_vec())?),
    ])
}

/// Born probabilities of `k` over `basis`. The probabilities must account
/// for all the norm of `k` (within 1e-8), otherwise the basis is rejected
/// as incomplete; this also rejects badly un-normalized kets.
pub fn born_probabilities(k: &Ket, basis: &[Ket]) -> Result<Vec<f64>> {
    let mut probs = Vec::with_capacity(basis.len());
    for b in basis {
        probs.push(inner(b, k)?.norm_sqr());
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-8 {
        return Err(Error::IncompleteBasis(total));
    }
    Ok(probs)
}

/// One projective measurement of `k` in `basis`. Consumes exactly one f64
/// from `rng` and inverts the cumulative distribution in basis order, so a
/// fixed draw sequence fixes the outcome sequence. Returns the outcome
/// index, its Born probability, and the collapsed (basis) state.
pub fn born_sample<R: Rng + ?Sized>(
    k: &Ket,
    basis: &[Ket],
    rng: &mut R,
) -> Result<(usize, f64, Ket)> {
    let probs = born_probabilities(k, basis)?;
    let x: f64 = rng.gen();
    let mut cum = 0.0;
    let mut chosen = probs.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        cum += p;
        if x < cum {
            chosen = i;
            break;
        }
    }
    Ok((chosen, probs[chosen], basis[chosen].clone()))
}

/// Density matrix with validated invariants: Hermitian within 1e-12 and
/// unit trace within 1e-10. Positivity is not enforced at construction
/// (it costs an eigendecomposition); `eigenvalues` exposes it for checks.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    entries: Vec<C64>,
}

impl DensityMatrix {
    pub fn new(dim: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != dim * dim || dim == 0 {
            return Err(Error::BadDim {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        for i in 0..dim {
            for j in 0..dim {
                let diff = (entries[i * dim + j] - entries[j * dim + i].conj()).norm();
                if diff > HERMITIAN_TOL {
                    return Err(Error::InvalidDensityMatrix(format!(
                        "not Hermitian, asymmetry {diff:.3e} at ({i},{j})"
                    )));
                }
            }
        }
        let trace: C64 = (0..dim).map(|i| entries[i * dim + i]).sum();
        if (trace.re - 1.0).abs() > 1e-10 || trace.im.abs() > 1e-10 {
            return Err(Error::InvalidDensityMatrix(format!(
                "trace {trace} is not 1"
            )));
        }
        Ok(DensityMatrix { dim, entries })
    }

    /// ρ = |k⟩⟨k| for a normalized ket.
    pub fn from_pure(k: &Ket) -> Result<Self> {
        let k = k.normalized()?;
        let d = k.dim();
        let mut entries = vec![C64::new(0.0, 0.0); d * d];
        for i in 0..d {
            for j in 0..d {
                entries[i * d + j] = k.amp(i) * k.amp(j).conj();
            }
        }
        DensityMatrix::new(d, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.entries[i * self.dim + j]
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.entry(i, i)).sum()
    }

    /// Tr(ρ²); 1 for pure states, 1/dim for the maximally mixed state.
    pub fn purity(&self) -> f64 {
        let mut t = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                t += (self.entry(i, j) * self.entry(j, i)).re;
            }
        }
        t
    }

    /// Real spectrum, descending, via cyclic Jacobi rotations. Intended for
    /// validation (positivity checks) rather than hot paths.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let d = self.dim;
        let mut a = self.entries.clone();
        let scale: f64 = a.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1.0);
        for _sweep in 0..60 {
            let mut off = 0.0f64;
            for p in 0..d {
                for q in (p + 1)..d {
                    off = off.max(a[p * d + q].norm());
                }
            }
            if off <= 1e-14 * scale {
                break;
            }
            for p in 0..d {
                for q in (p + 1)..d {
                    if a[p * d + q].norm() <= 1e-15 * scale {
                        continue;
                    }
                    let ((_, vh), (_, vl)) = eig2(a[p * d + p].re, a[p * d + q], a[q * d + q].re);
                    // Rotate columns p,q by V = [vh vl], then rows by V†.
                    for i in 0..d {
                        let (ap, aq) = (a[i * d + p], a[i * d + q]);
                        a[i * d + p] = ap * vh[0] + aq * vh[1];
                        a[i * d + q] = ap * vl[0] + aq * vl[1];
                    }
                    for j in 0..d {
                        let (pj, qj) = (a[p * d + j], a[q * d + j]);
                        a[p * d + j] = vh[0].conj() * pj + vh[1].conj() * qj;
                        a[q * d + j] = vl[0].conj() * pj + vl[1].conj() * qj;
                    }
                }
            }
        }
        let mut eigs: Vec<f64> = (0..d).map(|i| a[i * d + i].re).collect();
        eigs.sort_by(|x, y| y.partial_cmp(x).unwrap());
        eigs
    }

    pub fn min_eigenvalue(&self) -> f64 {
        *self
            .eigenvalues()
            .last()
            .expect("density matrix has dim >= 1")
    }
}

/// Reduced density matrix of one tensor factor of `ket`, whose factor
/// dimensions are `dims` in slowest-to-fastest index order. All other
/// factors are traced out.
pub fn partial_state_raw(ket: &Ket, dims: &[usize], keep: usize) -> Result<DensityMatrix> {
    if keep >= dims.len() {
        return Err(Error::BadSubsystemIndex {
            index: keep,
            count: dims.len(),
        });
    }
    let total: usize = dims.iter().product();
    if total != ket.dim() {
        return Err(Error::DimMismatch(total, ket.dim()));
    }
    let left: usize = dims[..keep].iter().product();
    let mid = dims[keep];
    let right: usize = dims[keep + 1..].iter().product();
    let mut rho = vec![C64::new(0.0, 0.0); mid * mid];
    for l in 0..left {
        for r in 0..right {
            for m in 0..mid {
                let im = ket.amp((l * mid + m) * right + r);
                for mp in 0..mid {
                    let jm = ket.amp((l * mid + mp) * right + r);
                    rho[m * mid + mp] += im * jm.conj();
                }
            }
        }
    }
    DensityMatrix::new(mid, rho)
}
