//! The unsharp measurement channel: coupling a spin to a pointer through an
//! error channel, projective pointer detection, and system post-selection.
//!
//! The channel is parameterized by real amplitudes (a, b), a² + b² = 1,
//! a ≥ b ≥ 0: with amplitude `a` the pointer responds correctly to the
//! system eigenvalue, with amplitude `b` it responds the wrong way. a = 1
//! is a sharp measurement; a = b leaves the pointer uncorrelated with the
//! system. The equivalent Kraus pair is M_u = aΠ₊ + bΠ₋, M_d = bΠ₊ + aΠ₋.
//!
//! Joint states carry labelled tensor factors, pointers first (in step
//! order) and the system last; the first factor varies slowest in the
//! row-major amplitude layout.

use rand::Rng;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::qstate::{eigenbasis, partial_state_raw, DensityMatrix, Ket, Operator, C64};

/// Error-channel amplitudes (a, b). Construction enforces a² + b² = 1
/// within 1e-12 and a ≥ b ≥ 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnsharpCoupling {
    a: f64,
    b: f64,
}

impl UnsharpCoupling {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidCoupling(format!(
                "non-finite pair ({a}, {b})"
            )));
        }
        if b < 0.0 || a < b {
            return Err(Error::InvalidCoupling(format!(
                "need a >= b >= 0, got ({a}, {b})"
            )));
        }
        let norm = a * a + b * b;
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCoupling(format!(
                "a^2 + b^2 = {norm} is not 1"
            )));
        }
        Ok(UnsharpCoupling { a, b })
    }

    /// Build from the correct-response amplitude alone; needs a ≥ 1/√2 so
    /// that a ≥ b holds.
    pub fn from_a(a: f64) -> Result<Self> {
        if !(0.0..=1.0 + 1e-12).contains(&a) {
            return Err(Error::InvalidCoupling(format!("a = {a} outside [0, 1]")));
        }
        let b = (1.0 - (a * a).min(1.0)).max(0.0).sqrt();
        // At a = 1/√2 rounding can land b one ulp above a; that is the
        // balanced coupling, not an ordering violation.
        let b = if b > a && b - a <= 1e-9 { a } else { b };
        UnsharpCoupling::new(a, b)
    }

    /// Build from the strength ε = (a − b)/(a + b) ∈ [0, 1].
    pub fn from_epsilon(eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidCoupling(format!(
                "strength {eps} outside [0, 1]"
            )));
        }
        let scale = (2.0 * (1.0 + eps * eps)).sqrt();
        UnsharpCoupling::new((1.0 + eps) / scale, (1.0 - eps) / scale)
    }

    /// Sharp limit (a, b) = (1, 0).
    pub fn sharp() -> Self {
        UnsharpCoupling { a: 1.0, b: 0.0 }
    }

    /// Zero-strength limit a = b = 1/√2.
    pub fn balanced() -> Self {
        let r = 1.0 / 2f64.sqrt();
        UnsharpCoupling { a: r, b: r }
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Measurement strength ε = (a − b)/(a + b); 0 when balanced, 1 when
    /// sharp. The denominator never vanishes since a ≥ 1/√2.
    pub fn epsilon(&self) -> f64 {
        (self.a - self.b) / (self.a + self.b)
    }
}

/// Which basis a pointer is read out in. `Standard` distinguishes the two
/// swing directions {|u⟩, |d⟩}. `Conjugate` reads the basis
/// {(|u⟩ − i|d⟩)/√2, (|u⟩ + i|d⟩)/√2}, whose mean responds to the
/// imaginary part of the weak value; the first element is the +1 outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Readout {
    Standard,
    Conjugate,
}

impl Readout {
    /// Orthonormal readout basis; index 0 is the outcome coded +1 (`U`),
    /// index 1 is coded −1 (`D`).
    pub fn basis(&self) -> [Ket; 2] {
        let r = 1.0 / 2f64.sqrt();
        match self {
            Readout::Standard => [
                Ket::new(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap(),
                Ket::new(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]).unwrap(),
            ],
            Readout::Conjugate => [
                Ket::new(vec![C64::new(r, 0.0), C64::new(0.0, -r)]).unwrap(),
                Ket::new(vec![C64::new(r, 0.0), C64::new(0.0, r)]).unwrap(),
            ],
        }
    }
}

/// Two-valued pointer reading, coded +1 for `U` and −1 for `D`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PointerOutcome {
    U,
    D,
}

impl PointerOutcome {
    pub fn sign(self) -> f64 {
        match self {
            PointerOutcome::U => 1.0,
            PointerOutcome::D => -1.0,
        }
    }

    pub fn letter(self) -> char {
        match self {
            PointerOutcome::U => 'u',
            PointerOutcome::D => 'd',
        }
    }
}

impl std::fmt::Display for PointerOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.letter())
    }
}

/// Label of one tensor factor in a joint state: the pointer attached at a
/// given protocol step, or the spin system itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subsystem {
    Pointer(usize),
    System,
}

/// A pure state over labelled tensor factors. Pointer factors come first in
/// step order, the system factor (always 2-dimensional) last; the first
/// factor varies slowest in the amplitude layout. Constructors normalize.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    factors: Vec<(Subsystem, usize)>,
    ket: Ket,
}

impl JointState {
    /// A bare system with no pointers attached yet.
    pub fn from_system(system: &Ket) -> Result<Self> {
        if system.dim() != 2 {
            return Err(Error::BadDim {
                expected: 2,
                got: system.dim(),
            });
        }
        Ok(JointState {
            factors: vec![(Subsystem::System, 2)],
            ket: system.normalized()?,
        })
    }

    /// Assemble from explicit factors and amplitudes; the amplitude vector
    /// is normalized on entry.
    pub fn from_parts(factors: Vec<(Subsystem, usize)>, ket: Ket) -> Result<Self> {
        let total: usize = factors.iter().map(|(_, d)| d).product();
        if total != ket.dim() || factors.is_empty() {
            return Err(Error::DimMismatch(total, ket.dim()));
        }
        Ok(JointState {
            factors,
            ket: ket.normalized()?,
        })
    }

    pub fn ket(&self) -> &Ket {
        &self.ket
    }

    pub fn factors(&self) -> &[(Subsystem, usize)] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.ket.dim()
    }

    pub fn system_position(&self) -> Option<usize> {
        self.factors
            .iter()
            .position(|(s, _)| *s == Subsystem::System)
    }

    pub fn pointer_positions(&self) -> Vec<usize> {
        self.factors
            .iter()
            .enumerate()
            .filter(|(_, (s, _))| matches!(s, Subsystem::Pointer(_)))
            .map(|(i, _)| i)
            .collect()
    }

    /// Attach a fresh two-outcome pointer to the system through the error
    /// channel, labelled `step`. The new pointer factor is inserted just
    /// before the system factor.
    pub fn couple_pointer(
        &self,
        observable: &Operator,
        c: &UnsharpCoupling,
        step: usize,
    ) -> Result<JointState> {
        let sys = self.system_position().ok_or(Error::NoSystemFactor)?;
        // Protocol states keep the system last; the layout below relies on it.
        debug_assert_eq!(sys, self.factors.len() - 1);
        let (m_u, m_d) = kraus_ops(observable, c)?;
        let outer = self.ket.dim() / 2;
        let mut amps = vec![C64::new(0.0, 0.0); self.ket.dim() * 2];
        for block in 0..outer {
            for (o, m) in [&m_u, &m_d].into_iter().enumerate() {
                for sp in 0..2 {
                    let mut acc = C64::new(0.0, 0.0);
                    for s in 0..2 {
                        acc += m.entry(sp, s) * self.ket.amp(block * 2 + s);
                    }
                    amps[(block * 2 + o) * 2 + sp] = acc;
                }
            }
        }
        let mut factors = self.factors.clone();
        factors.insert(factors.len() - 1, (Subsystem::Pointer(step), 2));
        JointState::from_parts(factors, Ket::new(amps)?)
    }

    /// Reduced density matrix of one factor, all others traced out.
    pub fn reduced(&self, subsystem: usize) -> Result<DensityMatrix> {
        let dims: Vec<usize> = self.factors.iter().map(|(_, d)| *d).collect();
        partial_state_raw(&self.ket, &dims, subsystem)
    }

    /// Amplitudes that remain after projecting factor `pos` onto ⟨bra|,
    /// un-normalized, together with the Born probability of that outcome.
    pub(crate) fn project_factor(&self, pos: usize, bra: &Ket) -> Result<(Vec<C64>, f64)> {
        if pos >= self.factors.len() {
            return Err(Error::BadSubsystemIndex {
                index: pos,
                count: self.factors.len(),
            });
        }
        let dims: Vec<usize> = self.factors.iter().map(|(_, d)| *d).collect();
        let mid = dims[pos];
        if bra.dim() != mid {
            return Err(Error::DimMismatch(mid, bra.dim()));
        }
        let left: usize = dims[..pos].iter().product();
        let right: usize = dims[pos + 1..].iter().product();
        let mut out = vec![C64::new(0.0, 0.0); left * right];
        for l in 0..left {
            for r in 0..right {
                let mut acc = C64::new(0.0, 0.0);
                for m in 0..mid {
                    acc += bra.amp(m).conj() * self.ket.amp((l * mid + m) * right + r);
                }
                out[l * right + r] = acc;
            }
        }
        let p: f64 = out.iter().map(|x| x.norm_sqr()).sum();
        Ok((out, p))
    }

    /// Projectively measure factor `pos` in `basis`, drawing exactly one
    /// uniform from `rng` and inverting the cumulative distribution in
    /// basis order. Returns the outcome index, its probability, and the
    /// renormalized state of the remaining factors.
    pub(crate) fn measure_factor<R: Rng + ?Sized>(
        &self,
        pos: usize,
        basis: &[Ket],
        rng: &mut R,
    ) -> Result<(usize, f64, JointState)> {
        let mut branches = Vec::with_capacity(basis.len());
        for b in basis {
            branches.push(self.project_factor(pos, b)?);
        }
        let total: f64 = branches.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-8 {
            return Err(Error::IncompleteBasis(total));
        }
        let x: f64 = rng.gen();
        let mut cum = 0.0;
        let mut chosen = branches.len() - 1;
        for (i, (_, p)) in branches.iter().enumerate() {
            cum += p;
            if x < cum {
                chosen = i;
                break;
            }
        }
        let (amps, p) = branches.swap_remove(chosen);
        let mut factors = self.factors.clone();
        factors.remove(pos);
        let remaining = if factors.is_empty() {
            JointState {
                factors,
                ket: Ket::new(vec![C64::new(1.0, 0.0)])?,
            }
        } else {
            JointState {
                factors,
                ket: Ket::new(amps)?.normalized()?,
            }
        };
        Ok((chosen, p, remaining))
    }
}

/// Reduced density matrix of one factor of a joint state; free-function
/// spelling of [`JointState::reduced`].
pub fn partial_state(j: &JointState, subsystem: usize) -> Result<DensityMatrix> {
    j.reduced(subsystem)
}

/// Kraus pair (M_u, M_d) of the error channel for `observable`:
/// M_u = aΠ₊ + bΠ₋ and M_d = bΠ₊ + aΠ₋, with Π± the eigenprojectors onto
/// the larger/smaller eigenvalue. Satisfies M_u†M_u + M_d†M_d = I.
pub fn kraus_ops(observable: &Operator, c: &UnsharpCoupling) -> Result<(Operator, Operator)> {
    let basis = eigenbasis(observable)?;
    let (vp, vm) = (&basis[0].1, &basis[1].1);
    let mut up = vec![C64::new(0.0, 0.0); 4];
    let mut down = vec![C64::new(0.0, 0.0); 4];
    for i in 0..2 {
        for j in 0..2 {
            let pp = vp.amp(i) * vp.amp(j).conj();
            let pm = vm.amp(i) * vm.amp(j).conj();
            up[i * 2 + j] = c.a() * pp + c.b() * pm;
            down[i * 2 + j] = c.b() * pp + c.a() * pm;
        }
    }
    Ok((Operator::new(2, up, false)?, Operator::new(2, down, false)?))
}

/// Couple a fresh pointer to a bare system state through the error channel.
/// For a system prepared in |x+⟩ and the z observable this produces the
/// fully entangled four-amplitude state (a|u,z+⟩ + b|u,z−⟩ + b|d,z+⟩ +
/// a|d,z−⟩)/√2.
pub fn couple(system: &Ket, observable: &Operator, c: &UnsharpCoupling) -> Result<JointState> {
    JointState::from_system(system)?.couple_pointer(observable, c, 0)
}

/// Projectively detect the single pointer factor in the standard {u, d}
/// basis. Returns the outcome, its probability, and the collapsed,
/// renormalized system ket; the pointer factor is removed.
pub fn detect_pointer<R: Rng + ?Sized>(
    j: &JointState,
    rng: &mut R,
) -> Result<(PointerOutcome, f64, Ket)> {
    detect_pointer_in(j, Readout::Standard, rng)
}

/// Like `detect_pointer` but in the basis selected by `readout`. Outcome
/// `U` is the +1 element of that basis.
pub fn detect_pointer_in<R: Rng + ?Sized>(
    j: &JointState,
    readout: Readout,
    rng: &mut R,
) -> Result<(PointerOutcome, f64, Ket)> {
    let pointers = j.pointer_positions();
    if pointers.len() != 1 {
        return Err(Error::NoPointerFactor);
    }
    let pos = pointers[0];
    if j.factors()[pos].1 != 2 {
        return Err(Error::BadDim {
            expected: 2,
            got: j.factors()[pos].1,
        });
    }
    j.system_position().ok_or(Error::NoSystemFactor)?;
    let (idx, p, remaining) = j.measure_factor(pos, &readout.basis(), rng)?;
    let outcome = if idx == 0 {
        PointerOutcome::U
    } else {
        PointerOutcome::D
    };
    Ok((outcome, p, remaining.ket().clone()))
}

/// Projectively measure the system factor in `basis` (two orthonormal
/// kets), leaving the pointer factors behind. Returns the basis index of
/// the outcome, its probability, and the remaining pointer-only state.
pub fn postselect_system<R: Rng + ?Sized>(
    j: &JointState,
    basis: &[Ket],
    rng: &mut R,
) -> Result<(usize, f64, JointState)> {
    let sys = j.system_position().ok_or(Error::NoSystemFactor)?;
    if j.pointer_positions().is_empty() {
        return Err(Error::NoPointerFactor);
    }
    j.measure_factor(sys, basis, rng)
}

/// Pointer models: the two-outcome swing used by the protocols, or a
/// position wavepacket on a finite grid for the continuous picture.
#[derive(Debug, Clone, PartialEq)]
pub enum PointerModel {
    DiscreteTwoOutcome,
    ContinuousGaussian(GaussianPointer),
}

impl PointerModel {
    pub fn pointer_dim(&self) -> usize {
        match self {
            PointerModel::DiscreteTwoOutcome => 2,
            PointerModel::ContinuousGaussian(g) => g.grid_points(),
        }
    }
}

/// A pointer position wavepacket discretized on a symmetric grid
/// x_k = −L + 2Lk/(N−1). The two branches are Gaussians of width `sigma`
/// (in probability density) centered at ±`shift`; their overlap
/// exp(−shift²/(2σ²)) plays the role of 2ab in the two-outcome model.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPointer {
    grid_points: usize,
    half_width: f64,
    sigma: f64,
    shift: f64,
}

impl GaussianPointer {
    pub fn new(grid_points: usize, half_width: f64, sigma: f64, shift: f64) -> Result<Self> {
        if grid_points < 16 {
            return Err(Error::BadGrid(format!(
                "{grid_points} grid points, need at least 16"
            )));
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(sigma) || !positive(half_width) {
            return Err(Error::BadGrid(format!(
                "need positive sigma and half width, got {sigma} and {half_width}"
            )));
        }
        if !positive(shift) || shift > half_width / 2.0 {
            return Err(Error::BadGrid(format!(
                "shift {shift} outside (0, half_width/2]"
            )));
        }
        // Probability mass the grid truncates away, for the worse branch.
        let z = |x: f64| 0.5 * erfc(x / (sigma * 2f64.sqrt()));
        let lost = z(half_width - shift) + z(half_width + shift);
        if lost > 1e-6 {
            return Err(Error::BadGrid(format!(
                "grid of half width {half_width} truncates {lost:.2e} of the wavepacket"
            )));
        }
        Ok(GaussianPointer {
            grid_points,
            half_width,
            sigma,
            shift,
        })
    }

    /// 256 points on a grid wide enough for the requested branch geometry.
    pub fn with_defaults(sigma: f64, shift: f64) -> Result<Self> {
        let half_width = 8.0 * sigma.max(shift);
        GaussianPointer::new(256, half_width, sigma, shift)
    }

    pub fn grid_points(&self) -> usize {
        self.grid_points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Grid positions, endpoints included.
    pub fn positions(&self) -> Vec<f64> {
        let n = self.grid_points;
        (0..n)
            .map(|k| -self.half_width + 2.0 * self.half_width * k as f64 / (n - 1) as f64)
            .collect()
    }

    fn branch(&self, center: f64) -> Ket {
        let amps: Vec<C64> = self
            .positions()
            .iter()
            .map(|&x| {
                let d = x - center;
                C64::new((-d * d / (4.0 * self.sigma * self.sigma)).exp(), 0.0)
            })
            .collect();
        Ket::new(amps)
            .expect("grid is nonempty")
            .normalized()
            .expect("gaussian branch has positive norm")
    }

    /// Normalized wavepacket centered at +shift (the correct-swing branch
    /// for the +1 system eigenvalue).
    pub fn plus_branch(&self) -> Ket {
        self.branch(self.shift)
    }

    /// Normalized wavepacket centered at −shift.
    pub fn minus_branch(&self) -> Ket {
        self.branch(-self.shift)
    }

    /// Closed-form overlap ⟨branch₋|branch₊⟩ = exp(−shift²/(2σ²)).
    pub fn analytic_overlap(&self) -> f64 {
        (-self.shift * self.shift / (2.0 * self.sigma * self.sigma)).exp()
    }
}

/// Couple the system to a continuous pointer wavepacket: the ±1 system
/// components displace the packet to ±shift instead of flipping a
/// two-outcome swing. The model must be `ContinuousGaussian`.
pub fn couple_continuous(
    system: &Ket,
    observable: &Operator,
    model: &PointerModel,
) -> Result<JointState> {
    let g = match model {
        PointerModel::ContinuousGaussian(g) => g,
        PointerModel::DiscreteTwoOutcome => {
            return Err(Error::BadGrid(
                "two-outcome pointer has no position grid".into(),
            ))
        }
    };
    if system.dim() != 2 {
        return Err(Error::BadDim {
            expected: 2,
            got: system.dim(),
        });
    }
    let sys = system.normalized()?;
    let basis = eigenbasis(observable)?;
    let (vp, vm) = (&basis[0].1, &basis[1].1);
    let cp = crate::qstate::inner(vp, &sys)?;
    let cm = crate::qstate::inner(vm, &sys)?;
    let gp = g.plus_branch();
    let gm = g.minus_branch();
    let n = g.grid_points();
    let mut amps = vec![C64::new(0.0, 0.0); n * 2];
    for k in 0..n {
        for sp in 0..2 {
            amps[k * 2 + sp] = gp.amp(k) * cp * vp.amp(sp) + gm.amp(k) * cm * vm.amp(sp);
        }
    }
    JointState::from_parts(
        vec![(Subsystem::Pointer(0), n), (Subsystem::System, 2)],
        Ket::new(amps)?,
    )
}
