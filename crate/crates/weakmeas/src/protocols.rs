//! Full measurement protocols: chains of unsharp steps followed by a sharp
//! final measurement, run as seeded Monte Carlo or enumerated exactly.
//!
//! Two interleavings are supported. `pointer-first` detects each pointer
//! immediately after its coupling, so the system collapses step by step and
//! at most one pointer is ever alive. `postselect-first` couples every
//! pointer, measures the system, and only then detects the pointers (in
//! step order). The joint outcome distribution is identical either way,
//! which `exact_distribution` computes through two genuinely different
//! routes so the agreement is a real check and not a tautology.
//!
//! Determinism contract: trial i draws from `stream::trial_stream(seed, i)`
//! and from nothing else, so records do not depend on the order trials are
//! evaluated in. Within a trial the draw order is fixed by the protocol:
//! pointer-first consumes one uniform per detection then one for the final
//! measurement; postselect-first consumes one for the final measurement
//! then one per detection.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::qstate::{born_sample, eigenbasis, inner, spin_observable, BlochDirection, Ket, C64};
use crate::stream::trial_stream;
use crate::unsharp::{JointState, PointerOutcome, Readout, UnsharpCoupling};

/// Hard cap on steps wherever the full joint state or outcome table is
/// enumerated: 2^(k+1) entries stay comfortably in memory up to here.
pub const MAX_ENUMERATED_STEPS: usize = 15;

/// Sharp final measurement outcome, coded +1 for `Plus` and −1 for `Minus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FinalOutcome {
    Plus,
    Minus,
}

impl FinalOutcome {
    pub fn sign(self) -> f64 {
        match self {
            FinalOutcome::Plus => 1.0,
            FinalOutcome::Minus => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            FinalOutcome::Plus => '+',
            FinalOutcome::Minus => '-',
        }
    }
}

impl std::fmt::Display for FinalOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// Which interleaving of detections and the final measurement to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasurementOrder {
    PointerFirst,
    PostselectFirst,
}

impl std::fmt::Display for MeasurementOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MeasurementOrder::PointerFirst => write!(f, "pointer-first"),
            MeasurementOrder::PostselectFirst => write!(f, "postselect-first"),
        }
    }
}

/// One unsharp measurement step: observable direction, channel amplitudes,
/// and the basis its pointer is read in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakStep {
    pub direction: BlochDirection,
    pub coupling: UnsharpCoupling,
    pub readout: Readout,
}

impl WeakStep {
    pub fn standard(direction: BlochDirection, coupling: UnsharpCoupling) -> Self {
        WeakStep {
            direction,
            coupling,
            readout: Readout::Standard,
        }
    }
}

/// A complete experiment description. `pre` is normalized at construction;
/// the final measurement is sharp along `final_direction`, with `Plus`
/// meaning its +1 eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pre: Ket,
    steps: Vec<WeakStep>,
    final_direction: BlochDirection,
    order: MeasurementOrder,
    trials: u64,
    seed: u64,
    record_states: bool,
}

impl ExperimentConfig {
    pub fn new(
        pre: &Ket,
        steps: Vec<WeakStep>,
        final_direction: BlochDirection,
        order: MeasurementOrder,
        trials: u64,
        seed: u64,
    ) -> Result<Self> {
        if pre.dim() != 2 {
            return Err(Error::BadDim {
                expected: 2,
                got: pre.dim(),
            });
        }
        if steps.is_empty() {
            return Err(Error::InvalidConfig(
                "config needs at least one step".into(),
            ));
        }
        if trials == 0 {
            return Err(Error::InvalidConfig(
                "config needs at least one trial".into(),
            ));
        }
        Ok(ExperimentConfig {
            pre: pre.normalized()?,
            steps,
            final_direction,
            order,
            trials,
            seed,
            record_states: false,
        })
    }

    /// Record the collapsed system state after each detection in every
    /// trial (pointer-first runs only); off by default because it stores
    /// one ket per step per trial.
    pub fn with_record_states(mut self, on: bool) -> Self {
        self.record_states = on;
        self
    }

    pub fn with_order(mut self, order: MeasurementOrder) -> Self {
        self.order = order;
        self
    }

    pub fn with_trials(mut self, trials: u64) -> Result<Self> {
        if trials == 0 {
            return Err(Error::InvalidConfig(
                "config needs at least one trial".into(),
            ));
        }
        self.trials = trials;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn pre(&self) -> &Ket {
        &self.pre
    }

    pub fn steps(&self) -> &[WeakStep] {
        &self.steps
    }

    pub fn final_direction(&self) -> &BlochDirection {
        &self.final_direction
    }

    pub fn order(&self) -> MeasurementOrder {
        self.order
    }

    pub fn trials(&self) -> u64 {
        self.trials
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn record_states(&self) -> bool {
        self.record_states
    }

    /// Eigenbasis of the final observable: index 0 ↦ `Plus`, 1 ↦ `Minus`.
    pub fn final_basis(&self) -> [Ket; 2] {
        let basis =
            eigenbasis(&spin_observable(&self.final_direction)).expect("σ·n is Hermitian 2x2");
        [basis[0].1.clone(), basis[1].1.clone()]
    }
}

/// Everything observed in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub serial: u64,
    pub pointer_outcomes: Vec<PointerOutcome>,
    pub final_outcome: FinalOutcome,
    /// Only for single-step runs: whether the pointer reading and the
    /// final outcome carry opposite signs.
    pub mismatch: Option<bool>,
    /// Collapsed system state after each detection; only recorded by
    /// pointer-first runs with `record_states` on.
    pub intermediate_states: Option<Vec<Ket>>,
}

/// A full Monte-Carlo run: the config that produced it plus one record per
/// trial, in serial order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
}

/// One joint outcome: the pointer readings in step order plus the final
/// measurement result.
pub type OutcomeKey = (Vec<PointerOutcome>, FinalOutcome);

/// Exact joint distribution over all 2^(steps+1) outcome tuples. Complete:
/// impossible outcomes are present with probability zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    entries: BTreeMap<OutcomeKey, f64>,
    steps: usize,
}

impl ProbabilityTable {
    fn from_map(entries: BTreeMap<OutcomeKey, f64>, steps: usize) -> Result<Self> {
        let expected = 1usize << (steps + 1);
        if entries.len() != expected {
            return Err(Error::ConfigMismatch(format!(
                "{} entries for {steps} steps, expected {expected}",
                entries.len()
            )));
        }
        let mut total = 0.0;
        for (key, p) in &entries {
            if key.0.len() != steps {
                return Err(Error::ConfigMismatch(format!(
                    "key with {} pointer outcomes in a {steps}-step table",
                    key.0.len()
                )));
            }
            if *p < 0.0 {
                return Err(Error::ConfigMismatch(format!(
                    "negative probability {p} in table"
                )));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::ConfigMismatch(format!(
                "table mass {total} is not 1"
            )));
        }
        Ok(ProbabilityTable { entries, steps })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn probability(&self, key: &OutcomeKey) -> Option<f64> {
        self.entries.get(key).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&OutcomeKey, f64)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Marginal probability of the final outcome.
    pub fn final_marginal(&self, f: FinalOutcome) -> f64 {
        self.entries
            .iter()
            .filter(|((_, fin), _)| *fin == f)
            .map(|(_, p)| p)
            .sum()
    }

    /// Marginal probability of one pointer reading at `step`.
    pub fn pointer_marginal(&self, step: usize, o: PointerOutcome) -> f64 {
        self.entries
            .iter()
            .filter(|((ptr, _), _)| ptr[step] == o)
            .map(|(_, p)| p)
            .sum()
    }

    /// Conditional probability of the final outcome given one pointer
    /// reading; NaN-free: returns None when the condition has zero mass.
    pub fn final_given_pointer(
        &self,
        step: usize,
        o: PointerOutcome,
        f: FinalOutcome,
    ) -> Option<f64> {
        let denom = self.pointer_marginal(step, o);
        if denom <= 0.0 {
            return None;
        }
        let num: f64 = self
            .entries
            .iter()
            .filter(|((ptr, fin), _)| ptr[step] == o && *fin == f)
            .map(|(_, p)| p)
            .sum();
        Some(num / denom)
    }
}

fn single_step_mismatch(record_ptr: &[PointerOutcome], fin: FinalOutcome) -> Option<bool> {
    if record_ptr.len() == 1 {
        Some((record_ptr[0] == PointerOutcome::U) != (fin == FinalOutcome::Plus))
    } else {
        None
    }
}

/// Run one trial; the result depends only on (config, trial), never on
/// what other trials ran before it.
pub fn run_trial(config: &ExperimentConfig, trial: u64) -> Result<RunRecord> {
    let mut rng = trial_stream(config.seed, trial);
    let final_basis = config.final_basis();
    match config.order {
        MeasurementOrder::PointerFirst => {
            let mut state = config.pre.clone();
            let mut outcomes = Vec::with_capacity(config.steps.len());
            let mut states = config.record_states.then(Vec::new);
            for step in &config.steps {
                let joint = crate::unsharp::couple(
                    &state,
                    &spin_observable(&step.direction),
                    &step.coupling,
                )?;
                let (outcome, _, sys) =
                    crate::unsharp::detect_pointer_in(&joint, step.readout, &mut rng)?;
                outcomes.push(outcome);
                state = sys;
                if let Some(s) = states.as_mut() {
                    s.push(state.clone());
                }
            }
            let (fidx, _, _) = born_sample(&state, &final_basis, &mut rng)?;
            let fin = if fidx == 0 {
                FinalOutcome::Plus
            } else {
                FinalOutcome::Minus
            };
            Ok(RunRecord {
                serial: trial,
                mismatch: single_step_mismatch(&outcomes, fin),
                pointer_outcomes: outcomes,
                final_outcome: fin,
                intermediate_states: states,
            })
        }
        MeasurementOrder::PostselectFirst => {
            let k = config.steps.len();
            if k > MAX_ENUMERATED_STEPS {
                return Err(Error::TooManySteps {
                    max: MAX_ENUMERATED_STEPS,
                    got: k,
                });
            }
            let mut joint = JointState::from_system(&config.pre)?;
            for (i, step) in config.steps.iter().enumerate() {
                joint =
                    joint.couple_pointer(&spin_observable(&step.direction), &step.coupling, i)?;
            }
            let (fidx, _, mut pointers) =
                crate::unsharp::postselect_system(&joint, &final_basis, &mut rng)?;
            let fin = if fidx == 0 {
                FinalOutcome::Plus
            } else {
                FinalOutcome::Minus
            };
            let mut outcomes = Vec::with_capacity(k);
            for (i, step) in config.steps.iter().enumerate() {
                let pos = pointers
                    .factors()
                    .iter()
                    .position(|(s, _)| *s == crate::unsharp::Subsystem::Pointer(i))
                    .expect("pointer factor present until detected");
                let (idx, _, rest) =
                    pointers.measure_factor(pos, &step.readout.basis(), &mut rng)?;
                outcomes.push(if idx == 0 {
                    PointerOutcome::U
                } else {
                    PointerOutcome::D
                });
                pointers = rest;
            }
            Ok(RunRecord {
                serial: trial,
                mismatch: single_step_mismatch(&outcomes, fin),
                pointer_outcomes: outcomes,
                final_outcome: fin,
                intermediate_states: None,
            })
        }
    }
}

fn run_by_order(config: &ExperimentConfig, want: MeasurementOrder) -> Result<RunLog> {
    if config.order != want {
        return Err(Error::InvalidConfig(format!(
            "config orders a {} run, this runner is {}",
            config.order, want
        )));
    }
    let mut records = Vec::with_capacity(config.trials as usize);
    for trial in 0..config.trials {
        records.push(run_trial(config, trial)?);
    }
    Ok(RunLog {
        config: config.clone(),
        records,
    })
}

/// Detect each pointer right after its coupling, then measure the system.
pub fn run_pointer_first(config: &ExperimentConfig) -> Result<RunLog> {
    run_by_order(config, MeasurementOrder::PointerFirst)
}

/// Couple all pointers, measure the system, then detect the pointers in
/// step order. Capped at `MAX_ENUMERATED_STEPS` because the whole joint
/// state is held in memory.
pub fn run_postselect_first(config: &ExperimentConfig) -> Result<RunLog> {
    run_by_order(config, MeasurementOrder::PostselectFirst)
}

/// Run whichever interleaving the config asks for.
pub fn run_chain(config: &ExperimentConfig) -> Result<RunLog> {
    match config.order {
        MeasurementOrder::PointerFirst => run_pointer_first(config),
        MeasurementOrder::PostselectFirst => run_postselect_first(config),
    }
}

/// ⟨bra| applied to the last (fastest-varying, dim 2) factor.
fn contract_last(amps: &[C64], bra: &Ket) -> Vec<C64> {
    let mut out = Vec::with_capacity(amps.len() / 2);
    for l in 0..amps.len() / 2 {
        out.push(bra.amp(0).conj() * amps[l * 2] + bra.amp(1).conj() * amps[l * 2 + 1]);
    }
    out
}

/// ⟨bra| applied to the first (slowest-varying, dim 2) factor.
fn contract_first(amps: &[C64], bra: &Ket) -> Vec<C64> {
    let right = amps.len() / 2;
    let mut out = Vec::with_capacity(right);
    for r in 0..right {
        out.push(bra.amp(0).conj() * amps[r] + bra.amp(1).conj() * amps[right + r]);
    }
    out
}

fn enumerate_pointer_first(
    config: &ExperimentConfig,
    state: &Ket,
    step: usize,
    p_acc: f64,
    prefix: &mut Vec<PointerOutcome>,
    final_basis: &[Ket; 2],
    out: &mut BTreeMap<OutcomeKey, f64>,
) -> Result<()> {
    if step == config.steps.len() {
        for (idx, fin) in [FinalOutcome::Plus, FinalOutcome::Minus]
            .into_iter()
            .enumerate()
        {
            let p = if p_acc > 0.0 {
                p_acc * inner(&final_basis[idx], state)?.norm_sqr()
            } else {
                0.0
            };
            out.insert((prefix.clone(), fin), p);
        }
        return Ok(());
    }
    let s = &config.steps[step];
    let joint = crate::unsharp::couple(state, &spin_observable(&s.direction), &s.coupling)?;
    let basis = s.readout.basis();
    for (idx, o) in [PointerOutcome::U, PointerOutcome::D]
        .into_iter()
        .enumerate()
    {
        let (amps, p_branch) = joint.project_factor(0, &basis[idx])?;
        prefix.push(o);
        if p_acc > 0.0 && p_branch > 1e-300 {
            let collapsed = Ket::new(amps)?.normalized()?;
            enumerate_pointer_first(
                config,
                &collapsed,
                step + 1,
                p_acc * p_branch,
                prefix,
                final_basis,
                out,
            )?;
        } else {
            // Dead branch: still emit every completion, with probability 0.
            enumerate_pointer_first(config, state, step + 1, 0.0, prefix, final_basis, out)?;
        }
        prefix.pop();
    }
    Ok(())
}

fn enumerate_postselect_first(
    config: &ExperimentConfig,
    final_basis: &[Ket; 2],
    out: &mut BTreeMap<OutcomeKey, f64>,
) -> Result<()> {
    let mut joint = JointState::from_system(&config.pre)?;
    for (i, step) in config.steps.iter().enumerate() {
        joint = joint.couple_pointer(&spin_observable(&step.direction), &step.coupling, i)?;
    }
    for (idx, fin) in [FinalOutcome::Plus, FinalOutcome::Minus]
        .into_iter()
        .enumerate()
    {
        let reduced = contract_last(joint.ket().amps(), &final_basis[idx]);
        let mut prefix = Vec::new();
        descend_pointers(config, &reduced, 0, &mut prefix, fin, out);
    }
    Ok(())
}

fn descend_pointers(
    config: &ExperimentConfig,
    amps: &[C64],
    step: usize,
    prefix: &mut Vec<PointerOutcome>,
    fin: FinalOutcome,
    out: &mut BTreeMap<OutcomeKey, f64>,
) {
    if step == config.steps.len() {
        debug_assert_eq!(amps.len(), 1);
        out.insert((prefix.clone(), fin), amps[0].norm_sqr());
        return;
    }
    let basis = config.steps[step].readout.basis();
    for (idx, o) in [PointerOutcome::U, PointerOutcome::D]
        .into_iter()
        .enumerate()
    {
        let rest = contract_first(amps, &basis[idx]);
        prefix.push(o);
        descend_pointers(config, &rest, step + 1, prefix, fin, out);
        prefix.pop();
    }
}

/// Exact joint distribution of all pointer readings and the final outcome.
/// Enumerated along the route matching `config.order()`: sequential
/// collapse for pointer-first, full-joint contraction for postselect-first.
/// The two routes agree entry by entry, which the tests pin down.
pub fn exact_distribution(config: &ExperimentConfig) -> Result<ProbabilityTable> {
    let k = config.steps.len();
    if k > MAX_ENUMERATED_STEPS {
        return Err(Error::TooManySteps {
            max: MAX_ENUMERATED_STEPS,
            got: k,
        });
    }
    let final_basis = config.final_basis();
    let mut out = BTreeMap::new();
    match config.order {
        MeasurementOrder::PointerFirst => {
            let mut prefix = Vec::new();
            enumerate_pointer_first(
                config,
                &config.pre.clone(),
                0,
                1.0,
                &mut prefix,
                &final_basis,
                &mut out,
            )?;
        }
        MeasurementOrder::PostselectFirst => {
            enumerate_postselect_first(config, &final_basis, &mut out)?;
        }
    }
    ProbabilityTable::from_map(out, k)
}
