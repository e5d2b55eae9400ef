//! Routing position-verification rounds.
//!
//! One round: a verifier on the left sends a qubit drawn uniformly from
//! {|0⟩, |1⟩, |+⟩, |−⟩}; a verifier on the right sends a uniform bit x;
//! the prover must deliver the qubit to verifier x. Timing is abstract
//! (phase tags 0, 1, 2), and a round is accepted only when the qubit
//! reached the designated verifier and its check measurement succeeded.
//!
//! Two verification wirings exist. In the purified wiring the left
//! verifier keeps half of a maximally entangled pair and the check is a
//! Bell measurement accepting outcome (0,0); every attack reduces to a
//! two-party cloning-game strategy there, so acceptance is capped at
//! 3/4 per round for unentangled attackers. The plain wiring projects
//! the returned qubit onto the state actually sent; its acceptance
//! operator per round is Φ⁺ + ½(Φ⁻ + Ψ⁺), strictly looser, and the
//! built-in attack reaches 5/6 under it. Soundness statements and the
//! exact reduction therefore live in the purified wiring; both wirings
//! agree on the honest prover (acceptance 1).

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::layout::RegisterLayout;
use crate::operator::{
    apply_block_unitary, embedded_state_factors, max_entangled, partial_contract, CMatrix, CVector,
    Operator, StateVector, ONE, ZERO,
};
use crate::parallel::{eval_parallel_strategy, tensor_lower_bound, ParallelSpec};
use crate::rng;

pub const PHASE_SEND: u8 = 0;
pub const PHASE_RELAY: u8 = 1;
pub const PHASE_VERIFY: u8 = 2;

/// Protocol shape: number of parallel rounds, verification wiring and
/// the master seed for sampling.
#[derive(Debug, Clone, Copy)]
pub struct RoundConfig {
    pub n: usize,
    pub purified: bool,
    pub seed: u64,
}

impl RoundConfig {
    pub fn new(n: usize, purified: bool, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        Ok(Self { n, purified, seed })
    }
}

/// The four challenge states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Challenge {
    Zero,
    One,
    Plus,
    Minus,
}

impl Challenge {
    pub const ALL: [Challenge; 4] = [
        Challenge::Zero,
        Challenge::One,
        Challenge::Plus,
        Challenge::Minus,
    ];

    pub fn sample(rng: &mut impl Rng) -> Self {
        Self::ALL[(rng.random::<u32>() % 4) as usize]
    }

    pub fn label(&self) -> &'static str {
        match self {
            Challenge::Zero => "0",
            Challenge::One => "1",
            Challenge::Plus => "+",
            Challenge::Minus => "-",
        }
    }

    pub fn amplitudes(&self) -> [Complex64; 2] {
        let h = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
        match self {
            Challenge::Zero => [ONE, ZERO],
            Challenge::One => [ZERO, ONE],
            Challenge::Plus => [h, h],
            Challenge::Minus => [h, -h],
        }
    }

    pub fn state(&self, label: &str) -> StateVector {
        let amps = self.amplitudes();
        StateVector::new(
            RegisterLayout::single(label, 2).expect("fresh layout"),
            CVector::from_vec(vec![amps[0], amps[1]]),
        )
        .expect("unit vector")
    }
}

/// Pauli X^b Z^a, the teleportation correction for Bell outcome (a, b).
pub fn pauli_correction(a: u8, b: u8) -> CMatrix {
    let x = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let z = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    let mut m = CMatrix::identity(2, 2);
    if a == 1 {
        m = z * m;
    }
    if b == 1 {
        m = x * m;
    }
    m
}

/// Bell basis state (I ⊗ X^b Z^a)|Φ⁺⟩ on two labeled qubits; outcome
/// (0,0) is the maximally entangled pair itself.
pub fn bell_state(label_1: &str, label_2: &str, a: u8, b: u8) -> Result<StateVector> {
    let m = pauli_correction(a, b);
    let layout = RegisterLayout::qubits([label_1, label_2])?;
    let w = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
    let mut amps = CVector::zeros(4);
    for i in 0..2 {
        for j in 0..2 {
            // (I ⊗ M)|Φ⁺⟩ has amplitude M[j, i]/√2 at |i j⟩.
            amps[2 * i + j] = w * m[(j, i)];
        }
    }
    StateVector::new(layout, amps)
}

/// Sample a Bell measurement on two registers; returns the outcome and
/// the normalized post-measurement state on the remaining registers.
pub fn bell_measure(
    state: &StateVector,
    reg_1: &str,
    reg_2: &str,
    rng: &mut impl Rng,
) -> Result<((u8, u8), StateVector)> {
    let mut branches = Vec::with_capacity(4);
    for a in 0..2u8 {
        for b in 0..2u8 {
            let bra = bell_state(reg_1, reg_2, a, b)?;
            let (layout, residual) = partial_contract(state, &bra)?;
            branches.push(((a, b), layout, residual));
        }
    }
    let total: f64 = branches.iter().map(|(_, _, v)| v.norm_squared()).sum();
    let mut draw = rng.random::<f64>() * total;
    let mut picked = None;
    for (idx, (_, _, residual)) in branches.iter().enumerate() {
        let p = residual.norm_squared();
        if draw < p {
            picked = Some(idx);
            break;
        }
        draw -= p;
    }
    // Rounding in the cumulative subtraction can fall off the end; take
    // the likeliest branch rather than a possibly zero-probability one.
    let idx = picked.unwrap_or_else(|| {
        branches
            .iter()
            .enumerate()
            .max_by(|(_, (_, _, u)), (_, (_, _, v))| u.norm_squared().total_cmp(&v.norm_squared()))
            .map(|(i, _)| i)
            .expect("four branches")
    });
    let (outcome, layout, residual) = branches.swap_remove(idx);
    let state = StateVector::normalized(layout, residual)?;
    Ok((outcome, state))
}

/// The attack resource: a three-qubit state on [M, A, B] in which the
/// measured port M is maximally entangled with a symmetric superposition
/// of A and B. Identical amplitudes to the optimal two-party game state.
pub fn nope_resource_state() -> StateVector {
    let layout = RegisterLayout::qubits(["M", "A", "B"]).expect("fresh labels");
    let large = Complex64::new(2.0 / 6f64.sqrt(), 0.0);
    let small = Complex64::new(1.0 / 6f64.sqrt(), 0.0);
    let mut amps = CVector::zeros(8);
    amps[0b000] = large;
    amps[0b110] = small;
    amps[0b101] = small;
    StateVector::new(layout, amps).expect("normalized by construction")
}

/// A custom unentangled attack for the single-round protocol. Alice
/// intercepts the flying qubit F, applies `wiring` to F plus her own
/// |0…0⟩ ancillas, keeps the `a_keep` registers and forwards `b_keep`
/// to Bob; after x is known each side applies its response unitary. The
/// first register of each side is the qubit it would route onward.
#[derive(Debug, Clone)]
pub struct CustomAttack {
    pub wiring: Operator,
    pub a_keep: Vec<String>,
    pub b_keep: Vec<String>,
    pub responses_a: [CMatrix; 2],
    pub responses_b: [CMatrix; 2],
}

impl CustomAttack {
    /// Static wiring validation of the no-pre-shared-entanglement shape.
    pub fn validate(&self) -> Result<()> {
        let layout = self.wiring.layout();
        if layout.dim_of("F") != Some(2) {
            return Err(Error::Structural(
                "wiring must act on the intercepted qubit register F".into(),
            ));
        }
        if layout.contains("V") {
            return Err(Error::Structural(
                "wiring may not touch the verifier register V".into(),
            ));
        }
        self.wiring.require_unitary()?;
        if self.a_keep.is_empty() || self.b_keep.is_empty() {
            return Err(Error::Structural(
                "both sides must end up holding at least one register".into(),
            ));
        }
        let mut all: Vec<&str> = self
            .a_keep
            .iter()
            .chain(self.b_keep.iter())
            .map(|s| s.as_str())
            .collect();
        all.sort_unstable();
        all.dedup();
        let mut declared: Vec<&str> = layout.labels().collect();
        declared.sort_unstable();
        if all != declared || self.a_keep.len() + self.b_keep.len() != layout.len() {
            return Err(Error::Structural(
                "a_keep and b_keep must partition the wiring registers".into(),
            ));
        }
        for outbound in [&self.a_keep[0], &self.b_keep[0]] {
            if layout.dim_of(outbound) != Some(2) {
                return Err(Error::Structural(format!(
                    "outbound register `{outbound}` must be a qubit"
                )));
            }
        }
        let da: usize = self
            .a_keep
            .iter()
            .map(|l| layout.dim_of(l).expect("partition checked"))
            .product();
        let db: usize = self
            .b_keep
            .iter()
            .map(|l| layout.dim_of(l).expect("partition checked"))
            .product();
        for (want, pair) in [(da, &self.responses_a), (db, &self.responses_b)] {
            for u in pair.iter() {
                if u.nrows() != want || u.ncols() != want {
                    return Err(Error::DimensionMismatch {
                        expected: want,
                        got: u.nrows(),
                    });
                }
                Operator::new(RegisterLayout::single("U", want)?, u.clone())?.require_unitary()?;
            }
        }
        Ok(())
    }

    /// Seeded random attack on F plus `ancillas` qubit registers.
    pub fn random(seed: u64, ancillas: usize) -> Result<Self> {
        if ancillas == 0 {
            return Err(Error::InvalidArgument(
                "need at least one ancilla so Bob holds a register".into(),
            ));
        }
        let mut rng = rng::master(seed);
        let mut labels = vec!["F".to_string()];
        for i in 0..ancillas {
            labels.push(format!("G{i}"));
        }
        let layout = RegisterLayout::qubits(labels.clone())?;
        let wiring = Operator::new(layout.clone(), rng::random_unitary(&mut rng, layout.dim()))?;
        // Random split with both sides nonempty.
        let split = 1 + (rng.random::<u32>() as usize) % ancillas;
        let a_keep: Vec<String> = labels[..split].to_vec();
        let b_keep: Vec<String> = labels[split..].to_vec();
        let da = 1usize << a_keep.len();
        let db = 1usize << b_keep.len();
        let responses_a = [
            rng::random_unitary(&mut rng, da),
            rng::random_unitary(&mut rng, da),
        ];
        let responses_b = [
            rng::random_unitary(&mut rng, db),
            rng::random_unitary(&mut rng, db),
        ];
        Ok(Self {
            wiring,
            a_keep,
            b_keep,
            responses_a,
            responses_b,
        })
    }

    /// Purified tripartite state (V entangled with the wired output),
    /// ordered [V, a_keep…, b_keep…].
    fn purified_state(&self) -> Result<StateVector> {
        let joint = RegisterLayout::new(
            std::iter::once(("V".to_string(), 2usize))
                .chain(self.wiring.layout().regs().iter().cloned()),
        )?;
        let initial = max_entangled("V", "F", 2)?.embed_with_zeros(&joint)?;
        let wired = apply_block_unitary(
            initial.amplitudes(),
            &joint,
            1,
            joint.len(),
            self.wiring.matrix(),
        )?;
        let state = StateVector::new(joint, wired)?;
        let order: Vec<&str> = std::iter::once("V")
            .chain(self.a_keep.iter().map(|s| s.as_str()))
            .chain(self.b_keep.iter().map(|s| s.as_str()))
            .collect();
        state.reordered(&order)
    }

    /// Plain-wiring state for a concrete challenge, ordered
    /// [a_keep…, b_keep…].
    fn plain_state(&self, challenge: Challenge) -> Result<StateVector> {
        let layout = self.wiring.layout().clone();
        let initial = challenge.state("F").embed_with_zeros(&layout)?;
        let wired = apply_block_unitary(
            initial.amplitudes(),
            &layout,
            0,
            layout.len(),
            self.wiring.matrix(),
        )?;
        let state = StateVector::new(layout, wired)?;
        let order: Vec<&str> = self
            .a_keep
            .iter()
            .chain(self.b_keep.iter())
            .map(|s| s.as_str())
            .collect();
        state.reordered(&order)
    }

    fn apply_responses(
        &self,
        state: &StateVector,
        x: u8,
        v_register_present: bool,
    ) -> Result<StateVector> {
        let layout = state.layout().clone();
        let offset = usize::from(v_register_present);
        let a_end = offset + self.a_keep.len();
        let b_end = a_end + self.b_keep.len();
        let mut amps = apply_block_unitary(
            state.amplitudes(),
            &layout,
            offset,
            a_end,
            &self.responses_a[x as usize],
        )?;
        amps = apply_block_unitary(&amps, &layout, a_end, b_end, &self.responses_b[x as usize])?;
        StateVector::new(layout, amps)
    }
}

/// Who is attacking, if anyone.
#[derive(Debug, Clone)]
pub enum AttackModel {
    Honest,
    NopeOptimal,
    Custom(Box<CustomAttack>),
}

impl AttackModel {
    pub fn label(&self) -> &'static str {
        match self {
            AttackModel::Honest => "honest",
            AttackModel::NopeOptimal => "nope-optimal",
            AttackModel::Custom(_) => "custom",
        }
    }
}

/// The built-in optimal unentangled attack: teleport the intercepted
/// qubit into the resource state's port with Pauli corrections on both
/// halves, then route whichever register the question designates.
pub fn nope_attack_strategy() -> AttackModel {
    AttackModel::NopeOptimal
}

/// One transcript row.
#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub round: usize,
    pub challenge: &'static str,
    pub x_bit: u8,
    pub bell_outcome: Option<(u8, u8)>,
    pub routed_to: Option<u8>,
    pub accepted: bool,
}

/// One protocol execution of n parallel rounds.
#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub rounds: Vec<RoundRecord>,
    pub accepted: bool,
    /// Abstract timing tags: send, relay, verify.
    pub phase_tags: [u8; 3],
}

/// Honest execution: the prover routes the exact received state, so the
/// verdict is accept with probability 1 in the noiseless model.
pub fn honest_round(cfg: &RoundConfig) -> ProtocolRun {
    let mut rng = rng::derived(cfg.seed, 0);
    run_honest(cfg, &mut rng)
}

fn run_honest(cfg: &RoundConfig, rng: &mut impl Rng) -> ProtocolRun {
    let mut rounds = Vec::with_capacity(cfg.n);
    for round in 0..cfg.n {
        let challenge = Challenge::sample(rng);
        let x_bit = (rng.random::<u32>() & 1) as u8;
        // Forwarding the pristine qubit leaves the check deterministic:
        // Bell outcome (0,0) in the purified wiring, projection onto the
        // sent state in the plain wiring.
        rounds.push(RoundRecord {
            round,
            challenge: challenge.label(),
            x_bit,
            bell_outcome: if cfg.purified { Some((0, 0)) } else { None },
            routed_to: Some(x_bit),
            accepted: true,
        });
    }
    ProtocolRun {
        rounds,
        accepted: true,
        phase_tags: [PHASE_SEND, PHASE_RELAY, PHASE_VERIFY],
    }
}

/// Post-teleportation tripartite state of one attacked round in the
/// purified wiring, given the sampled Bell outcome: corrections applied,
/// layout [V, A, B].
pub fn split_round_state(outcome: (u8, u8)) -> Result<StateVector> {
    let joint = RegisterLayout::qubits(["V", "F", "M", "A", "B"])?;
    let pair = max_entangled("V", "F", 2)?;
    let chi = nope_resource_state();
    let state = pair.kron(&chi)?.relabeled(joint)?;
    let bra = bell_state("F", "M", outcome.0, outcome.1)?;
    let (layout, residual) = partial_contract(&state, &bra)?;
    let mut post = StateVector::normalized(layout.clone(), residual)?;
    let correction = pauli_correction(outcome.0, outcome.1);
    for reg in [1usize, 2] {
        let amps = apply_block_unitary(post.amplitudes(), &layout, reg, reg + 1, &correction)?;
        post = StateVector::new(layout.clone(), amps)?;
    }
    Ok(post)
}

/// Probability that a Bell measurement of (reg_v, reg_routed) yields
/// outcome (0,0).
pub fn bell_check_prob(state: &StateVector, reg_v: &str, reg_routed: &str) -> Result<f64> {
    let bra = bell_state(reg_v, reg_routed, 0, 0)?;
    let (_, residual) = partial_contract(state, &bra)?;
    Ok(residual.norm_squared())
}

fn simulate_nope_round(cfg: &RoundConfig, round: usize, rng: &mut impl Rng) -> Result<RoundRecord> {
    let challenge = Challenge::sample(rng);
    let x_bit = (rng.random::<u32>() & 1) as u8;
    let routed = if x_bit == 0 { "A" } else { "B" };

    let (outcome, corrected) = if cfg.purified {
        let joint = RegisterLayout::qubits(["V", "F", "M", "A", "B"])?;
        let state = max_entangled("V", "F", 2)?
            .kron(&nope_resource_state())?
            .relabeled(joint)?;
        let (outcome, post) = bell_measure(&state, "F", "M", rng)?;
        (outcome, apply_corrections(&post, outcome, &["A", "B"])?)
    } else {
        let joint = RegisterLayout::qubits(["F", "M", "A", "B"])?;
        let state = challenge
            .state("F")
            .kron(&nope_resource_state())?
            .relabeled(joint)?;
        let (outcome, post) = bell_measure(&state, "F", "M", rng)?;
        (outcome, apply_corrections(&post, outcome, &["A", "B"])?)
    };

    let accept_prob = if cfg.purified {
        bell_check_prob(&corrected, "V", routed)?
    } else {
        let bra = challenge.state(routed);
        let (_, residual) = partial_contract(&corrected, &bra)?;
        residual.norm_squared()
    };
    let accepted = rng.random::<f64>() < accept_prob;
    Ok(RoundRecord {
        round,
        challenge: challenge.label(),
        x_bit,
        bell_outcome: Some(outcome),
        routed_to: Some(x_bit),
        accepted,
    })
}

fn apply_corrections(
    state: &StateVector,
    outcome: (u8, u8),
    registers: &[&str],
) -> Result<StateVector> {
    let layout = state.layout().clone();
    let correction = pauli_correction(outcome.0, outcome.1);
    let mut amps = state.amplitudes().clone();
    for reg in registers {
        let pos = layout
            .position(reg)
            .ok_or_else(|| Error::UnknownLabel((*reg).to_string()))?;
        amps = apply_block_unitary(&amps, &layout, pos, pos + 1, &correction)?;
    }
    StateVector::new(layout, amps)
}

fn simulate_custom_run(
    attack: &CustomAttack,
    cfg: &RoundConfig,
    rng: &mut impl Rng,
) -> Result<RoundRecord> {
    let challenge = Challenge::sample(rng);
    let x_bit = (rng.random::<u32>() & 1) as u8;
    let outbound = if x_bit == 0 {
        attack.a_keep[0].as_str()
    } else {
        attack.b_keep[0].as_str()
    };
    let accept_prob = if cfg.purified {
        let state = attack.purified_state()?;
        let responded = attack.apply_responses(&state, x_bit, true)?;
        bell_check_prob(&responded, "V", outbound)?
    } else {
        let state = attack.plain_state(challenge)?;
        let responded = attack.apply_responses(&state, x_bit, false)?;
        let bra = challenge.state(outbound);
        let (_, residual) = partial_contract(&responded, &bra)?;
        residual.norm_squared()
    };
    let accepted = rng.random::<f64>() < accept_prob;
    Ok(RoundRecord {
        round: 0,
        challenge: challenge.label(),
        x_bit,
        bell_outcome: None,
        routed_to: Some(x_bit),
        accepted,
    })
}

/// Acceptance estimate with a Wilson 95% interval.
#[derive(Debug, Clone, Copy)]
pub struct McReport {
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub runs: u64,
    pub accepted: u64,
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(successes: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054f64;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Monte-Carlo acceptance over independent protocol executions, each a
/// full state-vector simulation with a per-run derived seed.
pub fn simulate(cfg: &RoundConfig, attack: &AttackModel, runs: u64) -> Result<McReport> {
    Ok(simulate_transcript(cfg, attack, runs, false)?.0)
}

/// As [`simulate`], optionally returning every per-round transcript.
pub fn simulate_transcript(
    cfg: &RoundConfig,
    attack: &AttackModel,
    runs: u64,
    collect: bool,
) -> Result<(McReport, Vec<ProtocolRun>)> {
    if runs == 0 {
        return Err(Error::InvalidArgument("need at least one run".into()));
    }
    if let AttackModel::Custom(custom) = attack {
        custom.validate()?;
        if cfg.n != 1 {
            return Err(Error::InvalidArgument(
                "custom attacks are defined for single-round protocols".into(),
            ));
        }
    }
    let mut accepted_runs = 0u64;
    let mut transcripts = Vec::new();
    for run_idx in 0..runs {
        let mut rng = rng::derived(cfg.seed, run_idx);
        let run = match attack {
            AttackModel::Honest => run_honest(cfg, &mut rng),
            AttackModel::NopeOptimal => {
                let mut rounds = Vec::with_capacity(cfg.n);
                for round in 0..cfg.n {
                    rounds.push(simulate_nope_round(cfg, round, &mut rng)?);
                }
                let accepted = rounds.iter().all(|r| r.accepted);
                ProtocolRun {
                    rounds,
                    accepted,
                    phase_tags: [PHASE_SEND, PHASE_RELAY, PHASE_VERIFY],
                }
            }
            AttackModel::Custom(custom) => {
                let record = simulate_custom_run(custom, cfg, &mut rng)?;
                let accepted = record.accepted;
                ProtocolRun {
                    rounds: vec![record],
                    accepted,
                    phase_tags: [PHASE_SEND, PHASE_RELAY, PHASE_VERIFY],
                }
            }
        };
        if run.accepted {
            accepted_runs += 1;
        }
        if collect {
            transcripts.push(run);
        }
    }
    let rate = accepted_runs as f64 / runs as f64;
    let (ci_low, ci_high) = wilson_interval(accepted_runs, runs);
    Ok((
        McReport {
            rate,
            ci_low,
            ci_high,
            runs,
            accepted: accepted_runs,
        },
        transcripts,
    ))
}

/// Exact acceptance of an attack through the reduction to the (parallel)
/// cloning game on the purified wiring. The honest prover is not an
/// adversarial split and is rejected with a structural error.
pub fn exact_acceptance(cfg: &RoundConfig, attack: &AttackModel) -> Result<f64> {
    match attack {
        AttackModel::Honest => Err(Error::Structural(
            "the honest prover has no Alice/Bob split; exact acceptance applies to attacks".into(),
        )),
        AttackModel::NopeOptimal => {
            let spec = ParallelSpec::new(cfg.n)?;
            let (_, strategy) = tensor_lower_bound(&spec);
            let strategy = strategy.ok_or_else(|| {
                Error::InvalidArgument("round count too large for exact evaluation".into())
            })?;
            eval_parallel_strategy(&spec, &strategy)
        }
        AttackModel::Custom(custom) => {
            custom.validate()?;
            if cfg.n != 1 {
                return Err(Error::InvalidArgument(
                    "custom attacks are defined for single-round protocols".into(),
                ));
            }
            let state = custom.purified_state()?;
            let layout = state.layout().clone();
            let mut total = 0.0;
            for x in 0..2u8 {
                let responded = custom.apply_responses(&state, x, true)?;
                let outbound = if x == 0 {
                    custom.a_keep[0].as_str()
                } else {
                    custom.b_keep[0].as_str()
                };
                let target = max_entangled("V", outbound, 2)?;
                let factors = embedded_state_factors(&target, &layout)?;
                total += factors
                    .iter()
                    .map(|f| f.dotc(responded.amplitudes()).norm_sqr())
                    .sum::<f64>();
            }
            Ok(total / 2.0)
        }
    }
}

/// Exact plain-wiring acceptance of a custom attack, by enumerating the
/// challenge and question choices.
pub fn custom_plain_exact(attack: &CustomAttack) -> Result<f64> {
    attack.validate()?;
    let mut total = 0.0;
    for challenge in Challenge::ALL {
        for x in 0..2u8 {
            let state = attack.plain_state(challenge)?;
            let responded = attack.apply_responses(&state, x, false)?;
            let outbound = if x == 0 {
                attack.a_keep[0].as_str()
            } else {
                attack.b_keep[0].as_str()
            };
            let bra = challenge.state(outbound);
            let (_, residual) = partial_contract(&responded, &bra)?;
            total += residual.norm_squared();
        }
    }
    Ok(total / 8.0)
}

/// Exact acceptance of the built-in attack under the plain wiring, by
/// exhaustive enumeration of challenges and Bell branches. Used to
/// cross-check the Monte-Carlo simulator in the non-purified model.
pub fn nope_plain_exact() -> Result<f64> {
    let mut total = 0.0;
    for challenge in Challenge::ALL {
        for x in 0..2u8 {
            let joint = RegisterLayout::qubits(["F", "M", "A", "B"])?;
            let state = challenge
                .state("F")
                .kron(&nope_resource_state())?
                .relabeled(joint)?;
            let routed = if x == 0 { "A" } else { "B" };
            for a in 0..2u8 {
                for b in 0..2u8 {
                    let bra = bell_state("F", "M", a, b)?;
                    let (layout, residual) = partial_contract(&state, &bra)?;
                    // Unnormalized branch; its squared norm is the branch
                    // probability, so the projective check contributes
                    // ‖⟨φ|branch⟩‖² directly.
                    let corrected = {
                        let correction = pauli_correction(a, b);
                        let mut amps = residual;
                        for reg in ["A", "B"] {
                            let pos = layout.position(reg).expect("present");
                            amps = apply_block_unitary(&amps, &layout, pos, pos + 1, &correction)?;
                        }
                        amps
                    };
                    let bra_check = challenge.state(routed);
                    let pseudo = StateVector::normalized(layout.clone(), corrected.clone());
                    let weight = corrected.norm_squared();
                    if weight < 1e-30 {
                        continue;
                    }
                    let normalized = pseudo?;
                    let (_, check_residual) = partial_contract(&normalized, &bra_check)?;
                    total += weight * check_residual.norm_squared();
                }
            }
        }
    }
    Ok(total / 8.0)
}
