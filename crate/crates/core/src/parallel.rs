//! Parallel repetition of the two-party game.
//!
//! Alice and Bob receive the full question string x ∈ {0,1}^n; round i
//! is won by the party selected by x_i. Exact bounds:
//! (3/4)^n ≤ optimal value ≤ (1/2 + 1/(2√2))^n, the upper bound arising
//! from a sum-of-projectors norm bound over the XOR permutation family
//! together with the pairwise overlap bound ‖Π(x)Π(x′)‖ ≤ 2^{−t/2} at
//! Hamming distance t. A see-saw optimizer searches the open gap
//! between the two bounds; its result is a heuristic lower bound only.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::game::SharedState;
use crate::layout::RegisterLayout;
use crate::operator::{
    apply_block_unitary, embedded_state_factors, max_entangled, CMatrix, CVector, Operator,
    StateVector,
};
use crate::seesaw;
use crate::tol;

/// n-fold parallel repetition with the maximally entangled per-round
/// target.
#[derive(Debug, Clone, Copy)]
pub struct ParallelSpec {
    n: usize,
}

impl ParallelSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        if n > 60 {
            return Err(Error::InvalidArgument("n too large".into()));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn questions(&self) -> u64 {
        1u64 << self.n
    }

    /// Ancilla-free layout `[R0…R_{n−1}, A0…A_{n−1}, B0…B_{n−1}]`.
    pub fn game_layout(&self) -> Result<RegisterLayout> {
        let mut regs = Vec::with_capacity(3 * self.n);
        for i in 0..self.n {
            regs.push((format!("R{i}"), 2));
        }
        for i in 0..self.n {
            regs.push((format!("A{i}"), 2));
        }
        for i in 0..self.n {
            regs.push((format!("B{i}"), 2));
        }
        let layout = RegisterLayout::new(regs)?;
        tol::check_dim(layout.dim())?;
        Ok(layout)
    }

    /// Strategy layout `[R…, A…, EA, B…, EB]`.
    pub fn strategy_layout(&self, ancilla_a: usize, ancilla_b: usize) -> Result<RegisterLayout> {
        let mut regs = Vec::with_capacity(3 * self.n + 2);
        for i in 0..self.n {
            regs.push((format!("R{i}"), 2));
        }
        for i in 0..self.n {
            regs.push((format!("A{i}"), 2));
        }
        regs.push(("EA".to_string(), ancilla_a));
        for i in 0..self.n {
            regs.push((format!("B{i}"), 2));
        }
        regs.push(("EB".to_string(), ancilla_b));
        let layout = RegisterLayout::new(regs)?;
        tol::check_dim(layout.dim())?;
        Ok(layout)
    }

    /// The product target state ⊗_i |Φ⁺⟩ between R_i and the round-i
    /// register of the party chosen by x_i.
    pub fn question_target(&self, x: BitString) -> Result<StateVector> {
        self.check_question(x)?;
        let mut state: Option<StateVector> = None;
        for i in 0..self.n {
            let partner = if x.bit(i) == 0 {
                format!("A{i}")
            } else {
                format!("B{i}")
            };
            let pair = max_entangled(&format!("R{i}"), &partner, 2)?;
            state = Some(match state {
                None => pair,
                Some(acc) => acc.kron(&pair)?,
            });
        }
        Ok(state.expect("n >= 1"))
    }

    pub fn projector_factors(&self, x: BitString, full: &RegisterLayout) -> Result<Vec<CVector>> {
        embedded_state_factors(&self.question_target(x)?, full)
    }

    fn check_question(&self, x: BitString) -> Result<()> {
        if x.n != self.n {
            return Err(Error::Shape(format!(
                "question has {} bits, spec has {} rounds",
                x.n, self.n
            )));
        }
        Ok(())
    }
}

/// A question string x = x_0 … x_{n−1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitString {
    n: usize,
    bits: u64,
}

impl BitString {
    pub fn new(n: usize, bits: u64) -> Result<Self> {
        if n == 0 || n > 60 {
            return Err(Error::InvalidArgument(format!("bad bit-string length {n}")));
        }
        if bits >> n != 0 {
            return Err(Error::InvalidArgument(format!(
                "value {bits} does not fit in {n} bits"
            )));
        }
        Ok(Self { n, bits })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let n = text.len();
        let mut bits = 0u64;
        for (i, c) in text.chars().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << i,
                other => return Err(Error::Parse(format!("bad bit `{other}` in bit string"))),
            }
        }
        Self::new(n, bits)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self) -> u64 {
        self.bits
    }

    /// Bit of round i.
    pub fn bit(&self, i: usize) -> u8 {
        ((self.bits >> i) & 1) as u8
    }

    pub fn xor(&self, other: BitString) -> Result<BitString> {
        if self.n != other.n {
            return Err(Error::Shape("bit-length mismatch".into()));
        }
        BitString::new(self.n, self.bits ^ other.bits)
    }

    pub fn hamming_distance(&self, other: BitString) -> Result<usize> {
        Ok(self.xor(other)?.bits.count_ones() as usize)
    }

    /// All 2^n strings of length n in numeric order.
    pub fn all(n: usize) -> impl Iterator<Item = BitString> {
        (0..(1u64 << n)).map(move |bits| BitString { n, bits })
    }
}

impl std::fmt::Display for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for i in 0..self.n {
            write!(f, "{}", self.bit(i))?;
        }
        Ok(())
    }
}

/// Π(x) = ⊗_i |Φ⁺⟩⟨Φ⁺|_{R_i Q_{x_i}} ⊗ I_{Q_{1−x_i}} as a dense operator
/// on the ancilla-free layout.
pub fn parallel_projector(spec: &ParallelSpec, x: BitString) -> Result<Operator> {
    let full = spec.game_layout()?;
    spec.question_target(x)?.projector().embed(&full)
}

/// Upper bound (1/2 + 1/(2√2))^n, together with the equivalent binomial
/// form 2^{−n} Σ_t C(n,t) 2^{−t/2}; the two agree to rounding.
#[derive(Debug, Clone, Copy)]
pub struct UpperBound {
    pub closed_form: f64,
    pub binomial_sum: f64,
}

impl UpperBound {
    pub fn value(&self) -> f64 {
        self.closed_form
    }
}

pub fn analytic_upper_bound(n: usize) -> UpperBound {
    let per_round = 0.5 + 0.5 / 2f64.sqrt();
    let closed_form = per_round.powi(n as i32);
    let mut sum = 0.0;
    let mut binom = 1.0f64; // C(n, 0)
    for t in 0..=n {
        sum += binom * 2f64.powf(-(t as f64) / 2.0);
        binom = binom * (n - t) as f64 / (t + 1) as f64;
    }
    UpperBound {
        closed_form,
        binomial_sum: sum / 2f64.powi(n as i32),
    }
}

/// A strategy for the parallel game: shared state on the strategy
/// layout plus one unitary per full question string for each party.
#[derive(Debug, Clone)]
pub struct ParallelStrategy {
    pub shared: SharedState,
    pub ancilla_a: usize,
    pub ancilla_b: usize,
    /// Indexed by the question value x ∈ 0..2^n; acts on `[A…, EA]`.
    pub responses_a: Vec<CMatrix>,
    /// Indexed by the question value; acts on `[B…, EB]`.
    pub responses_b: Vec<CMatrix>,
}

impl ParallelStrategy {
    /// Identity responses around a pure shared state.
    pub fn trivial(spec: &ParallelSpec, shared: StateVector) -> Result<Self> {
        let q = spec.questions() as usize;
        let da = 1usize << spec.n();
        Ok(Self {
            shared: SharedState::Pure(shared),
            ancilla_a: 1,
            ancilla_b: 1,
            responses_a: (0..q).map(|_| CMatrix::identity(da, da)).collect(),
            responses_b: (0..q).map(|_| CMatrix::identity(da, da)).collect(),
        })
    }

    /// Seeded random strategy with the given ancilla dimensions.
    pub fn random(
        spec: &ParallelSpec,
        ancilla_a: usize,
        ancilla_b: usize,
        seed: u64,
    ) -> Result<Self> {
        let layout = spec.strategy_layout(ancilla_a, ancilla_b)?;
        let mut rng = crate::rng::master(seed);
        let state = StateVector::new(
            layout.clone(),
            crate::rng::random_state_amplitudes(&mut rng, layout.dim()),
        )?;
        let da = (1usize << spec.n()) * ancilla_a;
        let db = (1usize << spec.n()) * ancilla_b;
        let q = spec.questions() as usize;
        Ok(Self {
            shared: SharedState::Pure(state),
            ancilla_a,
            ancilla_b,
            responses_a: (0..q)
                .map(|_| crate::rng::random_unitary(&mut rng, da))
                .collect(),
            responses_b: (0..q)
                .map(|_| crate::rng::random_unitary(&mut rng, db))
                .collect(),
        })
    }

    fn validate(&self, spec: &ParallelSpec) -> Result<RegisterLayout> {
        let layout = spec.strategy_layout(self.ancilla_a, self.ancilla_b)?;
        if self.shared.layout() != &layout {
            return Err(Error::Shape(format!(
                "shared state layout {} does not match strategy layout {layout}",
                self.shared.layout()
            )));
        }
        let q = spec.questions() as usize;
        if self.responses_a.len() != q || self.responses_b.len() != q {
            return Err(Error::Shape(format!(
                "expected {q} responses per party, got {} and {}",
                self.responses_a.len(),
                self.responses_b.len()
            )));
        }
        let da = (1usize << spec.n()) * self.ancilla_a;
        let db = (1usize << spec.n()) * self.ancilla_b;
        for (want, list) in [(da, &self.responses_a), (db, &self.responses_b)] {
            for u in list.iter() {
                if u.nrows() != want || u.ncols() != want {
                    return Err(Error::DimensionMismatch {
                        expected: want,
                        got: u.nrows(),
                    });
                }
                Operator::new(RegisterLayout::single("U", want)?, u.clone())?.require_unitary()?;
            }
        }
        if let SharedState::Density(rho) = &self.shared {
            rho.require_state()?;
        }
        Ok(layout)
    }
}

/// The n-fold tensor power of the optimal single-round state, arranged
/// on the parallel strategy layout with trivial ancillas.
pub fn tensored_optimal_state(spec: &ParallelSpec) -> Result<StateVector> {
    let n = spec.n();
    let layout = spec.strategy_layout(1, 1)?;
    let dim = layout.dim();
    let large = 2.0 / 6f64.sqrt();
    let small = 1.0 / 6f64.sqrt();
    let round_amp = |r: usize, a: usize, b: usize| -> f64 {
        match (r, a, b) {
            (0, 0, 0) => large,
            (1, 1, 0) => small,
            (1, 0, 1) => small,
            _ => 0.0,
        }
    };
    let mut amps = CVector::zeros(dim);
    for idx in 0..dim {
        let digits = layout.digits(idx);
        let mut amp = 1.0;
        for i in 0..n {
            amp *= round_amp(digits[i], digits[n + i], digits[2 * n + 1 + i]);
            if amp == 0.0 {
                break;
            }
        }
        if amp != 0.0 {
            amps[idx] = Complex64::new(amp, 0.0);
        }
    }
    StateVector::new(layout, amps)
}

/// Lower bound (3/4)^n and, where the dimensions allow brute force, the
/// explicit tensor-power strategy attaining it.
pub fn tensor_lower_bound(spec: &ParallelSpec) -> (f64, Option<ParallelStrategy>) {
    let value = 0.75f64.powi(spec.n() as i32);
    let strategy = tensored_optimal_state(spec)
        .and_then(|state| ParallelStrategy::trivial(spec, state))
        .ok();
    (value, strategy)
}

/// Winning probability 2^{−n} Σ_x Tr[Π(x) · W_x ρ W_x†].
pub fn eval_parallel_strategy(spec: &ParallelSpec, strategy: &ParallelStrategy) -> Result<f64> {
    let layout = strategy.validate(spec)?;
    let n = spec.n();
    let alice = (n, 2 * n + 1);
    let bob = (2 * n + 1, 3 * n + 2);
    let mut total = 0.0;
    for x in BitString::all(n) {
        let factors = spec.projector_factors(x, &layout)?;
        let xi = x.value() as usize;
        total += match &strategy.shared {
            SharedState::Pure(psi) => {
                let mut w = psi.amplitudes().clone();
                w = apply_block_unitary(&w, &layout, alice.0, alice.1, &strategy.responses_a[xi])?;
                w = apply_block_unitary(&w, &layout, bob.0, bob.1, &strategy.responses_b[xi])?;
                factors.iter().map(|f| f.dotc(&w).norm_sqr()).sum::<f64>()
            }
            SharedState::Density(rho) => {
                let ua = strategy.responses_a[xi].adjoint();
                let ub = strategy.responses_b[xi].adjoint();
                let mut acc = 0.0;
                for f in &factors {
                    let mut g = apply_block_unitary(f, &layout, alice.0, alice.1, &ua)?;
                    g = apply_block_unitary(&g, &layout, bob.0, bob.1, &ub)?;
                    acc += g.dotc(&(rho.matrix() * &g)).re;
                }
                acc
            }
        };
    }
    Ok(total / spec.questions() as f64)
}

/// Overlap data for a question pair: Hamming distance t, the majority
/// one-sided distance t_A ≥ t/2, the analytic bound 2^{−t/2} and, for
/// n ≤ 3, the numerically computed ‖Π(x)Π(x′)‖.
#[derive(Debug, Clone, Copy)]
pub struct OverlapReport {
    pub t: usize,
    pub t_a: usize,
    pub analytic: f64,
    pub numeric: Option<f64>,
}

pub fn overlap_bound(x: BitString, x_prime: BitString) -> Result<OverlapReport> {
    let t = x.hamming_distance(x_prime)?;
    let n = x.len();
    let mut t_alice = 0usize;
    for i in 0..n {
        if x.bit(i) == 0 && x_prime.bit(i) == 1 {
            t_alice += 1;
        }
    }
    // Role swap: if Alice's side of the disagreement is the minority,
    // exchange the parties so t_a >= t/2 always holds.
    let t_a = t_alice.max(t - t_alice);
    let analytic = 2f64.powf(-(t as f64) / 2.0);
    let numeric = if n <= 3 {
        let spec = ParallelSpec::new(n)?;
        let pa = parallel_projector(&spec, x)?;
        let pb = parallel_projector(&spec, x_prime)?;
        Some(pa.prod_norm(&pb)?)
    } else {
        None
    };
    Ok(OverlapReport {
        t,
        t_a,
        analytic,
        numeric,
    })
}

/// A family of mutually orthogonal permutations of {0,…,m−1}:
/// π_k(i) ≠ π_j(i) for every i whenever k ≠ j.
#[derive(Debug, Clone)]
pub struct PermutationFamily {
    perms: Vec<Vec<usize>>,
}

impl PermutationFamily {
    pub fn new(perms: Vec<Vec<usize>>) -> Result<Self> {
        let m = perms.first().map(|p| p.len()).unwrap_or(0);
        if m == 0 {
            return Err(Error::InvalidArgument("empty permutation family".into()));
        }
        for p in &perms {
            if p.len() != m {
                return Err(Error::Shape("permutations of unequal size".into()));
            }
            let mut seen = vec![false; m];
            for &v in p {
                if v >= m || seen[v] {
                    return Err(Error::InvalidArgument("not a permutation".into()));
                }
                seen[v] = true;
            }
        }
        for a in 0..perms.len() {
            for b in (a + 1)..perms.len() {
                if let Some(i) = perms[a].iter().zip(&perms[b]).position(|(x, y)| x == y) {
                    return Err(Error::InvalidArgument(format!(
                        "permutations {a} and {b} collide at {i}"
                    )));
                }
            }
        }
        Ok(Self { perms })
    }

    /// The XOR family π_key(x) = x ⊕ key on {0,1}^n; its members are
    /// mutually orthogonal because the keys differ.
    pub fn xor(n: usize) -> Result<Self> {
        if n == 0 || n > 20 {
            return Err(Error::InvalidArgument(format!("bad XOR family size {n}")));
        }
        let m = 1usize << n;
        Self::new(
            (0..m)
                .map(|key| (0..m).map(|x| x ^ key).collect())
                .collect(),
        )
    }

    /// The m cyclic shifts of {0,…,m−1}.
    pub fn cyclic(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("empty cyclic family".into()));
        }
        Self::new(
            (0..m)
                .map(|k| (0..m).map(|i| (i + k) % m).collect())
                .collect(),
        )
    }

    /// Only the first `count` members (still mutually orthogonal).
    pub fn truncated(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.perms.len() {
            return Err(Error::InvalidArgument("bad truncation".into()));
        }
        Ok(Self {
            perms: self.perms[..count].to_vec(),
        })
    }

    pub fn family_size(&self) -> usize {
        self.perms.len()
    }

    pub fn domain_size(&self) -> usize {
        self.perms[0].len()
    }

    pub fn apply(&self, k: usize, i: usize) -> usize {
        self.perms[k][i]
    }
}

/// Sum-of-projectors norm bound: ‖Σ_i Π^i‖ ≤ Σ_k max_i ‖Π^i Π^{π_k(i)}‖
/// for any mutually orthogonal permutation family of matching size.
pub fn lemma_sum_bound(projectors: &[Operator], family: &PermutationFamily) -> Result<f64> {
    if projectors.len() != family.domain_size() {
        return Err(Error::Shape(format!(
            "{} projectors but permutations act on {}",
            projectors.len(),
            family.domain_size()
        )));
    }
    let layout = projectors[0].layout();
    for p in projectors {
        if p.layout() != layout {
            return Err(Error::Shape("projectors on different layouts".into()));
        }
    }
    let mut bound = 0.0;
    for k in 0..family.family_size() {
        let mut worst = 0.0f64;
        for (i, p) in projectors.iter().enumerate() {
            let q = &projectors[family.apply(k, i)];
            worst = worst.max(p.prod_norm(q)?);
        }
        bound += worst;
    }
    Ok(bound)
}

/// Knobs of the parallel see-saw search.
#[derive(Debug, Clone, Copy)]
pub struct SeesawConfig {
    pub ancilla_dim_a: usize,
    pub ancilla_dim_b: usize,
    pub max_iters: usize,
    pub convergence_tol: f64,
    pub seed: u64,
}

impl Default for SeesawConfig {
    fn default() -> Self {
        Self {
            ancilla_dim_a: 2,
            ancilla_dim_b: 2,
            max_iters: 300,
            convergence_tol: 1e-9,
            seed: tol::DEFAULT_SEED,
        }
    }
}

impl SeesawConfig {
    fn validate(&self) -> Result<()> {
        if self.ancilla_dim_a == 0 || self.ancilla_dim_b == 0 {
            return Err(Error::InvalidArgument(
                "ancilla dimensions must be ≥ 1".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidArgument("max_iters must be ≥ 1".into()));
        }
        if self.convergence_tol.is_nan() || self.convergence_tol <= 0.0 {
            return Err(Error::InvalidArgument("convergence_tol must be > 0".into()));
        }
        Ok(())
    }
}

/// One see-saw run.
#[derive(Debug, Clone)]
pub struct SeesawReport {
    pub best: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub history: Vec<f64>,
}

pub fn seesaw_optimize(spec: &ParallelSpec, cfg: &SeesawConfig) -> Result<SeesawReport> {
    cfg.validate()?;
    let layout = spec.strategy_layout(cfg.ancilla_dim_a, cfg.ancilla_dim_b)?;
    let n = spec.n();
    let questions = BitString::all(n)
        .map(|x| {
            Ok(seesaw::ProjectorFactors {
                factors: spec.projector_factors(x, &layout)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let parties = vec![
        seesaw::PartyBlock {
            first_reg: n,
            last_reg: 2 * n + 1,
        },
        seesaw::PartyBlock {
            first_reg: 2 * n + 1,
            last_reg: 3 * n + 2,
        },
    ];
    let outcome = seesaw::optimize(
        &seesaw::Problem {
            layout,
            questions,
            parties,
        },
        &seesaw::EngineConfig {
            max_sweeps: cfg.max_iters,
            tol: cfg.convergence_tol,
            seed: cfg.seed,
        },
    )?;
    Ok(SeesawReport {
        best: outcome.best,
        sweeps: outcome.sweeps,
        converged: outcome.converged,
        history: outcome.history,
    })
}

/// Best see-saw value over `seeds` runs with seeds `cfg.seed + i`.
#[derive(Debug, Clone)]
pub struct SeesawScan {
    pub best: f64,
    pub per_seed: Vec<f64>,
    pub total_sweeps: usize,
}

pub fn seesaw_scan(spec: &ParallelSpec, cfg: &SeesawConfig, seeds: usize) -> Result<SeesawScan> {
    if seeds == 0 {
        return Err(Error::InvalidArgument("need at least one seed".into()));
    }
    let mut per_seed = Vec::with_capacity(seeds);
    let mut total_sweeps = 0;
    for i in 0..seeds {
        let run_cfg = SeesawConfig {
            seed: cfg.seed.wrapping_add(i as u64),
            ..*cfg
        };
        let report = seesaw_optimize(spec, &run_cfg)?;
        total_sweeps += report.sweeps;
        per_seed.push(report.best);
    }
    let best = per_seed.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(SeesawScan {
        best,
        per_seed,
        total_sweeps,
    })
}
