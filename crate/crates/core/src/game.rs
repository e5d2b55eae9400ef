//! The k-party cloning game.
//!
//! A referee holding register R announces a uniform x ∈ {0,…,k−1}; party
//! x must end up sharing the target state |Ψ⟩ with the referee. The
//! optimal winning probability equals (1/k)·‖Σ_x |Ψ⟩⟨Ψ|_{R P_x} ⊗ I‖,
//! which for the maximally entangled target evaluates to 1/2 + 1/(2k).
//! Strategies are a shared state plus per-question local unitaries on
//! each party's register-plus-ancilla block.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::layout::RegisterLayout;
use crate::operator::{
    apply_block_unitary, embedded_state_factors, max_entangled, CMatrix, CVector, Operator,
    StateVector,
};
use crate::seesaw;
use crate::tol;

/// Which game is being valued: the number of parties and the bipartite
/// target state on `[R, P]`. Questions are uniform over the parties.
#[derive(Debug, Clone)]
pub struct GameSpec {
    k: usize,
    target: StateVector,
}

pub fn party_label(i: usize) -> String {
    format!("P{i}")
}

pub fn ancilla_label(i: usize) -> String {
    format!("E{i}")
}

impl GameSpec {
    /// Game with the maximally entangled qubit-pair target.
    pub fn epr(k: usize) -> Result<Self> {
        Self::with_target(k, max_entangled("R", "P", 2)?)
    }

    /// Game with an arbitrary bipartite target on two registers, the
    /// first being the referee's.
    pub fn with_target(k: usize, target: StateVector) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if target.layout().len() != 2 {
            return Err(Error::Shape(format!(
                "target must live on exactly two registers, got layout {}",
                target.layout()
            )));
        }
        let spec = Self { k, target };
        tol::check_dim(spec.game_layout().dim())?;
        Ok(spec)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn target(&self) -> &StateVector {
        &self.target
    }

    pub fn referee_dim(&self) -> usize {
        self.target.layout().regs()[0].1
    }

    pub fn party_dim(&self) -> usize {
        self.target.layout().regs()[1].1
    }

    /// Ancilla-free layout `[R, P0, …, P_{k−1}]`.
    pub fn game_layout(&self) -> RegisterLayout {
        let mut regs = vec![("R".to_string(), self.referee_dim())];
        for i in 0..self.k {
            regs.push((party_label(i), self.party_dim()));
        }
        RegisterLayout::new(regs).expect("labels are distinct by construction")
    }

    /// Strategy layout `[R, P0, E0, …, P_{k−1}, E_{k−1}]` with the given
    /// ancilla dimensions (dimension 1 means no ancilla).
    pub fn strategy_layout(&self, ancilla_dims: &[usize]) -> Result<RegisterLayout> {
        if ancilla_dims.len() != self.k {
            return Err(Error::Shape(format!(
                "expected {} ancilla dimensions, got {}",
                self.k,
                ancilla_dims.len()
            )));
        }
        let mut regs = vec![("R".to_string(), self.referee_dim())];
        for (i, &dim) in ancilla_dims.iter().enumerate() {
            regs.push((party_label(i), self.party_dim()));
            regs.push((ancilla_label(i), dim));
        }
        RegisterLayout::new(regs)
    }

    /// Target relabeled onto the referee and party x.
    pub fn target_on_party(&self, x: usize) -> Result<StateVector> {
        if x >= self.k {
            return Err(Error::InvalidArgument(format!(
                "question {x} out of range for k = {}",
                self.k
            )));
        }
        let layout = RegisterLayout::new([
            ("R".to_string(), self.referee_dim()),
            (party_label(x), self.party_dim()),
        ])?;
        self.target.relabeled(layout)
    }

    /// Range factors of the question-x projector on an arbitrary layout
    /// containing `[R, P_x]`.
    pub fn projector_factors(&self, x: usize, full: &RegisterLayout) -> Result<Vec<CVector>> {
        embedded_state_factors(&self.target_on_party(x)?, full)
    }
}

/// |Ψ⟩⟨Ψ| on the referee and party x, tensored with identity on every
/// other party register.
pub fn game_projector(spec: &GameSpec, x: usize) -> Result<Operator> {
    let full = spec.game_layout();
    spec.target_on_party(x)?.projector().embed(&full)
}

/// The unnormalized game operator Σ_x Π_x on the ancilla-free layout.
pub fn game_operator(spec: &GameSpec) -> Result<Operator> {
    let full = spec.game_layout();
    let dim = full.dim();
    let mut mat = CMatrix::zeros(dim, dim);
    for x in 0..spec.k() {
        for f in spec.projector_factors(x, &full)? {
            // Rank-one accumulation keeps this O(k · rank · dim²).
            mat += &f * f.adjoint();
        }
    }
    Operator::new(full, mat)
}

/// Exact game value with its operator norm and an optimal witness.
#[derive(Debug, Clone)]
pub struct GameValueReport {
    /// Optimal winning probability, `operator_norm / k`.
    pub value: f64,
    /// ‖Σ_x Π_x‖.
    pub operator_norm: f64,
    /// Deterministic unit vector in the top eigenspace of the game
    /// operator; as an ancilla-free strategy with identity responses it
    /// attains `value`.
    pub witness_state: StateVector,
}

pub fn game_value(spec: &GameSpec) -> Result<GameValueReport> {
    let operator = game_operator(spec)?;
    let eig = operator.hermitian_eigen()?;
    let operator_norm = eig.values.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let witness = eig.top_eigenspace_witness();
    Ok(GameValueReport {
        value: operator_norm / spec.k() as f64,
        operator_norm,
        witness_state: StateVector::new(spec.game_layout(), witness)?,
    })
}

/// The optimal shared state for the maximally entangled target,
/// √(2/(k(k+1))) Σ_x |Φ⁺⟩_{R P_x} |0…0⟩ on `[R, P0, …, P_{k−1}]`.
pub fn optimal_state(k: usize) -> Result<StateVector> {
    let spec = GameSpec::epr(k)?;
    let layout = spec.game_layout();
    let mut amps = CVector::zeros(layout.dim());
    let scale = (2.0 / (k as f64 * (k + 1) as f64)).sqrt() / 2f64.sqrt();
    for x in 0..k {
        // |Φ⁺⟩_{R P_x}|0…0⟩ contributes at (r=0, all zero) and
        // (r=1, P_x=1, rest zero).
        let mut digits = vec![0usize; layout.len()];
        amps[layout.flat(&digits)] += Complex64::new(scale, 0.0);
        digits[0] = 1;
        digits[1 + x] = 1;
        amps[layout.flat(&digits)] += Complex64::new(scale, 0.0);
    }
    StateVector::new(layout, amps)
}

/// Reference shared states used for comparison strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedState {
    Ghz,
    W,
    Guess,
    AllZero,
}

impl NamedState {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "ghz" => Ok(Self::Ghz),
            "w" => Ok(Self::W),
            "guess" => Ok(Self::Guess),
            "all-zero" | "all_zero" => Ok(Self::AllZero),
            other => Err(Error::InvalidArgument(format!(
                "unknown named state `{other}`"
            ))),
        }
    }
}

/// A named shared state on the ancilla-free layout `[R, P0, …]`.
/// `Ghz` and `W` are defined for k = 2 (three qubits total); `Guess`
/// and `AllZero` work for any k.
pub fn named_state(name: NamedState, k: usize) -> Result<StateVector> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let layout = GameSpec::epr(k)?.game_layout();
    let dim = layout.dim();
    let mut amps = CVector::zeros(dim);
    match name {
        NamedState::Ghz => {
            if k != 2 {
                return Err(Error::InvalidArgument(format!(
                    "ghz is defined for k = 2, got k = {k}"
                )));
            }
            let w = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
            amps[0] = w;
            amps[dim - 1] = w;
        }
        NamedState::W => {
            if k != 2 {
                return Err(Error::InvalidArgument(format!(
                    "w is defined for k = 2, got k = {k}"
                )));
            }
            let w = Complex64::new(1.0 / 3f64.sqrt(), 0.0);
            amps[0b001] = w;
            amps[0b010] = w;
            amps[0b100] = w;
        }
        NamedState::Guess => {
            // |Φ⁺⟩_{R P0}|0…0⟩: guess x = 0.
            let w = Complex64::new(1.0 / 2f64.sqrt(), 0.0);
            let mut digits = vec![0usize; layout.len()];
            amps[layout.flat(&digits)] = w;
            digits[0] = 1;
            digits[1] = 1;
            amps[layout.flat(&digits)] = w;
        }
        NamedState::AllZero => {
            amps[0] = Complex64::new(1.0, 0.0);
        }
    }
    StateVector::new(layout, amps)
}

/// Shared initial state of a strategy: pure amplitudes or a density
/// operator, both on the strategy layout.
#[derive(Debug, Clone)]
pub enum SharedState {
    Pure(StateVector),
    Density(Operator),
}

impl SharedState {
    pub fn layout(&self) -> &RegisterLayout {
        match self {
            SharedState::Pure(s) => s.layout(),
            SharedState::Density(o) => o.layout(),
        }
    }
}

/// A strategy: shared state plus per-question unitaries, one per party,
/// acting on that party's `(P_i, E_i)` block.
#[derive(Debug, Clone)]
pub struct Strategy {
    pub shared: SharedState,
    pub ancilla_dims: Vec<usize>,
    /// `responses[x][i]` is party i's unitary on question x.
    pub responses: Vec<Vec<CMatrix>>,
}

impl Strategy {
    /// Ancilla-free strategy that prepares `state` and does nothing.
    pub fn trivial(spec: &GameSpec, state: &StateVector) -> Result<Self> {
        let ancilla = vec![1usize; spec.k()];
        let layout = spec.strategy_layout(&ancilla)?;
        let lifted = state.embed_with_zeros(&layout)?;
        let responses = (0..spec.k())
            .map(|_| {
                (0..spec.k())
                    .map(|_| CMatrix::identity(spec.party_dim(), spec.party_dim()))
                    .collect()
            })
            .collect();
        Ok(Self {
            shared: SharedState::Pure(lifted),
            ancilla_dims: ancilla,
            responses,
        })
    }

    /// Seeded random strategy: Haar state on the strategy layout and
    /// independent Haar response unitaries.
    pub fn random(spec: &GameSpec, ancilla_dims: &[usize], seed: u64) -> Result<Self> {
        let layout = spec.strategy_layout(ancilla_dims)?;
        let mut rng = crate::rng::master(seed);
        let state = StateVector::new(
            layout.clone(),
            crate::rng::random_state_amplitudes(&mut rng, layout.dim()),
        )?;
        let responses = (0..spec.k())
            .map(|_| {
                ancilla_dims
                    .iter()
                    .map(|&a| crate::rng::random_unitary(&mut rng, spec.party_dim() * a))
                    .collect()
            })
            .collect();
        Ok(Self {
            shared: SharedState::Pure(state),
            ancilla_dims: ancilla_dims.to_vec(),
            responses,
        })
    }

    fn validate(&self, spec: &GameSpec) -> Result<RegisterLayout> {
        let layout = spec.strategy_layout(&self.ancilla_dims)?;
        if self.shared.layout() != &layout {
            return Err(Error::Shape(format!(
                "shared state layout {} does not match strategy layout {layout}",
                self.shared.layout()
            )));
        }
        if self.responses.len() != spec.k() {
            return Err(Error::Shape(format!(
                "expected {} response lists, got {}",
                spec.k(),
                self.responses.len()
            )));
        }
        for per_question in &self.responses {
            if per_question.len() != spec.k() {
                return Err(Error::Shape(format!(
                    "expected {} party responses per question, got {}",
                    spec.k(),
                    per_question.len()
                )));
            }
            for (i, u) in per_question.iter().enumerate() {
                let want = spec.party_dim() * self.ancilla_dims[i];
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

/// Winning probability of a strategy, (1/k) Σ_x Tr[Π_x · W_x ρ W_x†].
pub fn evaluate_strategy(spec: &GameSpec, strategy: &Strategy) -> Result<f64> {
    let layout = strategy.validate(spec)?;
    let blocks: Vec<(usize, usize)> = (0..spec.k()).map(|i| (1 + 2 * i, 3 + 2 * i)).collect();
    let mut total = 0.0;
    for x in 0..spec.k() {
        let factors = spec.projector_factors(x, &layout)?;
        total += match &strategy.shared {
            SharedState::Pure(psi) => {
                let mut w = psi.amplitudes().clone();
                for (i, &(first, last)) in blocks.iter().enumerate() {
                    w = apply_block_unitary(&w, &layout, first, last, &strategy.responses[x][i])?;
                }
                factors.iter().map(|f| f.dotc(&w).norm_sqr()).sum::<f64>()
            }
            SharedState::Density(rho) => {
                let mut acc = 0.0;
                for f in &factors {
                    // ⟨W† f| ρ |W† f⟩
                    let mut g = f.clone();
                    for (i, &(first, last)) in blocks.iter().enumerate() {
                        let ua = strategy.responses[x][i].adjoint();
                        g = apply_block_unitary(&g, &layout, first, last, &ua)?;
                    }
                    acc += g.dotc(&(rho.matrix() * &g)).re;
                }
                acc
            }
        };
    }
    Ok(total / spec.k() as f64)
}

/// Heuristic lower bound on the game value by alternating optimization;
/// see [`crate::seesaw`]. The result is the exact value of the best
/// strategy found, so it never exceeds [`game_value`] beyond rounding.
pub fn seesaw_game_value(
    spec: &GameSpec,
    ancilla_dims: &[usize],
    cfg: &seesaw::EngineConfig,
) -> Result<seesaw::Outcome> {
    let layout = spec.strategy_layout(ancilla_dims)?;
    let questions = (0..spec.k())
        .map(|x| {
            Ok(seesaw::ProjectorFactors {
                factors: spec.projector_factors(x, &layout)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let parties = (0..spec.k())
        .map(|i| seesaw::PartyBlock {
            first_reg: 1 + 2 * i,
            last_reg: 3 + 2 * i,
        })
        .collect();
    let problem = seesaw::Problem {
        layout,
        questions,
        parties,
    };
    seesaw::optimize(&problem, cfg)
}

/// Exact closed form of the optimal value for the maximally entangled
/// target.
pub fn epr_closed_form(k: usize) -> f64 {
    0.5 + 0.5 / k as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: winning probability of an ancilla-free pure
    /// state with identity responses, by raw index arithmetic only.
    fn oracle_identity_value(k: usize, state: &StateVector) -> f64 {
        let dp = 2usize; // qubit parties
        let amps = state.amplitudes();
        let dim = state.dim();
        assert_eq!(dim, 2usize.pow(k as u32 + 1));
        let mut total = 0.0;
        for x in 0..k {
            // Σ over spectator basis j of |Σ_{r,p} conj(Φ⁺[r,p]) ψ[r, p at P_x, j]|²
            let spectators = dim / 4;
            let mut term = 0.0;
            for j in 0..spectators {
                let mut amp = Complex64::new(0.0, 0.0);
                for rp in 0..2 {
                    // target Φ⁺ entries: (0,0) and (1,1) carry 1/√2
                    let r = rp;
                    let p = rp;
                    // Spread j over the k−1 non-x parties (big-endian).
                    let mut digits = vec![0usize; k];
                    let mut rest = j;
                    for slot in (0..k).rev() {
                        if slot == x {
                            continue;
                        }
                        digits[slot] = rest % dp;
                        rest /= dp;
                    }
                    digits[x] = p;
                    let mut idx = r;
                    for d in &digits {
                        idx = idx * dp + d;
                    }
                    amp += Complex64::new(1.0 / 2f64.sqrt(), 0.0).conj() * amps[idx];
                }
                term += amp.norm_sqr();
            }
            total += term;
        }
        total / k as f64
    }

    #[test]
    fn projector_shape_and_rank() {
        let spec = GameSpec::epr(2).unwrap();
        let proj = game_projector(&spec, 0).unwrap();
        assert_eq!(proj.dim(), 8);
        assert!((proj.trace().re - 2.0).abs() < 1e-12, "rank 2^{{k-1}}");
        let sq = proj.compose(&proj).unwrap();
        let diff = Operator::new(proj.layout().clone(), sq.matrix() - proj.matrix()).unwrap();
        assert!(diff.op_norm().unwrap() < 1e-10, "idempotent");
    }

    #[test]
    fn projector_for_single_party_is_target() {
        let spec = GameSpec::epr(1).unwrap();
        let proj = game_projector(&spec, 0).unwrap();
        let target = spec.target_on_party(0).unwrap().projector();
        assert_eq!(proj.matrix(), target.matrix());
    }

    #[test]
    fn projector_question_symmetry_under_register_swap() {
        // Swapping P0 ↔ P1 maps the x=0 projector to the x=1 projector.
        let spec = GameSpec::epr(3).unwrap();
        let p0 = game_projector(&spec, 0).unwrap();
        let p1 = game_projector(&spec, 1).unwrap();
        let layout = spec.game_layout();
        let dim = layout.dim();
        let mut swapped = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let mut di = layout.digits(i);
                let mut dj = layout.digits(j);
                di.swap(1, 2);
                dj.swap(1, 2);
                swapped[(layout.flat(&di), layout.flat(&dj))] = p0.matrix()[(i, j)];
            }
        }
        assert_eq!(&swapped, p1.matrix());
        assert!(game_projector(&spec, 3).is_err());
    }

    #[test]
    fn value_matches_closed_form_for_epr_target() {
        let mut previous = f64::INFINITY;
        for k in 1..=6 {
            let report = game_value(&GameSpec::epr(k).unwrap()).unwrap();
            assert!(
                (report.value - epr_closed_form(k)).abs() < tol::CLOSED_FORM_TOL,
                "k = {k}: {} vs {}",
                report.value,
                epr_closed_form(k)
            );
            assert!((report.operator_norm / k as f64 - report.value).abs() < 1e-12);
            assert!(report.value < previous, "value decreases with k");
            previous = report.value;
        }
    }

    #[test]
    fn two_party_value_is_three_quarters() {
        let report = game_value(&GameSpec::epr(2).unwrap()).unwrap();
        assert!((report.value - 0.75).abs() < 1e-10);
    }

    #[test]
    fn single_party_wins_any_entangled_target() {
        let spec = GameSpec::epr(1).unwrap();
        assert!((game_value(&spec).unwrap().value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn product_target_makes_the_game_trivial() {
        let layout = RegisterLayout::new([("R", 2), ("P", 2)]).unwrap();
        let product = StateVector::basis(layout, 0).unwrap();
        let spec = GameSpec::with_target(2, product).unwrap();
        assert!((game_value(&spec).unwrap().value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn witness_attains_the_value() {
        for k in [2usize, 3] {
            let spec = GameSpec::epr(k).unwrap();
            let report = game_value(&spec).unwrap();
            let strategy = Strategy::trivial(&spec, &report.witness_state).unwrap();
            let value = evaluate_strategy(&spec, &strategy).unwrap();
            assert!(
                (value - report.value).abs() < tol::CLOSED_FORM_TOL,
                "witness reproduces the value: {} vs {}",
                value,
                report.value
            );
        }
    }

    #[test]
    fn optimal_state_amplitudes_for_two_parties() {
        // Expanding the optimal state for k = 2 on [R, P0, P1]:
        // the two terms overlap on |000⟩, leaving amplitude 2/√6 there
        // and 1/√6 on |110⟩ and |101⟩.
        let state = optimal_state(2).unwrap();
        let amps = state.amplitudes();
        let expect_large = 2.0 / 6f64.sqrt();
        let expect_small = 1.0 / 6f64.sqrt();
        for idx in 0..8 {
            let expect = match idx {
                0b000 => expect_large,
                0b110 | 0b101 => expect_small,
                _ => 0.0,
            };
            assert!(
                (amps[idx] - Complex64::new(expect, 0.0)).norm() < 1e-12,
                "amplitude at {idx:03b}"
            );
        }
    }

    #[test]
    fn optimal_state_for_one_party_is_the_target_pair() {
        let state = optimal_state(1).unwrap();
        let epr = max_entangled("R", "P0", 2).unwrap();
        for i in 0..4 {
            assert!((state.amplitudes()[i] - epr.amplitudes()[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn optimal_state_attains_closed_form() {
        for k in 1..=5 {
            let spec = GameSpec::epr(k).unwrap();
            let state = optimal_state(k).unwrap();
            assert!(
                (oracle_identity_value(k, &state) - epr_closed_form(k)).abs() < 1e-12,
                "oracle agrees at k = {k}"
            );
            let strategy = Strategy::trivial(&spec, &state).unwrap();
            let value = evaluate_strategy(&spec, &strategy).unwrap();
            assert!(
                (value - epr_closed_form(k)).abs() < tol::CLOSED_FORM_TOL,
                "k = {k}: evaluated {} vs closed form {}",
                value,
                epr_closed_form(k)
            );
        }
    }

    #[test]
    fn named_state_vectors() {
        let ghz = named_state(NamedState::Ghz, 2).unwrap();
        assert!((ghz.amplitudes()[0].re - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((ghz.amplitudes()[7].re - 1.0 / 2f64.sqrt()).abs() < 1e-15);

        let w = named_state(NamedState::W, 2).unwrap();
        for idx in [1usize, 2, 4] {
            assert!((w.amplitudes()[idx].re - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        }

        let guess = named_state(NamedState::Guess, 2).unwrap();
        let epr_pair = max_entangled("R", "P0", 2)
            .unwrap()
            .kron(&StateVector::basis(RegisterLayout::single("P1", 2).unwrap(), 0).unwrap())
            .unwrap();
        for i in 0..8 {
            assert!((guess.amplitudes()[i] - epr_pair.amplitudes()[i]).norm() < 1e-15);
        }

        assert!(named_state(NamedState::Ghz, 3).is_err());
        assert!(named_state(NamedState::W, 4).is_err());
    }

    /// Exact values of the comparison strategies, frozen from the
    /// independent oracle above (and hand-checkable: the GHZ and all-zero
    /// marginals overlap the maximally entangled pair with probability
    /// 1/2 per question; the guess state wins question 0 outright and
    /// question 1 with probability 1/4; W only ever matches through its
    /// single |00…⟩-adjacent term).
    #[test]
    fn named_state_values_match_brute_force() {
        let spec = GameSpec::epr(2).unwrap();
        let cases = [
            (NamedState::Ghz, 0.5),
            (NamedState::W, 1.0 / 6.0),
            (NamedState::Guess, 0.625),
            (NamedState::AllZero, 0.5),
        ];
        for (name, expect) in cases {
            let state = named_state(name, 2).unwrap();
            let oracle = oracle_identity_value(2, &state);
            assert!(
                (oracle - expect).abs() < 1e-12,
                "{name:?}: oracle {oracle} vs {expect}"
            );
            let value =
                evaluate_strategy(&spec, &Strategy::trivial(&spec, &state).unwrap()).unwrap();
            assert!(
                (value - expect).abs() < 1e-12,
                "{name:?}: evaluated {value}"
            );
        }
    }

    #[test]
    fn all_zero_value_is_half_for_any_party_count() {
        for k in 1..=4 {
            let spec = GameSpec::epr(k).unwrap();
            let state = named_state(NamedState::AllZero, k).unwrap();
            assert!((oracle_identity_value(k, &state) - 0.5).abs() < 1e-12);
            let value =
                evaluate_strategy(&spec, &Strategy::trivial(&spec, &state).unwrap()).unwrap();
            assert!((value - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn random_strategies_never_beat_the_value() {
        for k in [2usize, 3] {
            let spec = GameSpec::epr(k).unwrap();
            let bound = game_value(&spec).unwrap().value;
            for seed in 0..100u64 {
                let ancilla = if seed % 2 == 0 { 1 } else { 2 };
                let dims = vec![ancilla; k];
                let strategy = Strategy::random(&spec, &dims, 1000 + seed).unwrap();
                let value = evaluate_strategy(&spec, &strategy).unwrap();
                assert!((0.0..=1.0 + 1e-12).contains(&value));
                assert!(
                    value <= bound + tol::CLOSED_FORM_TOL,
                    "k = {k}, seed {seed}: {value} beats {bound}"
                );
            }
        }
    }

    #[test]
    fn fixed_local_unitaries_absorb_into_the_state() {
        // Responding with V_i† equals conjugating the shared state by
        // ⊗_i V_i† up front and responding with identities.
        let spec = GameSpec::epr(2).unwrap();
        let mut rng = crate::rng::master(77);
        let state = optimal_state(2).unwrap();
        let lifted = Strategy::trivial(&spec, &state).unwrap();
        let layout = match &lifted.shared {
            SharedState::Pure(s) => s.layout().clone(),
            _ => unreachable!(),
        };
        let v: Vec<CMatrix> = (0..2)
            .map(|_| crate::rng::random_unitary(&mut rng, 2))
            .collect();

        let responses: Vec<Vec<CMatrix>> = (0..2)
            .map(|_| v.iter().map(|m| m.adjoint()).collect())
            .collect();
        let with_responses = Strategy {
            shared: lifted.shared.clone(),
            ancilla_dims: vec![1, 1],
            responses,
        };

        let psi = match &lifted.shared {
            SharedState::Pure(s) => s.amplitudes().clone(),
            _ => unreachable!(),
        };
        let mut conj = psi;
        for (i, m) in v.iter().enumerate() {
            let ma = m.adjoint();
            conj = apply_block_unitary(&conj, &layout, 1 + 2 * i, 3 + 2 * i, &ma).unwrap();
        }
        let conjugated = Strategy {
            shared: SharedState::Pure(StateVector::new(layout, conj).unwrap()),
            ancilla_dims: vec![1, 1],
            responses: (0..2)
                .map(|_| (0..2).map(|_| CMatrix::identity(2, 2)).collect())
                .collect(),
        };

        let a = evaluate_strategy(&spec, &with_responses).unwrap();
        let b = evaluate_strategy(&spec, &conjugated).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }

    #[test]
    fn value_is_invariant_under_party_permutation() {
        // Build the game operator on a layout with permuted party order
        // and compare norms.
        let spec = GameSpec::epr(3).unwrap();
        let base = game_value(&spec).unwrap().operator_norm;
        let permuted = RegisterLayout::qubits(["R", "P2", "P0", "P1"]).unwrap();
        let mut mat = CMatrix::zeros(16, 16);
        for x in 0..3 {
            for f in spec.projector_factors(x, &permuted).unwrap() {
                mat += &f * f.adjoint();
            }
        }
        let norm = Operator::new(permuted, mat).unwrap().op_norm().unwrap();
        assert!((norm - base).abs() < tol::NORM_TOL);
    }

    #[test]
    fn density_and_pure_paths_agree() {
        let spec = GameSpec::epr(2).unwrap();
        let strategy = Strategy::random(&spec, &[2, 1], 5).unwrap();
        let pure_value = evaluate_strategy(&spec, &strategy).unwrap();
        let density = match &strategy.shared {
            SharedState::Pure(s) => SharedState::Density(s.projector()),
            _ => unreachable!(),
        };
        let density_strategy = Strategy {
            shared: density,
            ancilla_dims: strategy.ancilla_dims.clone(),
            responses: strategy.responses.clone(),
        };
        let density_value = evaluate_strategy(&spec, &density_strategy).unwrap();
        assert!((pure_value - density_value).abs() < 1e-10);
    }

    #[test]
    fn non_unitary_response_is_rejected() {
        let spec = GameSpec::epr(2).unwrap();
        let mut strategy = Strategy::random(&spec, &[1, 1], 9).unwrap();
        strategy.responses[0][0][(0, 0)] *= Complex64::new(2.0, 0.0);
        assert!(matches!(
            evaluate_strategy(&spec, &strategy),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn seesaw_recovers_two_party_value() {
        let spec = GameSpec::epr(2).unwrap();
        for seed in 0..3u64 {
            let outcome = seesaw_game_value(
                &spec,
                &[1, 1],
                &seesaw::EngineConfig {
                    max_sweeps: 400,
                    tol: 1e-10,
                    seed,
                },
            )
            .unwrap();
            assert!(
                (outcome.best - 0.75).abs() < 1e-6,
                "seed {seed}: {}",
                outcome.best
            );
        }
    }
}
