//! Alternating optimization of game strategies.
//!
//! A problem consists of a layout, one rank-factored projector per
//! question (uniform question weights) and a list of party blocks; a
//! strategy is a pure shared state plus one unitary per question per
//! party. Sweeps alternate
//!
//! 1. response updates: for each question and party, a linearize-and-
//!    repolarize step `U ← polar(K†)` on the environment-contracted
//!    gradient `K`, which never decreases the objective because the
//!    underlying sesquilinear form is positive semidefinite;
//! 2. a state update: power iteration on the back-conjugated question
//!    average, whose Rayleigh quotient is monotone for PSD operators.
//!
//! Each full sweep is therefore monotone non-decreasing up to rounding,
//! and the result is always a certified lower bound on the game value
//! (it is the exact value of an explicit strategy).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::layout::RegisterLayout;
use crate::operator::{apply_block_unitary, CMatrix, CVector, ZERO};
use crate::rng;

/// Contiguous register range `[first_reg, last_reg)` controlled by one
/// party.
#[derive(Debug, Clone)]
pub struct PartyBlock {
    pub first_reg: usize,
    pub last_reg: usize,
}

impl PartyBlock {
    fn dim(&self, layout: &RegisterLayout) -> usize {
        layout.regs()[self.first_reg..self.last_reg]
            .iter()
            .map(|(_, d)| *d)
            .product()
    }
}

/// One projector given by orthonormal range factors Π = Σ_r |f_r⟩⟨f_r|.
#[derive(Debug, Clone)]
pub struct ProjectorFactors {
    pub factors: Vec<CVector>,
}

/// A game in the shape the optimizer understands.
#[derive(Debug, Clone)]
pub struct Problem {
    pub layout: RegisterLayout,
    pub questions: Vec<ProjectorFactors>,
    pub parties: Vec<PartyBlock>,
}

/// Iteration controls for one optimization run.
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub max_sweeps: usize,
    pub tol: f64,
    pub seed: u64,
}

/// Outcome of one run.
#[derive(Debug, Clone)]
pub struct Outcome {
    /// Best objective value reached (value of the final strategy).
    pub best: f64,
    /// Number of full sweeps performed.
    pub sweeps: usize,
    /// Whether the improvement fell below `tol` before `max_sweeps`.
    pub converged: bool,
    /// Objective after every sweep.
    pub history: Vec<f64>,
    pub state: CVector,
    /// `responses[question][party]`.
    pub responses: Vec<Vec<CMatrix>>,
}

const POWER_ITER_CAP: usize = 2000;

pub fn optimize(problem: &Problem, cfg: &EngineConfig) -> Result<Outcome> {
    if cfg.max_sweeps == 0 {
        return Err(Error::InvalidArgument(
            "max_sweeps must be at least 1".into(),
        ));
    }
    if cfg.tol.is_nan() || cfg.tol <= 0.0 {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let dim = problem.layout.dim();
    let q_count = problem.questions.len();
    if q_count == 0 {
        return Err(Error::InvalidArgument("no questions".into()));
    }
    for block in &problem.parties {
        if block.first_reg >= block.last_reg || block.last_reg > problem.layout.len() {
            return Err(Error::Shape("party block out of range".into()));
        }
    }

    let mut rng = rng::master(cfg.seed);
    let mut psi = rng::random_state_amplitudes(&mut rng, dim);
    let mut responses: Vec<Vec<CMatrix>> = (0..q_count)
        .map(|_| {
            problem
                .parties
                .iter()
                .map(|b| rng::random_unitary(&mut rng, b.dim(&problem.layout)))
                .collect()
        })
        .collect();

    let mut history = Vec::with_capacity(cfg.max_sweeps);
    let mut prev = objective(problem, &psi, &responses)?;
    let mut converged = false;
    let mut sweeps = 0;

    for _ in 0..cfg.max_sweeps {
        sweeps += 1;
        // (a) state to the dominant eigenvector of the back-conjugated
        // question average (warm-started power iteration).
        psi = state_update(problem, &psi, &responses)?;
        // (b) response polish, one polar step per question and party.
        for x in 0..q_count {
            for p in 0..problem.parties.len() {
                let updated = response_update(problem, &psi, &responses, x, p)?;
                responses[x][p] = updated;
            }
        }
        let value = objective(problem, &psi, &responses)?;
        let improvement = value - prev;
        prev = value;
        history.push(value);
        if history.len() >= 2 && improvement < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok(Outcome {
        best: prev,
        sweeps,
        converged,
        history,
        state: psi,
        responses,
    })
}

/// Mean over questions of ⟨ψ|W_x† Π_x W_x|ψ⟩.
pub fn objective(problem: &Problem, psi: &CVector, responses: &[Vec<CMatrix>]) -> Result<f64> {
    let mut total = 0.0;
    for (x, question) in problem.questions.iter().enumerate() {
        let w = apply_parties(problem, psi, &responses[x], false)?;
        let mut term = 0.0;
        for f in &question.factors {
            term += f.dotc(&w).norm_sqr();
        }
        total += term;
    }
    Ok(total / problem.questions.len() as f64)
}

fn apply_parties(problem: &Problem, v: &CVector, us: &[CMatrix], adjoint: bool) -> Result<CVector> {
    let mut out = v.clone();
    for (block, u) in problem.parties.iter().zip(us) {
        let mat = if adjoint { u.adjoint() } else { u.clone() };
        out = apply_block_unitary(&out, &problem.layout, block.first_reg, block.last_reg, &mat)?;
    }
    Ok(out)
}

fn state_update(problem: &Problem, psi: &CVector, responses: &[Vec<CMatrix>]) -> Result<CVector> {
    // Back-conjugated factors: G = (1/Q) Σ_{x,r} |W_x† f_{x,r}⟩⟨W_x† f_{x,r}|.
    let mut factors: Vec<CVector> = Vec::new();
    for (x, question) in problem.questions.iter().enumerate() {
        for f in &question.factors {
            factors.push(apply_parties(problem, f, &responses[x], true)?);
        }
    }
    let weight = 1.0 / problem.questions.len() as f64;
    let apply_g = |v: &CVector| -> CVector {
        let mut out = CVector::zeros(v.len());
        for f in &factors {
            let overlap = f.dotc(v) * Complex64::new(weight, 0.0);
            out += f * overlap;
        }
        out
    };

    let mut z = psi.clone();
    let mut lambda = z.dotc(&apply_g(&z)).re;
    for _ in 0..POWER_ITER_CAP {
        let gz = apply_g(&z);
        let norm = gz.norm();
        if norm < 1e-300 {
            // State orthogonal to the operator range; restart from a factor.
            z = factors
                .first()
                .map(|f| f.normalize())
                .unwrap_or_else(|| z.clone());
            lambda = z.dotc(&apply_g(&z)).re;
            continue;
        }
        let next = gz / Complex64::new(norm, 0.0);
        let next_lambda = next.dotc(&apply_g(&next)).re;
        let done = (next_lambda - lambda).abs() < 1e-14 * next_lambda.abs().max(1.0);
        z = next;
        lambda = next_lambda;
        if done {
            break;
        }
    }
    Ok(z)
}

fn response_update(
    problem: &Problem,
    psi: &CVector,
    responses: &[Vec<CMatrix>],
    x: usize,
    party: usize,
) -> Result<CMatrix> {
    let layout = &problem.layout;
    let block = &problem.parties[party];
    let block_dim = block.dim(layout);
    let current = &responses[x][party];

    // w = C(Ũψ) with C the projector conjugated by the other parties'
    // unitaries for question x.
    let mut t = apply_block_unitary(psi, layout, block.first_reg, block.last_reg, current)?;
    for (p, (other, u)) in problem.parties.iter().zip(&responses[x]).enumerate() {
        if p != party {
            t = apply_block_unitary(&t, layout, other.first_reg, other.last_reg, u)?;
        }
    }
    let mut projected = CVector::zeros(psi.len());
    for f in &problem.questions[x].factors {
        let overlap = f.dotc(&t);
        projected += f * overlap;
    }
    let mut w = projected;
    for (p, (other, u)) in problem.parties.iter().zip(&responses[x]).enumerate() {
        if p != party {
            let ua = u.adjoint();
            w = apply_block_unitary(&w, layout, other.first_reg, other.last_reg, &ua)?;
        }
    }

    // K_{l i} = Σ_{pre,post} conj(w_{(pre,i,post)}) ψ_{(pre,l,post)};
    // the polar factor of K† maximizes the linearized objective.
    let dims: Vec<usize> = layout.regs().iter().map(|(_, d)| *d).collect();
    let pre: usize = dims[..block.first_reg].iter().product();
    let post: usize = dims[block.last_reg..].iter().product();
    let mut k = CMatrix::zeros(block_dim, block_dim);
    for p in 0..pre {
        for q in 0..post {
            for i in 0..block_dim {
                let wi = w[(p * block_dim + i) * post + q].conj();
                if wi == ZERO {
                    continue;
                }
                for l in 0..block_dim {
                    k[(l, i)] += wi * psi[(p * block_dim + l) * post + q];
                }
            }
        }
    }
    polar_unitary(&k)
}

/// The unitary maximizing Re Tr[U K]: with K = XΣY†, U = Y X†.
fn polar_unitary(k: &CMatrix) -> Result<CMatrix> {
    let dim = k.nrows();
    if k.norm() < 1e-300 {
        // Zero gradient: keep any unitary; identity is the stable choice.
        return Ok(CMatrix::identity(dim, dim));
    }
    let svd = k
        .clone()
        .try_svd(true, true, 1e-13, 100_000)
        .ok_or(Error::EigenFailure { dim })?;
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    Ok(vt.adjoint() * u.adjoint())
}

/// Identity responses for a problem (used to seed or to evaluate bare
/// states through the same code path).
pub fn identity_responses(problem: &Problem) -> Vec<Vec<CMatrix>> {
    problem
        .questions
        .iter()
        .map(|_| {
            problem
                .parties
                .iter()
                .map(|b| {
                    let d = b.dim(&problem.layout);
                    DMatrix::identity(d, d)
                })
                .collect()
        })
        .collect()
}
