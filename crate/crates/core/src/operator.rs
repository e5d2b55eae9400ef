//! Dense complex operators and state vectors over labeled registers.
//!
//! Everything is immutable after construction and dimension-checked
//! against its [`RegisterLayout`]. Operator norms are Schatten-∞ norms;
//! Hermitian inputs go through a deterministic eigensolver and the only
//! non-Hermitian norm offered is the product norm, computed through the
//! Hermitian reduction ‖AB‖ = √λmax(B†A†AB).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::layout::RegisterLayout;
use crate::tol;

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A square complex matrix carrying the register layout it acts on.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    layout: RegisterLayout,
    mat: CMatrix,
}

impl Operator {
    /// Wrap a matrix, checking squareness against the layout dimension
    /// and the resource guard.
    pub fn new(layout: RegisterLayout, mat: CMatrix) -> Result<Self> {
        let dim = layout.dim();
        tol::check_dim(dim)?;
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: mat.nrows().max(mat.ncols()),
            });
        }
        Ok(Self { layout, mat })
    }

    /// Identity on a layout.
    pub fn identity(layout: RegisterLayout) -> Result<Self> {
        let dim = layout.dim();
        tol::check_dim(dim)?;
        Ok(Self {
            mat: CMatrix::identity(dim, dim),
            layout,
        })
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// Same entries under a different (dimension-compatible) layout.
    pub fn relabeled(&self, layout: RegisterLayout) -> Result<Self> {
        Operator::new(layout, self.mat.clone())
    }

    pub fn trace(&self) -> Complex64 {
        self.mat.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            layout: self.layout.clone(),
            mat: self.mat.adjoint(),
        }
    }

    /// Matrix product of operators sharing one layout.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        if self.layout != rhs.layout {
            return Err(Error::Shape(format!(
                "layout mismatch in product: {} vs {}",
                self.layout, rhs.layout
            )));
        }
        Ok(Self {
            layout: self.layout.clone(),
            mat: &self.mat * &rhs.mat,
        })
    }

    /// Entrywise deviation from Hermiticity, max |M - M†|.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.mat.nrows() {
            for j in i..self.mat.ncols() {
                let d = (self.mat[(i, j)] - self.mat[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_deviation() <= tol::HERMITIAN_TOL
    }

    fn require_hermitian(&self) -> Result<()> {
        let deviation = self.hermiticity_deviation();
        if deviation > tol::HERMITIAN_TOL {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(())
    }

    /// Entrywise deviation from unitarity, max |U†U - I|.
    pub fn unitarity_deviation(&self) -> f64 {
        let prod = self.mat.adjoint() * &self.mat;
        let mut worst = 0.0f64;
        for i in 0..prod.nrows() {
            for j in 0..prod.ncols() {
                let expect = if i == j { ONE } else { ZERO };
                worst = worst.max((prod[(i, j)] - expect).norm());
            }
        }
        worst
    }

    pub fn require_unitary(&self) -> Result<()> {
        let deviation = self.unitarity_deviation();
        if deviation > tol::UNITARY_TOL {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(())
    }

    /// Validate the `state` flag: Hermitian, positive semidefinite and
    /// unit trace.
    pub fn require_state(&self) -> Result<()> {
        self.require_hermitian()
            .map_err(|e| Error::NotAState(e.to_string()))?;
        let tr = self.trace();
        if (tr.re - 1.0).abs() > tol::STATE_TOL || tr.im.abs() > tol::STATE_TOL {
            return Err(Error::NotAState(format!("trace is {tr}, expected 1")));
        }
        let eigs = self.eigenvalues()?;
        if let Some(min) = eigs.first() {
            if *min < -tol::STATE_TOL {
                return Err(Error::NotAState(format!(
                    "minimum eigenvalue {min:.3e} is negative"
                )));
            }
        }
        Ok(())
    }

    /// Kronecker product; the left factor is the most significant block
    /// of the resulting big-endian index.
    pub fn kron(&self, rhs: &Self) -> Result<Self> {
        let layout = self.layout.concat(&rhs.layout)?;
        tol::check_dim(layout.dim())?;
        Ok(Self {
            mat: self.mat.kronecker(&rhs.mat),
            layout,
        })
    }

    /// Trace out every register not listed in `keep`. The result keeps
    /// the surviving registers in their original relative order.
    pub fn partial_trace(&self, keep: &[&str]) -> Result<Self> {
        let keep_layout = self.layout.subset(keep)?;
        let kept_pos: Vec<usize> = self
            .layout
            .regs()
            .iter()
            .enumerate()
            .filter(|(_, (l, _))| keep.contains(&l.as_str()))
            .map(|(i, _)| i)
            .collect();
        let traced_pos: Vec<usize> = (0..self.layout.len())
            .filter(|i| !kept_pos.contains(i))
            .collect();

        let strides = self.layout.strides();
        let dims = self.layout.regs();
        let addr_table = |positions: &[usize]| -> Vec<usize> {
            let block: Vec<(usize, usize)> =
                positions.iter().map(|&p| (dims[p].1, strides[p])).collect();
            let total: usize = block.iter().map(|(d, _)| d).product();
            (0..total)
                .map(|mut idx| {
                    let mut addr = 0;
                    for &(d, s) in block.iter().rev() {
                        addr += (idx % d) * s;
                        idx /= d;
                    }
                    addr
                })
                .collect()
        };
        let kept_addr = addr_table(&kept_pos);
        let traced_addr = addr_table(&traced_pos);

        let dk = kept_addr.len();
        let mut out = CMatrix::zeros(dk, dk);
        for (i, &ai) in kept_addr.iter().enumerate() {
            for (j, &aj) in kept_addr.iter().enumerate() {
                let mut acc = ZERO;
                for &t in &traced_addr {
                    acc += self.mat[(ai + t, aj + t)];
                }
                out[(i, j)] = acc;
            }
        }
        Operator::new(keep_layout, out)
    }

    /// Tensor identities onto the registers of `into` that this operator
    /// does not touch, permuting basis digits so the result layout equals
    /// `into` exactly.
    pub fn embed(&self, into: &RegisterLayout) -> Result<Self> {
        for (label, dim) in self.layout.regs() {
            match into.dim_of(label) {
                None => return Err(Error::UnknownLabel(label.clone())),
                Some(d) if d != *dim => {
                    return Err(Error::Shape(format!(
                        "register `{label}` has dimension {dim} here but {d} in target layout"
                    )))
                }
                _ => {}
            }
        }
        let dim = into.dim();
        tol::check_dim(dim)?;

        // For each full basis index, precompute the flat index of the
        // owned registers (in *this* operator's register order) and of
        // the spectator registers.
        let own_strides = self.layout.strides();
        let own_positions: Vec<usize> = self
            .layout
            .labels()
            .map(|l| into.position(l).expect("checked above"))
            .collect();
        let spectators: Vec<usize> = (0..into.len())
            .filter(|i| !own_positions.contains(i))
            .collect();

        let mut own_part = vec![0usize; dim];
        let mut rest_part = vec![0usize; dim];
        for idx in 0..dim {
            let digits = into.digits(idx);
            let mut own = 0usize;
            for (k, &p) in own_positions.iter().enumerate() {
                own += digits[p] * own_strides[k];
            }
            let mut rest = 0usize;
            for &p in &spectators {
                rest = rest * into.regs()[p].1 + digits[p];
            }
            own_part[idx] = own;
            rest_part[idx] = rest;
        }

        let mut out = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                if rest_part[i] == rest_part[j] {
                    out[(i, j)] = self.mat[(own_part[i], own_part[j])];
                }
            }
        }
        Operator::new(into.clone(), out)
    }

    /// Eigenvalues of a Hermitian operator, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.require_hermitian()?;
        let dim = self.dim();
        let direct = self.mat.clone().symmetric_eigenvalues();
        let mut vals: Vec<f64> = if direct.iter().all(|v| v.is_finite()) {
            direct.iter().copied().collect()
        } else {
            // The QL iteration can blow up on exactly-structured
            // matrices; a fixed unitary similarity transform preserves
            // the spectrum and removes the structure.
            let q = precondition_unitary(dim);
            let rotated = q.adjoint() * &self.mat * &q;
            let vals = rotated.symmetric_eigenvalues();
            if !vals.iter().all(|v| v.is_finite()) {
                return Err(Error::EigenFailure { dim });
            }
            vals.iter().copied().collect()
        };
        vals.sort_by(|a, b| a.partial_cmp(b).expect("checked finite"));
        Ok(vals)
    }

    /// Full Hermitian eigendecomposition, ascending eigenvalues.
    pub fn hermitian_eigen(&self) -> Result<HermitianEigen> {
        self.require_hermitian()?;
        let dim = self.dim();
        let finite = |d: &nalgebra::SymmetricEigen<Complex64, nalgebra::Dyn>| {
            d.eigenvalues.iter().all(|v| v.is_finite())
                && d.eigenvectors
                    .iter()
                    .all(|z| z.re.is_finite() && z.im.is_finite())
        };
        let mut basis_change: Option<CMatrix> = None;
        let mut decomp = self
            .mat
            .clone()
            .try_symmetric_eigen(1e-13, 100_000)
            .filter(finite);
        if decomp.is_none() {
            let q = precondition_unitary(dim);
            let rotated = q.adjoint() * &self.mat * &q;
            decomp = rotated.try_symmetric_eigen(1e-13, 100_000).filter(finite);
            basis_change = Some(q);
        }
        let decomp = decomp.ok_or(Error::EigenFailure { dim })?;
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| {
            decomp.eigenvalues[a]
                .partial_cmp(&decomp.eigenvalues[b])
                .expect("checked finite")
        });
        let values: Vec<f64> = order.iter().map(|&i| decomp.eigenvalues[i]).collect();
        let mut vectors = CMatrix::zeros(dim, dim);
        for (col, &src) in order.iter().enumerate() {
            vectors.set_column(col, &decomp.eigenvectors.column(src));
        }
        if let Some(q) = basis_change {
            vectors = q * vectors;
        }
        Ok(HermitianEigen { values, vectors })
    }

    /// Schatten-∞ norm of a Hermitian operator: the largest absolute
    /// eigenvalue. Non-Hermitian input is a contract violation; use
    /// [`Operator::prod_norm`] for products.
    pub fn op_norm(&self) -> Result<f64> {
        let vals = self.eigenvalues()?;
        Ok(vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
    }

    /// Schatten-∞ norm of the (generally non-Hermitian) product
    /// `self * rhs`, via √λmax((AB)†(AB)).
    pub fn prod_norm(&self, rhs: &Self) -> Result<f64> {
        if self.dim() != rhs.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: rhs.dim(),
            });
        }
        let ab = &self.mat * &rhs.mat;
        let gram = Operator::new(self.layout.clone(), ab.adjoint() * ab)?;
        let top = gram.eigenvalues()?.last().copied().unwrap_or(0.0);
        Ok(top.max(0.0).sqrt())
    }
}

/// Fixed seeded unitary per dimension, used to break exact matrix
/// structure before retrying a failed eigensolve.
fn precondition_unitary(dim: usize) -> CMatrix {
    let mut rng = crate::rng::derived(0x0E16_E50F_u64, dim as u64);
    crate::rng::random_unitary(&mut rng, dim)
}

/// Sorted Hermitian eigendecomposition.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Eigenvalues, ascending.
    pub values: Vec<f64>,
    /// Matching eigenvectors as columns.
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn top_value(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    /// Deterministic unit vector in the top eigenspace: the projector
    /// onto all eigenvectors within a relative tolerance of the top
    /// eigenvalue, applied to a fixed seeded vector. Stable under
    /// eigensolver tie-breaking in degenerate spectra.
    pub fn top_eigenspace_witness(&self) -> CVector {
        let dim = self.vectors.nrows();
        let top = self.top_value();
        let cutoff = top - tol::EIGENSPACE_TOL * top.abs().max(1.0);
        let members: Vec<usize> = (0..dim).filter(|&i| self.values[i] >= cutoff).collect();
        for attempt in 0..8u64 {
            let mut rng = crate::rng::derived(tol::DEFAULT_SEED, 0xA11CE + attempt);
            let probe = crate::rng::random_state_amplitudes(&mut rng, dim);
            let mut witness = CVector::zeros(dim);
            for &i in &members {
                let col = self.vectors.column(i);
                let overlap: Complex64 = col.dotc(&probe);
                witness += CVector::from(col) * overlap;
            }
            let n = witness.norm();
            if n > 1e-9 {
                return witness / Complex64::new(n, 0.0);
            }
        }
        CVector::from(self.vectors.column(dim - 1))
    }
}

/// A dense complex vector carrying its register layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    layout: RegisterLayout,
    amps: CVector,
}

impl StateVector {
    /// Wrap amplitudes, enforcing dimension and normalization.
    pub fn new(layout: RegisterLayout, amps: CVector) -> Result<Self> {
        let dim = layout.dim();
        tol::check_dim(dim)?;
        if amps.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: amps.len(),
            });
        }
        let sq = amps.norm_squared();
        if (sq - 1.0).abs() > tol::STATE_TOL {
            return Err(Error::NotAState(format!(
                "squared norm is {sq}, expected 1"
            )));
        }
        Ok(Self { layout, amps })
    }

    /// Wrap and normalize non-zero amplitudes.
    pub fn normalized(layout: RegisterLayout, amps: CVector) -> Result<Self> {
        let n = amps.norm();
        if n < 1e-14 {
            return Err(Error::NotAState("zero vector".into()));
        }
        Self::new(layout, amps / Complex64::new(n, 0.0))
    }

    /// Computational basis state |index⟩.
    pub fn basis(layout: RegisterLayout, index: usize) -> Result<Self> {
        let dim = layout.dim();
        if index >= dim {
            return Err(Error::Shape(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amps = CVector::zeros(dim);
        amps[index] = ONE;
        Self::new(layout, amps)
    }

    pub fn layout(&self) -> &RegisterLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn relabeled(&self, layout: RegisterLayout) -> Result<Self> {
        StateVector::new(layout, self.amps.clone())
    }

    /// Tensor product, left factor most significant.
    pub fn kron(&self, rhs: &Self) -> Result<Self> {
        let layout = self.layout.concat(&rhs.layout)?;
        tol::check_dim(layout.dim())?;
        Ok(Self {
            amps: self.amps.kronecker(&rhs.amps),
            layout,
        })
    }

    /// Rank-one projector |ψ⟩⟨ψ|.
    pub fn projector(&self) -> Operator {
        let mat = &self.amps * self.amps.adjoint();
        Operator {
            layout: self.layout.clone(),
            mat,
        }
    }

    /// ⟨self|other⟩ with self on the bra side.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.amps.dotc(&other.amps)
    }
}

impl StateVector {
    /// Lift into a larger layout, padding every absent register with its
    /// |0⟩ basis state and permuting digits to match `into` exactly.
    pub fn embed_with_zeros(&self, into: &RegisterLayout) -> Result<Self> {
        for (label, dim) in self.layout.regs() {
            match into.dim_of(label) {
                None => return Err(Error::UnknownLabel(label.clone())),
                Some(d) if d != *dim => {
                    return Err(Error::Shape(format!(
                        "register `{label}` has dimension {dim} here but {d} in target layout"
                    )))
                }
                _ => {}
            }
        }
        let dim = into.dim();
        tol::check_dim(dim)?;
        let own_positions: Vec<usize> = self
            .layout
            .labels()
            .map(|l| into.position(l).expect("checked above"))
            .collect();
        let own_strides = self.layout.strides();
        let mut amps = CVector::zeros(dim);
        for idx in 0..dim {
            let digits = into.digits(idx);
            let padded_ok = (0..into.len())
                .filter(|p| !own_positions.contains(p))
                .all(|p| digits[p] == 0);
            if !padded_ok {
                continue;
            }
            let own: usize = own_positions
                .iter()
                .zip(&own_strides)
                .map(|(&p, &s)| digits[p] * s)
                .sum();
            amps[idx] = self.amps[own];
        }
        StateVector::new(into.clone(), amps)
    }

    /// Permute registers into the order given by `order` (a permutation
    /// of this state's labels).
    pub fn reordered(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.layout.len() {
            return Err(Error::Shape(format!(
                "expected {} labels in reorder, got {}",
                self.layout.len(),
                order.len()
            )));
        }
        let target = RegisterLayout::new(
            order
                .iter()
                .map(|l| {
                    self.layout
                        .dim_of(l)
                        .map(|d| ((*l).to_string(), d))
                        .ok_or_else(|| Error::UnknownLabel((*l).to_string()))
                })
                .collect::<Result<Vec<_>>>()?,
        )?;
        let src_positions: Vec<usize> = target
            .labels()
            .map(|l| self.layout.position(l).expect("validated"))
            .collect();
        let src_strides = self.layout.strides();
        let mut amps = CVector::zeros(self.dim());
        for idx in 0..self.dim() {
            let digits = target.digits(idx);
            let src: usize = digits
                .iter()
                .zip(&src_positions)
                .map(|(&d, &p)| d * src_strides[p])
                .sum();
            amps[idx] = self.amps[src];
        }
        StateVector::new(target, amps)
    }
}

/// Partial inner product ⟨bra|ψ⟩ over the bra's registers: returns the
/// unnormalized residual vector on the remaining registers of `state`
/// (in their original relative order). Its squared norm is the Born
/// probability of the projective outcome |bra⟩.
pub fn partial_contract(
    state: &StateVector,
    bra: &StateVector,
) -> Result<(RegisterLayout, CVector)> {
    for (label, dim) in bra.layout().regs() {
        match state.layout().dim_of(label) {
            None => return Err(Error::UnknownLabel(label.clone())),
            Some(d) if d != *dim => {
                return Err(Error::Shape(format!(
                    "register `{label}` has dimension {d} in the state but {dim} in the bra"
                )))
            }
            _ => {}
        }
    }
    let bra_positions: Vec<usize> = bra
        .layout()
        .labels()
        .map(|l| state.layout().position(l).expect("checked above"))
        .collect();
    let rest_labels: Vec<&str> = state
        .layout()
        .labels()
        .filter(|l| !bra.layout().contains(l))
        .collect();
    let rest_layout = state.layout().subset(&rest_labels)?;

    let state_strides = state.layout().strides();
    let bra_strides = bra.layout().strides();
    let rest_positions: Vec<usize> = rest_labels
        .iter()
        .map(|l| state.layout().position(l).expect("subset"))
        .collect();

    let mut out = CVector::zeros(rest_layout.dim());
    for rest_idx in 0..rest_layout.dim() {
        let rest_digits = rest_layout.digits(rest_idx);
        let base: usize = rest_digits
            .iter()
            .zip(&rest_positions)
            .map(|(&d, &p)| d * state_strides[p])
            .sum();
        let mut acc = ZERO;
        for bra_idx in 0..bra.dim() {
            let amp = bra.amplitudes()[bra_idx];
            if amp == ZERO {
                continue;
            }
            let mut rem = bra_idx;
            let mut addr = base;
            for (k, &p) in bra_positions.iter().enumerate() {
                let digit = rem / bra_strides[k];
                rem %= bra_strides[k];
                addr += digit * state_strides[p];
            }
            acc += amp.conj() * state.amplitudes()[addr];
        }
        out[rest_idx] = acc;
    }
    Ok((rest_layout, out))
}

/// Orthonormal range factors of the projector |ψ⟩⟨ψ| ⊗ I_rest embedded
/// into `full`: one vector per basis state of the spectator registers.
/// Summing their outer products reproduces the embedded projector.
pub fn embedded_state_factors(state: &StateVector, full: &RegisterLayout) -> Result<Vec<CVector>> {
    for (label, dim) in state.layout().regs() {
        match full.dim_of(label) {
            None => return Err(Error::UnknownLabel(label.clone())),
            Some(d) if d != *dim => {
                return Err(Error::Shape(format!(
                    "register `{label}` has dimension {dim} here but {d} in target layout"
                )))
            }
            _ => {}
        }
    }
    let dim = full.dim();
    tol::check_dim(dim)?;
    let own_positions: Vec<usize> = state
        .layout()
        .labels()
        .map(|l| full.position(l).expect("checked above"))
        .collect();
    let spectators: Vec<usize> = (0..full.len())
        .filter(|p| !own_positions.contains(p))
        .collect();
    let full_strides = full.strides();
    let own_dim = state.dim();
    let own_strides = state.layout().strides();
    let spectator_dims: Vec<usize> = spectators.iter().map(|&p| full.regs()[p].1).collect();
    let spectator_total: usize = spectator_dims.iter().product();

    let mut factors = Vec::with_capacity(spectator_total);
    for mut spec_idx in 0..spectator_total {
        let mut base = 0usize;
        for (k, &p) in spectators.iter().enumerate().rev() {
            base += (spec_idx % spectator_dims[k]) * full_strides[p];
            spec_idx /= spectator_dims[k];
        }
        let mut v = CVector::zeros(dim);
        for own_flat in 0..own_dim {
            let amp = state.amplitudes()[own_flat];
            if amp == ZERO {
                continue;
            }
            let mut rest = own_flat;
            let mut addr = base;
            for (k, &p) in own_positions.iter().enumerate() {
                let digit = rest / own_strides[k];
                rest %= own_strides[k];
                addr += digit * full_strides[p];
            }
            v[addr] = amp;
        }
        factors.push(v);
    }
    Ok(factors)
}

/// Apply a unitary acting on the contiguous register range
/// `[first_reg, last_reg)` of `layout` to a full state vector.
pub fn apply_block_unitary(
    v: &CVector,
    layout: &RegisterLayout,
    first_reg: usize,
    last_reg: usize,
    u: &CMatrix,
) -> Result<CVector> {
    let dims: Vec<usize> = layout.regs().iter().map(|(_, d)| *d).collect();
    let pre: usize = dims[..first_reg].iter().product();
    let block: usize = dims[first_reg..last_reg].iter().product();
    let post: usize = dims[last_reg..].iter().product();
    if u.nrows() != block || u.ncols() != block {
        return Err(Error::DimensionMismatch {
            expected: block,
            got: u.nrows(),
        });
    }
    if v.len() != pre * block * post {
        return Err(Error::DimensionMismatch {
            expected: pre * block * post,
            got: v.len(),
        });
    }
    let mut out = CVector::zeros(v.len());
    for p in 0..pre {
        for q in 0..post {
            for i in 0..block {
                let mut acc = ZERO;
                for j in 0..block {
                    let z = u[(i, j)];
                    if z != ZERO {
                        acc += z * v[(p * block + j) * post + q];
                    }
                }
                out[(p * block + i) * post + q] = acc;
            }
        }
    }
    Ok(out)
}

/// The maximally entangled two-register state (|00⟩ + |11⟩)/√2 on
/// a pair of equal-dimension registers.
pub fn max_entangled(label_a: &str, label_b: &str, dim: usize) -> Result<StateVector> {
    let layout = RegisterLayout::new([(label_a, dim), (label_b, dim)])?;
    let mut amps = CVector::zeros(dim * dim);
    let w = 1.0 / (dim as f64).sqrt();
    for i in 0..dim {
        amps[i * dim + i] = Complex64::new(w, 0.0);
    }
    StateVector::new(layout, amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn op(layout: RegisterLayout, entries: &[f64]) -> Operator {
        let dim = layout.dim();
        let mat = CMatrix::from_fn(dim, dim, |i, j| Complex64::new(entries[i * dim + j], 0.0));
        Operator::new(layout, mat).unwrap()
    }

    #[test]
    fn kron_of_identities_is_identity() {
        let a = Operator::identity(RegisterLayout::single("A", 2).unwrap()).unwrap();
        let b = Operator::identity(RegisterLayout::single("B", 2).unwrap()).unwrap();
        let ab = a.kron(&b).unwrap();
        assert_eq!(ab.matrix(), &CMatrix::identity(4, 4));
    }

    #[test]
    fn kron_basis_bookkeeping() {
        // |0⟩⟨0| ⊗ |1⟩⟨1| has its single 1 at binary index 01 = row/col 1.
        let p0 = op(
            RegisterLayout::single("A", 2).unwrap(),
            &[1.0, 0.0, 0.0, 0.0],
        );
        let p1 = op(
            RegisterLayout::single("B", 2).unwrap(),
            &[0.0, 0.0, 0.0, 1.0],
        );
        let prod = p0.kron(&p1).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == 1 && j == 1 { 1.0 } else { 0.0 };
                assert_eq!(prod.matrix()[(i, j)], Complex64::new(expect, 0.0));
            }
        }
    }

    #[test]
    fn kron_multiplies_dimensions_and_rejects_collisions() {
        let a = Operator::identity(RegisterLayout::single("A", 3).unwrap()).unwrap();
        let b = Operator::identity(RegisterLayout::single("B", 5).unwrap()).unwrap();
        assert_eq!(a.kron(&b).unwrap().dim(), 15);
        let a2 = Operator::identity(RegisterLayout::single("A", 5).unwrap()).unwrap();
        assert!(matches!(a.kron(&a2), Err(Error::DuplicateLabel(_))));
    }

    #[test]
    fn epr_marginal_is_maximally_mixed() {
        let epr = max_entangled("A", "B", 2).unwrap();
        let reduced = epr.projector().partial_trace(&["A"]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j { 0.5 } else { 0.0 };
                assert!((reduced.matrix()[(i, j)] - Complex64::new(expect, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn partial_trace_factorizes_products() {
        let mut rng = crate::rng::master(5);
        let rho = crate::rng::random_state_amplitudes(&mut rng, 3);
        let sigma = crate::rng::random_state_amplitudes(&mut rng, 4);
        let rho_op = StateVector::new(RegisterLayout::single("A", 3).unwrap(), rho).unwrap();
        let sigma_op = StateVector::new(RegisterLayout::single("B", 4).unwrap(), sigma).unwrap();
        // Scale σ to a non-unit trace so the Tr(σ) factor is visible.
        let sigma_scaled = Operator::new(
            RegisterLayout::single("B", 4).unwrap(),
            sigma_op.projector().matrix() * Complex64::new(2.5, 0.0),
        )
        .unwrap();
        let joint = rho_op.projector().kron(&sigma_scaled).unwrap();
        let reduced = joint.partial_trace(&["A"]).unwrap();
        let expect = rho_op.projector().matrix() * Complex64::new(2.5, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                assert!((reduced.matrix()[(i, j)] - expect[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn full_trace_of_state_is_one() {
        let epr = max_entangled("A", "B", 2).unwrap();
        let scalar = epr.projector().partial_trace(&[]).unwrap();
        assert_eq!(scalar.dim(), 1);
        assert!((scalar.matrix()[(0, 0)] - ONE).norm() < 1e-14);
    }

    #[test]
    fn partial_trace_unknown_label_errors() {
        let epr = max_entangled("A", "B", 2).unwrap();
        assert!(matches!(
            epr.projector().partial_trace(&["C"]),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn embed_pads_with_identities_in_layout_order() {
        let x = op(
            RegisterLayout::single("P0", 2).unwrap(),
            &[0.0, 1.0, 1.0, 0.0],
        );
        let full = RegisterLayout::qubits(["R", "P0", "P1"]).unwrap();
        let embedded = x.embed(&full).unwrap();

        let idreg = |l: &str| Operator::identity(RegisterLayout::single(l, 2).unwrap()).unwrap();
        let expect = idreg("R")
            .kron(&op(
                RegisterLayout::single("P0", 2).unwrap(),
                &[0.0, 1.0, 1.0, 0.0],
            ))
            .unwrap()
            .kron(&idreg("P1"))
            .unwrap();
        assert_eq!(embedded.matrix(), expect.matrix());
        assert_eq!(embedded.layout(), &full);
    }

    #[test]
    fn embed_into_matching_layout_is_identity_operation() {
        let layout = RegisterLayout::qubits(["A", "B"]).unwrap();
        let epr = max_entangled("A", "B", 2).unwrap().projector();
        let embedded = epr.embed(&layout).unwrap();
        assert_eq!(embedded.matrix(), epr.matrix());
    }

    #[test]
    fn embed_then_trace_recovers_scaled_projector() {
        // Embedding |Φ⁺⟩⟨Φ⁺| on [R,P1] into [R,P0,P1] and tracing P0 back
        // out multiplies by Tr I_{P0} = 2. Expected value computed below
        // by raw index arithmetic, independent of embed/partial_trace.
        let epr = max_entangled("R", "P1", 2).unwrap().projector();
        let full = RegisterLayout::qubits(["R", "P0", "P1"]).unwrap();
        let embedded = epr.embed(&full).unwrap();

        // Raw 8x8 oracle: M[(r,p0,p1),(r',p0',p1')] = δ_{p0 p0'} E[(r,p1),(r',p1')].
        let mut oracle = CMatrix::zeros(8, 8);
        for r in 0..2 {
            for p0 in 0..2 {
                for p1 in 0..2 {
                    for rp in 0..2 {
                        for p0p in 0..2 {
                            for p1p in 0..2 {
                                if p0 == p0p {
                                    oracle[(4 * r + 2 * p0 + p1, 4 * rp + 2 * p0p + p1p)] =
                                        epr.matrix()[(2 * r + p1, 2 * rp + p1p)];
                                }
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(embedded.matrix(), &oracle);

        let traced = embedded.partial_trace(&["R", "P1"]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = epr.matrix()[(i, j)] * Complex64::new(2.0, 0.0);
                assert!((traced.matrix()[(i, j)] - expect).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn op_norm_of_identity_and_projectors() {
        let id = Operator::identity(RegisterLayout::new([("A", 7)]).unwrap()).unwrap();
        assert!((id.op_norm().unwrap() - 1.0).abs() < 1e-12);
        let mut rng = crate::rng::master(9);
        let psi = StateVector::new(
            RegisterLayout::single("A", 5).unwrap(),
            crate::rng::random_state_amplitudes(&mut rng, 5),
        )
        .unwrap();
        assert!((psi.projector().op_norm().unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn op_norm_rejects_non_hermitian() {
        let layout = RegisterLayout::single("A", 2).unwrap();
        let mat = CMatrix::from_fn(2, 2, |i, j| {
            if i == 0 && j == 1 {
                Complex64::new(1.0, 0.0)
            } else {
                ZERO
            }
        });
        let m = Operator::new(layout, mat).unwrap();
        assert!(matches!(m.op_norm(), Err(Error::NotHermitian { .. })));
    }

    /// Overlapping entangled-pair projectors: with P = |Φ⁺⟩⟨Φ⁺|_{RA}⊗I_B
    /// and Q = |Φ⁺⟩⟨Φ⁺|_{RB}⊗I_A the product norm is ‖PQ‖ = 1/2, hence
    /// the symmetrized PQP has top eigenvalue 1/4.
    #[test]
    fn overlapping_pair_projector_norms() {
        let full = RegisterLayout::qubits(["R", "A", "B"]).unwrap();
        let p = max_entangled("R", "A", 2)
            .unwrap()
            .projector()
            .embed(&full)
            .unwrap();
        let q = max_entangled("R", "B", 2)
            .unwrap()
            .projector()
            .embed(&full)
            .unwrap();
        let pqp = p.compose(&q).unwrap().compose(&p).unwrap();
        assert!((pqp.op_norm().unwrap() - 0.25).abs() < 1e-12);
        assert!((p.prod_norm(&q).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn prod_norm_special_cases() {
        let full = RegisterLayout::qubits(["R", "A", "B"]).unwrap();
        let p = max_entangled("R", "A", 2)
            .unwrap()
            .projector()
            .embed(&full)
            .unwrap();
        assert!((p.prod_norm(&p).unwrap() - 1.0).abs() < 1e-12);

        // Orthogonal rank-1 projectors on one qubit.
        let zero = StateVector::basis(RegisterLayout::single("A", 2).unwrap(), 0).unwrap();
        let one = StateVector::basis(RegisterLayout::single("A", 2).unwrap(), 1).unwrap();
        assert!(zero.projector().prod_norm(&one.projector()).unwrap() < 1e-12);

        let small = Operator::identity(RegisterLayout::single("A", 2).unwrap()).unwrap();
        assert!(p.prod_norm(&small).is_err());
    }

    #[test]
    fn top_eigenpair_residual_is_tiny() {
        let mut rng = crate::rng::master(21);
        let dim = 24;
        let g = CMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let herm = Operator::new(
            RegisterLayout::single("A", dim).unwrap(),
            (&g + g.adjoint()) * Complex64::new(0.5, 0.0),
        )
        .unwrap();
        let eig = herm.hermitian_eigen().unwrap();
        let v = CVector::from(eig.vectors.column(dim - 1));
        let residual = (herm.matrix() * &v - &v * Complex64::new(eig.top_value(), 0.0)).norm();
        assert!(residual < tol::EIG_RESIDUAL_TOL, "residual {residual}");
    }

    #[test]
    fn op_norm_invariant_under_unitary_conjugation() {
        let mut rng = crate::rng::master(33);
        let dim = 12;
        let g = CMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let layout = RegisterLayout::single("A", dim).unwrap();
        let herm = Operator::new(
            layout.clone(),
            (&g + g.adjoint()) * Complex64::new(0.5, 0.0),
        )
        .unwrap();
        let u = crate::rng::random_unitary(&mut rng, dim);
        let conj = Operator::new(layout, u.adjoint() * herm.matrix() * &u).unwrap();
        assert!((herm.op_norm().unwrap() - conj.op_norm().unwrap()).abs() < tol::NORM_TOL);
    }

    #[test]
    fn state_validation() {
        let epr = max_entangled("A", "B", 2).unwrap();
        epr.projector().require_state().unwrap();

        let layout = RegisterLayout::single("A", 2).unwrap();
        let not_state = Operator::new(
            layout,
            CMatrix::from_diagonal(&CVector::from_vec(vec![
                Complex64::new(1.5, 0.0),
                Complex64::new(-0.5, 0.0),
            ])),
        )
        .unwrap();
        assert!(not_state.require_state().is_err());
    }

    #[test]
    fn resource_guard_is_enforced() {
        let regs: Vec<(String, usize)> = (0..15).map(|i| (format!("Q{i}"), 2)).collect();
        let layout = RegisterLayout::new(regs).unwrap();
        assert!(matches!(
            Operator::identity(layout),
            Err(Error::ResourceGuard { .. })
        ));
    }
}
