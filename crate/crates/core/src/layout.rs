//! Ordered, labeled register layouts.
//!
//! Basis convention: big-endian row-major. The leftmost register is the
//! most significant digit of a computational-basis index, so for layout
//! `[A(2), B(2)]` the basis state |a b⟩ has flat index `2a + b`. Every
//! module in the crate shares this single convention.

use crate::error::{Error, Result};

/// An ordered list of `(label, dimension)` registers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterLayout {
    regs: Vec<(String, usize)>,
}

impl RegisterLayout {
    /// Build a layout, rejecting duplicate labels and zero dimensions.
    pub fn new<I, S>(regs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let regs: Vec<(String, usize)> = regs.into_iter().map(|(l, d)| (l.into(), d)).collect();
        for (i, (label, dim)) in regs.iter().enumerate() {
            if *dim == 0 {
                return Err(Error::Shape(format!("register `{label}` has dimension 0")));
            }
            if regs[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::DuplicateLabel(label.clone()));
            }
        }
        Ok(Self { regs })
    }

    /// All-qubit layout from a list of labels.
    pub fn qubits<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::new(labels.into_iter().map(|l| (l, 2)))
    }

    /// Single register layout.
    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new([(label.into(), dim)])
    }

    /// Total Hilbert-space dimension (product of register dimensions).
    pub fn dim(&self) -> usize {
        self.regs.iter().map(|(_, d)| d).product()
    }

    pub fn len(&self) -> usize {
        self.regs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regs.is_empty()
    }

    pub fn regs(&self) -> &[(String, usize)] {
        &self.regs
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.regs.iter().map(|(l, _)| l.as_str())
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.regs.iter().position(|(l, _)| l == label)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.position(label).is_some()
    }

    pub fn dim_of(&self, label: &str) -> Option<usize> {
        self.position(label).map(|i| self.regs[i].1)
    }

    /// Concatenate two layouts; labels must stay disjoint.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        Self::new(self.regs.iter().chain(other.regs.iter()).cloned())
    }

    /// Sub-layout of `keep` labels in this layout's relative order.
    /// Errors if any requested label is unknown.
    pub fn subset(&self, keep: &[&str]) -> Result<Self> {
        for label in keep {
            if !self.contains(label) {
                return Err(Error::UnknownLabel((*label).to_string()));
            }
        }
        Self::new(
            self.regs
                .iter()
                .filter(|(l, _)| keep.contains(&l.as_str()))
                .cloned(),
        )
    }

    /// Big-endian strides: `flat = Σ idx[r] * stride[r]`.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1usize; self.regs.len()];
        for i in (0..self.regs.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.regs[i + 1].1;
        }
        strides
    }

    /// Decompose a flat basis index into per-register digits.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let strides = self.strides();
        let mut out = Vec::with_capacity(self.regs.len());
        for s in strides {
            out.push(index / s);
            index %= s;
        }
        out
    }

    /// Flat index from per-register digits.
    pub fn flat(&self, digits: &[usize]) -> usize {
        self.strides().iter().zip(digits).map(|(s, d)| s * d).sum()
    }
}

impl std::fmt::Display for RegisterLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[")?;
        for (i, (l, d)) in self.regs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{l}({d})")?;
        }
        write!(f, "]")
    }
}
