use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum KernelKind {
    Rbf,
    Polynomial { degree: u32 },
}

impl KernelKind {
    pub fn validate(self) -> Result<()> {
        match self {
            KernelKind::Polynomial { degree } if !(1..=3).contains(&degree) => Err(Error::InvalidArgument(format!(
                "polynomial degree must be 1, 2 or 3, got {degree}"
            ))),
            _ => Ok(()),
        }
    }
}

/// A kernel with its coefficients: `exp(-γ‖u−v‖²)` or `(γ⟨u,v⟩ + coef0)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub gamma: f64,
    #[serde(default)]
    pub coef0: f64,
}

impl Kernel {
    pub fn new(kind: KernelKind, gamma: f64) -> Result<Self> {
        kind.validate()?;
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "kernel gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self {
            kind,
            gamma,
            coef0: 0.0,
        })
    }

    #[inline]
    pub fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), v.len());
        match self.kind {
            KernelKind::Rbf => {
                let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
                (-self.gamma * d2).exp()
            }
            KernelKind::Polynomial { degree } => {
                let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
                (self.gamma * dot + self.coef0).powi(degree as i32)
            }
        }
    }
}

/// Evaluates a kernel on two equal-length vectors.
pub fn kernel_eval(kind: KernelKind, gamma: f64, u: &[f64], v: &[f64]) -> Result<f64> {
    kind.validate()?;
    if u.len() != v.len() {
        return Err(Error::Shape(format!(
            "kernel inputs of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(Kernel {
        kind,
        gamma,
        coef0: 0.0,
    }
    .eval(u, v))
}
