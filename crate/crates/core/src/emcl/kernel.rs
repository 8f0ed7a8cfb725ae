use serde::{Deserialize, Serialize};

/// Similarity kernel between a coding-bit column of `X` and a basis column.
///
/// Every kernel produces a logit; the E-step normalizes logits with a
/// softmax over subspaces.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Kernel {
    /// `exp(<x, λ> / σ)`; the exponential is folded into the softmax.
    #[default]
    GaussianAttention,
    /// `<x, λ> + c`
    Linear {
        #[serde(default)]
        c: f64,
    },
    /// `(a <x, λ> + c)^d`
    Polynomial {
        #[serde(default = "one")]
        a: f64,
        #[serde(default)]
        c: f64,
        #[serde(default = "two")]
        d: i32,
    },
}

fn one() -> f64 {
    1.0
}

fn two() -> i32 {
    2
}

impl Kernel {
    pub fn linear() -> Self {
        Kernel::Linear { c: 0.0 }
    }

    pub fn polynomial() -> Self {
        Kernel::Polynomial {
            a: 1.0,
            c: 0.0,
            d: 2,
        }
    }

    /// Maps an inner product to the kernel logit.
    pub fn logit(&self, dot: f64, sigma: f64) -> f64 {
        match *self {
            Kernel::GaussianAttention => dot / sigma,
            Kernel::Linear { c } => dot + c,
            Kernel::Polynomial { a, c, d } => (a * dot + c).powi(d),
        }
    }
}
