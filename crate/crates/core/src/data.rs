//! Data functions (sources, boundary data, output weights) with the polynomial
//! metadata needed to decide whether projections and interpolants are exact.

use std::fmt;
use std::sync::Arc;

type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
type GradFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;
type SegmentDegreeFn = Arc<dyn Fn([f64; 2], [f64; 2]) -> Option<usize> + Send + Sync>;

#[derive(Clone)]
enum Degree {
    /// Polynomial of at most this total degree everywhere.
    Global(usize),
    /// Degree of the restriction to a segment, `None` when not polynomial there.
    PerSegment(SegmentDegreeFn),
    Unknown,
}

/// A scalar function of position with optional gradient and degree information.
#[derive(Clone)]
pub struct DataFn {
    value: ScalarFn,
    grad: Option<GradFn>,
    degree: Degree,
    zero: bool,
}

impl fmt::Debug for DataFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = match &self.degree {
            Degree::Global(k) => format!("polynomial degree {k}"),
            Degree::PerSegment(_) => "piecewise".to_string(),
            Degree::Unknown => "general".to_string(),
        };
        f.debug_struct("DataFn")
            .field("zero", &self.zero)
            .field("degree", &d)
            .field("has_grad", &self.grad.is_some())
            .finish()
    }
}

impl Default for DataFn {
    fn default() -> Self {
        Self::zero()
    }
}

impl DataFn {
    /// General (possibly non-polynomial) function.
    pub fn new(f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            value: Arc::new(f),
            grad: None,
            degree: Degree::Unknown,
            zero: false,
        }
    }

    /// Polynomial of total degree at most `degree`.
    pub fn polynomial(degree: usize, f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            degree: Degree::Global(degree),
            ..Self::new(f)
        }
    }

    pub fn zero() -> Self {
        Self {
            value: Arc::new(|_| 0.0),
            grad: Some(Arc::new(|_| [0.0, 0.0])),
            degree: Degree::Global(0),
            zero: true,
        }
    }

    pub fn constant(c: f64) -> Self {
        if c == 0.0 {
            return Self::zero();
        }
        Self {
            value: Arc::new(move |_| c),
            grad: Some(Arc::new(|_| [0.0, 0.0])),
            degree: Degree::Global(0),
            zero: false,
        }
    }

    pub fn with_grad(mut self, g: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(g));
        self
    }

    /// Declares the degree of the restriction to each segment.
    pub fn with_segment_degree(
        mut self,
        d: impl Fn([f64; 2], [f64; 2]) -> Option<usize> + Send + Sync + 'static,
    ) -> Self {
        self.degree = Degree::PerSegment(Arc::new(d));
        self
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        (self.value)(x)
    }

    pub fn grad(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        self.grad.as_ref().map(|g| g(x))
    }

    pub fn has_grad(&self) -> bool {
        self.grad.is_some()
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    /// Total degree when known to be a polynomial on the whole plane.
    pub fn global_degree(&self) -> Option<usize> {
        match &self.degree {
            Degree::Global(k) => Some(*k),
            _ => None,
        }
    }

    /// Degree of the restriction to the segment `a → b`, `None` if not polynomial.
    pub fn degree_on_segment(&self, a: [f64; 2], b: [f64; 2]) -> Option<usize> {
        match &self.degree {
            Degree::Global(k) => Some(*k),
            Degree::PerSegment(f) => f(a, b),
            Degree::Unknown => None,
        }
    }

    /// `c · self`, keeping all metadata.
    pub fn scaled(&self, c: f64) -> Self {
        if self.zero || c == 0.0 {
            return Self::zero();
        }
        let v = self.value.clone();
        let grad = self.grad.clone().map(|g| -> GradFn {
            Arc::new(move |x| {
                let d = g(x);
                [c * d[0], c * d[1]]
            })
        });
        Self {
            value: Arc::new(move |x| c * v(x)),
            grad,
            degree: self.degree.clone(),
            zero: false,
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// Plain closure view, convenient for projection routines.
    pub fn as_fn(&self) -> impl Fn([f64; 2]) -> f64 + '_ {
        move |x| (self.value)(x)
    }
}

/// Source, Dirichlet and Neumann data of a Poisson problem `q = −ν∇u, ∇·q = f`.
#[derive(Debug, Clone, Default)]
pub struct ProblemData {
    pub f: DataFn,
    pub g_d: DataFn,
    /// Prescribes `q·n` on the Neumann boundary.
    pub g_n: DataFn,
}

/// Output functional `ℓ^O(u, q) = (f^O, u) + ⟨g_D^O, q·n⟩_D + ⟨g_N^O, u⟩_N`.
#[derive(Debug, Clone, Default)]
pub struct OutputFunctional {
    pub f_o: DataFn,
    pub g_d_o: DataFn,
    pub g_n_o: DataFn,
}

impl OutputFunctional {
    /// Data of the adjoint problem, solved with the same discretization.
    pub fn adjoint_data(&self) -> ProblemData {
        ProblemData {
            f: self.f_o.clone(),
            g_d: self.g_d_o.clone(),
            g_n: self.g_n_o.negated(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            f_o: self.f_o.scaled(c),
            g_d_o: self.g_d_o.scaled(c),
            g_n_o: self.g_n_o.scaled(c),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_keeps_metadata() {
        let f = DataFn::polynomial(2, |x| x[0] * x[1]).with_grad(|x| [x[1], x[0]]);
        let g = f.scaled(3.0);
        assert_eq!(g.eval([2.0, 5.0]), 30.0);
        assert_eq!(g.grad([2.0, 5.0]), Some([15.0, 6.0]));
        assert_eq!(g.global_degree(), Some(2));
        assert!(DataFn::constant(0.0).is_zero());
        assert!(f.scaled(0.0).is_zero());
    }

    #[test]
    fn adjoint_flips_neumann_sign() {
        let out = OutputFunctional {
            g_n_o: DataFn::constant(2.0),
            ..Default::default()
        };
        assert_eq!(out.adjoint_data().g_n.eval([0.0, 0.0]), -2.0);
    }

    #[test]
    fn segment_degree_dispatch() {
        let g = DataFn::new(|x| x[1].sin())
            .with_segment_degree(|a, b| if a[1] == b[1] { Some(0) } else { None });
        assert_eq!(g.degree_on_segment([0.0, 1.0], [1.0, 1.0]), Some(0));
        assert_eq!(g.degree_on_segment([0.0, 0.0], [0.0, 1.0]), None);
        assert_eq!(DataFn::new(|_| 1.0).degree_on_segment([0.0, 0.0], [1.0, 0.0]), None);
    }
}
