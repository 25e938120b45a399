use alloc::boxed::Box;

/// The map `phi` whose mean over marginal order statistics is studied.
///
/// `eval` works in the raw observation space. Implementations may also
/// report the gradient and Hessian of `phi` there; the calculus module
/// combines them with the margins' quantile derivatives by the chain rule
/// and falls back to finite differences otherwise.
pub trait FunctionSpec: Send + Sync {
    fn dim(&self) -> usize;

    /// Must be deterministic: equal inputs give bit-identical outputs.
    fn eval(&self, x: &[f64]) -> f64;

    /// Writes `d phi / d x_j` into `out`; returns `false` if unavailable.
    fn gradient(&self, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }

    /// Writes the row-major `d x d` Hessian into `out`; returns `false` if
    /// unavailable.
    fn hessian(&self, _x: &[f64], _out: &mut [f64]) -> bool {
        false
    }
}

impl<T: FunctionSpec + ?Sized> FunctionSpec for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        (**self).gradient(x, out)
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) -> bool {
        (**self).hessian(x, out)
    }
}

impl<T: FunctionSpec + ?Sized> FunctionSpec for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (**self).eval(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        (**self).gradient(x, out)
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) -> bool {
        (**self).hessian(x, out)
    }
}

/// A `phi` given by a closure, without derivatives.
pub struct FnSpec<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnSpec<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FunctionSpec for FnSpec<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// `c * phi`, keeping any derivatives of `phi`.
pub struct Scaled<T> {
    pub factor: f64,
    pub inner: T,
}

impl<T: FunctionSpec> FunctionSpec for Scaled<T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, x: &[f64]) -> f64 {
        self.factor * self.inner.eval(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) -> bool {
        if !self.inner.gradient(x, out) {
            return false;
        }
        out.iter_mut().for_each(|g| *g *= self.factor);
        true
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) -> bool {
        if !self.inner.hessian(x, out) {
            return false;
        }
        out.iter_mut().for_each(|g| *g *= self.factor);
        true
    }
}
