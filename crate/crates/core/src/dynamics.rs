//! Reusable dynamics maps: linear(-bilinear) systems and a finite-difference
//! wrapper that supplies derivatives for any map that only implements `step`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::fd;
use crate::problem::{Dynamics, OutputHessians, SecondDerivatives};

/// `x' = A x + B u + E w + sum_j w_j F_j u`.
///
/// `A`, `B`, `E`, `F_j` are given in forward (Jacobian) orientation: `A` is
/// `d x d`, `B` is `d x p`, `E` is `d x q` and each `F_j` is `d x p`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDynamics {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    noise: Option<DMatrix<f64>>,
    multiplicative: Vec<DMatrix<f64>>,
}

impl LinearDynamics {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Self {
        assert!(a.is_square());
        assert_eq!(a.nrows(), b.nrows());
        Self {
            a,
            b,
            noise: None,
            multiplicative: Vec::new(),
        }
    }

    /// Additive noise gain `E` (`d x q`).
    pub fn with_noise(mut self, gain: DMatrix<f64>) -> Self {
        assert_eq!(gain.nrows(), self.a.nrows());
        if !self.multiplicative.is_empty() {
            assert_eq!(gain.ncols(), self.multiplicative.len());
        }
        self.noise = Some(gain);
        self
    }

    /// Control-dependent noise: `w_j` multiplies `F_j u`. Adds a zero additive
    /// gain if none was set.
    pub fn with_multiplicative_noise(mut self, gains: Vec<DMatrix<f64>>) -> Self {
        let d = self.a.nrows();
        let p = self.b.ncols();
        for f in &gains {
            assert_eq!(f.shape(), (d, p));
        }
        match &self.noise {
            Some(e) => assert_eq!(e.ncols(), gains.len()),
            None => self.noise = Some(DMatrix::zeros(d, gains.len())),
        }
        self.multiplicative = gains;
        self
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
}

impl Dynamics for LinearDynamics {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    fn noise_dim(&self) -> usize {
        self.noise.as_ref().map_or(0, |e| e.ncols())
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    fn step_noisy(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        let mut next = self.step(x, u);
        if let Some(e) = &self.noise {
            next += e * w;
        }
        for (wj, f) in w.iter().zip(&self.multiplicative) {
            next += (f * u) * *wj;
        }
        next
    }

    fn gradients(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.a.transpose(), self.b.transpose())
    }

    fn noise_gradient(&self, _x: &DVector<f64>, u: &DVector<f64>) -> Option<DMatrix<f64>> {
        let e = self.noise.as_ref()?;
        let mut forward = e.clone();
        for (j, f) in self.multiplicative.iter().enumerate() {
            let col = forward.column(j) + f * u;
            forward.set_column(j, &col);
        }
        Some(forward.transpose())
    }

    fn noise_cross_derivatives(
        &self,
        _x: &DVector<f64>,
        _u: &DVector<f64>,
    ) -> Option<Vec<DMatrix<f64>>> {
        let q = self.noise_dim();
        if q == 0 {
            return None;
        }
        if self.multiplicative.is_empty() {
            let (d, p) = self.b.shape();
            return Some(vec![DMatrix::zeros(d, p); q]);
        }
        Some(self.multiplicative.clone())
    }

    fn second_derivatives(&self, _x: &DVector<f64>, _u: &DVector<f64>) -> Option<SecondDerivatives> {
        let (d, p) = self.b.shape();
        Some(SecondDerivatives {
            xx: OutputHessians::zeros(d, d, d),
            uu: OutputHessians::zeros(d, p, p),
            ux: OutputHessians::zeros(d, p, d),
        })
    }
}

/// Which derivatives a [`FiniteDifference`] wrapper approximates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FdMode {
    /// First and second derivatives from central differences of `step`.
    Full,
    /// First derivatives from the wrapped map; second derivatives from central
    /// differences of its gradients.
    SecondOrderOnly,
}

/// Derivatives by central finite differences around a wrapped map.
pub struct FiniteDifference {
    inner: Arc<dyn Dynamics>,
    mode: FdMode,
}

impl FiniteDifference {
    pub fn new(inner: Arc<dyn Dynamics>, mode: FdMode) -> Self {
        Self { inner, mode }
    }

    /// Gradient matrices; `nested` selects the larger steps used when the
    /// result is differentiated again.
    fn split_gradients(&self, x: &DVector<f64>, u: &DVector<f64>, nested: bool) -> (DMatrix<f64>, DMatrix<f64>) {
        match self.mode {
            FdMode::SecondOrderOnly => self.inner.gradients(x, u),
            FdMode::Full => {
                let (hx, hu) = if nested {
                    (fd::nested_step(x), fd::nested_step(u))
                } else {
                    (fd::step(x), fd::step(u))
                };
                let jx = fd::jacobian_with_step(|xx| self.inner.step(xx, u), x, hx);
                let ju = fd::jacobian_with_step(|uu| self.inner.step(x, uu), u, hu);
                (jx.transpose(), ju.transpose())
            }
        }
    }

    fn outer_step(&self, point: &DVector<f64>) -> f64 {
        match self.mode {
            FdMode::SecondOrderOnly => fd::second_order_step(point),
            FdMode::Full => fd::nested_step(point),
        }
    }
}

impl Dynamics for FiniteDifference {
    fn state_dim(&self) -> usize {
        self.inner.state_dim()
    }

    fn control_dim(&self) -> usize {
        self.inner.control_dim()
    }

    fn noise_dim(&self) -> usize {
        self.inner.noise_dim()
    }

    fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.inner.step(x, u)
    }

    fn step_noisy(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
        self.inner.step_noisy(x, u, w)
    }

    fn gradients(&self, x: &DVector<f64>, u: &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        self.split_gradients(x, u, false)
    }

    fn noise_gradient(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<DMatrix<f64>> {
        let q = self.noise_dim();
        if q == 0 {
            return None;
        }
        if self.mode == FdMode::SecondOrderOnly {
            if let Some(g) = self.inner.noise_gradient(x, u) {
                return Some(g);
            }
        }
        let jw = fd::jacobian(|w| self.inner.step_noisy(x, u, w), &DVector::zeros(q));
        Some(jw.transpose())
    }

    fn noise_cross_derivatives(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<Vec<DMatrix<f64>>> {
        let q = self.noise_dim();
        if q == 0 {
            return None;
        }
        let w0 = DVector::zeros(q);
        // d/du of the forward noise Jacobian, column by column.
        let h = fd::nested_step(u);
        let hw = fd::nested_step(&w0);
        let p = u.len();
        let d = self.state_dim();
        let mut psi = vec![DMatrix::zeros(d, p); q];
        for k in 0..p {
            let mut up = u.clone();
            let mut um = u.clone();
            up[k] += h;
            um[k] -= h;
            let jp = fd::jacobian_with_step(|w| self.inner.step_noisy(x, &up, w), &w0, hw);
            let jm = fd::jacobian_with_step(|w| self.inner.step_noisy(x, &um, w), &w0, hw);
            let diff = (jp - jm) / (2.0 * h);
            for (j, block) in psi.iter_mut().enumerate() {
                block.set_column(k, &diff.column(j));
            }
        }
        Some(psi)
    }

    fn second_derivatives(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<SecondDerivatives> {
        let d = self.state_dim();
        let p = self.control_dim();
        let mut xx = OutputHessians::zeros(d, d, d);
        let mut uu = OutputHessians::zeros(d, p, p);
        let mut ux = OutputHessians::zeros(d, p, d);

        // Differentiate the gradient matrices; column i of grad_x is grad of phi_i.
        let hx = self.outer_step(x);
        for k in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += hx;
            xm[k] -= hx;
            let (gxp, gup) = self.split_gradients(&xp, u, true);
            let (gxm, gum) = self.split_gradients(&xm, u, true);
            let dgx = (gxp - gxm) / (2.0 * hx);
            let dgu = (gup - gum) / (2.0 * hx);
            for i in 0..d {
                for r in 0..d {
                    xx.blocks[i][(r, k)] = dgx[(r, i)];
                }
                for r in 0..p {
                    ux.blocks[i][(r, k)] = dgu[(r, i)];
                }
            }
        }
        let hu = self.outer_step(u);
        for k in 0..p {
            let mut up = u.clone();
            let mut um = u.clone();
            up[k] += hu;
            um[k] -= hu;
            let (_, gup) = self.split_gradients(x, &up, true);
            let (_, gum) = self.split_gradients(x, &um, true);
            let dgu = (gup - gum) / (2.0 * hu);
            for i in 0..d {
                for r in 0..p {
                    uu.blocks[i][(r, k)] = dgu[(r, i)];
                }
            }
        }
        for block in xx.blocks.iter_mut().chain(uu.blocks.iter_mut()) {
            *block = (&*block + block.transpose()) * 0.5;
        }
        Some(SecondDerivatives { xx, uu, ux })
    }
}
