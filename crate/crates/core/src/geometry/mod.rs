//! Geometry of the level set `S = {x : f(x) = c}` of a scalar field.
//!
//! For a network the field is one logit. Its normal is the normalised
//! gradient map, and the principal curvatures bound how fast that map can
//! turn while the output stays fixed.

mod noise;
mod trace;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::activation::Activation;
use crate::error::{Error, Result};
use crate::net::{DenseLayer, Network};
use crate::tensor::{dot, norm, Tensor};

pub use noise::{
    draw_p_beta, gaussian_sigma_for_beta, p_beta_quantile, sample_p_beta, theorem2_error_decay, verify_theorem2,
    verify_theorem2_with, DecayReport, NoiseModel, Theorem2Report,
};
pub use trace::{
    trace_level_set_2d, trace_level_set_2d_with, verify_theorem1, ChainedBound, LevelSetTrace, PairSlack,
    Theorem1Report, TraceOptions,
};

/// Gradients with a smaller norm have no usable normal.
pub const GRAD_EPS: f64 = 1e-10;

pub trait ScalarField: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Dense symmetric `d × d` Hessian.
    fn hessian(&self, x: &[f64]) -> Result<Tensor>;
    /// `(β, C̃)` when the field is a softplus network, so that `β·C̃/‖∇f‖`
    /// bounds the principal curvatures.
    fn curvature_bound(&self) -> Option<(f64, f64)> {
        None
    }
}

/// Logit `class` of a network.
#[derive(Debug, Clone)]
pub struct NetworkField {
    net: Network,
    class: usize,
}

impl NetworkField {
    pub fn new(net: Network, class: usize) -> Result<Self> {
        net.check_class(class)?;
        Ok(Self { net, class })
    }

    pub fn network(&self) -> &Network {
        &self.net
    }
}

impl ScalarField for NetworkField {
    fn dim(&self) -> usize {
        self.net.input_dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.net.logits(x)?[self.class])
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.net.grad_input(x, self.class)
    }

    fn hessian(&self, x: &[f64]) -> Result<Tensor> {
        self.net.hessian(x, self.class)
    }

    fn curvature_bound(&self) -> Option<(f64, f64)> {
        self.net.activation().beta().map(|beta| (beta, curvature_bound_constant(&self.net)))
    }
}

/// `f(x) = ‖x‖²`; its level sets are spheres.
#[derive(Debug, Clone, Copy)]
pub struct SphereField {
    pub dim: usize,
}

impl ScalarField for SphereField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(x, x))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(x.iter().map(|v| 2.0 * v).collect())
    }

    fn hessian(&self, x: &[f64]) -> Result<Tensor> {
        let mut h = Tensor::identity(x.len()).into_data();
        h.iter_mut().for_each(|v| *v *= 2.0);
        Tensor::matrix(x.len(), x.len(), h)
    }
}

/// `f(x) = w·x + b`.
#[derive(Debug, Clone)]
pub struct LinearField {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ScalarField for LinearField {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(&self.weights, x) + self.bias)
    }

    fn gradient(&self, _x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.weights.clone())
    }

    fn hessian(&self, x: &[f64]) -> Result<Tensor> {
        Ok(Tensor::zeros(vec![x.len(), x.len()]))
    }
}

/// Two-input toy network `Σ_i V_i·softplus_β(Σ_j W_ij x_j)` with `hidden`
/// units, no biases and `V, W ~ U(−1, 1)`.
pub fn toy_network(hidden: usize, activation: Activation, seed: u64) -> Result<Network> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.random_range(-1.0..1.0)).collect() };
    let w = draw(hidden * 2);
    let v = draw(hidden);
    let l1 = DenseLayer::new(Tensor::matrix(hidden, 2, w)?, Tensor::zeros(vec![hidden]))?;
    let l2 = DenseLayer::new(Tensor::matrix(1, hidden, v)?, Tensor::zeros(vec![1]))?;
    Network::new(vec![l1, l2], activation)
}

fn check_dim(f: &dyn ScalarField, x: &[f64]) -> Result<()> {
    if x.len() != f.dim() {
        return Err(Error::Dimension { layer: 0, expected: f.dim(), actual: x.len() });
    }
    Ok(())
}

fn normal_from_gradient(g: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = norm(g);
    if !(n > GRAD_EPS) {
        return Err(Error::VanishingGradient { norm: n });
    }
    Ok((g.iter().map(|v| v / n).collect(), n))
}

/// `∇f/‖∇f‖`.
pub fn unit_normal(f: &dyn ScalarField, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(f, x)?;
    Ok(normal_from_gradient(&f.gradient(x)?)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FundamentalForm {
    pub normal: Vec<f64>,
    /// `d × (d−1)`; columns are an orthonormal basis of the tangent space.
    pub tangent_basis: Tensor,
    /// `(d−1) × (d−1)`, symmetric.
    pub form: Tensor,
    pub gradient_norm: f64,
}

/// Orthonormal basis of the complement of the unit vector `n`, from a
/// column-pivoted QR of `I − nnᵀ`.
pub fn tangent_basis(n: &[f64]) -> Tensor {
    let d = n.len();
    let projector = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { 0.0 } - n[i] * n[j]);
    let q = projector.col_piv_qr().q();
    let mut data = Vec::with_capacity(d * (d - 1));
    for i in 0..d {
        for j in 0..d - 1 {
            data.push(q[(i, j)]);
        }
    }
    Tensor::matrix(d, d - 1, data).expect("finite basis")
}

/// `−EᵀHE/‖∇f‖` in the tangent basis `E`.
pub fn second_fundamental_form(f: &dyn ScalarField, p: &[f64]) -> Result<FundamentalForm> {
    check_dim(f, p)?;
    if p.len() < 2 {
        return Err(Error::Shape("a level set needs at least two dimensions".into()));
    }
    let (normal, gradient_norm) = normal_from_gradient(&f.gradient(p)?)?;
    let basis = tangent_basis(&normal);
    let d = p.len();
    let h = DMatrix::from_row_slice(d, d, f.hessian(p)?.data());
    let e = DMatrix::from_row_slice(d, d - 1, basis.data());
    let l = -(e.transpose() * h * &e) / gradient_norm;
    let k = d - 1;
    let data = (0..k * k).map(|ij| 0.5 * (l[(ij / k, ij % k)] + l[(ij % k, ij / k)])).collect();
    Ok(FundamentalForm { normal, tangent_basis: basis, form: Tensor::matrix(k, k, data)?, gradient_norm })
}

/// Eigenvalues of a symmetric form, sorted by descending absolute value.
pub fn principal_curvatures(form: &Tensor) -> Result<Vec<f64>> {
    let k = form.rows();
    if form.shape().len() != 2 || form.cols() != k {
        return Err(Error::Shape(format!("form must be square, got {:?}", form.shape())));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let scale = form.data().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut asym: f64 = 0.0;
    for i in 0..k {
        for j in 0..i {
            asym = asym.max((form.at(i, j) - form.at(j, i)).abs());
        }
    }
    if asym > 1e-10 * scale {
        return Err(Error::Asymmetric(asym));
    }
    let m = DMatrix::from_row_slice(k, k, form.data());
    let mut values: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    Ok(values)
}

/// `Σ_m Π_{l>m}‖W^l‖_F · Π_{l≤m}‖W^l‖_F²` over the layers of `net`, so that
/// the input Hessian of a softplus_β network satisfies `‖H‖_F ≤ β·C̃`.
pub fn curvature_bound_constant(net: &Network) -> f64 {
    let norms: Vec<f64> = net.layers().iter().map(|l| l.weights.frobenius_norm()).collect();
    (0..norms.len())
        .map(|m| {
            let above: f64 = norms[m + 1..].iter().product();
            let below: f64 = norms[..=m].iter().map(|n| n * n).product();
            above * below
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub point: Vec<f64>,
    pub normal: Vec<f64>,
    pub fundamental_form: Tensor,
    /// Sorted by descending absolute value.
    pub principal_curvatures: Vec<f64>,
    /// Largest absolute principal curvature.
    pub lambda_max: f64,
    /// `c = ‖∇f(p)‖`.
    pub gradient_norm: f64,
    pub beta: Option<f64>,
    /// `C̃` of [`curvature_bound_constant`].
    pub bound_constant: Option<f64>,
    /// `β·C̃/c`.
    pub bound: Option<f64>,
}

pub fn curvature_report(f: &dyn ScalarField, p: &[f64]) -> Result<CurvatureReport> {
    let ff = second_fundamental_form(f, p)?;
    let principal = principal_curvatures(&ff.form)?;
    let lambda_max = principal.first().map_or(0.0, |v| v.abs());
    let bound_info = f.curvature_bound();
    Ok(CurvatureReport {
        point: p.to_vec(),
        normal: ff.normal,
        fundamental_form: ff.form,
        principal_curvatures: principal,
        lambda_max,
        gradient_norm: ff.gradient_norm,
        beta: bound_info.map(|b| b.0),
        bound_constant: bound_info.map(|b| b.1),
        bound: bound_info.map(|(beta, c)| beta * c / ff.gradient_norm),
    })
}

#[cfg(test)]
mod tests;
