//! Vector-valued reverse-mode automatic differentiation.
//!
//! Nodes hold whole vectors; weight matrices are borrowed constants. Any
//! computation recorded here, including an explicitly written backward pass
//! of a network, can itself be differentiated, which is how second-order
//! quantities (Hessian-vector products, gradients of explanation losses)
//! are obtained.

use crate::activation::{sigmoid, sigmoid_prime, softplus};
use crate::tensor::{matvec, matvec_t};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op<'a> {
    Leaf,
    MatVec {
        m: &'a [f64],
        cols: usize,
        x: Var,
    },
    MatVecT {
        m: &'a [f64],
        cols: usize,
        x: Var,
    },
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Vec<f64>),
    AddConst(Var),
    Scale(Var, f64),
    Softplus(Var, f64),
    Sigmoid(Var, f64),
    Relu(Var),
    Abs(Var),
    Sum(Var),
    MulScalar(Var, Var),
    DivScalar(Var, Var),
    /// `num_j / den_j` where `den_j ≥ eps`, zero elsewhere.
    SafeDiv {
        num: Var,
        den: Var,
        eps: f64,
    },
    /// `out_p = Σ_c a[c·P + p]` for `channels` blocks of length `P`.
    FoldChannels(Var, usize),
}

struct Node<'a> {
    op: Op<'a>,
    value: Vec<f64>,
    tracked: bool,
}

#[derive(Default)]
pub struct Tape<'a> {
    nodes: Vec<Node<'a>>,
}

impl<'a> Tape<'a> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    fn push(&mut self, op: Op<'a>, value: Vec<f64>, tracked: bool) -> Var {
        self.nodes.push(Node { op, value, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// A differentiable input.
    pub fn input(&mut self, value: Vec<f64>) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// A constant (no gradient flows into it).
    pub fn constant(&mut self, value: Vec<f64>) -> Var {
        self.push(Op::Leaf, value, false)
    }

    pub fn matvec(&mut self, m: &'a [f64], cols: usize, x: Var) -> Var {
        let value = matvec(m, cols, self.value(x));
        let t = self.tracked(x);
        self.push(Op::MatVec { m, cols, x }, value, t)
    }

    pub fn matvec_t(&mut self, m: &'a [f64], cols: usize, x: Var) -> Var {
        let value = matvec_t(m, cols, self.value(x));
        let t = self.tracked(x);
        self.push(Op::MatVecT { m, cols, x }, value, t)
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.len(), vb.len(), "tape: operand length mismatch");
        va.iter().zip(vb).map(|(&x, &y)| f(x, y)).collect()
    }

    fn unary(&self, a: Var, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.value(a).iter().map(|&x| f(x)).collect()
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, |x, y| x + y);
        let t = self.tracked(a) || self.tracked(b);
        self.push(Op::Add(a, b), v, t)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, |x, y| x - y);
        let t = self.tracked(a) || self.tracked(b);
        self.push(Op::Sub(a, b), v, t)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let v = self.zip(a, b, |x, y| x * y);
        let t = self.tracked(a) || self.tracked(b);
        self.push(Op::Mul(a, b), v, t)
    }

    pub fn mul_const(&mut self, a: Var, c: Vec<f64>) -> Var {
        assert_eq!(self.value(a).len(), c.len(), "tape: operand length mismatch");
        let v = self.value(a).iter().zip(&c).map(|(x, y)| x * y).collect();
        let t = self.tracked(a);
        self.push(Op::MulConst(a, c), v, t)
    }

    pub fn add_const(&mut self, a: Var, c: &[f64]) -> Var {
        assert_eq!(self.value(a).len(), c.len(), "tape: operand length mismatch");
        let v = self.value(a).iter().zip(c).map(|(x, y)| x + y).collect();
        let t = self.tracked(a);
        self.push(Op::AddConst(a), v, t)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = self.unary(a, |x| x * s);
        let t = self.tracked(a);
        self.push(Op::Scale(a, s), v, t)
    }

    pub fn softplus(&mut self, a: Var, beta: f64) -> Var {
        let v = self.unary(a, |x| softplus(x, beta));
        let t = self.tracked(a);
        self.push(Op::Softplus(a, beta), v, t)
    }

    pub fn sigmoid(&mut self, a: Var, beta: f64) -> Var {
        let v = self.unary(a, |x| sigmoid(x, beta));
        let t = self.tracked(a);
        self.push(Op::Sigmoid(a, beta), v, t)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.unary(a, |x| x.max(0.0));
        let t = self.tracked(a);
        self.push(Op::Relu(a), v, t)
    }

    /// Relu derivative mask `1[z > 0]`, recorded as a constant.
    pub fn step(&mut self, a: Var) -> Var {
        let v = self.unary(a, |x| if x > 0.0 { 1.0 } else { 0.0 });
        self.constant(v)
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let v = self.unary(a, f64::abs);
        let t = self.tracked(a);
        self.push(Op::Abs(a), v, t)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        let t = self.tracked(a);
        self.push(Op::Sum(a), vec![s], t)
    }

    pub fn mul_scalar(&mut self, a: Var, s: Var) -> Var {
        let sv = self.scalar(s);
        let v = self.unary(a, |x| x * sv);
        let t = self.tracked(a) || self.tracked(s);
        self.push(Op::MulScalar(a, s), v, t)
    }

    pub fn div_scalar(&mut self, a: Var, s: Var) -> Var {
        let sv = self.scalar(s);
        let v = self.unary(a, |x| x / sv);
        let t = self.tracked(a) || self.tracked(s);
        self.push(Op::DivScalar(a, s), v, t)
    }

    pub fn safe_div(&mut self, num: Var, den: Var, eps: f64) -> Var {
        let v = self.zip(num, den, |n, d| if d >= eps { n / d } else { 0.0 });
        let t = self.tracked(num) || self.tracked(den);
        self.push(Op::SafeDiv { num, den, eps }, v, t)
    }

    pub fn fold_channels(&mut self, a: Var, channels: usize) -> Var {
        let va = self.value(a);
        assert_eq!(va.len() % channels, 0, "tape: channel count does not divide length");
        let p = va.len() / channels;
        let mut v = vec![0.0; p];
        for block in va.chunks_exact(p) {
            v.iter_mut().zip(block).for_each(|(o, x)| *o += x);
        }
        let t = self.tracked(a);
        self.push(Op::FoldChannels(a, channels), v, t)
    }

    /// Mean of squared differences, as a scalar node.
    pub fn mse(&mut self, a: Var, b: Var) -> Var {
        let n = self.value(a).len() as f64;
        let d = self.sub(a, b);
        let sq = self.mul(d, d);
        let s = self.sum(sq);
        self.scale(s, 1.0 / n)
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let p = self.mul(a, b);
        self.sum(p)
    }

    /// Reverse sweep from the scalar `output`; returns `∂output/∂wrt`.
    pub fn gradient(&self, output: Var, wrt: Var) -> Vec<f64> {
        assert_eq!(self.value(output).len(), 1, "gradient needs a scalar output");
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; output.0 + 1];
        adj[output.0] = Some(vec![1.0]);
        for i in (wrt.0..=output.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            if i == wrt.0 {
                return g;
            }
            let node = &self.nodes[i];
            if !node.tracked {
                continue;
            }
            self.backprop(node, &g, &mut adj);
        }
        vec![0.0; self.value(wrt).len()]
    }

    fn backprop(&self, node: &Node<'a>, g: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let mut acc = |v: Var, delta: Vec<f64>| {
            if !self.nodes[v.0].tracked {
                return;
            }
            match &mut adj[v.0] {
                Some(a) => a.iter_mut().zip(&delta).for_each(|(x, d)| *x += d),
                slot @ None => *slot = Some(delta),
            }
        };
        let elementwise = |x: Var, f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
            self.value(x).iter().zip(g).map(|(&xv, &gv)| f(xv, gv)).collect()
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatVec { m, cols, x } => acc(*x, matvec_t(m, *cols, g)),
            Op::MatVecT { m, cols, x } => acc(*x, matvec(m, *cols, g)),
            Op::Add(a, b) => {
                acc(*a, g.to_vec());
                acc(*b, g.to_vec());
            }
            Op::Sub(a, b) => {
                acc(*a, g.to_vec());
                acc(*b, g.iter().map(|v| -v).collect());
            }
            Op::Mul(a, b) => {
                let da = self.value(*b).iter().zip(g).map(|(y, gv)| y * gv).collect();
                let db = self.value(*a).iter().zip(g).map(|(x, gv)| x * gv).collect();
                acc(*a, da);
                acc(*b, db);
            }
            Op::MulConst(a, c) => acc(*a, c.iter().zip(g).map(|(c, gv)| c * gv).collect()),
            Op::AddConst(a) => acc(*a, g.to_vec()),
            Op::Scale(a, s) => acc(*a, g.iter().map(|gv| gv * s).collect()),
            Op::Softplus(a, beta) => acc(*a, elementwise(*a, &|x, gv| gv * sigmoid(x, *beta))),
            Op::Sigmoid(a, beta) => acc(*a, elementwise(*a, &|x, gv| gv * sigmoid_prime(x, *beta))),
            Op::Relu(a) => acc(*a, elementwise(*a, &|x, gv| if x > 0.0 { gv } else { 0.0 })),
            Op::Abs(a) => acc(*a, elementwise(*a, &|x, gv| gv * sign(x))),
            Op::Sum(a) => acc(*a, vec![g[0]; self.value(*a).len()]),
            Op::MulScalar(a, s) => {
                let sv = self.scalar(*s);
                acc(*a, g.iter().map(|gv| gv * sv).collect());
                let ds = crate::tensor::dot(self.value(*a), g);
                acc(*s, vec![ds]);
            }
            Op::DivScalar(a, s) => {
                let sv = self.scalar(*s);
                acc(*a, g.iter().map(|gv| gv / sv).collect());
                let ds = -crate::tensor::dot(self.value(*a), g) / (sv * sv);
                acc(*s, vec![ds]);
            }
            Op::SafeDiv { num, den, eps } => {
                let (n, d) = (self.value(*num), self.value(*den));
                let mut dn = vec![0.0; g.len()];
                let mut dd = vec![0.0; g.len()];
                for j in 0..g.len() {
                    if d[j] >= *eps {
                        dn[j] = g[j] / d[j];
                        dd[j] = -g[j] * n[j] / (d[j] * d[j]);
                    }
                }
                acc(*num, dn);
                acc(*den, dd);
            }
            Op::FoldChannels(a, channels) => acc(*a, g.repeat(*channels)),
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[i] += h;
                m[i] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    fn composite(x: &[f64], m: &[f64]) -> f64 {
        let mut t = Tape::new();
        let v = t.input(x.to_vec());
        let y = t.matvec(m, 3, v);
        let s = t.softplus(y, 2.0);
        let q = t.sigmoid(s, 1.5);
        let z = t.matvec_t(m, 3, q);
        let a = t.abs(z);
        let tot = t.sum(a);
        let n = t.div_scalar(a, tot);
        let w = t.mul(n, v);
        let r = t.sum(w);
        t.scalar(r)
    }

    #[test]
    fn reverse_matches_finite_differences() {
        let m = [0.3, -0.7, 1.1, 0.5, 0.2, -0.4];
        let x = [0.4, -0.3, 0.9];
        let mut t = Tape::new();
        let v = t.input(x.to_vec());
        let y = t.matvec(&m, 3, v);
        let s = t.softplus(y, 2.0);
        let q = t.sigmoid(s, 1.5);
        let z = t.matvec_t(&m, 3, q);
        let a = t.abs(z);
        let tot = t.sum(a);
        let n = t.div_scalar(a, tot);
        let w = t.mul(n, v);
        let r = t.sum(w);
        let g = t.gradient(r, v);
        let want = fd(|p| composite(p, &m), &x, 1e-6);
        for (a, b) in g.iter().zip(&want) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn constants_receive_no_gradient_flow() {
        let mut t = Tape::new();
        let x = t.input(vec![1.0, 2.0]);
        let c = t.constant(vec![3.0, 4.0]);
        let p = t.mul(x, c);
        let s = t.sum(p);
        assert_eq!(t.gradient(s, x), vec![3.0, 4.0]);
    }

    #[test]
    fn safe_div_zeroes_small_denominators() {
        let mut t = Tape::new();
        let n = t.input(vec![1.0, 1.0]);
        let d = t.constant(vec![2.0, 1e-12]);
        let q = t.safe_div(n, d, 1e-9);
        assert_eq!(t.value(q), &[0.5, 0.0]);
        let s = t.sum(q);
        assert_eq!(t.gradient(s, n), vec![0.5, 0.0]);
    }

    #[test]
    fn unreachable_input_has_zero_gradient() {
        let mut t = Tape::new();
        let x = t.input(vec![1.0, 2.0]);
        let c = t.constant(vec![1.0]);
        let s = t.sum(c);
        assert_eq!(t.gradient(s, x), vec![0.0, 0.0]);
    }
}
