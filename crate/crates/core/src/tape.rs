//! Append-only reverse-mode tape.
//!
//! Every operation appends one node holding its output value and whatever it
//! needs for its backward rule. Because inputs always precede outputs, a single
//! reverse sweep over the node list is a valid topological order.

use crate::binary16;
use crate::error::{size_err, Error, Result};
use crate::kernels::{conv, loss, norm, pool, resample};
use crate::scalar::{DType, Scalar};
use crate::tensor::Tensor;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op<T> {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Scale(Var, T),
    ConcatChannels(Var, Var),
    Mean(Var),
    Sum(Var),
    Conv2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: conv::ConvGeom,
    },
    ConvTranspose2d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: conv::ConvGeom,
    },
    MaxPool2d {
        x: Var,
        argmax: Vec<usize>,
    },
    Upsample2x(Var),
    BatchNormTrain {
        x: Var,
        gamma: Var,
        beta: Var,
        stats: norm::BatchStats<T>,
    },
    BatchNormEval {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Vec<T>,
        inv: Vec<T>,
    },
    L1 {
        pred: Var,
        target: Var,
    },
    RoundHalf(Var),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    tracked: bool,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Gradients produced by one backward sweep.
///
/// Only leaf gradients are retained; intermediates are released as the sweep
/// passes them.
pub struct Grads<T> {
    slots: Vec<Option<Vec<T>>>,
    visits: usize,
}

impl<T: Scalar> Grads<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.slots.get(v.0).and_then(|s| s.as_deref())
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<T>> {
        self.slots.get_mut(v.0).and_then(|s| s.take())
    }

    /// Adds this sweep's gradient for `v` into `t`'s gradient slot.
    pub fn accumulate_into(&self, v: Var, t: &mut Tensor<T>) -> Result<()> {
        match self.get(v) {
            Some(g) => t.accumulate_grad(g),
            None => t.accumulate_grad(&vec![T::zero(); t.len()]),
        }
    }

    /// Number of nodes whose backward rule ran.
    pub fn visits(&self) -> usize {
        self.visits
    }
}

fn check_same_shape<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(size_err!(
            "{what}: shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        ));
    }
    Ok(())
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor<T>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            tracked: requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor<T>) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn is_tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>, inputs: &[Var]) -> Var {
        let tracked = inputs.iter().any(|v| self.nodes[v.0].tracked);
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn zip_with(&mut self, a: Var, b: Var, what: &str, f: impl Fn(T, T) -> T) -> Result<Tensor<T>> {
        let (ta, tb) = (self.value(a), self.value(b));
        check_same_shape(ta, tb, what)?;
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(Tensor::from_parts(ta.shape().to_vec(), data, T::DTYPE))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with(a, b, "add", |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b), &[a, b]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with(a, b, "sub", |x, y| x - y)?;
        Ok(self.push(out, Op::Sub(a, b), &[a, b]))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b), &[a, b]))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let data = t
            .data()
            .iter()
            .map(|&x| if x > T::zero() { x } else { T::zero() })
            .collect();
        let out = Tensor::from_parts(t.shape().to_vec(), data, T::DTYPE);
        self.push(out, Op::Relu(a), &[a])
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let t = self.value(a);
        let data = t.data().iter().map(|&x| x * c).collect();
        let out = Tensor::from_parts(t.shape().to_vec(), data, T::DTYPE);
        self.push(out, Op::Scale(a, c), &[a])
    }

    /// Concatenates two `[N, C, H, W]` tensors along channels, `a` first.
    pub fn concat_channels(&mut self, a: Var, b: Var) -> Result<Var> {
        let [na, ca, ha, wa] = self.value(a).dims4()?;
        let [nb, cb, hb, wb] = self.value(b).dims4()?;
        if (na, ha, wa) != (nb, hb, wb) {
            return Err(size_err!(
                "concat_channels: batch/spatial extents {:?} and {:?} differ",
                (na, ha, wa),
                (nb, hb, wb)
            ));
        }
        let plane = ha * wa;
        let (da, db) = (self.value(a).data(), self.value(b).data());
        let mut data = Vec::with_capacity(da.len() + db.len());
        for s in 0..na {
            data.extend_from_slice(&da[s * ca * plane..(s + 1) * ca * plane]);
            data.extend_from_slice(&db[s * cb * plane..(s + 1) * cb * plane]);
        }
        let out = Tensor::from_parts(vec![na, ca + cb, ha, wa], data, T::DTYPE);
        Ok(self.push(out, Op::ConcatChannels(a, b), &[a, b]))
    }

    pub fn reduce_mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.is_empty() {
            return Err(Error::Domain("mean of an empty tensor".into()));
        }
        let n = T::from_usize(t.len()).unwrap();
        let m = t.data().iter().copied().sum::<T>() / n;
        Ok(self.push(Tensor::scalar(m), Op::Mean(a), &[a]))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().copied().sum::<T>();
        self.push(Tensor::scalar(s), Op::Sum(a), &[a])
    }

    /// Cross-correlation with zero padding. `w` is `[Cout, Cin, K, K]`, `b` is `[Cout]`.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let [n, cin, h, wd] = self.value(x).dims4()?;
        let [cout, wcin, kh, kw] = self.value(w).dims4()?;
        if wcin != cin {
            return Err(size_err!(
                "conv2d: input has {cin} channels, weight expects {wcin}"
            ));
        }
        if kh != kw {
            return Err(Error::Config(format!(
                "conv2d: non-square kernel {kh}x{kw}"
            )));
        }
        if stride == 0 || h + 2 * pad < kh || wd + 2 * pad < kw {
            return Err(size_err!(
                "conv2d: kernel {kh} does not fit {h}x{wd} with padding {pad}"
            ));
        }
        if let Some(b) = b {
            if self.value(b).shape() != [cout] {
                return Err(size_err!(
                    "conv2d: bias shape {:?}, expected [{cout}]",
                    self.value(b).shape()
                ));
            }
        }
        let geom = conv::ConvGeom {
            n,
            cin,
            h,
            w: wd,
            cout,
            k: kh,
            stride,
            pad,
        };
        let data = conv::conv2d_forward(
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
            &geom,
        );
        let out = Tensor::from_parts(vec![n, cout, geom.out_h(), geom.out_w()], data, T::DTYPE);
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push(out, Op::Conv2d { x, w, b, geom }, &inputs))
    }

    /// Transposed convolution with `w: [Cin, Cout, 2, 2]`, stride 2, no padding.
    pub fn conv_transpose2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        pad: usize,
    ) -> Result<Var> {
        let [n, cin, h, wd] = self.value(x).dims4()?;
        let [wcin, cout, kh, kw] = self.value(w).dims4()?;
        if stride != 2 || kh != 2 || kw != 2 || pad != 0 {
            return Err(Error::Config(format!(
                "conv_transpose2d supports kernel 2, stride 2, padding 0; got kernel {kh}x{kw}, stride {stride}, padding {pad}"
            )));
        }
        if wcin != cin {
            return Err(size_err!(
                "conv_transpose2d: input has {cin} channels, weight expects {wcin}"
            ));
        }
        if let Some(b) = b {
            if self.value(b).shape() != [cout] {
                return Err(size_err!(
                    "conv_transpose2d: bias shape {:?}, expected [{cout}]",
                    self.value(b).shape()
                ));
            }
        }
        let geom = conv::transposed_geom(n, cin, h, wd, cout, kh, stride, pad);
        let data = conv::conv_transpose2d_forward(
            self.value(x).data(),
            self.value(w).data(),
            b.map(|b| self.value(b).data()),
            &geom,
        );
        let out = Tensor::from_parts(vec![n, cout, geom.h, geom.w], data, T::DTYPE);
        let mut inputs = vec![x, w];
        inputs.extend(b);
        Ok(self.push(out, Op::ConvTranspose2d { x, w, b, geom }, &inputs))
    }

    /// 2x2 max pooling with stride 2.
    pub fn maxpool2d(&mut self, x: Var) -> Result<Var> {
        let [n, c, h, w] = self.value(x).dims4()?;
        if h % 2 != 0 || w % 2 != 0 {
            return Err(size_err!("maxpool2d: extents {h}x{w} are not even"));
        }
        let (data, argmax) = pool::maxpool2x2_forward(self.value(x).data(), n * c, h, w);
        let out = Tensor::from_parts(vec![n, c, h / 2, w / 2], data, T::DTYPE);
        Ok(self.push(out, Op::MaxPool2d { x, argmax }, &[x]))
    }

    /// Bilinear 2x upsampling with half-pixel centers.
    pub fn upsample2x(&mut self, x: Var) -> Result<Var> {
        let [n, c, h, w] = self.value(x).dims4()?;
        let data = resample::resize_forward(self.value(x).data(), n * c, h, w, 2 * h, 2 * w);
        let out = Tensor::from_parts(vec![n, c, 2 * h, 2 * w], data, T::DTYPE);
        Ok(self.push(out, Op::Upsample2x(x), &[x]))
    }

    /// Batch-statistics normalization. Returns the output and the per-channel
    /// batch `(mean, biased variance)`.
    pub fn batchnorm_train(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        eps: T,
    ) -> Result<(Var, Vec<T>, Vec<T>)> {
        let dims = self.value(x).dims4()?;
        let [n, c, h, w] = dims;
        self.check_bn_params(gamma, beta, c)?;
        if n * h * w < 2 {
            return Err(Error::DegenerateBatch(format!(
                "batch-norm in train mode needs at least 2 values per channel, got {}",
                n * h * w
            )));
        }
        let (data, stats) = norm::batchnorm_train_forward(
            self.value(x).data(),
            dims,
            self.value(gamma).data(),
            self.value(beta).data(),
            eps,
        );
        let (mean, var) = (stats.mean.clone(), stats.var.clone());
        let out = Tensor::from_parts(dims.to_vec(), data, T::DTYPE);
        let v = self.push(
            out,
            Op::BatchNormTrain {
                x,
                gamma,
                beta,
                stats,
            },
            &[x, gamma, beta],
        );
        Ok((v, mean, var))
    }

    pub fn batchnorm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &[T],
        running_var: &[T],
        eps: T,
    ) -> Result<Var> {
        let dims = self.value(x).dims4()?;
        self.check_bn_params(gamma, beta, dims[1])?;
        if running_mean.len() != dims[1] || running_var.len() != dims[1] {
            return Err(size_err!(
                "batch-norm running stats do not match {} channels",
                dims[1]
            ));
        }
        let (data, xhat, inv) = norm::batchnorm_eval_forward(
            self.value(x).data(),
            dims,
            self.value(gamma).data(),
            self.value(beta).data(),
            running_mean,
            running_var,
            eps,
        );
        let out = Tensor::from_parts(dims.to_vec(), data, T::DTYPE);
        Ok(self.push(
            out,
            Op::BatchNormEval {
                x,
                gamma,
                beta,
                xhat,
                inv,
            },
            &[x, gamma, beta],
        ))
    }

    fn check_bn_params(&self, gamma: Var, beta: Var, c: usize) -> Result<()> {
        if self.value(gamma).shape() != [c] || self.value(beta).shape() != [c] {
            return Err(size_err!(
                "batch-norm affine parameters do not match {c} channels"
            ));
        }
        Ok(())
    }

    /// Mean absolute error.
    pub fn l1_loss(&mut self, pred: Var, target: Var) -> Result<Var> {
        check_same_shape(self.value(pred), self.value(target), "l1_loss")?;
        if self.value(pred).is_empty() {
            return Err(Error::Domain("l1_loss over empty tensors".into()));
        }
        let v = loss::l1_forward(self.value(pred).data(), self.value(target).data());
        Ok(self.push(Tensor::scalar(v), Op::L1 { pred, target }, &[pred, target]))
    }

    /// Rounds values to binary16. The backward rule rounds the incoming
    /// gradient the same way, as the gradient of a half-precision value is
    /// itself half precision.
    pub fn round_half(&mut self, x: Var) -> Var {
        let out = self.value(x).cast(DType::F16E);
        self.push(out, Op::RoundHalf(x), &[x])
    }

    pub fn backward(&self, loss: Var) -> Result<Grads<T>> {
        self.backward_seeded(loss, T::one())
    }

    /// Backward sweep starting from `d loss = seed`.
    pub fn backward_seeded(&self, loss: Var, seed: T) -> Result<Grads<T>> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lv.shape()
            )));
        }
        let mut slots: Vec<Option<Vec<T>>> = (0..=loss.0).map(|_| None).collect();
        let mut visits = 0;
        if !self.nodes[loss.0].tracked {
            return Ok(Grads { slots, visits });
        }
        slots[loss.0] = Some(vec![seed]);
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = slots[i].take() else { continue };
            visits += 1;
            self.apply_rule(&node.op, &g, &mut slots);
        }
        Ok(Grads { slots, visits })
    }

    fn accumulate(&self, slots: &mut [Option<Vec<T>>], v: Var, g: Vec<T>) {
        if !self.nodes[v.0].tracked {
            return;
        }
        match &mut slots[v.0] {
            Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, &b)| *a += b),
            slot @ None => *slot = Some(g),
        }
    }

    fn data(&self, v: Var) -> &[T] {
        self.nodes[v.0].value.data()
    }

    fn apply_rule(&self, op: &Op<T>, g: &[T], slots: &mut [Option<Vec<T>>]) {
        match op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.accumulate(slots, *a, g.to_vec());
                self.accumulate(slots, *b, g.to_vec());
            }
            Op::Sub(a, b) => {
                self.accumulate(slots, *a, g.to_vec());
                self.accumulate(slots, *b, g.iter().map(|&v| -v).collect());
            }
            Op::Mul(a, b) => {
                let (da, db) = (self.data(*a), self.data(*b));
                self.accumulate(slots, *a, g.iter().zip(db).map(|(&g, &y)| g * y).collect());
                self.accumulate(slots, *b, g.iter().zip(da).map(|(&g, &x)| g * x).collect());
            }
            Op::Relu(a) => {
                let da = self.data(*a);
                let ga = g
                    .iter()
                    .zip(da)
                    .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
                    .collect();
                self.accumulate(slots, *a, ga);
            }
            Op::Scale(a, c) => self.accumulate(slots, *a, g.iter().map(|&v| v * *c).collect()),
            Op::ConcatChannels(a, b) => {
                let [n, ca, h, w] = self.value(*a).dims4().expect("checked at record time");
                let cb = self.value(*b).shape()[1];
                let plane = h * w;
                let mut ga = Vec::with_capacity(n * ca * plane);
                let mut gb = Vec::with_capacity(n * cb * plane);
                for chunk in g.chunks((ca + cb) * plane) {
                    ga.extend_from_slice(&chunk[..ca * plane]);
                    gb.extend_from_slice(&chunk[ca * plane..]);
                }
                self.accumulate(slots, *a, ga);
                self.accumulate(slots, *b, gb);
            }
            Op::Mean(a) => {
                let n = self.value(*a).len();
                let each = g[0] / T::from_usize(n).unwrap();
                self.accumulate(slots, *a, vec![each; n]);
            }
            Op::Sum(a) => {
                let n = self.value(*a).len();
                self.accumulate(slots, *a, vec![g[0]; n]);
            }
            Op::Conv2d { x, w, b, geom } => {
                if self.nodes[x.0].tracked {
                    let gx = conv::conv2d_backward_input(g, self.data(*w), geom);
                    self.accumulate(slots, *x, gx);
                }
                let wants_params =
                    self.nodes[w.0].tracked || b.is_some_and(|b| self.nodes[b.0].tracked);
                if wants_params {
                    let (gw, gb) = conv::conv2d_backward_params(self.data(*x), g, geom);
                    self.accumulate(slots, *w, gw);
                    if let Some(b) = b {
                        self.accumulate(slots, *b, gb);
                    }
                }
            }
            Op::ConvTranspose2d { x, w, b, geom } => {
                if self.nodes[x.0].tracked {
                    let gx = conv::conv_transpose2d_backward_input(g, self.data(*w), geom);
                    self.accumulate(slots, *x, gx);
                }
                let wants_params =
                    self.nodes[w.0].tracked || b.is_some_and(|b| self.nodes[b.0].tracked);
                if wants_params {
                    let (gw, gb) = conv::conv_transpose2d_backward_params(self.data(*x), g, geom);
                    self.accumulate(slots, *w, gw);
                    if let Some(b) = b {
                        self.accumulate(slots, *b, gb);
                    }
                }
            }
            Op::MaxPool2d { x, argmax } => {
                let gx = pool::maxpool2x2_backward(g, argmax, self.value(*x).len());
                self.accumulate(slots, *x, gx);
            }
            Op::Upsample2x(x) => {
                let [n, c, h, w] = self.value(*x).dims4().expect("checked at record time");
                let gx = resample::resize_backward(g, n * c, h, w, 2 * h, 2 * w);
                self.accumulate(slots, *x, gx);
            }
            Op::BatchNormTrain {
                x,
                gamma,
                beta,
                stats,
            } => {
                let dims = self.value(*x).dims4().expect("checked at record time");
                let (gx, gg, gb) =
                    norm::batchnorm_train_backward(g, dims, self.data(*gamma), stats);
                self.accumulate(slots, *x, gx);
                self.accumulate(slots, *gamma, gg);
                self.accumulate(slots, *beta, gb);
            }
            Op::BatchNormEval {
                x,
                gamma,
                beta,
                xhat,
                inv,
            } => {
                let dims = self.value(*x).dims4().expect("checked at record time");
                let (gx, gg, gb) =
                    norm::batchnorm_eval_backward(g, dims, self.data(*gamma), xhat, inv);
                self.accumulate(slots, *x, gx);
                self.accumulate(slots, *gamma, gg);
                self.accumulate(slots, *beta, gb);
            }
            Op::L1 { pred, target } => {
                let gp = loss::l1_backward(self.data(*pred), self.data(*target), g[0]);
                if self.nodes[target.0].tracked {
                    self.accumulate(slots, *target, gp.iter().map(|&v| -v).collect());
                }
                self.accumulate(slots, *pred, gp);
            }
            Op::RoundHalf(x) => {
                let mut gx = g.to_vec();
                binary16::round_slice(&mut gx);
                self.accumulate(slots, *x, gx);
            }
        }
    }
}
