use indexmap::IndexMap;
use rand::Rng;

use super::config::{Arch, ModelConfig};
use super::recipe::{BlockSpec, Recipe};
use crate::error::{size_err, Error, Result};
use crate::nn::{self, Mode};
use crate::rng;
use crate::scalar::Scalar;
use crate::tape::{Grads, Tape, Var};
use crate::tensor::Tensor;

/// Named parameters and batch-norm buffers of one model, in a fixed order
/// shared by every replica built from the same config.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph<T> {
    cfg: ModelConfig,
    seed: u64,
    params: IndexMap<String, Tensor<T>>,
    buffers: IndexMap<String, Tensor<T>>,
}

/// Result of recording a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// One entry per output head, deepest last.
    pub outputs: Vec<Var>,
    /// Tape leaves of the parameters, in [`Graph::params`] order.
    pub params: Vec<Var>,
}

impl<T: Scalar> Graph<T> {
    pub fn build(cfg: ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let recipe = Recipe::new(&cfg);
        let mut g = Self::empty(cfg, seed);
        for b in recipe.encoder.iter().chain(&recipe.decoder) {
            g.add_block(b);
        }
        for u in &recipe.ups {
            g.add_conv(&u.name, u.cin, u.cout, 2, true);
        }
        for h in &recipe.heads {
            g.add_conv(&h.name, h.cin, cfg.out_ch, 1, false);
        }
        Ok(g)
    }

    pub fn build_unet(cfg: ModelConfig, seed: u64) -> Result<Self> {
        if cfg.arch != Arch::Unet {
            return Err(Error::Config("build_unet needs arch = unet".into()));
        }
        Self::build(cfg, seed)
    }

    pub fn build_unetpp(cfg: ModelConfig, seed: u64) -> Result<Self> {
        if cfg.arch != Arch::Unetpp {
            return Err(Error::Config("build_unetpp needs arch = unetpp".into()));
        }
        Self::build(cfg, seed)
    }

    /// A graph with no parameters.
    pub fn empty(cfg: ModelConfig, seed: u64) -> Self {
        Self {
            cfg,
            seed,
            params: IndexMap::new(),
            buffers: IndexMap::new(),
        }
    }

    /// Kaiming-uniform (ReLU gain) weights and fan-in-bounded biases, each
    /// tensor drawn from its own stream keyed by `(seed, name)`.
    pub fn add_conv(&mut self, name: &str, cin: usize, cout: usize, k: usize, transposed: bool) {
        let fan_in = (cin * k * k) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let shape = if transposed {
            [cin, cout, k, k]
        } else {
            [cout, cin, k, k]
        };
        let weight = uniform_tensor(&shape, bound, self.seed, &format!("{name}.weight"));
        let bias = uniform_tensor(
            &[cout],
            1.0 / fan_in.sqrt(),
            self.seed,
            &format!("{name}.bias"),
        );
        self.insert_param(format!("{name}.weight"), weight);
        self.insert_param(format!("{name}.bias"), bias);
    }

    pub fn add_batchnorm(&mut self, name: &str, c: usize) {
        self.insert_param(format!("{name}.gamma"), Tensor::full(&[c], T::one()));
        self.insert_param(format!("{name}.beta"), Tensor::zeros(&[c]));
        self.buffers
            .insert(format!("{name}.running_mean"), Tensor::zeros(&[c]));
        self.buffers
            .insert(format!("{name}.running_var"), Tensor::full(&[c], T::one()));
    }

    fn add_block(&mut self, b: &BlockSpec) {
        self.add_conv(&format!("{}.conv1", b.name), b.cin, b.cout, 3, false);
        self.add_batchnorm(&format!("{}.bn1", b.name), b.cout);
        self.add_conv(&format!("{}.conv2", b.name), b.cout, b.cout, 3, false);
        self.add_batchnorm(&format!("{}.bn2", b.name), b.cout);
    }

    fn insert_param(&mut self, name: String, t: Tensor<T>) {
        let prev = self.params.insert(name, t);
        debug_assert!(prev.is_none(), "duplicate parameter name");
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &IndexMap<String, Tensor<T>> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut IndexMap<String, Tensor<T>> {
        &mut self.params
    }

    pub fn buffers(&self) -> &IndexMap<String, Tensor<T>> {
        &self.buffers
    }

    pub fn buffers_mut(&mut self) -> &mut IndexMap<String, Tensor<T>> {
        &mut self.buffers
    }

    /// Trainable element count (batch-norm affine included, running stats not).
    pub fn param_count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    pub fn zero_grad(&mut self) {
        self.params.values_mut().for_each(Tensor::zero_grad);
    }

    pub fn register_params(&self, tape: &mut Tape<T>) -> Vec<Var> {
        self.params
            .values()
            .map(|t| tape.leaf(t.clone(), true))
            .collect()
    }

    /// Records a forward pass of `input: [N, 1, H, W]`.
    pub fn forward(
        &mut self,
        tape: &mut Tape<T>,
        input: Var,
        mode: Mode,
        amp: bool,
    ) -> Result<Forward> {
        let params = self.register_params(tape);
        let outputs = self.forward_with(tape, &params, input, mode, amp)?;
        Ok(Forward { outputs, params })
    }

    /// Forward pass reading parameters from caller-supplied tape variables
    /// (one per entry of [`Graph::params`], same order).
    pub fn forward_with(
        &mut self,
        tape: &mut Tape<T>,
        params: &[Var],
        input: Var,
        mode: Mode,
        amp: bool,
    ) -> Result<Vec<Var>> {
        if params.len() != self.params.len() {
            return Err(size_err!(
                "{} parameter variables for {} parameters",
                params.len(),
                self.params.len()
            ));
        }
        let [_, c, h, w] = tape.value(input).dims4()?;
        if c != self.cfg.in_ch {
            return Err(size_err!(
                "input has {c} channels, model expects {}",
                self.cfg.in_ch
            ));
        }
        self.cfg.check_extent(h, w).map_err(|e| size_err!("{e}"))?;
        let recipe = Recipe::new(&self.cfg);
        let mut ctx = Ctx {
            graph: self,
            tape,
            pvars: params,
            mode,
            amp,
        };
        match ctx.graph.cfg.arch {
            Arch::Unet => ctx.unet(&recipe, input),
            Arch::Unetpp => ctx.unetpp(&recipe, input),
        }
    }

    /// Training objective: unweighted mean of per-head L1 losses.
    pub fn training_loss(tape: &mut Tape<T>, outputs: &[Var], target: Var) -> Result<Var> {
        let mut total: Option<Var> = None;
        for &o in outputs {
            let l = tape.l1_loss(o, target)?;
            total = Some(match total {
                Some(t) => tape.add(t, l)?,
                None => l,
            });
        }
        let total = total.ok_or_else(|| Error::Contract("model produced no outputs".into()))?;
        if outputs.len() == 1 {
            Ok(total)
        } else {
            Ok(tape.scale(total, T::one() / T::from_usize(outputs.len()).unwrap()))
        }
    }

    /// Eval-mode prediction from the deepest head.
    pub fn predict(&mut self, batch: &Tensor<T>, amp: bool) -> Result<Tensor<T>> {
        let mut tape = Tape::new();
        let x = tape.constant(batch.clone());
        let fwd = self.forward(&mut tape, x, Mode::Eval, amp)?;
        let last = *fwd.outputs.last().expect("at least one head");
        Ok(tape.value(last).clone())
    }

    /// Adds the gradients of `params` (as returned by [`Graph::forward`]) into
    /// the parameters' gradient slots.
    pub fn accumulate_grads(&mut self, grads: &Grads<T>, params: &[Var]) -> Result<()> {
        for (t, &v) in self.params.values_mut().zip(params) {
            grads.accumulate_into(v, t)?;
        }
        Ok(())
    }

    /// Gradient buffers in parameter order; missing slots read as zeros.
    pub fn grads(&self) -> Vec<Vec<T>> {
        self.params
            .values()
            .map(|t| {
                t.grad()
                    .map(<[T]>::to_vec)
                    .unwrap_or_else(|| vec![T::zero(); t.len()])
            })
            .collect()
    }

    pub fn set_grads(&mut self, grads: Vec<Vec<T>>) -> Result<()> {
        if grads.len() != self.params.len() {
            return Err(size_err!(
                "{} gradient buffers for {} parameters",
                grads.len(),
                self.params.len()
            ));
        }
        for (t, g) in self.params.values_mut().zip(grads) {
            if g.len() != t.len() {
                return Err(size_err!(
                    "gradient length {} for tensor of {} elements",
                    g.len(),
                    t.len()
                ));
            }
            t.set_grad(Some(g));
        }
        Ok(())
    }

    /// Copies parameter and buffer values from `other` (same structure).
    pub fn copy_state_from(&mut self, other: &Graph<T>) -> Result<()> {
        if self.params.len() != other.params.len() || self.buffers.len() != other.buffers.len() {
            return Err(Error::ReplicaDivergence(
                "graphs differ in structure".into(),
            ));
        }
        for ((n, dst), (m, src)) in self.params.iter_mut().zip(&other.params) {
            if n != m || dst.shape() != src.shape() {
                return Err(Error::ReplicaDivergence(format!("parameter {n} vs {m}")));
            }
            dst.data_mut().copy_from_slice(src.data());
        }
        for ((n, dst), (m, src)) in self.buffers.iter_mut().zip(&other.buffers) {
            if n != m || dst.shape() != src.shape() {
                return Err(Error::ReplicaDivergence(format!("buffer {n} vs {m}")));
            }
            dst.data_mut().copy_from_slice(src.data());
        }
        Ok(())
    }
}

fn uniform_tensor<T: Scalar>(shape: &[usize], bound: f64, seed: u64, label: &str) -> Tensor<T> {
    let mut r = rng::keyed(seed, label);
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| T::from_f64_lossy((r.gen::<f64>() * 2.0 - 1.0) * bound))
        .collect();
    Tensor::from_vec(shape, data).expect("shape matches generated length")
}

struct Ctx<'a, T: Scalar> {
    graph: &'a mut Graph<T>,
    tape: &'a mut Tape<T>,
    pvars: &'a [Var],
    mode: Mode,
    amp: bool,
}

impl<T: Scalar> Ctx<'_, T> {
    fn param(&self, name: &str) -> Var {
        let idx = self
            .graph
            .params
            .get_index_of(name)
            .unwrap_or_else(|| panic!("recipe references missing parameter {name}"));
        self.pvars[idx]
    }

    /// Autocast boundary: under AMP, convolution operands and results are
    /// rounded to binary16 while accumulation stays in the host type.
    fn half(&mut self, v: Var) -> Var {
        if self.amp {
            self.tape.round_half(v)
        } else {
            v
        }
    }

    fn conv(&mut self, x: Var, name: &str, pad: usize) -> Result<Var> {
        let w = self.param(&format!("{name}.weight"));
        let b = self.param(&format!("{name}.bias"));
        let (x, w, b) = (self.half(x), self.half(w), self.half(b));
        let y = nn::conv2d(
            self.tape,
            x,
            &nn::Conv2dParams {
                weight: w,
                bias: b,
                stride: 1,
                padding: pad,
            },
        )?;
        Ok(self.half(y))
    }

    fn conv_t(&mut self, x: Var, name: &str) -> Result<Var> {
        let w = self.param(&format!("{name}.weight"));
        let b = self.param(&format!("{name}.bias"));
        let (x, w, b) = (self.half(x), self.half(w), self.half(b));
        let y = nn::conv_transpose2d(
            self.tape,
            x,
            &nn::Conv2dParams {
                weight: w,
                bias: b,
                stride: 2,
                padding: 0,
            },
        )?;
        Ok(self.half(y))
    }

    fn bn(&mut self, x: Var, name: &str) -> Result<Var> {
        let gamma = self.param(&format!("{name}.gamma"));
        let beta = self.param(&format!("{name}.beta"));
        let mkey = format!("{name}.running_mean");
        let vkey = format!("{name}.running_var");
        let mut mean = self.graph.buffers[&mkey].data().to_vec();
        let mut var = self.graph.buffers[&vkey].data().to_vec();
        let y = nn::batchnorm2d(
            self.tape,
            x,
            gamma,
            beta,
            &mut mean,
            &mut var,
            T::from_f64_lossy(nn::BN_MOMENTUM),
            T::from_f64_lossy(nn::BN_EPS),
            self.mode,
        )?;
        if self.mode == Mode::Train {
            self.graph.buffers[&mkey].data_mut().copy_from_slice(&mean);
            self.graph.buffers[&vkey].data_mut().copy_from_slice(&var);
        }
        Ok(y)
    }

    fn block(&mut self, x: Var, name: &str) -> Result<Var> {
        let mut h = x;
        for stage in 1..=2 {
            h = self.conv(h, &format!("{name}.conv{stage}"), 1)?;
            h = self.bn(h, &format!("{name}.bn{stage}"))?;
            h = self.tape.relu(h);
        }
        Ok(h)
    }

    fn head(&mut self, x: Var, name: &str) -> Result<Var> {
        self.conv(x, name, 0)
    }

    fn unet(&mut self, r: &Recipe, input: Var) -> Result<Vec<Var>> {
        let depth = r.encoder.len();
        let mut skips = Vec::with_capacity(depth);
        let mut x = input;
        for (level, enc) in r.encoder.iter().enumerate() {
            if level > 0 {
                x = self.tape.maxpool2d(x)?;
            }
            x = self.block(x, &enc.name)?;
            skips.push(x);
        }
        for (up, dec) in r.ups.iter().zip(&r.decoder) {
            let level = dec.node.0;
            let u = self.conv_t(x, &up.name)?;
            let cat = self.tape.concat_channels(skips[level], u)?;
            x = self.block(cat, &dec.name)?;
        }
        let y = self.head(x, &r.heads[0].name)?;
        Ok(vec![y])
    }

    fn unetpp(&mut self, r: &Recipe, input: Var) -> Result<Vec<Var>> {
        let depth = r.encoder.len();
        let mut grid: Vec<Vec<Var>> = vec![Vec::new(); depth];
        let mut x = input;
        for (level, enc) in r.encoder.iter().enumerate() {
            if level > 0 {
                x = self.tape.maxpool2d(x)?;
            }
            x = self.block(x, &enc.name)?;
            grid[level].push(x);
        }
        // recipe lists decoder nodes column by column, so every input exists
        for node in &r.decoder {
            let (i, j) = node.node;
            let mut cat = grid[i][0];
            for &prev in &grid[i][1..j] {
                cat = self.tape.concat_channels(cat, prev)?;
            }
            let up = self.tape.upsample2x(grid[i + 1][j - 1])?;
            cat = self.tape.concat_channels(cat, up)?;
            let out = self.block(cat, &node.name)?;
            debug_assert_eq!(grid[i].len(), j);
            grid[i].push(out);
        }
        r.heads
            .iter()
            .map(|h| self.head(grid[h.node.0][h.node.1], &h.name))
            .collect()
    }
}
