//! The composite optimization problem: per-agent smooth (possibly
//! nonconvex) objectives, a shared convex regularizer, a convex feasible
//! set, and the seeded randomness source behind minibatch draws.
//!
//! Expectations are never computed symbolically. "Expected" quantities in
//! tests and metrics come from either the deterministic full-data objective
//! or empirical means over recorded realizations.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{MlpArchitecture, SampleLinearization};

/// Convex regularizer `G` with a proximal operator.
#[derive(Debug, Clone, PartialEq)]
pub enum Regularizer {
    Zero,
    /// `G(x) = lambda * ||x||^2`
    SquaredL2 { lambda: f64 },
    /// `G(x) = lambda * ||x||_1`
    L1 { lambda: f64 },
}

impl Regularizer {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::SquaredL2 { lambda } => lambda * x.norm_squared(),
            Regularizer::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
        }
    }

    /// `prox_{gamma G}(v) = argmin_x G(x) + ||x - v||^2 / (2 gamma)`.
    pub fn prox(&self, v: &DVector<f64>, gamma: f64) -> DVector<f64> {
        match self {
            Regularizer::Zero => v.clone(),
            Regularizer::SquaredL2 { lambda } => v / (1.0 + 2.0 * gamma * lambda),
            Regularizer::L1 { lambda } => {
                let t = gamma * lambda;
                v.map(|c| {
                    if c > t {
                        c - t
                    } else if c < -t {
                        c + t
                    } else {
                        0.0
                    }
                })
            }
        }
    }

    /// Componentwise regularizers commute with box projections.
    pub fn is_separable(&self) -> bool {
        true
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Regularizer::Zero)
    }

    /// Ridge coefficient when `G` is a squared l2 penalty (0 for `Zero`).
    pub fn ridge_lambda(&self) -> Option<f64> {
        match self {
            Regularizer::Zero => Some(0.0),
            Regularizer::SquaredL2 { lambda } => Some(*lambda),
            Regularizer::L1 { .. } => None,
        }
    }
}

/// Closed convex feasible set with a Euclidean projection.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    /// All of R^p.
    All,
    /// Axis-aligned box `[lower, upper]` (componentwise).
    Box {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    /// Euclidean ball of given radius centered at the origin.
    Ball { radius: f64 },
}

impl FeasibleSet {
    pub fn uniform_box(dimension: usize, half_width: f64) -> Self {
        FeasibleSet::Box {
            lower: DVector::from_element(dimension, -half_width),
            upper: DVector::from_element(dimension, half_width),
        }
    }

    pub fn contains(&self, x: &DVector<f64>, tolerance: f64) -> bool {
        match self {
            FeasibleSet::All => true,
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .enumerate()
                .all(|(i, &v)| v >= lower[i] - tolerance && v <= upper[i] + tolerance),
            FeasibleSet::Ball { radius } => x.norm() <= radius + tolerance,
        }
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            FeasibleSet::All => v.clone(),
            FeasibleSet::Box { lower, upper } => {
                DVector::from_fn(v.len(), |i, _| v[i].clamp(lower[i], upper[i]))
            }
            FeasibleSet::Ball { radius } => {
                let n = v.norm();
                if n <= *radius {
                    v.clone()
                } else {
                    v * (*radius / n)
                }
            }
        }
    }

    pub fn is_unconstrained(&self) -> bool {
        matches!(self, FeasibleSet::All)
    }

    /// Box constraints are componentwise, so prox-then-project is exact for
    /// separable regularizers.
    pub fn is_separable(&self) -> bool {
        matches!(self, FeasibleSet::All | FeasibleSet::Box { .. })
    }
}

/// Backward step of the composite splitting: prox of `G` composed with the
/// projection onto `K`. Exact when `G` is zero, `K` is all of R^p, or both
/// are separable (box plus componentwise regularizer); refused otherwise.
pub fn composite_backward(
    regularizer: &Regularizer,
    feasible_set: &FeasibleSet,
    v: &DVector<f64>,
    gamma: f64,
) -> Result<DVector<f64>> {
    if regularizer.is_zero() {
        return Ok(feasible_set.project(v));
    }
    if feasible_set.is_unconstrained() {
        return Ok(regularizer.prox(v, gamma));
    }
    if feasible_set.is_separable() && regularizer.is_separable() {
        return Ok(feasible_set.project(&regularizer.prox(v, gamma)));
    }
    Err(Error::UnsupportedComposite(
        "nonsmooth regularizer with a non-separable feasible set".into(),
    ))
}

/// One realization of the randomness: per-agent minibatch indices into the
/// agent's local shard.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Realization {
    pub per_agent: Vec<Vec<usize>>,
}

/// Seeded i.i.d. minibatch sampler. Each agent draws from its own
/// independent substream, so the realization sequence depends only on the
/// seed, the shard sizes and the batch size.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    batch_size: usize,
    shard_sizes: Vec<usize>,
    rngs: Vec<ChaCha8Rng>,
}

impl RandomSource {
    pub fn new(seed: u64, shard_sizes: Vec<usize>, batch_size: usize) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::ConfigValue {
                key: "batch_size".into(),
                reason: "must be at least 1".into(),
            });
        }
        if shard_sizes.iter().any(|&s| s == 0) {
            return Err(Error::Dataset("empty shard".into()));
        }
        let rngs = Self::make_rngs(seed, shard_sizes.len());
        Ok(Self {
            seed,
            batch_size,
            shard_sizes,
            rngs,
        })
    }

    fn make_rngs(seed: u64, agents: usize) -> Vec<ChaCha8Rng> {
        (0..agents)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64 + 1);
                rng
            })
            .collect()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    /// Draws indices i.i.d. with replacement, one batch per agent.
    pub fn draw(&mut self) -> Realization {
        let per_agent = self
            .rngs
            .iter_mut()
            .zip(&self.shard_sizes)
            .map(|(rng, &size)| (0..self.batch_size).map(|_| rng.gen_range(0..size)).collect())
            .collect();
        Realization { per_agent }
    }

    /// Rewinds to the state right after construction.
    pub fn reset(&mut self) {
        self.rngs = Self::make_rngs(self.seed, self.shard_sizes.len());
    }
}

/// Smooth local cost of one agent, evaluated on minibatch index sets.
pub trait LocalObjective: Send + Sync {
    fn dimension(&self) -> usize;

    /// Number of samples in this agent's local shard.
    fn shard_len(&self) -> usize;

    /// `f_i(x, xi)` for a minibatch realization `xi`.
    fn value(&self, x: &DVector<f64>, batch: &[usize]) -> f64;

    /// Gradient of `f_i(., xi)` at `x`.
    fn gradient(&self, x: &DVector<f64>, batch: &[usize]) -> DVector<f64>;

    /// Deterministic full-data value (the empirical counterpart of the
    /// expectation).
    fn full_value(&self, x: &DVector<f64>) -> f64;

    /// Deterministic full-data gradient.
    fn full_gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// First-order per-sample linearizations for the closed-form subproblem
    /// path, when the objective is a least-squares fit of a differentiable
    /// model. `None` means only the generic solver applies.
    fn linearize(&self, _x: &DVector<f64>, _batch: &[usize]) -> Option<Result<Vec<SampleLinearization>>> {
        None
    }
}

/// The full problem shared by every agent: local objectives, regularizer,
/// feasible set, dimension, and the seeded sampler.
pub struct ProblemInstance {
    agents: Vec<Box<dyn LocalObjective>>,
    pub regularizer: Regularizer,
    pub feasible_set: FeasibleSet,
    pub sampler: RandomSource,
    dimension: usize,
}

impl ProblemInstance {
    pub fn new(
        agents: Vec<Box<dyn LocalObjective>>,
        regularizer: Regularizer,
        feasible_set: FeasibleSet,
        sampler: RandomSource,
    ) -> Result<Self> {
        if agents.is_empty() {
            return Err(Error::Config("at least one agent required".into()));
        }
        let dimension = agents[0].dimension();
        for (i, a) in agents.iter().enumerate() {
            if a.dimension() != dimension {
                return Err(Error::Dimension {
                    expected: dimension,
                    actual: a.dimension(),
                });
            }
            let _ = i;
        }
        Ok(Self {
            agents,
            regularizer,
            feasible_set,
            sampler,
            dimension,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.agents.len()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn agent(&self, i: usize) -> &dyn LocalObjective {
        self.agents[i].as_ref()
    }

    pub fn total_samples(&self) -> usize {
        self.agents.iter().map(|a| a.shard_len()).sum()
    }

    /// Empirical mean over `sample_set` of `sum_i f_i(x, xi) + G(x)`.
    pub fn full_objective(&self, x: &DVector<f64>, sample_set: &[Realization]) -> Result<f64> {
        if !self.feasible_set.contains(x, 1e-9) {
            return Err(Error::Infeasible("x outside the feasible set".into()));
        }
        if sample_set.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut total = 0.0;
        for xi in sample_set {
            for (i, agent) in self.agents.iter().enumerate() {
                total += agent.value(x, &xi.per_agent[i]);
            }
        }
        Ok(total / sample_set.len() as f64 + self.regularizer.value(x))
    }

    /// Deterministic full-data objective `sum_i f_i(x) + G(x)`.
    pub fn empirical_objective(&self, x: &DVector<f64>) -> f64 {
        self.agents
            .iter()
            .map(|a| a.full_value(x))
            .sum::<f64>()
            + self.regularizer.value(x)
    }

    /// Gradient of the smooth part of the deterministic full-data objective.
    pub fn empirical_smooth_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.agents
            .iter()
            .map(|a| a.full_gradient(x))
            .fold(DVector::zeros(self.dimension), |acc, g| acc + g)
    }
}

/// Quadratic test fixture: `f_i(x, xi) = x' A_i x / 2 - (b_i + n_xi)' x`
/// with a zero-mean bounded noise table on the linear coefficient.
pub struct QuadraticObjective {
    a: DMatrix<f64>,
    b: DVector<f64>,
    noise: Vec<DVector<f64>>,
}

impl QuadraticObjective {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, noise: Vec<DVector<f64>>) -> Self {
        let noise = if noise.is_empty() {
            vec![DVector::zeros(b.len())]
        } else {
            noise
        };
        Self { a, b, noise }
    }

    pub fn curvature(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.b
    }

    fn mean_noise(&self, batch: &[usize]) -> DVector<f64> {
        let mut acc = DVector::zeros(self.b.len());
        for &k in batch {
            acc += &self.noise[k];
        }
        acc / batch.len().max(1) as f64
    }
}

impl LocalObjective for QuadraticObjective {
    fn dimension(&self) -> usize {
        self.b.len()
    }

    fn shard_len(&self) -> usize {
        self.noise.len()
    }

    fn value(&self, x: &DVector<f64>, batch: &[usize]) -> f64 {
        let quad = 0.5 * x.dot(&(&self.a * x));
        quad - (&self.b + self.mean_noise(batch)).dot(x)
    }

    fn gradient(&self, x: &DVector<f64>, batch: &[usize]) -> DVector<f64> {
        &self.a * x - &self.b - self.mean_noise(batch)
    }

    fn full_value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.a * x)) - self.b.dot(x)
    }

    fn full_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.b
    }
}

/// Analytical reference for the quadratic fixture: the unique minimizer of
/// `sum_i f_i + lambda ||x||^2` from a direct linear solve.
#[derive(Debug, Clone)]
pub struct QuadraticOracle {
    pub a_sum: DMatrix<f64>,
    pub b_sum: DVector<f64>,
    pub lambda: f64,
}

impl QuadraticOracle {
    pub fn minimizer(&self) -> DVector<f64> {
        let p = self.b_sum.len();
        let system = &self.a_sum + DMatrix::identity(p, p) * (2.0 * self.lambda);
        system
            .lu()
            .solve(&self.b_sum)
            .expect("strongly convex system is invertible")
    }
}

fn random_orthogonal(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
    m.qr().q()
}

/// Builds the quadratic fixture. Each `A_i` is SPD with eigenvalues
/// log-spaced in `[1, condition_number]`; noise is a zero-mean table of
/// `+/-v` pairs scaled by `noise_scale` (a single zero entry when the scale
/// is 0, which makes the instance deterministic).
pub fn make_quadratic_instance(
    agent_count: usize,
    dimension: usize,
    seed: u64,
    condition_number: f64,
    noise_scale: f64,
    lambda: f64,
) -> Result<(ProblemInstance, QuadraticOracle)> {
    if agent_count == 0 || dimension == 0 {
        return Err(Error::Config(
            "agent_count and dimension must be at least 1".into(),
        ));
    }
    if condition_number < 1.0 {
        return Err(Error::ConfigValue {
            key: "condition_number".into(),
            reason: "must be at least 1".into(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agents: Vec<Box<dyn LocalObjective>> = Vec::with_capacity(agent_count);
    let mut a_sum = DMatrix::zeros(dimension, dimension);
    let mut b_sum = DVector::zeros(dimension);
    let mut shard_sizes = Vec::with_capacity(agent_count);
    for _ in 0..agent_count {
        let q = random_orthogonal(&mut rng, dimension);
        let eigs = DVector::from_fn(dimension, |k, _| {
            if dimension == 1 {
                1.0
            } else {
                condition_number.powf(k as f64 / (dimension - 1) as f64)
            }
        });
        let a = &q * DMatrix::from_diagonal(&eigs) * q.transpose();
        // Symmetrize away round-off from the triple product.
        let a = (&a + a.transpose()) * 0.5;
        let b = DVector::from_fn(dimension, |_, _| rng.gen_range(-1.0..1.0));
        let noise = if noise_scale > 0.0 {
            let mut table = Vec::with_capacity(16);
            for _ in 0..8 {
                let v = DVector::from_fn(dimension, |_, _| {
                    rng.gen_range(-noise_scale..=noise_scale)
                });
                table.push(v.clone());
                table.push(-v);
            }
            table
        } else {
            vec![DVector::zeros(dimension)]
        };
        a_sum += &a;
        b_sum += &b;
        shard_sizes.push(noise.len());
        agents.push(Box::new(QuadraticObjective::new(a, b, noise)));
    }
    let regularizer = if lambda > 0.0 {
        Regularizer::SquaredL2 { lambda }
    } else {
        Regularizer::Zero
    };
    let sampler = RandomSource::new(seed.wrapping_add(1), shard_sizes, 1)?;
    let problem = ProblemInstance::new(agents, regularizer, FeasibleSet::All, sampler)?;
    Ok((problem, QuadraticOracle { a_sum, b_sum, lambda }))
}

/// Squared-loss regression of a tanh MLP on one agent's data shard.
pub struct NnObjective {
    arch: MlpArchitecture,
    inputs: Vec<DVector<f64>>,
    targets: Vec<f64>,
}

impl NnObjective {
    pub fn new(arch: MlpArchitecture, inputs: Vec<DVector<f64>>, targets: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::Dataset("shard inputs/targets mismatch or empty".into()));
        }
        Ok(Self {
            arch,
            inputs,
            targets,
        })
    }

    pub fn architecture(&self) -> &MlpArchitecture {
        &self.arch
    }

    fn batch_loss(&self, w: &DVector<f64>, indices: impl Iterator<Item = usize> + Clone) -> f64 {
        let count = indices.clone().count().max(1);
        indices
            .map(|m| {
                let g = self.arch.forward(w, &self.inputs[m]).expect("dims fixed");
                let e = self.targets[m] - g;
                e * e
            })
            .sum::<f64>()
            / count as f64
    }

    fn batch_gradient(
        &self,
        w: &DVector<f64>,
        indices: impl Iterator<Item = usize> + Clone,
    ) -> DVector<f64> {
        let count = indices.clone().count().max(1);
        let mut acc = DVector::zeros(w.len());
        for m in indices {
            let (g, jac) = self
                .arch
                .forward_with_jacobian(w, &self.inputs[m])
                .expect("dims fixed");
            acc += jac * (2.0 * (g - self.targets[m]));
        }
        acc / count as f64
    }
}

impl LocalObjective for NnObjective {
    fn dimension(&self) -> usize {
        self.arch.param_count()
    }

    fn shard_len(&self) -> usize {
        self.inputs.len()
    }

    fn value(&self, w: &DVector<f64>, batch: &[usize]) -> f64 {
        self.batch_loss(w, batch.iter().copied())
    }

    fn gradient(&self, w: &DVector<f64>, batch: &[usize]) -> DVector<f64> {
        self.batch_gradient(w, batch.iter().copied())
    }

    fn full_value(&self, w: &DVector<f64>) -> f64 {
        self.batch_loss(w, 0..self.inputs.len())
    }

    fn full_gradient(&self, w: &DVector<f64>) -> DVector<f64> {
        self.batch_gradient(w, 0..self.inputs.len())
    }

    fn linearize(&self, w: &DVector<f64>, batch: &[usize]) -> Option<Result<Vec<SampleLinearization>>> {
        let samples: Vec<(DVector<f64>, f64)> = batch
            .iter()
            .map(|&m| (self.inputs[m].clone(), self.targets[m]))
            .collect();
        Some(self.arch.linearize_batch(w, &samples))
    }
}

/// Builds the distributed NN regression instance: data is shuffled with the
/// seed and split into contiguous near-equal shards, one per agent;
/// `G(w) = lambda ||w||^2`, `K = R^p`, minibatches drawn with replacement.
pub fn make_nn_regression_instance(
    features: &DMatrix<f64>,
    targets: &DVector<f64>,
    agent_count: usize,
    batch_size: usize,
    arch: MlpArchitecture,
    lambda: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    let n = features.nrows();
    if n == 0 {
        return Err(Error::Dataset("empty dataset".into()));
    }
    if targets.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: targets.len(),
        });
    }
    if features.ncols() != arch.input_dim() {
        return Err(Error::Dimension {
            expected: arch.input_dim(),
            actual: features.ncols(),
        });
    }
    if n < agent_count {
        return Err(Error::Dataset(format!(
            "cannot shard {n} samples across {agent_count} agents; reduce agents"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let base = n / agent_count;
    let extra = n % agent_count;
    let mut agents: Vec<Box<dyn LocalObjective>> = Vec::with_capacity(agent_count);
    let mut shard_sizes = Vec::with_capacity(agent_count);
    let mut cursor = 0;
    for i in 0..agent_count {
        let size = base + usize::from(i < extra);
        let shard = &order[cursor..cursor + size];
        cursor += size;
        let inputs: Vec<DVector<f64>> = shard
            .iter()
            .map(|&m| features.row(m).transpose())
            .collect();
        let ys: Vec<f64> = shard.iter().map(|&m| targets[m]).collect();
        shard_sizes.push(size);
        agents.push(Box::new(NnObjective::new(arch.clone(), inputs, ys)?));
    }
    let regularizer = if lambda > 0.0 {
        Regularizer::SquaredL2 { lambda }
    } else {
        Regularizer::Zero
    };
    let sampler = RandomSource::new(seed.wrapping_add(1), shard_sizes, batch_size)?;
    ProblemInstance::new(agents, regularizer, FeasibleSet::All, sampler)
}
