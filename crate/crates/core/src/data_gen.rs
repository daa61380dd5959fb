//! Ground-truth classifiers and margin-separated mixture distributions.
//!
//! A [`GroundTruth`] bundles a unit-norm classifier `w*`, the margin `γ` it
//! realizes on the clean support, and the mixture the instances come from.
//! Component means sit along mutually orthogonal class directions at a radius
//! chosen to satisfy both the margin and the pairwise separation requirement.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::model::{margin_from_scores, LabeledPoint, LabeledSet, WeightMatrix};
use crate::rng::rng_from_seed;

/// Distance-prune constant of the clustering pipeline.
pub const DISTANCE_PRUNE_FACTOR: f64 = 4761.0;

/// Headroom over the distance-prune threshold used by [`default_separation`].
pub const PRUNE_HEADROOM: f64 = 1.25;

/// Largest candidate scale `σ̂`, relative to `σ`, that [`default_separation`]
/// budgets for. The smallest candidate scale is a low quantile of pairwise
/// distances over `√d`, which tends to `√2 σ` for Gaussian data.
pub const SCALE_SLACK: f64 = std::f64::consts::SQRT_2;

/// Multiplier `κ` in `‖μ_a − μ_b‖ ≥ κ (σ_a + σ_b) / √α` that keeps clean
/// components apart under the clustering pipeline's literal constants, and is
/// never below the mixture separation requirement `C²`.
///
/// A filtered cell may keep a spread of up to `C σ̂`, so two cells are only
/// guaranteed to survive distance pruning when their means are more than
/// `4761 C · 2 C σ̂ / √α` apart.
pub fn default_separation(c: f64) -> f64 {
    (PRUNE_HEADROOM * DISTANCE_PRUNE_FACTOR * c * c * SCALE_SLACK).max(c * c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Gaussian,
    /// Uniform on a ball whose covariance is `σ² I`.
    UniformBall,
    /// Coordinate-wise Student-t with `nu > 2`, rescaled to variance `σ²`.
    StudentT { nu: f64 },
}

impl Shape {
    pub fn is_log_concave(&self) -> bool {
        !matches!(self, Shape::StudentT { .. })
    }

    fn validate(&self) -> Result<()> {
        if let Shape::StudentT { nu } = self {
            if !(*nu > 2.0) {
                return Err(Error::invalid(format!("student-t needs nu > 2, got {nu}")));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Gaussian => f.write_str("gaussian"),
            Shape::UniformBall => f.write_str("uniform-ball"),
            Shape::StudentT { nu } => write!(f, "student-t({nu})"),
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "gaussian" => return Ok(Shape::Gaussian),
            "uniform-ball" => return Ok(Shape::UniformBall),
            "student-t" => return Ok(Shape::StudentT { nu: 4.0 }),
            _ => {}
        }
        if let Some(inner) = s.strip_prefix("student-t(").and_then(|r| r.strip_suffix(')')) {
            let nu: f64 = inner
                .parse()
                .map_err(|_| Error::invalid(format!("bad student-t degrees of freedom: {inner}")))?;
            let shape = Shape::StudentT { nu };
            shape.validate()?;
            return Ok(shape);
        }
        Err(Error::invalid(format!(
            "unknown shape '{s}' (expected gaussian, uniform-ball, student-t(<nu>))"
        )))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentSpec {
    pub mean: Vec<f64>,
    pub sigma: f64,
    pub shape: Shape,
}

impl ComponentSpec {
    pub fn new(mean: Vec<f64>, sigma: f64, shape: Shape) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("component sigma must be >= 0, got {sigma}")));
        }
        shape.validate()?;
        Ok(Self { mean, sigma, shape })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let d = self.dim();
        let mut x = self.mean.clone();
        match self.shape {
            Shape::Gaussian => {
                for xi in x.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *xi += self.sigma * z;
                }
            }
            Shape::UniformBall => {
                let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                let len = norm(&dir);
                let u: f64 = rng.random();
                let radius = self.sigma * ((d + 2) as f64).sqrt() * u.powf(1.0 / d as f64);
                if len > 0.0 {
                    axpy(&mut x, radius / len, &dir);
                }
            }
            Shape::StudentT { nu } => {
                let t = StudentT::new(nu).expect("validated degrees of freedom");
                let scale = self.sigma * ((nu - 2.0) / nu).sqrt();
                for xi in x.iter_mut() {
                    *xi += scale * t.sample(rng);
                }
            }
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    pub components: Vec<ComponentSpec>,
    pub weights: Vec<f64>,
    pub alpha: f64,
}

impl MixtureSpec {
    pub fn new(components: Vec<ComponentSpec>, weights: Vec<f64>, alpha: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        if weights.len() != components.len() {
            return Err(Error::invalid("mixture weights and components differ in length"));
        }
        let d = components[0].dim();
        if components.iter().any(|c| c.dim() != d) {
            return Err(Error::invalid("mixture components differ in dimension"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        if !(alpha > 0.0) {
            return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
        }
        if let Some(q) = weights.iter().find(|&&q| q < alpha) {
            return Err(Error::invalid(format!("mixture weight {q} is below alpha = {alpha}")));
        }
        Ok(Self {
            components,
            weights,
            alpha,
        })
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Which mixture requirement fixed the component radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindingConstraint {
    Margin,
    Separation,
}

impl fmt::Display for BindingConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BindingConstraint::Margin => "margin",
            BindingConstraint::Separation => "separation",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub wstar: WeightMatrix,
    pub gamma: f64,
    pub spec: MixtureSpec,
    /// `w*`-label of each component mean.
    pub component_labels: Vec<usize>,
    /// Clustering constant `C` the separation was sized for.
    pub c: f64,
    pub radius: f64,
    pub binding: BindingConstraint,
    pub warnings: Vec<String>,
}

impl GroundTruth {
    pub fn k(&self) -> usize {
        self.wstar.k()
    }

    pub fn d(&self) -> usize {
        self.wstar.d()
    }

    /// Index of the component mean closest to `x`.
    pub fn nearest_component(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in self.spec.components.iter().enumerate() {
            let dd = crate::linalg::sq_dist(&c.mean, x);
            if dd < best_d {
                best_d = dd;
                best = j;
            }
        }
        best
    }
}

/// Inputs of [`make_ground_truth_with`].
#[derive(Debug, Clone, PartialEq)]
pub struct TruthParams {
    pub k: usize,
    pub d: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub c: f64,
    pub alpha: f64,
    pub shape: Shape,
    pub seed: u64,
    /// `κ` in `‖μ_a − μ_b‖ ≥ κ (σ_a + σ_b) / √α`.
    pub separation: f64,
    pub components_per_class: usize,
    /// Express the construction in a seeded random orthonormal frame instead
    /// of the standard basis.
    pub rotate: bool,
}

impl TruthParams {
    pub fn new(k: usize, d: usize, gamma: f64, sigma: f64, c: f64, alpha: f64, seed: u64) -> Self {
        Self {
            k,
            d,
            gamma,
            sigma,
            c,
            alpha,
            shape: Shape::Gaussian,
            seed,
            separation: default_separation(c),
            components_per_class: 1,
            rotate: false,
        }
    }
}

/// Gaussian ground truth with one component per class and uniform weights.
pub fn make_ground_truth(
    k: usize,
    d: usize,
    gamma: f64,
    sigma: f64,
    c: f64,
    alpha: f64,
    seed: u64,
) -> Result<GroundTruth> {
    make_ground_truth_with(&TruthParams::new(k, d, gamma, sigma, c, alpha, seed))
}

fn random_frame(d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d);
    while frame.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        for f in &frame {
            let p = dot(&v, f);
            axpy(&mut v, -p, f);
        }
        let n = norm(&v);
        if n > 1e-8 {
            v.iter_mut().for_each(|x| *x /= n);
            frame.push(v);
        }
    }
    frame
}

fn unit(d: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; d];
    e[i] = 1.0;
    e
}

pub fn make_ground_truth_with(p: &TruthParams) -> Result<GroundTruth> {
    let TruthParams {
        k,
        d,
        gamma,
        sigma,
        c,
        alpha,
        shape,
        seed,
        separation,
        components_per_class: per_class,
        rotate,
    } = *p;
    if k < 2 {
        return Err(Error::invalid(format!("need at least two classes, got k = {k}")));
    }
    if d < k {
        return Err(Error::invalid(format!("dimension d = {d} is smaller than k = {k}")));
    }
    if per_class == 0 {
        return Err(Error::invalid("components_per_class must be at least 1"));
    }
    let spare_axis = if k == 2 { 1 } else { k };
    if per_class > 1 && spare_axis >= d {
        return Err(Error::invalid(format!(
            "several components per class need a spare axis: d = {d} must exceed {spare_axis}"
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    if !(c >= 1.0) {
        return Err(Error::invalid(format!("C must be >= 1, got {c}")));
    }
    if !(separation >= 0.0) {
        return Err(Error::invalid(format!("separation must be >= 0, got {separation}")));
    }
    shape.validate()?;
    let n_comp = k * per_class;
    if !(alpha > 0.0 && alpha <= 1.0 / n_comp as f64 + 1e-12) {
        return Err(Error::invalid(format!(
            "alpha = {alpha} must lie in (0, 1/K] with K = {n_comp} components"
        )));
    }

    let frame: Vec<Vec<f64>> = if rotate {
        random_frame(d, seed)
    } else {
        (0..d).map(|i| unit(d, i)).collect()
    };

    // Per unit radius: margin of a component mean, norm of the row
    // differences (spread of the margin under noise), pairwise mean distance.
    let (margin_per_r, spread, dist_per_r) = if k == 2 {
        (2f64.sqrt(), 2f64.sqrt(), 2.0)
    } else {
        let kf = k as f64;
        (1.0 / kf.sqrt(), (2.0 / kf).sqrt(), 2f64.sqrt())
    };
    let target_margin = 2.0 * gamma + 3.0 * sigma * spread;
    let required_gap = separation * 2.0 * sigma / alpha.sqrt() * (1.0 + 1e-6);
    let r_margin = target_margin / margin_per_r;
    let r_sep = required_gap / dist_per_r;
    let (radius, binding) = if r_sep > r_margin {
        (r_sep, BindingConstraint::Separation)
    } else {
        (r_margin, BindingConstraint::Margin)
    };
    if !radius.is_finite() || radius > 1e12 {
        return Err(Error::infeasible(format!(
            "{binding} constraint needs component radius {radius:e}, beyond representable range"
        )));
    }

    let mut rows = vec![vec![0.0; d]; k];
    let mut bases = Vec::with_capacity(k);
    if k == 2 {
        let s = 1.0 / 2f64.sqrt();
        rows[0] = frame[0].iter().map(|v| v * s).collect();
        rows[1] = frame[0].iter().map(|v| -v * s).collect();
        bases.push(frame[0].iter().map(|v| v * radius).collect::<Vec<_>>());
        bases.push(frame[0].iter().map(|v| -v * radius).collect::<Vec<_>>());
    } else {
        let s = 1.0 / (k as f64).sqrt();
        for j in 0..k {
            rows[j] = frame[j].iter().map(|v| v * s).collect();
            bases.push(frame[j].iter().map(|v| v * radius).collect());
        }
    }
    let mut wstar = WeightMatrix::from_rows(rows)?;
    // Exact unit norm (the construction is already unit up to rounding).
    let n = wstar.norm();
    wstar = wstar.scaled(1.0 / n);

    let gap = required_gap.max(2.0 * gamma);
    let mut components = Vec::with_capacity(n_comp);
    let mut component_labels = Vec::with_capacity(n_comp);
    for (j, base) in bases.iter().enumerate() {
        for c_idx in 0..per_class {
            let mut mean = base.clone();
            if c_idx > 0 {
                axpy(&mut mean, c_idx as f64 * gap, &frame[spare_axis]);
            }
            components.push(ComponentSpec::new(mean, sigma, shape)?);
            component_labels.push(j + 1);
        }
    }
    let weights = vec![1.0 / n_comp as f64; n_comp];
    let spec = MixtureSpec::new(components, weights, alpha.min(1.0 / n_comp as f64))?;

    let mut warnings = Vec::new();
    if gamma <= 4.0 * c * sigma {
        let msg = format!("gamma = {gamma} <= 4*C*sigma = {}", 4.0 * c * sigma);
        log::warn!("{msg}");
        warnings.push(msg);
    }

    for (comp, &label) in spec.components.iter().zip(&component_labels) {
        let m = margin_from_scores(&wstar.scores(&comp.mean), label);
        debug_assert!(m >= 2.0 * gamma * (1.0 - 1e-9), "mean margin {m} below 2γ");
    }

    Ok(GroundTruth {
        wstar,
        gamma,
        spec,
        component_labels,
        c,
        radius,
        binding,
        warnings,
    })
}

/// `n` i.i.d. draws from one component.
pub fn sample_component(comp: &ComponentSpec, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    comp.shape.validate()?;
    let mut rng = rng_from_seed(seed);
    Ok((0..n).map(|_| comp.draw(&mut rng)).collect())
}

/// How component indices are assigned to the `n` clean draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Allocation {
    /// Each draw picks its component independently from the mixture weights.
    #[default]
    Iid,
    /// Component counts are `n q_j` rounded by largest remainder, then the
    /// order is shuffled. Points are still i.i.d. within a component.
    Proportional,
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Allocation::Iid => "iid",
            Allocation::Proportional => "proportional",
        })
    }
}

impl FromStr for Allocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "iid" => Ok(Allocation::Iid),
            "proportional" => Ok(Allocation::Proportional),
            other => Err(Error::invalid(format!(
                "unknown allocation '{other}' (expected iid or proportional)"
            ))),
        }
    }
}

/// A clean labeled sample plus provenance the learner never sees.
#[derive(Debug, Clone)]
pub struct CleanSample {
    pub set: LabeledSet,
    /// Mixture component each point was drawn from.
    pub components: Vec<usize>,
    pub attempts: usize,
    pub rejected: usize,
}

impl CleanSample {
    pub fn rejection_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.rejected as f64 / self.attempts as f64
        }
    }
}

fn proportional_counts(weights: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = weights.iter().map(|q| q * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &j in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[j] += 1;
        left -= 1;
    }
    counts
}

fn pick_component(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (j, q) in weights.iter().enumerate() {
        acc += q;
        if u < acc {
            return j;
        }
    }
    weights.len() - 1
}

/// Clean sample with i.i.d. component draws.
pub fn sample_clean(gt: &GroundTruth, n: usize, seed: u64) -> Result<CleanSample> {
    sample_clean_with(gt, n, seed, Allocation::Iid)
}

/// Draws `n` points labeled by `w*`, redrawing any whose margin is below `γ`.
pub fn sample_clean_with(
    gt: &GroundTruth,
    n: usize,
    seed: u64,
    allocation: Allocation,
) -> Result<CleanSample> {
    if n == 0 {
        return Err(Error::invalid("clean sample size must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let weights = &gt.spec.weights;
    let plan: Option<Vec<usize>> = match allocation {
        Allocation::Iid => None,
        Allocation::Proportional => {
            let counts = proportional_counts(weights, n);
            let mut plan: Vec<usize> = counts
                .iter()
                .enumerate()
                .flat_map(|(j, &c)| std::iter::repeat_n(j, c))
                .collect();
            plan.shuffle(&mut rng);
            Some(plan)
        }
    };

    let budget = 10 * n;
    let mut attempts = 0usize;
    let mut rejected = 0usize;
    let mut points = Vec::with_capacity(n);
    let mut components = Vec::with_capacity(n);
    for i in 0..n {
        let planned = plan.as_ref().map(|p| p[i]);
        loop {
            if attempts >= budget {
                return Err(Error::infeasible(format!(
                    "margin rejection exhausted {budget} attempts after {i} accepted points \
                     (gamma = {} too large for the component spread)",
                    gt.gamma
                )));
            }
            attempts += 1;
            let j = planned.unwrap_or_else(|| pick_component(weights, &mut rng));
            let x = gt.spec.components[j].draw(&mut rng);
            let scores = gt.wstar.scores(&x);
            let y = crate::model::predict(&gt.wstar, &x)?;
            if margin_from_scores(&scores, y) >= gt.gamma {
                points.push(LabeledPoint::new(x, y));
                components.push(j);
                break;
            }
            rejected += 1;
        }
    }
    let rate = rejected as f64 / attempts as f64;
    if rate > 0.5 {
        return Err(Error::infeasible(format!(
            "margin rejection rate {rate:.3} exceeds 0.5 (gamma = {} too large for sigma)",
            gt.gamma
        )));
    }
    let set = LabeledSet::new(gt.d(), gt.k(), points)?;
    Ok(CleanSample {
        set,
        components,
        attempts,
        rejected,
    })
}
