//! Multiclass linear classifiers and the pure functions around them.
//!
//! Labels are 1-based (`1..=k`) throughout the public API. A classifier is a
//! `k x d` matrix whose row `y` scores class `y`; the same storage is exposed
//! as the flat vector `w ∈ R^{kd}` (row-major), which is the view the block
//! feature map [`feature_map`] pairs with: `⟨w, Ψ(x, y)⟩ = ⟨w_y, x⟩`.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// A `k x d` weight matrix, one row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    k: usize,
    d: usize,
    data: Vec<f64>,
}

impl WeightMatrix {
    pub fn zeros(k: usize, d: usize) -> Self {
        Self {
            k,
            d,
            data: vec![0.0; k * d],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let k = rows.len();
        if k == 0 {
            return Err(Error::invalid("weight matrix needs at least one row"));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("weight matrix rows differ in length"));
        }
        Ok(Self {
            k,
            d,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_flat(k: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != k * d {
            return Err(Error::invalid(format!(
                "flat vector has length {}, expected {k}*{d}",
                data.len()
            )));
        }
        Ok(Self { k, d, data })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    /// Row of class `label` (1-based).
    #[inline]
    pub fn row(&self, label: usize) -> &[f64] {
        let i = label - 1;
        &self.data[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn row_mut(&mut self, label: usize) -> &mut [f64] {
        let i = label - 1;
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn as_flat_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            k: self.k,
            d: self.d,
            data: self.data.iter().map(|x| x * s).collect(),
        }
    }

    /// Euclidean projection onto the ball `‖w‖ ≤ radius`.
    pub fn project_to_ball(&mut self, radius: f64) {
        let n = self.norm();
        if n > radius {
            let s = radius / n;
            self.data.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// Class scores `⟨w_y, x⟩` for every `y`, in label order.
    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.rows().map(|r| dot(r, x)).collect()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::invalid(format!(
                "feature vector has length {}, classifier expects {}",
                x.len(),
                self.d
            )));
        }
        Ok(())
    }

    fn check_label(&self, y: usize) -> Result<()> {
        check_label(y, self.k)
    }
}

fn check_label(y: usize, k: usize) -> Result<()> {
    if y == 0 || y > k {
        return Err(Error::invalid(format!("label {y} outside 1..={k}")));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledPoint {
    pub x: Vec<f64>,
    pub y: usize,
}

impl LabeledPoint {
    pub fn new(x: Vec<f64>, y: usize) -> Self {
        Self { x, y }
    }
}

/// An ordered sample of labeled points sharing a dimension and label range.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    d: usize,
    k: usize,
    points: Vec<LabeledPoint>,
}

impl LabeledSet {
    pub fn new(d: usize, k: usize, points: Vec<LabeledPoint>) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("class count must be positive"));
        }
        for (i, p) in points.iter().enumerate() {
            if p.x.len() != d {
                return Err(Error::invalid(format!(
                    "point {i} has dimension {}, expected {d}",
                    p.x.len()
                )));
            }
            if p.y == 0 || p.y > k {
                return Err(Error::invalid(format!("point {i} has label {} outside 1..={k}", p.y)));
            }
            if let Some(j) = p.x.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("point {i} coordinate {j} is not finite")));
            }
        }
        Ok(Self { d, k, points })
    }

    pub fn empty(d: usize, k: usize) -> Self {
        Self {
            d,
            k,
            points: Vec::new(),
        }
    }

    /// Sub-sample by index, keeping the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            d: self.d,
            k: self.k,
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
        }
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[LabeledPoint] {
        &self.points
    }

    pub fn get(&self, i: usize) -> &LabeledPoint {
        &self.points[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledPoint> {
        self.points.iter()
    }

    pub fn xs(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(|p| p.x.as_slice())
    }

    pub(crate) fn points_mut(&mut self) -> &mut Vec<LabeledPoint> {
        &mut self.points
    }
}

/// Width and density parameters of the dense-pancake condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PancakeParams {
    pub tau: f64,
    pub rho: f64,
    pub beta: f64,
}

impl PancakeParams {
    pub fn new(tau: f64, rho: f64, beta: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(Error::invalid(format!("pancake width must be positive, got {tau}")));
        }
        if !(0.0..=1.0).contains(&rho) || !(0.0..=1.0).contains(&beta) {
            return Err(Error::invalid("pancake rho and beta must lie in [0, 1]"));
        }
        Ok(Self { tau, rho, beta })
    }
}

/// Block feature map `Ψ(x, y)`: block `y` of a `k*d` vector holds `x`.
pub fn feature_map(x: &[f64], y: usize, k: usize) -> Result<Vec<f64>> {
    check_label(y, k)?;
    let d = x.len();
    let mut out = vec![0.0; k * d];
    out[(y - 1) * d..y * d].copy_from_slice(x);
    Ok(out)
}

/// Index (1-based) of the largest score; ties go to `preferred` if it is
/// among the maximizers, otherwise to the smallest label.
fn argmax_with_preference(values: &[f64], preferred: Option<usize>) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    if let Some(p) = preferred {
        if values[p - 1] == values[best] {
            return p;
        }
    }
    best + 1
}

/// `argmax_y ⟨w_y, x⟩`, smallest label on ties.
pub fn predict(w: &WeightMatrix, x: &[f64]) -> Result<usize> {
    w.check_dim(x)?;
    Ok(argmax_with_preference(&w.scores(x), None))
}

/// `min_{y' ≠ y} ⟨w_y − w_{y'}, x⟩`.
pub fn margin_of(wstar: &WeightMatrix, x: &[f64], y: usize) -> Result<f64> {
    if wstar.k() < 2 {
        return Err(Error::invalid("margin needs at least two classes"));
    }
    wstar.check_dim(x)?;
    wstar.check_label(y)?;
    let scores = wstar.scores(x);
    Ok(margin_from_scores(&scores, y))
}

pub(crate) fn margin_from_scores(scores: &[f64], y: usize) -> f64 {
    let own = scores[y - 1];
    scores
        .iter()
        .enumerate()
        .filter(|(i, _)| i + 1 != y)
        .map(|(_, s)| own - s)
        .fold(f64::INFINITY, f64::min)
}

/// Value and maximizing label of the scaled multiclass hinge loss.
///
/// Ties prefer the true label (zero subgradient), then the smallest label.
pub(crate) fn hinge_from_scores(scores: &[f64], y: usize, gamma: f64) -> (f64, usize) {
    let own = scores[y - 1];
    let values: Vec<f64> = scores
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let indicator = if i + 1 == y { 0.0 } else { 1.0 };
            indicator - (own - s) / gamma
        })
        .collect();
    let yhat = argmax_with_preference(&values, Some(y));
    (values[yhat - 1], yhat)
}

fn validate_point(w: &WeightMatrix, p: &LabeledPoint, gamma: f64) -> Result<()> {
    check_gamma(gamma)?;
    w.check_dim(&p.x)?;
    w.check_label(p.y)
}

/// `ℓ_γ(w; (x, y)) = max_{y'} ( 1{y' ≠ y} − ⟨w_y − w_{y'}, x⟩ / γ )`.
pub fn hinge_loss(w: &WeightMatrix, p: &LabeledPoint, gamma: f64) -> Result<f64> {
    validate_point(w, p, gamma)?;
    Ok(hinge_from_scores(&w.scores(&p.x), p.y, gamma).0)
}

/// Hinge maximizer `ŷ` for `(x, y)` under the tie rule of [`hinge_loss`].
pub fn hinge_maximizer(w: &WeightMatrix, p: &LabeledPoint, gamma: f64) -> Result<usize> {
    validate_point(w, p, gamma)?;
    Ok(hinge_from_scores(&w.scores(&p.x), p.y, gamma).1)
}

/// Subgradient `(Ψ(x, ŷ) − Ψ(x, y)) / γ` as a weight matrix.
pub fn hinge_subgradient(w: &WeightMatrix, p: &LabeledPoint, gamma: f64) -> Result<WeightMatrix> {
    validate_point(w, p, gamma)?;
    let mut g = WeightMatrix::zeros(w.k(), w.d());
    let (_, yhat) = hinge_from_scores(&w.scores(&p.x), p.y, gamma);
    accumulate_subgradient(&mut g, &p.x, p.y, yhat, 1.0 / gamma);
    Ok(g)
}

/// Two-class classifier `(u/2, −u/2)` for a binary halfspace `u`.
///
/// With `s = +1` for label 1 and `s = −1` for label 2, the scaled hinge loss of
/// the result is the standard binary hinge `max(0, 1 − s⟨u, x⟩/γ)`.
pub fn binary_weights(u: &[f64]) -> WeightMatrix {
    let half: Vec<f64> = u.iter().map(|v| v / 2.0).collect();
    let neg: Vec<f64> = half.iter().map(|v| -v).collect();
    WeightMatrix::from_flat(2, u.len(), [half, neg].concat()).expect("two rows of equal length")
}

#[inline]
pub(crate) fn accumulate_subgradient(acc: &mut WeightMatrix, x: &[f64], y: usize, yhat: usize, scale: f64) {
    if yhat == y {
        return;
    }
    for (a, v) in acc.row_mut(yhat).iter_mut().zip(x) {
        *a += scale * v;
    }
    for (a, v) in acc.row_mut(y).iter_mut().zip(x) {
        *a -= scale * v;
    }
}

/// Membership in the multiclass pancake `P_w^τ(center)`: same label and
/// `|⟨w_ȳ, x' − x⟩| ≤ τ` for every class row `ȳ`.
///
/// `tau = 0` is accepted (only exact projections match).
pub fn pancake_contains(
    w: &WeightMatrix,
    tau: f64,
    center: &LabeledPoint,
    candidate: &LabeledPoint,
) -> Result<bool> {
    if !(tau >= 0.0) {
        return Err(Error::invalid(format!("pancake width must be non-negative, got {tau}")));
    }
    w.check_dim(&center.x)?;
    w.check_dim(&candidate.x)?;
    Ok(pancake_contains_unchecked(w, tau, center, candidate))
}

#[inline]
pub(crate) fn pancake_contains_unchecked(
    w: &WeightMatrix,
    tau: f64,
    center: &LabeledPoint,
    candidate: &LabeledPoint,
) -> bool {
    if candidate.y != center.y {
        return false;
    }
    w.rows().all(|row| {
        let proj: f64 = row
            .iter()
            .zip(candidate.x.iter().zip(&center.x))
            .map(|(wi, (a, b))| wi * (a - b))
            .sum();
        proj.abs() <= tau
    })
}
