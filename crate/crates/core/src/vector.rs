//! Dense vector arithmetic.
//!
//! Vectors are stored as `f32`; every reduction (dot products, norms, means)
//! accumulates in `f64` and only the final coordinates are rounded back to
//! `f32` where a vector is returned.

use std::ops::Deref;

use crate::error::{Error, Result};

/// A fixed-dimension embedding with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector(Vec<f32>);

impl DenseVector {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("vector has no coordinates"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(values))
    }

    /// Rounds `f64` coordinates to storage precision.
    pub fn from_f64(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| v as f32).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    /// Multiplies every coordinate by `factor`.
    pub fn scaled(&self, factor: f32) -> Result<Self> {
        Self::new(self.0.iter().map(|v| v * factor).collect())
    }
}

impl Deref for DenseVector {
    type Target = [f32];

    fn deref(&self) -> &[f32] {
        &self.0
    }
}

impl AsRef<[f32]> for DenseVector {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

fn check_dims(a: &[f32], b: &[f32]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

/// Inner product without the dimension check; callers guarantee equal length.
#[inline]
pub(crate) fn dot_unchecked(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum()
}

pub fn dot(a: &[f32], b: &[f32]) -> Result<f64> {
    check_dims(a, b)?;
    Ok(dot_unchecked(a, b))
}

pub fn norm(v: &[f32]) -> f64 {
    dot_unchecked(v, v).sqrt()
}

/// `1 - cos(a, b)`, in `[0, 2]` up to rounding.
pub fn cosine_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    check_dims(a, b)?;
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(1.0 - dot_unchecked(a, b) / (na * nb))
}

/// Coordinate-wise arithmetic mean.
pub fn mean<V: AsRef<[f32]>>(vs: &[V]) -> Result<DenseVector> {
    let first = vs
        .first()
        .ok_or(Error::EmptyInput("mean of an empty list"))?
        .as_ref();
    let mut acc = vec![0f64; first.len()];
    for v in vs {
        let v = v.as_ref();
        check_dims(first, v)?;
        for (a, &x) in acc.iter_mut().zip(v) {
            *a += f64::from(x);
        }
    }
    let n = vs.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    DenseVector::from_f64(&acc)
}

pub fn l2_normalize(v: &[f32]) -> Result<DenseVector> {
    let n = norm(v);
    if n == 0.0 {
        return Err(Error::ZeroVector);
    }
    DenseVector::new(v.iter().map(|&x| (f64::from(x) / n) as f32).collect())
}

/// Affine map `W·v + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    weights: Vec<Vec<f32>>,
    bias: DenseVector,
    dim_in: usize,
}

impl Projection {
    pub fn new(weights: Vec<Vec<f32>>, bias: DenseVector) -> Result<Self> {
        if weights.len() != bias.dim() {
            return Err(Error::Dimension {
                expected: bias.dim(),
                actual: weights.len(),
            });
        }
        let dim_in = weights[0].len();
        if dim_in == 0 {
            return Err(Error::EmptyInput("projection has no input columns"));
        }
        for row in &weights {
            if row.len() != dim_in {
                return Err(Error::Dimension {
                    expected: dim_in,
                    actual: row.len(),
                });
            }
            if row.iter().any(|w| !w.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self {
            weights,
            bias,
            dim_in,
        })
    }

    pub fn identity(dim: usize) -> Self {
        let weights = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let bias = DenseVector(vec![0.0; dim]);
        Self {
            weights,
            bias,
            dim_in: dim,
        }
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.bias.dim()
    }
}

pub fn project(p: &Projection, v: &[f32]) -> Result<DenseVector> {
    if v.len() != p.dim_in {
        return Err(Error::Dimension {
            expected: p.dim_in,
            actual: v.len(),
        });
    }
    let out: Vec<f64> = p
        .weights
        .iter()
        .zip(p.bias.iter())
        .map(|(row, &b)| dot_unchecked(row, v) + f64::from(b))
        .collect();
    DenseVector::from_f64(&out)
}

/// InfoNCE-style loss of one positive score against a set of negatives at
/// temperature `tau`: `-log softmax(pos / tau)`.
pub fn contrastive_loss(pos_score: f64, neg_scores: &[f64], tau: f64) -> Result<f64> {
    if !tau.is_finite() || tau <= 0.0 {
        return Err(Error::domain(format!(
            "temperature must be positive, got {tau}"
        )));
    }
    let pos = pos_score / tau;
    let negs = neg_scores.iter().map(|s| s / tau);
    let max = negs.clone().fold(pos, f64::max);
    let loss = if max == pos {
        // ln(1 + x) keeps precision for near-zero losses
        negs.map(|z| (z - pos).exp()).sum::<f64>().ln_1p()
    } else {
        let sum: f64 = std::iter::once(pos)
            .chain(negs)
            .map(|z| (z - max).exp())
            .sum();
        max + sum.ln() - pos
    };
    Ok(loss.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: &[f32]) -> DenseVector {
        DenseVector::new(x.to_vec()).unwrap()
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(dot(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap(), 32.0);
        let u = v(&[0.6, 0.8]);
        assert!((dot(&u, &u).unwrap() - 1.0).abs() < 1e-7);
        assert!(matches!(
            dot(&[1.0], &[1.0, 2.0]),
            Err(Error::Dimension {
                expected: 1,
                actual: 2
            })
        ));
    }

    #[test]
    fn cosine_distance_examples() {
        let u = v(&[0.3, -1.2, 4.0]);
        assert!(cosine_distance(&u, &u).unwrap().abs() < 1e-12);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert_eq!(cosine_distance(&[1.0, 0.0], &[-1.0, 0.0]).unwrap(), 2.0);
        assert!(matches!(
            cosine_distance(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroVector)
        ));
        assert!(matches!(
            cosine_distance(&[1.0], &[1.0, 0.0]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn mean_examples() {
        let u = v(&[0.25, -3.0]);
        assert_eq!(mean(std::slice::from_ref(&u)).unwrap(), u);
        assert_eq!(
            mean(&[v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap().as_slice(),
            &[0.5, 0.5]
        );
        assert_eq!(
            mean(&[v(&[2.0, 2.0]), v(&[0.0, 0.0]), v(&[1.0, 1.0])])
                .unwrap()
                .as_slice(),
            &[1.0, 1.0]
        );
        let empty: Vec<DenseVector> = vec![];
        assert!(matches!(mean(&empty), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(l2_normalize(&[3.0, 4.0]).unwrap().as_slice(), &[0.6, 0.8]);
        assert_eq!(
            l2_normalize(&[1.0, 0.0, 0.0]).unwrap().as_slice(),
            &[1.0, 0.0, 0.0]
        );
        assert!(matches!(l2_normalize(&[0.0, 0.0]), Err(Error::ZeroVector)));
    }

    #[test]
    fn project_examples() {
        let x = v(&[2.0, 3.0]);
        assert_eq!(project(&Projection::identity(2), &x).unwrap(), x);
        let p = Projection::new(vec![vec![1.0, 1.0]], v(&[0.0])).unwrap();
        assert_eq!(project(&p, &x).unwrap().as_slice(), &[5.0]);
        let p = Projection::new(vec![vec![0.0, 0.0]], v(&[7.0])).unwrap();
        assert_eq!(project(&p, &x).unwrap().as_slice(), &[7.0]);
        assert!(matches!(project(&p, &[1.0]), Err(Error::Dimension { .. })));
        assert!(Projection::new(vec![vec![1.0], vec![1.0]], v(&[0.0])).is_err());
    }

    #[test]
    fn contrastive_loss_examples() {
        let ln2 = 2f64.ln();
        assert!((contrastive_loss(0.37, &[0.37], 1.0).unwrap() - ln2).abs() < 1e-12);
        assert_eq!(contrastive_loss(5.0, &[], 1.0).unwrap(), 0.0);
        let ln4 = 4f64.ln();
        assert!((contrastive_loss(0.0, &[0.0, 0.0, 0.0], 1.0).unwrap() - ln4).abs() < 1e-12);
        assert!(matches!(
            contrastive_loss(0.0, &[], 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            contrastive_loss(0.0, &[], -1.0),
            Err(Error::Domain(_))
        ));
        // stays finite where a naive exp would overflow
        let big = contrastive_loss(1e4, &[1e4 - 1.0], 0.01).unwrap();
        assert!(big.is_finite() && big >= 0.0);
    }

    #[test]
    fn dense_vector_rejects_bad_values() {
        assert!(matches!(
            DenseVector::new(vec![]),
            Err(Error::EmptyInput(_))
        ));
        assert!(matches!(
            DenseVector::new(vec![f32::NAN]),
            Err(Error::NonFinite)
        ));
        assert!(matches!(
            DenseVector::new(vec![f32::INFINITY]),
            Err(Error::NonFinite)
        ));
    }

    fn coords(dim: usize) -> impl Strategy<Value = Vec<f32>> {
        prop::collection::vec(-10.0f32..10.0, dim)
    }

    fn nonzero(dim: usize) -> impl Strategy<Value = Vec<f32>> {
        coords(dim).prop_filter("nonzero", |x| norm(x) > 1e-3)
    }

    proptest! {
        #[test]
        fn dot_is_symmetric(a in coords(16), b in coords(16)) {
            let ab = dot(&a, &b).unwrap();
            let ba = dot(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
        }

        #[test]
        fn cosine_distance_is_scale_free(a in nonzero(8), c in 0.01f32..100.0) {
            let scaled: Vec<f32> = a.iter().map(|x| x * c).collect();
            prop_assert!(cosine_distance(&a, &scaled).unwrap().abs() < 1e-9);
        }

        #[test]
        fn cosine_distance_in_range(a in nonzero(8), b in nonzero(8)) {
            let d = cosine_distance(&a, &b).unwrap();
            prop_assert!((-1e-12..=2.0 + 1e-12).contains(&d));
        }

        #[test]
        fn mean_of_copies_is_identity(a in coords(8), n in 1usize..20) {
            let copies = vec![a.clone(); n];
            let m = mean(&copies).unwrap();
            for (x, y) in m.iter().zip(&a) {
                prop_assert!((f64::from(*x) - f64::from(*y)).abs() <= 1e-12);
            }
        }

        #[test]
        fn normalized_has_unit_norm(a in nonzero(12)) {
            prop_assert!((norm(&l2_normalize(&a).unwrap()) - 1.0).abs() < 1e-6);
        }

        // Power-of-two factors scale f32 coordinates exactly, so the
        // comparison isolates the normalization itself.
        #[test]
        fn normalize_is_scale_free(a in nonzero(12), e in -20i32..20) {
            let c = 2f32.powi(e);
            let scaled: Vec<f32> = a.iter().map(|x| x * c).collect();
            let (p, q) = (l2_normalize(&a).unwrap(), l2_normalize(&scaled).unwrap());
            for (x, y) in p.iter().zip(q.iter()) {
                prop_assert!((f64::from(*x) - f64::from(*y)).abs() <= 1e-9);
            }
        }

        #[test]
        fn normalize_is_scale_free_any_factor(a in nonzero(12), c in 0.01f32..100.0) {
            let scaled: Vec<f32> = a.iter().map(|x| x * c).collect();
            let (p, q) = (l2_normalize(&a).unwrap(), l2_normalize(&scaled).unwrap());
            for (x, y) in p.iter().zip(q.iter()) {
                // one f32 rounding in the scaled input
                prop_assert!((f64::from(*x) - f64::from(*y)).abs() <= 1e-6);
            }
        }

        #[test]
        fn loss_decreases_in_positive_score(
            pos in -5.0f64..5.0,
            negs in prop::collection::vec(-5.0f64..5.0, 0..8),
            tau in 0.2f64..2.0,
        ) {
            let h = 1e-4;
            let lo = contrastive_loss(pos - h, &negs, tau).unwrap();
            let hi = contrastive_loss(pos + h, &negs, tau).unwrap();
            let central = (hi - lo) / (2.0 * h);
            // d/dpos = -(1 - softmax(pos)) / tau
            let z: Vec<f64> = std::iter::once(pos).chain(negs.iter().copied()).map(|s| s / tau).collect();
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = z.iter().map(|x| (x - m).exp()).sum();
            let p_pos = (z[0] - m).exp() / denom;
            let analytic = -(1.0 - p_pos) / tau;
            if !negs.is_empty() && lo > 1e-6 {
                prop_assert!(hi < lo);
                prop_assert!((central - analytic).abs() <= 1e-4 * analytic.abs().max(1e-3));
            }
        }
    }
}
