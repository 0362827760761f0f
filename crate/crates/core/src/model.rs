//! Parametric perceptual distance: a non-negative linear combination of
//! per-layer, per-channel feature-difference statistics.
//!
//! A [`DistanceTensor`] holds, for one (set, image) pair, the spatially averaged
//! squared difference of unit-normalized activations for every channel of every
//! tapped layer. A [`WeightHead`] holds one non-negative weight per channel.
//! The distance is their inner product, so it reproduces the baseline metric
//! exactly when loaded with the baseline linear-layer weights.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered list of tapped layers and their channel counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSchema {
    layers: Vec<LayerSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub name: String,
    pub channel_count: usize,
}

impl LayerSchema {
    pub fn new(layers: Vec<LayerSpec>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Validation("layer schema has no layers".into()));
        }
        let mut seen = HashSet::new();
        for layer in &layers {
            if layer.channel_count == 0 {
                return Err(Error::SchemaMismatch {
                    layer: layer.name.clone(),
                    detail: "channel_count must be at least 1".into(),
                });
            }
            if !seen.insert(layer.name.as_str()) {
                return Err(Error::Validation(format!("duplicate layer name `{}`", layer.name)));
            }
        }
        Ok(Self { layers })
    }

    /// Builds a schema with layers named `layer0`, `layer1`, ...
    pub fn from_channel_counts(counts: &[usize]) -> Result<Self> {
        Self::new(
            counts
                .iter()
                .enumerate()
                .map(|(i, &c)| LayerSpec {
                    name: format!("layer{i}"),
                    channel_count: c,
                })
                .collect(),
        )
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Total number of per-channel parameters.
    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.channel_count).sum()
    }

    /// Checks that `values` has one vector per layer with matching lengths.
    pub fn check_conformance<T>(&self, values: &[Vec<T>]) -> Result<()> {
        if values.len() != self.layers.len() {
            let layer = self
                .layers
                .get(values.len())
                .map(|l| l.name.clone())
                .unwrap_or_else(|| format!("#{}", self.layers.len()));
            return Err(Error::SchemaMismatch {
                layer,
                detail: format!("expected {} layers, found {}", self.layers.len(), values.len()),
            });
        }
        for (spec, v) in self.layers.iter().zip(values) {
            if v.len() != spec.channel_count {
                return Err(Error::SchemaMismatch {
                    layer: spec.name.clone(),
                    detail: format!("expected {} channels, found {}", spec.channel_count, v.len()),
                });
            }
        }
        Ok(())
    }

    /// Checks that two schemas are identical, naming the first differing layer.
    pub fn check_same(&self, other: &LayerSchema) -> Result<()> {
        for (i, (a, b)) in self.layers.iter().zip(&other.layers).enumerate() {
            if a != b {
                return Err(Error::SchemaMismatch {
                    layer: a.name.clone(),
                    detail: format!(
                        "layer {i} is `{}` x {} on one side and `{}` x {} on the other",
                        a.name, a.channel_count, b.name, b.channel_count
                    ),
                });
            }
        }
        if self.layers.len() != other.layers.len() {
            return Err(Error::SchemaMismatch {
                layer: format!("#{}", self.layers.len().min(other.layers.len())),
                detail: format!(
                    "layer counts differ ({} vs {})",
                    self.layers.len(),
                    other.layers.len()
                ),
            });
        }
        Ok(())
    }

    /// Offset of each layer's first channel in a flattened parameter vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.layers
            .iter()
            .map(|l| {
                let o = acc;
                acc += l.channel_count;
                o
            })
            .collect()
    }
}

/// Feature-difference statistics for one generated image relative to its set's target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceTensor {
    pub set_id: String,
    pub image_id: String,
    values: Vec<Vec<f32>>,
}

impl DistanceTensor {
    /// Validates non-negativity and finiteness; schema conformance is checked by
    /// the archive or head that consumes the tensor.
    pub fn new(set_id: impl Into<String>, image_id: impl Into<String>, values: Vec<Vec<f32>>) -> Result<Self> {
        let set_id = set_id.into();
        let image_id = image_id.into();
        for (l, layer) in values.iter().enumerate() {
            for (c, &v) in layer.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Validation(format!(
                        "tensor ({set_id}, {image_id}) has invalid value {v} at layer {l} channel {c}"
                    )));
                }
            }
        }
        Ok(Self {
            set_id,
            image_id,
            values,
        })
    }

    pub fn values(&self) -> &[Vec<f32>] {
        &self.values
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().flatten().map(|&v| v as f64).collect()
    }
}

/// The trainable non-negative per-channel weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightHead {
    schema: LayerSchema,
    weights: Vec<Vec<f64>>,
}

impl WeightHead {
    pub fn new(schema: LayerSchema, weights: Vec<Vec<f64>>) -> Result<Self> {
        schema.check_conformance(&weights)?;
        for (spec, layer) in schema.layers().iter().zip(&weights) {
            for (c, &w) in layer.iter().enumerate() {
                if !w.is_finite() {
                    return Err(Error::Validation(format!(
                        "non-finite weight at layer `{}` channel {c}",
                        spec.name
                    )));
                }
                if w < 0.0 {
                    return Err(Error::NegativeWeight {
                        layer: spec.name.clone(),
                        channel: c,
                        value: w,
                    });
                }
            }
        }
        Ok(Self { schema, weights })
    }

    pub fn constant(schema: LayerSchema, value: f64) -> Result<Self> {
        let weights = schema
            .layers()
            .iter()
            .map(|l| vec![value; l.channel_count])
            .collect();
        Self::new(schema, weights)
    }

    pub fn ones(schema: LayerSchema) -> Self {
        Self::constant(schema, 1.0).expect("unit weights are valid")
    }

    pub fn zeros(schema: LayerSchema) -> Self {
        Self::constant(schema, 0.0).expect("zero weights are valid")
    }

    /// Rebuilds a head from a flattened parameter vector in schema order.
    pub fn from_flat(schema: LayerSchema, flat: &[f64]) -> Result<Self> {
        if flat.len() != schema.parameter_count() {
            return Err(Error::Validation(format!(
                "expected {} parameters, found {}",
                schema.parameter_count(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        let weights = schema
            .layers()
            .iter()
            .map(|l| it.by_ref().take(l.channel_count).collect())
            .collect();
        Self::new(schema, weights)
    }

    pub fn schema(&self) -> &LayerSchema {
        &self.schema
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.weights.iter().flatten().copied().collect()
    }

    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().flatten().sum()
    }

    /// Weighted sum of the tensor's feature differences.
    pub fn distance(&self, t: &DistanceTensor) -> Result<f64> {
        self.schema.check_conformance(t.values())?;
        Ok(self
            .weights
            .iter()
            .zip(t.values())
            .map(|(w, v)| w.iter().zip(v).map(|(&w, &v)| w * v as f64).sum::<f64>())
            .sum())
    }

    /// Gradient of [`WeightHead::distance`] with respect to the weights, flattened
    /// in schema order. The distance is linear, so this is the tensor itself.
    pub fn distance_gradient(&self, t: &DistanceTensor) -> Result<Vec<f64>> {
        self.schema.check_conformance(t.values())?;
        Ok(t.flatten())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                location: Some(path.display().to_string()),
                line,
                message,
            },
            other => other,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> String {
        let doc = WeightDocument {
            format_version: WEIGHT_FORMAT_VERSION,
            layers: self
                .schema
                .layers()
                .iter()
                .zip(&self.weights)
                .map(|(spec, w)| WeightLayer {
                    name: spec.name.clone(),
                    channel_count: spec.channel_count,
                    weights: w.clone(),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("weight document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: WeightDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
            location: None,
            line: Some(e.line()),
            message: e.to_string(),
        })?;
        if doc.format_version != WEIGHT_FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported weight format_version {}",
                doc.format_version
            )));
        }
        let mut specs = Vec::with_capacity(doc.layers.len());
        let mut weights = Vec::with_capacity(doc.layers.len());
        for layer in doc.layers {
            if layer.weights.len() != layer.channel_count {
                return Err(Error::SchemaMismatch {
                    layer: layer.name,
                    detail: format!(
                        "channel_count is {} but {} weights are listed",
                        layer.channel_count,
                        layer.weights.len()
                    ),
                });
            }
            specs.push(LayerSpec {
                name: layer.name,
                channel_count: layer.channel_count,
            });
            weights.push(layer.weights);
        }
        Self::new(LayerSchema::new(specs)?, weights)
    }
}

pub const WEIGHT_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightDocument {
    format_version: u32,
    layers: Vec<WeightLayer>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightLayer {
    name: String,
    channel_count: usize,
    weights: Vec<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_pair(seed: u64, counts: &[usize]) -> (WeightHead, DistanceTensor) {
        let schema = LayerSchema::from_channel_counts(counts).unwrap();
        let mut rng = SplitMix64::new(seed);
        let w = counts
            .iter()
            .map(|&c| (0..c).map(|_| rng.next_f64() * 2.0).collect())
            .collect();
        let v = counts
            .iter()
            .map(|&c| (0..c).map(|_| rng.next_f64() as f32).collect())
            .collect();
        (
            WeightHead::new(schema, w).unwrap(),
            DistanceTensor::new("s", "i", v).unwrap(),
        )
    }

    #[test]
    fn zero_head_gives_zero() {
        let (h, t) = random_pair(1, &[3, 4]);
        assert_eq!(WeightHead::zeros(h.schema().clone()).distance(&t).unwrap(), 0.0);
    }

    #[test]
    fn single_term_product() {
        let schema = LayerSchema::from_channel_counts(&[1]).unwrap();
        let h = WeightHead::new(schema, vec![vec![2.0]]).unwrap();
        let t = DistanceTensor::new("s", "i", vec![vec![0.3]]).unwrap();
        assert!((h.distance(&t).unwrap() - 0.6).abs() < 1e-7);
    }

    #[test]
    fn matches_double_loop_accumulation() {
        let (h, t) = random_pair(42, &[5, 7, 3]);
        let mut acc = 0.0f64;
        for l in 0..3 {
            for c in 0..h.weights()[l].len() {
                acc += h.weights()[l][c] * t.values()[l][c] as f64;
            }
        }
        assert!((h.distance(&t).unwrap() - acc).abs() <= 1e-12 * acc.abs().max(1.0));
    }

    #[test]
    fn gradient_is_tensor() {
        let schema = LayerSchema::from_channel_counts(&[2, 3]).unwrap();
        let h = WeightHead::ones(schema);
        let ones = DistanceTensor::new("s", "i", vec![vec![1.0; 2], vec![1.0; 3]]).unwrap();
        assert_eq!(h.distance_gradient(&ones).unwrap(), vec![1.0; 5]);
        let zeros = DistanceTensor::new("s", "i", vec![vec![0.0; 2], vec![0.0; 3]]).unwrap();
        assert_eq!(h.distance_gradient(&zeros).unwrap(), vec![0.0; 5]);
    }

    #[test]
    fn gradient_matches_central_differences() {
        for seed in 0..20 {
            let (h, t) = random_pair(seed, &[4, 6, 2]);
            let grad = h.distance_gradient(&t).unwrap();
            let base = h.flatten();
            let eps = 1e-4;
            for i in 0..base.len() {
                let mut plus = base.clone();
                let mut minus = base.clone();
                plus[i] += eps;
                minus[i] = (minus[i] - eps).max(0.0);
                let span = plus[i] - minus[i];
                let dp = WeightHead::from_flat(h.schema().clone(), &plus).unwrap().distance(&t).unwrap();
                let dm = WeightHead::from_flat(h.schema().clone(), &minus).unwrap().distance(&t).unwrap();
                let fd = (dp - dm) / span;
                let rel = (fd - grad[i]).abs() / grad[i].abs().max(1e-3);
                assert!(rel < 1e-6, "seed {seed} coord {i}: fd {fd} vs {}", grad[i]);
            }
        }
    }

    #[test]
    fn schema_mismatch_names_layer() {
        let schema = LayerSchema::from_channel_counts(&[2, 3]).unwrap();
        let h = WeightHead::ones(schema);
        let t = DistanceTensor::new("s", "i", vec![vec![0.1; 2], vec![0.1; 4]]).unwrap();
        match h.distance(&t) {
            Err(Error::SchemaMismatch { layer, .. }) => assert_eq!(layer, "layer1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_weight_rejected_on_load() {
        let text = r#"{"format_version":1,"layers":[{"name":"a","channel_count":2,"weights":[0.5,-0.1]}]}"#;
        assert!(matches!(
            WeightHead::from_json(text),
            Err(Error::NegativeWeight { channel: 1, .. })
        ));
    }

    #[test]
    fn channel_count_must_match_weights() {
        let text = r#"{"format_version":1,"layers":[{"name":"a","channel_count":3,"weights":[0.5,0.1]}]}"#;
        assert!(matches!(WeightHead::from_json(text), Err(Error::SchemaMismatch { .. })));
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let (h, _) = random_pair(9, &[3, 8, 5]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.json");
        h.save(&path).unwrap();
        let back = WeightHead::load(&path).unwrap();
        assert_eq!(back, h);
        for (a, b) in back.flatten().iter().zip(h.flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn duplicate_layer_names_rejected() {
        let r = LayerSchema::new(vec![
            LayerSpec { name: "a".into(), channel_count: 1 },
            LayerSpec { name: "a".into(), channel_count: 2 },
        ]);
        assert!(r.is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn head_and_tensor() -> impl Strategy<Value = (Vec<usize>, Vec<f64>, Vec<f64>, Vec<f32>)> {
            prop::collection::vec(1usize..5, 1..4).prop_flat_map(|counts| {
                let n: usize = counts.iter().sum();
                (
                    Just(counts),
                    prop::collection::vec(0.0f64..10.0, n),
                    prop::collection::vec(0.0f64..10.0, n),
                    prop::collection::vec(0.0f32..1.0, n),
                )
            })
        }

        fn tensor(counts: &[usize], flat: &[f32]) -> DistanceTensor {
            let mut it = flat.iter().copied();
            let v = counts.iter().map(|&c| it.by_ref().take(c).collect()).collect();
            DistanceTensor::new("s", "i", v).unwrap()
        }

        proptest! {
            #[test]
            fn non_negative_and_linear((counts, w1, w2, v) in head_and_tensor(), alpha in 0.0f64..5.0) {
                let schema = LayerSchema::from_channel_counts(&counts).unwrap();
                let t = tensor(&counts, &v);
                let h1 = WeightHead::from_flat(schema.clone(), &w1).unwrap();
                let h2 = WeightHead::from_flat(schema.clone(), &w2).unwrap();
                let d1 = h1.distance(&t).unwrap();
                let d2 = h2.distance(&t).unwrap();
                prop_assert!(d1 >= 0.0);
                let scaled: Vec<f64> = w1.iter().map(|w| w * alpha).collect();
                let ds = WeightHead::from_flat(schema.clone(), &scaled).unwrap().distance(&t).unwrap();
                prop_assert!((ds - alpha * d1).abs() <= 1e-9 * (1.0 + ds.abs()));
                let summed: Vec<f64> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
                let dsum = WeightHead::from_flat(schema, &summed).unwrap().distance(&t).unwrap();
                prop_assert!((dsum - d1 - d2).abs() <= 1e-9 * (1.0 + dsum.abs()));
            }

            #[test]
            fn positive_scaling_preserves_ranking(
                counts in prop::collection::vec(1usize..4, 1..3),
                seed in any::<u64>(),
                alpha in 0.01f64..100.0,
            ) {
                let schema = LayerSchema::from_channel_counts(&counts).unwrap();
                let n = schema.parameter_count();
                let mut rng = SplitMix64::new(seed);
                let w: Vec<f64> = (0..n).map(|_| rng.next_f64()).collect();
                let tensors: Vec<DistanceTensor> = (0..8)
                    .map(|_| {
                        let flat: Vec<f32> = (0..n).map(|_| rng.next_f64() as f32).collect();
                        tensor(&counts, &flat)
                    })
                    .collect();
                let h = WeightHead::from_flat(schema.clone(), &w).unwrap();
                let hs = WeightHead::from_flat(schema, &w.iter().map(|x| x * alpha).collect::<Vec<_>>()).unwrap();
                let order = |h: &WeightHead| {
                    let d: Vec<f64> = tensors.iter().map(|t| h.distance(t).unwrap()).collect();
                    let mut idx: Vec<usize> = (0..d.len()).collect();
                    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
                    idx
                };
                prop_assert_eq!(order(&h), order(&hs));
            }
        }
    }
}
