//! Scoring functions and rank lists.
//!
//! The mining score of an example is the squared distance between the
//! softmax of its logits and the softmax of their autoencoder reconstruction.
//! Baselines score the softmax probabilities with fixed uncertainty formulas.
//! Rank lists sort by descending score with ties broken by ascending id.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backbone::BackboneModel;
use crate::data::{Dataset, DetectionSet, Example};
use crate::error::{Error, Result};
use crate::fsutil::fmt_f64;
use crate::mcmau::AutoencoderModel;
use crate::nn::loss::softmax_unchecked;
use crate::nn::softmax;
use crate::recalib::RecalibrationLayer;
use crate::rng::{seeded, stream};

pub const DEFAULT_TOP_K: usize = 5;

const DISTRIBUTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ours,
    OursNoRc,
    Random,
    MaxScore,
    Entropy,
    WeightedEntropy,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Ours,
        Method::OursNoRc,
        Method::Random,
        Method::MaxScore,
        Method::Entropy,
        Method::WeightedEntropy,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::OursNoRc => "ours_no_rc",
            Method::Random => "random",
            Method::MaxScore => "max_score",
            Method::Entropy => "entropy",
            Method::WeightedEntropy => "weighted_entropy",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.tag() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = Method::ALL.iter().map(|m| m.tag()).collect();
                Error::config(format!(
                    "unknown method `{s}`; valid methods: {}",
                    valid.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub example_id: u64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankList {
    pub entries: Vec<RankEntry>,
    pub method: Method,
}

impl RankList {
    /// Sorts descending by score, ascending by id on ties.
    pub fn from_scores(method: Method, scores: Vec<(u64, f64)>) -> Result<Self> {
        if let Some((id, s)) = scores.iter().find(|(_, s)| !s.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite score {s} for example {id}"
            )));
        }
        let mut entries: Vec<RankEntry> = scores
            .into_iter()
            .map(|(example_id, score)| RankEntry { example_id, score })
            .collect();
        entries.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.example_id.cmp(&b.example_id))
        });
        Ok(RankList { entries, method })
    }

    pub fn ids(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.example_id).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn top(&self, n: usize) -> &[RankEntry] {
        &self.entries[..n.min(self.entries.len())]
    }
}

/// CSV with columns `rank,example_id,score,method`; ranks start at 1.
pub fn write_rank_csv(rank: &RankList) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::invalid(format!("csv write failed: {e}"));
    w.write_record(["rank", "example_id", "score", "method"])
        .map_err(err)?;
    for (i, e) in rank.entries.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            e.example_id.to_string(),
            fmt_f64(e.score),
            rank.method.tag().to_string(),
        ])
        .map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| Error::invalid(format!("csv write failed: {e}")))
}

/// Parses [`write_rank_csv`] output, keeping the stored order.
pub fn read_rank_csv(text: &str, origin: &str) -> Result<RankList> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };
    let mut entries = Vec::new();
    let mut method = None;
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
        if rec.len() != 4 {
            return Err(parse_err(
                line,
                format!("expected 4 columns, found {}", rec.len()),
            ));
        }
        if rec[0].parse::<usize>().ok() != Some(i + 1) {
            return Err(parse_err(
                line,
                format!("rank `{}` out of sequence", &rec[0]),
            ));
        }
        let example_id = rec[1]
            .parse()
            .map_err(|_| parse_err(line, format!("bad example id `{}`", &rec[1])))?;
        let score: f64 = rec[2]
            .parse()
            .map_err(|_| parse_err(line, format!("bad score `{}`", &rec[2])))?;
        let m: Method = rec[3]
            .parse()
            .map_err(|e: Error| parse_err(line, e.to_string()))?;
        if *method.get_or_insert(m) != m {
            return Err(parse_err(line, "rank list mixes methods".into()));
        }
        entries.push(RankEntry { example_id, score });
    }
    let method = method.ok_or_else(|| parse_err(1, "empty rank list".into()))?;
    Ok(RankList { entries, method })
}

/// `||σ(z) − σ(ẑ)||²`, in `[0, 2]`.
pub fn score_ours(z: &[f64], z_hat: &[f64]) -> Result<f64> {
    if z.len() != z_hat.len() {
        return Err(Error::invalid(format!(
            "logit length {} does not match reconstruction length {}",
            z.len(),
            z_hat.len()
        )));
    }
    let p = softmax(z)?;
    let q = softmax(z_hat)?;
    Ok(p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Indices of the `k` most confident detections, ties by input order, after
/// dropping those below `min_confidence`.
fn top_k_detections(ds: &DetectionSet, k: usize, min_confidence: Option<f64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..ds.len())
        .filter(|&i| min_confidence.is_none_or(|t| ds.detections[i].confidence >= t))
        .collect();
    idx.sort_by(|&a, &b| {
        ds.detections[b]
            .confidence
            .total_cmp(&ds.detections[a].confidence)
            .then(a.cmp(&b))
    });
    idx.truncate(k);
    idx
}

/// Mean of `f` over the top-`k` detections; 0 when none survive.
fn aggregate_detections<F>(
    ds: &DetectionSet,
    k: usize,
    min_confidence: Option<f64>,
    f: F,
) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if k == 0 {
        return Err(Error::config("top_k must be positive"));
    }
    let chosen = top_k_detections(ds, k, min_confidence);
    if chosen.is_empty() {
        log::warn!("example has no usable detections; scoring it 0");
        return Ok(0.0);
    }
    let mut total = 0.0;
    for &i in &chosen {
        total += f(&ds.detections[i].logits)?;
    }
    Ok(total / chosen.len() as f64)
}

/// Detection-mode score: mean decision score over the `k` most confident detections.
pub fn score_detection_example(
    ds: &DetectionSet,
    model: &AutoencoderModel,
    k: usize,
    min_confidence: Option<f64>,
) -> Result<f64> {
    aggregate_detections(ds, k, min_confidence, |z| {
        score_ours(z, &model.reconstruct(z)?)
    })
}

fn check_distribution(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::invalid("empty probability vector"));
    }
    if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::invalid("probabilities must lie in [0, 1]"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(Error::invalid(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// `1 − max_k p_k`.
pub fn score_max(probs: &[f64]) -> Result<f64> {
    check_distribution(probs)?;
    Ok(1.0 - probs.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Shannon entropy in nats, `0·ln 0 = 0`.
pub fn score_entropy(probs: &[f64]) -> Result<f64> {
    check_distribution(probs)?;
    Ok(-probs.iter().map(|&p| xlogx(p)).sum::<f64>())
}

/// `−Σ q_k ln q_k` with `q_k = p_k / (b_k·C)`; the `q_k` need not sum to 1.
pub fn score_weighted_entropy(probs: &[f64], proportions: &[f64]) -> Result<f64> {
    check_distribution(probs)?;
    if proportions.len() != probs.len() {
        return Err(Error::invalid(
            "class proportions and probabilities differ in length",
        ));
    }
    if proportions.iter().any(|&b| !(b > 0.0)) {
        return Err(Error::invalid("every class proportion must be positive"));
    }
    check_distribution(proportions)?;
    let c = probs.len() as f64;
    Ok(-probs
        .iter()
        .zip(proportions)
        .map(|(&p, &b)| xlogx(p / (b * c)))
        .sum::<f64>())
}

/// Uniform draw in `[0, 1)` keyed by `(seed, example_id)`.
pub fn score_random(example_id: u64, seed: u64) -> f64 {
    let mut rng = seeded(seed ^ stream::RANDOM_SCORE.rotate_left(56), example_id);
    rng.random::<f64>()
}

/// Which probabilities the uncertainty baselines consume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbabilitySource {
    #[default]
    Recalibrated,
    Backbone,
}

/// Models and settings available to [`build_rank_list`].
#[derive(Debug, Clone, Default)]
pub struct MiningContext<'a> {
    pub backbone: Option<&'a BackboneModel>,
    pub rc: Option<&'a RecalibrationLayer>,
    pub autoencoder: Option<&'a AutoencoderModel>,
    /// Autoencoder fit on uncalibrated backbone logits.
    pub autoencoder_no_rc: Option<&'a AutoencoderModel>,
    /// Train-split class proportions `b_k`.
    pub proportions: Option<&'a [f64]>,
    pub baseline_source: ProbabilitySource,
    pub seed: u64,
    pub top_k: usize,
    pub min_confidence: Option<f64>,
}

impl<'a> MiningContext<'a> {
    fn need<T>(opt: Option<T>, what: &str, method: Method) -> Result<T> {
        opt.ok_or_else(|| Error::config(format!("method `{method}` requires {what}")))
    }

    fn rc_logits(&self, e: &Example, method: Method) -> Result<Vec<f64>> {
        let bb = Self::need(self.backbone, "a backbone", method)?;
        let rc = Self::need(self.rc, "a recalibration layer", method)?;
        rc.apply(&bb.penultimate(&e.features)?)
    }

    fn baseline_logits(&self, e: &Example, method: Method) -> Result<Vec<f64>> {
        match self.baseline_source {
            ProbabilitySource::Recalibrated => self.rc_logits(e, method),
            ProbabilitySource::Backbone => {
                Self::need(self.backbone, "a backbone", method)?.logits(&e.features)
            }
        }
    }

    /// Score of one pool example under `method`.
    pub fn score(&self, e: &Example, method: Method) -> Result<f64> {
        let k = if self.top_k == 0 {
            DEFAULT_TOP_K
        } else {
            self.top_k
        };
        let uncertainty = |z: &[f64]| -> Result<f64> {
            let p = softmax_unchecked(z);
            match method {
                Method::MaxScore => score_max(&p),
                Method::Entropy => score_entropy(&p),
                Method::WeightedEntropy => score_weighted_entropy(
                    &p,
                    Self::need(self.proportions, "class proportions", method)?,
                ),
                _ => unreachable!("not an uncertainty baseline"),
            }
        };
        match method {
            Method::Random => Ok(score_random(e.id, self.seed)),
            Method::Ours | Method::OursNoRc => {
                let ae = if method == Method::Ours {
                    Self::need(self.autoencoder, "an autoencoder", method)?
                } else {
                    Self::need(
                        self.autoencoder_no_rc,
                        "an autoencoder on backbone logits",
                        method,
                    )?
                };
                if let Some(ds) = &e.detections {
                    return score_detection_example(ds, ae, k, self.min_confidence);
                }
                let z = if method == Method::Ours {
                    self.rc_logits(e, method)?
                } else {
                    Self::need(self.backbone, "a backbone", method)?.logits(&e.features)?
                };
                score_ours(&z, &ae.reconstruct(&z)?)
            }
            Method::MaxScore | Method::Entropy | Method::WeightedEntropy => {
                if let Some(ds) = &e.detections {
                    return aggregate_detections(ds, k, self.min_confidence, uncertainty);
                }
                uncertainty(&self.baseline_logits(e, method)?)
            }
        }
    }
}

/// Scores every pool example and sorts into a rank list.
pub fn build_rank_list(
    pool: &Dataset,
    method: Method,
    ctx: &MiningContext<'_>,
) -> Result<RankList> {
    let scores = pool
        .examples()
        .iter()
        .map(|e| Ok((e.id, ctx.score(e, method)?)))
        .collect::<Result<Vec<_>>>()?;
    RankList::from_scores(method, scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Detection;
    use crate::nn::{Activation, DenseLayer};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ours_values() {
        let z = [0.3, -1.2, 2.0];
        assert_eq!(score_ours(&z, &z).unwrap(), 0.0);
        let shifted: Vec<f64> = z.iter().map(|v| v + 4.0).collect();
        assert!(score_ours(&z, &shifted).unwrap() < 1e-12);
        // σ([2,0]) = [0.8808, 0.1192]; gap 0.7616 in both coordinates
        let s = score_ours(&[2.0, 0.0], &[0.0, 2.0]).unwrap();
        assert!(close(s, 1.1600, 1e-3), "{s}");
        assert!(score_ours(&[1.0], &[1.0, 2.0]).is_err());
    }

    fn constant_ae(c: usize, out: Vec<f64>) -> AutoencoderModel {
        let enc = vec![DenseLayer::zeros(c, 1, Activation::Relu)];
        let mut dec = DenseLayer::zeros(1, c, Activation::Identity);
        dec.biases = out;
        AutoencoderModel::new(enc, vec![dec]).unwrap()
    }

    fn det(z: Vec<f64>, confidence: f64) -> Detection {
        Detection {
            logits: z,
            confidence,
        }
    }

    #[test]
    fn detection_aggregation() {
        let ae = constant_ae(2, vec![0.0, 0.0]);
        let one = DetectionSet::new(vec![det(vec![2.0, 0.0], 0.4)]).unwrap();
        let expected = score_ours(&[2.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(
            score_detection_example(&one, &ae, 5, None).unwrap(),
            expected
        );

        let same = DetectionSet::new(vec![det(vec![1.0, -1.0], 0.5); 4]).unwrap();
        let shared = score_ours(&[1.0, -1.0], &[0.0, 0.0]).unwrap();
        assert!(close(
            score_detection_example(&same, &ae, 4, None).unwrap(),
            shared,
            1e-15
        ));

        let three = DetectionSet::new(vec![
            det(vec![2.0, 0.0], 0.9),
            det(vec![-5.0, 5.0], 0.1),
            det(vec![0.0, 1.0], 0.8),
        ])
        .unwrap();
        let s1 = score_ours(&[2.0, 0.0], &[0.0, 0.0]).unwrap();
        let s3 = score_ours(&[0.0, 1.0], &[0.0, 0.0]).unwrap();
        let got = score_detection_example(&three, &ae, 2, None).unwrap();
        assert!(close(got, (s1 + s3) / 2.0, 1e-15));

        // threshold drops the 0.8 detection
        let got = score_detection_example(&three, &ae, 2, Some(0.85)).unwrap();
        assert!(close(got, s1, 1e-15));

        let empty = DetectionSet::default();
        assert_eq!(score_detection_example(&empty, &ae, 3, None).unwrap(), 0.0);
    }

    #[test]
    fn max_score_values() {
        assert_eq!(score_max(&[0.0, 1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(score_max(&[0.25; 4]).unwrap(), 0.75);
        assert_eq!(score_max(&[0.5, 0.3, 0.2]).unwrap(), 0.5);
        assert!(score_max(&[0.5, 0.6]).is_err());
    }

    #[test]
    fn entropy_values() {
        assert_eq!(score_entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert!(close(score_entropy(&[0.1; 10]).unwrap(), 10f64.ln(), 1e-6));
        assert!(close(
            score_entropy(&[0.5, 0.5, 0.0, 0.0]).unwrap(),
            std::f64::consts::LN_2,
            1e-6
        ));
    }

    #[test]
    fn weighted_entropy_values() {
        let p = [0.2, 0.5, 0.3];
        let b = [1.0 / 3.0; 3];
        assert!(close(
            score_weighted_entropy(&p, &b).unwrap(),
            score_entropy(&p).unwrap(),
            1e-12
        ));
        assert_eq!(score_weighted_entropy(&[0.0, 1.0, 0.0], &b).unwrap(), 0.0);
        // q = [0.9/1.5, 0.1/0.5] = [0.6, 0.2]
        let v = score_weighted_entropy(&[0.9, 0.1], &[0.75, 0.25]).unwrap();
        assert!(close(v, -(0.6f64 * 0.6f64.ln() + 0.2 * 0.2f64.ln()), 1e-12));
        assert!(close(v, 0.6284, 1e-3), "{v}");
        assert!(score_weighted_entropy(&[0.5, 0.5], &[1.0, 0.0]).is_err());
    }

    #[test]
    fn random_scores() {
        assert_eq!(score_random(17, 3), score_random(17, 3));
        let mut seen: Vec<u64> = (0..10_000)
            .map(|id| score_random(id, 5).to_bits())
            .collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 10_000);
        let mean = (0..100_000).map(|id| score_random(id, 9)).sum::<f64>() / 100_000.0;
        assert!(close(mean, 0.5, 0.01), "{mean}");
        assert!((0..1000).all(|id| (0.0..1.0).contains(&score_random(id, 1))));
    }

    #[test]
    fn rank_list_ordering() {
        let tied =
            RankList::from_scores(Method::Random, vec![(5, 1.0), (2, 1.0), (9, 1.0)]).unwrap();
        assert_eq!(tied.ids(), vec![2, 5, 9]);
        let abc =
            RankList::from_scores(Method::Entropy, vec![(1, 0.1), (2, 0.9), (3, 0.5)]).unwrap();
        assert_eq!(abc.ids(), vec![2, 3, 1]);
        assert!(RankList::from_scores(Method::Entropy, vec![(1, f64::NAN)]).is_err());
    }

    #[test]
    fn method_tags() {
        for m in Method::ALL {
            assert_eq!(m.tag().parse::<Method>().unwrap(), m);
        }
        let err = "bald".parse::<Method>().unwrap_err().to_string();
        assert!(err.contains("weighted_entropy"), "{err}");
    }

    #[test]
    fn missing_model_is_config_error() {
        let pool = Dataset::new(
            crate::data::SplitRole::Pool,
            crate::data::default_class_names(2),
            vec![Example::unlabeled(1, vec![0.0])],
        )
        .unwrap();
        let ctx = MiningContext::default();
        assert!(matches!(
            build_rank_list(&pool, Method::Ours, &ctx),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_rank_list(&pool, Method::Entropy, &ctx),
            Err(Error::Config(_))
        ));
        assert!(build_rank_list(&pool, Method::Random, &ctx).is_ok());
    }
}
