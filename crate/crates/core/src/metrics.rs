//! Detection metrics over scored samples. Label 1 is fake (positive class).

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoredSample {
    pub id: String,
    pub label: u8,
    /// Logit.
    pub score: f64,
    pub prob: f64,
}

impl ScoredSample {
    pub fn from_logit(id: impl Into<String>, label: u8, score: f64) -> Self {
        ScoredSample { id: id.into(), label, score, prob: sigmoid(score) }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn split<'a>(metric: &'static str, xs: &'a [(u8, f64)]) -> Result<(Vec<f64>, Vec<f64>)> {
    let reals: Vec<f64> = xs.iter().filter(|s| s.0 == 0).map(|s| s.1).collect();
    let fakes: Vec<f64> = xs.iter().filter(|s| s.0 == 1).map(|s| s.1).collect();
    if reals.is_empty() || fakes.is_empty() {
        return Err(Error::Metric { metric, msg: "needs at least one real and one fake sample".into() });
    }
    if xs.iter().any(|s| s.0 > 1) {
        return Err(Error::Metric { metric, msg: "labels must be 0 or 1".into() });
    }
    Ok((reals, fakes))
}

/// Probability that a random fake outscores a random real, ties counting ½.
pub fn auc(xs: &[(u8, f64)]) -> Result<f64> {
    let (reals, fakes) = split("auc", xs)?;
    let mut r = reals.clone();
    r.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for &f in &fakes {
        let below = r.partition_point(|&x| x < f);
        let not_above = r.partition_point(|&x| x <= f);
        wins += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Ok(wins / (reals.len() * fakes.len()) as f64)
}

/// Mean of TPR and TNR, predicting fake when `prob >= thr`.
pub fn balanced_accuracy(xs: &[(u8, f64)], thr: f64) -> Result<f64> {
    let (reals, fakes) = split("balanced_accuracy", xs)?;
    let tpr = fakes.iter().filter(|&&p| p >= thr).count() as f64 / fakes.len() as f64;
    let tnr = reals.iter().filter(|&&p| p < thr).count() as f64 / reals.len() as f64;
    Ok(0.5 * (tpr + tnr))
}

/// Detection rate at the smallest observed threshold `t` whose real
/// exceedance rate `P(real > t)` is at most `fpr`.
pub fn pd_at_fpr(xs: &[(u8, f64)], fpr: f64) -> Result<f64> {
    let (mut reals, fakes) = split("pd_at_fpr", xs)?;
    reals.sort_by(f64::total_cmp);
    let n = reals.len();
    let exceed = |t: f64| (n - reals.partition_point(|&x| x <= t)) as f64 / n as f64;
    let mut cands: Vec<f64> = xs.iter().map(|s| s.1).collect();
    cands.sort_by(f64::total_cmp);
    let t = cands
        .into_iter()
        .find(|&t| exceed(t) <= fpr)
        .expect("the largest score always has zero exceedance");
    Ok(fakes.iter().filter(|&&f| f > t).count() as f64 / fakes.len() as f64)
}

pub const NLL_CLIP: f64 = 1e-7;

/// Class-balanced negative log-likelihood of clipped probabilities.
pub fn balanced_nll(xs: &[(u8, f64)]) -> Result<f64> {
    let (reals, fakes) = split("balanced_nll", xs)?;
    let c = |p: f64| p.clamp(NLL_CLIP, 1.0 - NLL_CLIP);
    let lr = reals.iter().map(|&p| -(1.0 - c(p)).ln()).sum::<f64>() / reals.len() as f64;
    let lf = fakes.iter().map(|&p| -c(p).ln()).sum::<f64>() / fakes.len() as f64;
    Ok(0.5 * (lr + lf))
}

/// Binary expected calibration error over `bins` equal-width probability bins.
pub fn ece(xs: &[(u8, f64)], bins: usize) -> Result<f64> {
    if bins == 0 {
        return Err(Error::Metric { metric: "ece", msg: "bins must be positive".into() });
    }
    if xs.is_empty() {
        return Err(Error::Metric { metric: "ece", msg: "no samples".into() });
    }
    if xs.iter().any(|s| !(0.0..=1.0).contains(&s.1)) {
        return Err(Error::Metric { metric: "ece", msg: "probabilities must lie in [0,1]".into() });
    }
    let mut count = vec![0usize; bins];
    let mut lab = vec![0.0; bins];
    let mut prob = vec![0.0; bins];
    for &(l, p) in xs {
        let b = ((p * bins as f64) as usize).min(bins - 1);
        count[b] += 1;
        lab[b] += l as f64;
        prob[b] += p;
    }
    let n = xs.len() as f64;
    Ok((0..bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let k = count[b] as f64;
            k / n * (lab[b] / k - prob[b] / k).abs()
        })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub auc: f64,
    pub bacc: f64,
    pub pd_at_5: f64,
    pub nll: f64,
    pub ece: f64,
    pub threshold: f64,
}

impl MetricReport {
    pub fn rows(&self) -> [(&'static str, f64); 6] {
        [
            ("auc", self.auc),
            ("bacc", self.bacc),
            ("pd_at_5", self.pd_at_5),
            ("nll", self.nll),
            ("ece", self.ece),
            ("threshold", self.threshold),
        ]
    }

    /// `metric,value` CSV with six decimals.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        for (k, v) in self.rows() {
            s.push_str(&format!("{k},{v:.6}\n"));
        }
        s
    }
}

/// All five metrics: AUC and Pd@5% on logits, the rest on probabilities.
pub fn evaluate(samples: &[ScoredSample], bins: usize) -> Result<MetricReport> {
    let logits: Vec<(u8, f64)> = samples.iter().map(|s| (s.label, s.score)).collect();
    let probs: Vec<(u8, f64)> = samples.iter().map(|s| (s.label, s.prob)).collect();
    Ok(MetricReport {
        auc: auc(&logits)?,
        bacc: balanced_accuracy(&probs, 0.5)?,
        pd_at_5: pd_at_fpr(&logits, 0.05)?,
        nll: balanced_nll(&probs)?,
        ece: ece(&probs, bins)?,
        threshold: 0.5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(reals: &[f64], fakes: &[f64]) -> Vec<(u8, f64)> {
        reals.iter().map(|&s| (0, s)).chain(fakes.iter().map(|&s| (1, s))).collect()
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc(&set(&[0.1, 0.4], &[0.6, 0.9])).unwrap(), 1.0);
        assert_eq!(auc(&set(&[0.2, 0.6], &[0.4, 0.8])).unwrap(), 0.75);
        assert_eq!(auc(&set(&[0.5, 0.5], &[0.5])).unwrap(), 0.5);
        assert!(matches!(auc(&set(&[0.1], &[])), Err(Error::Metric { metric: "auc", .. })));
    }

    #[test]
    fn bacc_examples() {
        assert_eq!(balanced_accuracy(&set(&[0.0], &[1.0]), 0.5).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&set(&[0.2, 0.7], &[0.4, 0.9]), 0.5).unwrap(), 0.5);
        assert_eq!(balanced_accuracy(&set(&[1.0], &[0.0]), 0.5).unwrap(), 0.0);
    }

    #[test]
    fn pd_examples() {
        assert_eq!(pd_at_fpr(&set(&[0.1; 20], &[0.9, 0.9]), 0.05).unwrap(), 1.0);
        let reals: Vec<f64> = (1..=20).map(|k| k as f64 / 100.0).collect();
        assert_eq!(pd_at_fpr(&set(&reals, &[0.15, 0.25]), 0.05).unwrap(), 0.5);
        assert_eq!(pd_at_fpr(&set(&[0.5, 0.6], &[0.1, 0.2]), 0.05).unwrap(), 0.0);
    }

    #[test]
    fn nll_examples() {
        assert!((balanced_nll(&set(&[0.5; 3], &[0.5; 2])).unwrap() - 2f64.ln()).abs() < 1e-12);
        let want = 0.5 * 2f64.ln() + 0.5 * (2f64.ln() + 4f64.ln()) / 2.0;
        assert!((balanced_nll(&set(&[0.5], &[0.5, 0.25])).unwrap() - want).abs() < 1e-12);
        assert!(balanced_nll(&set(&[0.0], &[1.0])).unwrap() < 2e-7);
    }

    #[test]
    fn ece_examples() {
        assert_eq!(ece(&set(&[0.5; 4], &[0.5; 4]), 10).unwrap(), 0.0);
        assert!((ece(&set(&[0.9; 5], &[]), 10).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn report_csv_format() {
        let s: Vec<ScoredSample> = vec![
            ScoredSample::from_logit("a", 0, -1.0),
            ScoredSample::from_logit("b", 1, 2.0),
        ];
        let csv = evaluate(&s, 10).unwrap().to_csv();
        assert!(csv.starts_with("metric,value\nauc,1.000000\nbacc,1.000000\n"));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(0.3) + sigmoid(-0.3) - 1.0).abs() < 1e-15);
    }
}
