#![allow(dead_code)]

//! Independent reference implementations shared by the integration tests.

/// AUC-PR from the positions of the positives: the best precision reached at
/// recall `t/T` is `t / pos_t`, where `pos_t` is the 1-based rank of the
/// `t`-th positive. The curve starts at `(0, 1/pos_1)`.
pub fn brute_auc(flags: &[bool]) -> f64 {
    let positions: Vec<usize> = flags
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(i, _)| i + 1)
        .collect();
    let total = positions.len();
    if total == 0 {
        return 0.0;
    }
    let mut prev_r = 0.0;
    let mut prev_p = 1.0 / positions[0] as f64;
    let mut area = 0.0;
    for (t, &pos) in positions.iter().enumerate() {
        let r = (t + 1) as f64 / total as f64;
        let p = (t + 1) as f64 / pos as f64;
        area += (r - prev_r) * (p + prev_p) / 2.0;
        prev_r = r;
        prev_p = p;
    }
    area
}

/// Mean over every prefix of the harmonic mean of precision and recall.
pub fn brute_avg_f(flags: &[bool]) -> f64 {
    let total = flags.iter().filter(|&&f| f).count();
    if flags.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for k in 1..=flags.len() {
        let tp = flags[..k].iter().filter(|&&f| f).count() as f64;
        let p = tp / k as f64;
        let r = if total == 0 { 0.0 } else { tp / total as f64 };
        sum += if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        };
    }
    sum / flags.len() as f64
}

/// Softmax via explicit exponentials of shifted logits.
pub fn ref_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn ref_entropy(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&v| v > 0.0)
        .map(|v| v * v.ln())
        .sum::<f64>()
}
