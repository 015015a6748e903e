//! Pixel-level localization metrics.

use super::DatasetError;
use crate::raster::PixelMask;

/// `2TP / (2TP + FP + FN)`; 1.0 when both masks are empty.
pub fn pixel_f1(pred: &PixelMask, gt: &PixelMask) -> Result<f64, DatasetError> {
    if pred.dims() != gt.dims() {
        return Err(DatasetError::DimensionMismatch(pred.dims(), gt.dims()));
    }
    let (mut tp, mut fp, mut fneg) = (0u64, 0u64, 0u64);
    for (p, g) in pred.bits().iter().zip(gt.bits()) {
        match (*p, *g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp + fp + fneg == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fneg) as f64)
}

/// ROC AUC as the Mann-Whitney statistic with average ranks for ties.
pub fn pixel_auc(scores: &[f64], gt: &PixelMask) -> Result<f64, DatasetError> {
    let n = gt.bits().len();
    if scores.len() != n {
        return Err(DatasetError::DimensionMismatch((scores.len() as u32, 1), gt.dims()));
    }
    let pos = gt.count();
    let neg = n - pos;
    if pos == 0 || neg == 0 {
        return Err(DatasetError::SingleClass);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|a, b| scores[*a].total_cmp(&scores[*b]));
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share their mean.
        let avg = (i + j + 2) as f64 / 2.0;
        for k in &idx[i..=j] {
            if gt.bits()[*k] {
                rank_sum_pos += avg;
            }
        }
        i = j + 1;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(w: u32, h: u32, bits: &[u8]) -> PixelMask {
        PixelMask::from_bits(w, h, bits.iter().map(|b| *b != 0).collect()).unwrap()
    }

    #[test]
    fn f1_conventions() {
        let a = mask(2, 2, &[1, 0, 0, 1]);
        assert_eq!(pixel_f1(&a, &a).unwrap(), 1.0);
        assert_eq!(pixel_f1(&a, &mask(2, 2, &[0, 1, 1, 0])).unwrap(), 0.0);
        assert_eq!(pixel_f1(&mask(2, 2, &[0; 4]), &mask(2, 2, &[0; 4])).unwrap(), 1.0);
        assert!(pixel_f1(&a, &mask(4, 1, &[0; 4])).is_err());
    }

    #[test]
    fn f1_hand_count() {
        // TP=2, FP=1, FN=1.
        let mut p = [0u8; 16];
        let mut g = [0u8; 16];
        p[0] = 1;
        p[1] = 1;
        p[2] = 1;
        g[0] = 1;
        g[1] = 1;
        g[5] = 1;
        let f = pixel_f1(&mask(4, 4, &p), &mask(4, 4, &g)).unwrap();
        assert!((f - 4.0 / 6.0).abs() < 1e-9);
    }

    #[test]
    fn auc_conventions() {
        let g = mask(3, 2, &[1, 0, 1, 0, 0, 1]);
        let perfect: Vec<f64> = g.bits().iter().map(|b| *b as u8 as f64).collect();
        assert_eq!(pixel_auc(&perfect, &g).unwrap(), 1.0);
        assert_eq!(pixel_auc(&[0.3; 6], &g).unwrap(), 0.5);
        assert!(matches!(pixel_auc(&[0.0; 4], &mask(2, 2, &[0; 4])), Err(DatasetError::SingleClass)));
    }

    #[test]
    fn auc_one_inversion() {
        // Positives 0.9, 0.4, 0.8; negatives 0.1, 0.5, 0.2: one of nine pairs inverted.
        let g = mask(3, 2, &[1, 1, 1, 0, 0, 0]);
        let s = [0.9, 0.4, 0.8, 0.1, 0.5, 0.2];
        assert!((pixel_auc(&s, &g).unwrap() - 8.0 / 9.0).abs() < 1e-12);
    }
}
