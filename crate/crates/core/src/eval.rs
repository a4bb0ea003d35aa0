//! Instance-level evaluation: IoU, greedy confidence-ranked matching, and
//! Average Precision over IoU thresholds.
//!
//! AP per class and threshold integrates the precision envelope over recall
//! (all-point interpolation) of the confidence-ranked predictions pooled
//! across images. Class AP is the mean over thresholds; the report AP is
//! the mean over classes that appear in the ground truth.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ClassMap, InstanceLabelMap};

/// An instance as a sorted, duplicate-free list of flat pixel indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalInstance {
    pub mask: Vec<u32>,
    pub class_id: u16,
    /// Ranking score; only meaningful for predictions.
    pub confidence: f64,
}

impl EvalInstance {
    pub fn new(mut mask: Vec<u32>, class_id: u16, confidence: f64) -> Self {
        mask.sort_unstable();
        mask.dedup();
        Self {
            mask,
            class_id,
            confidence,
        }
    }
}

fn intersection(a: &[u32], b: &[u32]) -> usize {
    if a.is_empty() || b.is_empty() || a[a.len() - 1] < b[0] || b[b.len() - 1] < a[0] {
        return 0;
    }
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            Ordering::Less => i += 1,
            Ordering::Greater => j += 1,
            Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// `|a ∩ b| / |a ∪ b|` over sorted, duplicate-free pixel lists.
pub fn iou(a: &[u32], b: &[u32]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySet);
    }
    let inter = intersection(a, b);
    Ok(inter as f64 / (a.len() + b.len() - inter) as f64)
}

/// Processing order for predictions: confidence descending, then larger
/// mask, then input order.
pub fn ranking(preds: &[EvalInstance]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| {
        preds[b]
            .confidence
            .total_cmp(&preds[a].confidence)
            .then(preds[b].mask.len().cmp(&preds[a].mask.len()))
            .then(a.cmp(&b))
    });
    order
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// Prediction indices in processing order.
    pub order: Vec<usize>,
    /// For each prediction (input index), the matched GT index.
    pub pred_match: Vec<Option<usize>>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

fn iou_matrix(preds: &[EvalInstance], gts: &[EvalInstance]) -> Result<Vec<Vec<f64>>> {
    if preds.iter().chain(gts).any(|i| i.mask.is_empty()) {
        return Err(Error::EmptySet);
    }
    Ok(preds
        .iter()
        .map(|p| {
            gts.iter()
                .map(|g| {
                    if g.class_id != p.class_id {
                        0.0
                    } else {
                        iou(&p.mask, &g.mask).expect("non-empty")
                    }
                })
                .collect()
        })
        .collect())
}

fn match_with(
    preds: &[EvalInstance],
    gts: &[EvalInstance],
    ious: &[Vec<f64>],
    thr: f64,
) -> MatchResult {
    let order = ranking(preds);
    let mut gt_taken = vec![false; gts.len()];
    let mut pred_match = vec![None; preds.len()];
    for &p in &order {
        let mut best: Option<(f64, usize)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if gt_taken[g] || gt.class_id != preds[p].class_id {
                continue;
            }
            let v = ious[p][g];
            if v >= thr && best.is_none_or(|(bv, _)| v > bv) {
                best = Some((v, g));
            }
        }
        if let Some((_, g)) = best {
            gt_taken[g] = true;
            pred_match[p] = Some(g);
        }
    }
    let tp = pred_match.iter().filter(|m| m.is_some()).count();
    MatchResult {
        order,
        pred_match,
        true_positives: tp,
        false_positives: preds.len() - tp,
        false_negatives: gts.len() - tp,
    }
}

fn check_threshold(thr: f64) -> Result<()> {
    if !(thr > 0.0 && thr <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "IoU threshold must be in (0, 1], got {thr}"
        )));
    }
    Ok(())
}

/// Greedy matching. Each prediction, in ranking order, takes the unmatched
/// same-class GT of highest IoU (ties: lower GT index) if that IoU is at
/// least `thr`.
pub fn match_instances(
    preds: &[EvalInstance],
    gts: &[EvalInstance],
    thr: f64,
) -> Result<MatchResult> {
    check_threshold(thr)?;
    let ious = iou_matrix(preds, gts)?;
    Ok(match_with(preds, gts, &ious, thr))
}

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn default_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub ap: f64,
    pub ap50: f64,
    pub n_gt: usize,
    pub n_pred: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub ap: f64,
    pub ap50: f64,
    pub thresholds: Vec<f64>,
    pub per_class: BTreeMap<u16, ClassAp>,
}

/// Predictions and ground truth of one image.
#[derive(Debug, Clone, Copy)]
pub struct ImageInstances<'a> {
    pub preds: &'a [EvalInstance],
    pub gts: &'a [EvalInstance],
}

/// All-point interpolated AP of a ranked TP/FP sequence.
pub fn interpolated_ap(hits: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(hits.len());
    let mut recall = Vec::with_capacity(hits.len());
    let mut tp = 0usize;
    for (k, &hit) in hits.iter().enumerate() {
        if hit {
            tp += 1;
        }
        precision.push(tp as f64 / (k + 1) as f64);
        recall.push(tp as f64 / n_gt as f64);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for k in 0..hits.len() {
        if hits[k] {
            ap += (recall[k] - prev_recall) * precision[k];
            prev_recall = recall[k];
        }
    }
    ap
}

struct Ranked {
    confidence: f64,
    size: usize,
    image: usize,
    index: usize,
}

fn class_ap_at(images: &[ImageInstances], ious: &[Vec<Vec<f64>>], class: u16, thr: f64) -> f64 {
    let mut ranked = Vec::new();
    let mut hit = Vec::new();
    let mut n_gt = 0;
    for (im, image) in images.iter().enumerate() {
        n_gt += image.gts.iter().filter(|g| g.class_id == class).count();
        let m = match_with(image.preds, image.gts, &ious[im], thr);
        for (p, pred) in image.preds.iter().enumerate() {
            if pred.class_id != class {
                continue;
            }
            ranked.push(Ranked {
                confidence: pred.confidence,
                size: pred.mask.len(),
                image: im,
                index: p,
            });
            hit.push(m.pred_match[p].is_some());
        }
    }
    let mut order: Vec<usize> = (0..ranked.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&ranked[a], &ranked[b]);
        rb.confidence
            .total_cmp(&ra.confidence)
            .then(rb.size.cmp(&ra.size))
            .then(ra.image.cmp(&rb.image))
            .then(ra.index.cmp(&rb.index))
    });
    let hits: Vec<bool> = order.iter().map(|&k| hit[k]).collect();
    interpolated_ap(&hits, n_gt)
}

/// AP over a set of images, predictions pooled per class across images.
pub fn average_precision_dataset(
    images: &[ImageInstances],
    thresholds: &[f64],
) -> Result<ApReport> {
    if thresholds.is_empty() {
        return Err(Error::InvalidParam("no IoU thresholds".into()));
    }
    for &t in thresholds {
        check_threshold(t)?;
    }
    let mut classes: BTreeMap<u16, (usize, usize)> = BTreeMap::new();
    for image in images {
        for g in image.gts {
            classes.entry(g.class_id).or_default().0 += 1;
        }
    }
    if classes.is_empty() {
        return Err(Error::NothingToEvaluate);
    }
    for image in images {
        for p in image.preds {
            if let Some(c) = classes.get_mut(&p.class_id) {
                c.1 += 1;
            }
        }
    }
    let ious = images
        .iter()
        .map(|im| iou_matrix(im.preds, im.gts))
        .collect::<Result<Vec<_>>>()?;

    let mut per_class = BTreeMap::new();
    for (&class, &(n_gt, n_pred)) in &classes {
        let ap = thresholds
            .iter()
            .map(|&t| class_ap_at(images, &ious, class, t))
            .sum::<f64>()
            / thresholds.len() as f64;
        let ap50 = class_ap_at(images, &ious, class, 0.5);
        per_class.insert(
            class,
            ClassAp {
                ap,
                ap50,
                n_gt,
                n_pred,
            },
        );
    }
    let n = per_class.len() as f64;
    Ok(ApReport {
        ap: per_class.values().map(|c| c.ap).sum::<f64>() / n,
        ap50: per_class.values().map(|c| c.ap50).sum::<f64>() / n,
        thresholds: thresholds.to_vec(),
        per_class,
    })
}

pub fn average_precision(
    preds: &[EvalInstance],
    gts: &[EvalInstance],
    thresholds: &[f64],
) -> Result<ApReport> {
    average_precision_dataset(&[ImageInstances { preds, gts }], thresholds)
}

/// One instance per nonzero id, in ascending id order. The class is the
/// most frequent nonzero class under the mask (ties: lower class), or 1
/// without a class map; the confidence defaults to 1.
pub fn instances_from_labels(
    labels: &InstanceLabelMap,
    classes: Option<&ClassMap>,
    confidences: Option<&BTreeMap<u16, f64>>,
) -> Result<Vec<EvalInstance>> {
    if let Some(c) = classes {
        if c.dims() != labels.dims() {
            return Err(Error::DimMismatch {
                expected: labels.dims().to_string(),
                actual: c.dims().to_string(),
            });
        }
    }
    let mut masks: BTreeMap<u16, Vec<u32>> = BTreeMap::new();
    for (i, &id) in labels.as_slice().iter().enumerate() {
        if id != 0 {
            masks.entry(id).or_default().push(i as u32);
        }
    }
    Ok(masks
        .into_iter()
        .map(|(id, mask)| {
            let class_id = classes.and_then(|c| majority_class(&mask, c)).unwrap_or(1);
            let confidence = confidences.and_then(|m| m.get(&id).copied()).unwrap_or(1.0);
            EvalInstance {
                mask,
                class_id,
                confidence,
            }
        })
        .collect())
}

fn majority_class(mask: &[u32], classes: &ClassMap) -> Option<u16> {
    let mut votes: BTreeMap<u16, usize> = BTreeMap::new();
    for &i in mask {
        let c = classes.as_slice()[i as usize];
        if c != 0 {
            *votes.entry(c).or_default() += 1;
        }
    }
    votes
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(c, _)| c)
}

/// Give each prediction the majority GT class under its mask. Predictions
/// over pure background keep their class.
pub fn classes_from_ground_truth(preds: &mut [EvalInstance], gt_classes: &ClassMap) {
    for p in preds {
        if let Some(c) = majority_class(&p.mask, gt_classes) {
            p.class_id = c;
        }
    }
}

/// Fraction of pixels whose instance assignment agrees with the ground
/// truth, after a one-to-one class-agnostic match of predicted to GT
/// instances at IoU 0.5 (larger predictions first).
pub fn pixel_accuracy(pred: &InstanceLabelMap, gt: &InstanceLabelMap) -> Result<f64> {
    if pred.dims() != gt.dims() {
        return Err(Error::DimMismatch {
            expected: gt.dims().to_string(),
            actual: pred.dims().to_string(),
        });
    }
    let p_inst = instances_from_labels(pred, None, None)?;
    let g_inst = instances_from_labels(gt, None, None)?;
    let p_ids = pred.instance_ids();
    let g_ids = gt.instance_ids();
    let m = match_instances(&p_inst, &g_inst, 0.5)?;
    let mut lut = vec![None; u16::MAX as usize + 1];
    for (k, g) in m.pred_match.iter().enumerate() {
        lut[p_ids[k] as usize] = g.map(|g| g_ids[g]);
    }
    let correct = pred
        .as_slice()
        .iter()
        .zip(gt.as_slice())
        .filter(|&(&p, &g)| {
            if p == 0 {
                g == 0
            } else {
                lut[p as usize] == Some(g)
            }
        })
        .count();
    Ok(correct as f64 / pred.as_slice().len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid, GridDims};

    fn inst(mask: &[u32], conf: f64) -> EvalInstance {
        EvalInstance::new(mask.to_vec(), 1, conf)
    }

    fn range(a: u32, b: u32) -> Vec<u32> {
        (a..b).collect()
    }

    #[test]
    fn iou_examples() {
        assert_eq!(iou(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(iou(&[1, 2], &[3, 4]).unwrap(), 0.0);
        assert_eq!(iou(&[1, 2], &[2, 3]).unwrap(), 1.0 / 3.0);
        assert!(matches!(iou(&[], &[1]), Err(Error::EmptySet)));
    }

    #[test]
    fn match_examples() {
        let gt = inst(&range(0, 10), 1.0);
        let m = match_instances(std::slice::from_ref(&gt), std::slice::from_ref(&gt), 0.5).unwrap();
        assert_eq!(
            (m.true_positives, m.false_positives, m.false_negatives),
            (1, 0, 0)
        );

        let m = match_instances(&[], std::slice::from_ref(&gt), 0.5).unwrap();
        assert_eq!((m.true_positives, m.false_negatives), (0, 1));

        // IoU 0.6 (6 of 10) and IoU 0.7 (7 of 10)
        let a = inst(&range(0, 6), 0.9);
        let b = inst(&range(0, 7), 0.8);
        let m = match_instances(&[a, b], &[gt], 0.5).unwrap();
        assert_eq!(m.pred_match, vec![Some(0), None]);
        assert_eq!(m.false_positives, 1);
    }

    #[test]
    fn match_ignores_other_classes() {
        let gt = EvalInstance::new(range(0, 10), 2, 1.0);
        let m = match_instances(&[inst(&range(0, 10), 1.0)], &[gt], 0.5).unwrap();
        assert_eq!(m.true_positives, 0);
    }

    #[test]
    fn ranking_ties() {
        let preds = vec![
            inst(&[1], 0.5),
            inst(&[1, 2], 0.5),
            inst(&[3], 0.9),
            inst(&[4], 0.5),
        ];
        assert_eq!(ranking(&preds), vec![2, 1, 0, 3]);
    }

    #[test]
    fn threshold_validated() {
        assert!(match_instances(&[], &[], 0.0).is_err());
        assert!(match_instances(&[], &[], 1.5).is_err());
    }

    #[test]
    fn perfect_predictions() {
        let gts = vec![inst(&range(0, 5), 1.0), inst(&range(10, 30), 1.0)];
        let preds = vec![inst(&range(0, 5), 0.1), inst(&range(10, 30), 0.7)];
        let r = average_precision(&preds, &gts, &default_thresholds()).unwrap();
        assert_eq!((r.ap, r.ap50), (1.0, 1.0));
    }

    #[test]
    fn single_prediction_iou_point_six() {
        // GT 5 px, prediction covers 3 of them: IoU 3/5
        let gts = vec![inst(&range(0, 5), 1.0)];
        let preds = vec![inst(&range(0, 3), 0.5)];
        let r = average_precision(&preds, &gts, &default_thresholds()).unwrap();
        assert!((r.ap - 0.3).abs() < 1e-12);
        assert_eq!(r.ap50, 1.0);
    }

    #[test]
    fn nothing_to_evaluate() {
        assert!(matches!(
            average_precision(&[inst(&[1], 1.0)], &[], &default_thresholds()),
            Err(Error::NothingToEvaluate)
        ));
    }

    #[test]
    fn interpolation_envelope() {
        // TP, FP, TP with 2 GT: recall .5 at p=1, recall 1 at p=2/3
        let ap = interpolated_ap(&[true, false, true], 2);
        assert!((ap - (0.5 + 0.5 * 2.0 / 3.0)).abs() < 1e-12);
        // FP first then TP: envelope is 1/2
        assert!((interpolated_ap(&[false, true], 1) - 0.5).abs() < 1e-12);
        assert_eq!(interpolated_ap(&[], 3), 0.0);
    }

    #[test]
    fn classes_absent_from_gt_excluded() {
        let gts = vec![inst(&range(0, 5), 1.0)];
        let stray = EvalInstance::new(range(20, 25), 7, 0.99);
        let preds = vec![inst(&range(0, 5), 0.5), stray];
        let r = average_precision(&preds, &gts, &default_thresholds()).unwrap();
        assert_eq!(r.per_class.len(), 1);
        assert_eq!(r.ap, 1.0);
    }

    #[test]
    fn pooled_across_images() {
        let g1 = vec![inst(&range(0, 5), 1.0)];
        let g2 = vec![inst(&range(0, 5), 1.0)];
        let p1 = vec![inst(&range(0, 5), 0.9)];
        let p2 = vec![inst(&range(10, 15), 0.95)];
        let r = average_precision_dataset(
            &[
                ImageInstances {
                    preds: &p1,
                    gts: &g1,
                },
                ImageInstances {
                    preds: &p2,
                    gts: &g2,
                },
            ],
            &[0.5],
        )
        .unwrap();
        // FP (0.95) then TP (0.9): precision 1/2 at recall 1/2
        assert!((r.ap - 0.25).abs() < 1e-12);
    }

    #[test]
    fn labels_to_instances() {
        let dims = GridDims::new(2, 3).unwrap();
        let lm = Grid::from_vec(dims, vec![0, 4, 4, 2, 2, 2]).unwrap();
        let cls = Grid::from_vec(dims, vec![0, 9, 9, 3, 5, 5]).unwrap();
        let conf = BTreeMap::from([(4u16, 0.25)]);
        let v = instances_from_labels(&lm, Some(&cls), Some(&conf)).unwrap();
        assert_eq!(v[0].mask, vec![3, 4, 5]);
        assert_eq!(v[0].class_id, 5);
        assert_eq!(v[0].confidence, 1.0);
        assert_eq!(v[1].class_id, 9);
        assert_eq!(v[1].confidence, 0.25);
    }

    #[test]
    fn pixel_accuracy_counts_matched_pixels() {
        let dims = GridDims::new(1, 6).unwrap();
        let gt = Grid::from_vec(dims, vec![1, 1, 1, 0, 2, 2]).unwrap();
        let pred = Grid::from_vec(dims, vec![5, 5, 0, 0, 7, 7]).unwrap();
        assert!((pixel_accuracy(&pred, &gt).unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(pixel_accuracy(&gt, &gt).unwrap(), 1.0);
    }
}
