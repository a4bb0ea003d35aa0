#![allow(dead_code)]

use std::collections::BTreeMap;

use dcme::eval::{instances_from_labels, EvalInstance};
use dcme::grid::{ClassMap, Grid, GridDims, InstanceLabelMap};
use dcme::synth::{generate_scene, split_instances, well_posed_scene, SceneConstraints};
use dcme::DecodeOutput;
use num_rational::Ratio;

pub type Q = Ratio<u64>;

pub fn dims(h: usize, w: usize) -> GridDims {
    GridDims::new(h, w).unwrap()
}

pub fn labels(h: usize, w: usize, ids: &[u16]) -> InstanceLabelMap {
    Grid::from_vec(dims(h, w), ids.to_vec()).unwrap()
}

pub struct Scene {
    pub seed: u64,
    pub ids: InstanceLabelMap,
    pub classes: ClassMap,
}

impl Scene {
    pub fn splits(&self) -> Vec<u16> {
        split_instances(&self.ids)
    }
}

/// Noiseless roundtrip scenes: 60-4000 px instances, CMs more than
/// `separation` apart, `n_splits` occluder bars.
pub fn roundtrip_scene(seed: u64, n_shapes: usize, n_splits: usize, separation: f64) -> Scene {
    let constraints = SceneConstraints {
        min_pixels: 60,
        max_pixels: 4000,
        min_center_distance: separation,
    };
    let spec = well_posed_scene(
        dims(160, 160),
        n_shapes,
        n_splits,
        (90.0, 1600.0),
        &constraints,
        seed,
    );
    let (ids, classes) = generate_scene(&spec).unwrap();
    Scene { seed, ids, classes }
}

pub fn predictions(out: &DecodeOutput, gt_classes: &ClassMap) -> Vec<EvalInstance> {
    let conf: BTreeMap<u16, f64> = out
        .instances
        .iter()
        .map(|i| (i.label, i.confidence))
        .collect();
    instances_from_labels(&out.labels, Some(gt_classes), Some(&conf)).unwrap()
}

pub fn ground_truth(scene: &Scene) -> Vec<EvalInstance> {
    instances_from_labels(&scene.ids, Some(&scene.classes), None).unwrap()
}

/// Pixel masks keyed by label.
pub fn masks(lm: &InstanceLabelMap) -> BTreeMap<u16, Vec<u32>> {
    let mut out: BTreeMap<u16, Vec<u32>> = BTreeMap::new();
    for (i, &l) in lm.as_slice().iter().enumerate() {
        if l != 0 {
            out.entry(l).or_default().push(i as u32);
        }
    }
    out
}

// ---- brute-force evaluation oracle, exact arithmetic ----

pub fn iou_exact(a: &[u32], b: &[u32]) -> Q {
    let inter = a.iter().filter(|x| b.contains(x)).count() as u64;
    let union = (a.len() + b.len()) as u64 - inter;
    Q::new(inter, union)
}

/// Confidence descending, larger mask, then input position.
pub fn oracle_order(preds: &[EvalInstance]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    for i in 1..order.len() {
        let mut j = i;
        while j > 0
            && ranks_before(
                &preds[order[j]],
                order[j],
                &preds[order[j - 1]],
                order[j - 1],
            )
        {
            order.swap(j, j - 1);
            j -= 1;
        }
    }
    order
}

fn ranks_before(a: &EvalInstance, ia: usize, b: &EvalInstance, ib: usize) -> bool {
    if a.confidence != b.confidence {
        return a.confidence > b.confidence;
    }
    if a.mask.len() != b.mask.len() {
        return a.mask.len() > b.mask.len();
    }
    ia < ib
}

/// Every injective partial assignment of predictions to eligible GTs
/// (same class, IoU >= thr), indexed by position in `order`.
fn assignments(
    order: &[usize],
    preds: &[EvalInstance],
    gts: &[EvalInstance],
    thr: Q,
) -> Vec<Vec<Option<usize>>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    let mut used = vec![false; gts.len()];
    #[allow(clippy::too_many_arguments)]
    fn rec(
        k: usize,
        order: &[usize],
        preds: &[EvalInstance],
        gts: &[EvalInstance],
        thr: Q,
        used: &mut Vec<bool>,
        current: &mut Vec<Option<usize>>,
        out: &mut Vec<Vec<Option<usize>>>,
    ) {
        if k == order.len() {
            out.push(current.clone());
            return;
        }
        current.push(None);
        rec(k + 1, order, preds, gts, thr, used, current, out);
        current.pop();
        let p = &preds[order[k]];
        for g in 0..gts.len() {
            if used[g] || gts[g].class_id != p.class_id || iou_exact(&p.mask, &gts[g].mask) < thr {
                continue;
            }
            used[g] = true;
            current.push(Some(g));
            rec(k + 1, order, preds, gts, thr, used, current, out);
            current.pop();
            used[g] = false;
        }
    }
    rec(0, order, preds, gts, thr, &mut used, &mut current, &mut out);
    out
}

/// Greedy matching restated as a search: among all assignments pick the
/// lexicographic maximum of per-prediction keys (matched, IoU, -GT index)
/// in ranking order. Returns the GT matched by each prediction (input index).
pub fn oracle_match(preds: &[EvalInstance], gts: &[EvalInstance], thr: Q) -> Vec<Option<usize>> {
    let order = oracle_order(preds);
    let key = |a: &Vec<Option<usize>>| -> Vec<(bool, Q, i64)> {
        a.iter()
            .enumerate()
            .map(|(k, m)| match m {
                None => (false, Q::from_integer(0), 0),
                Some(g) => (
                    true,
                    iou_exact(&preds[order[k]].mask, &gts[*g].mask),
                    -(*g as i64),
                ),
            })
            .collect()
    };
    let best = assignments(&order, preds, gts, thr)
        .into_iter()
        .max_by(|a, b| key(a).cmp(&key(b)))
        .unwrap();
    let mut by_input = vec![None; preds.len()];
    for (k, m) in best.into_iter().enumerate() {
        by_input[order[k]] = m;
    }
    by_input
}

fn ap_from_hits(hits: &[bool], n_gt: u64) -> Q {
    // precision envelope at every recall step
    let mut ap = Q::from_integer(0);
    let mut tp = 0u64;
    let precisions: Vec<Q> = hits
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            tp += h as u64;
            Q::new(tp, k as u64 + 1)
        })
        .collect();
    for (k, &h) in hits.iter().enumerate() {
        if h {
            let envelope = precisions[k..].iter().copied().max().unwrap();
            ap += envelope * Q::new(1, n_gt);
        }
    }
    ap
}

/// Exact AP over images with predictions pooled per class. Returns
/// (mean AP over thresholds, AP at 0.5), averaged over GT classes.
pub fn oracle_ap(images: &[(Vec<EvalInstance>, Vec<EvalInstance>)], thresholds: &[Q]) -> (Q, Q) {
    let mut classes: Vec<u16> = images
        .iter()
        .flat_map(|(_, g)| g.iter().map(|i| i.class_id))
        .collect();
    classes.sort_unstable();
    classes.dedup();
    let class_ap = |class: u16, thr: Q| -> Q {
        let mut pooled: Vec<(EvalInstance, usize, usize, bool)> = Vec::new();
        let mut n_gt = 0u64;
        for (im, (preds, gts)) in images.iter().enumerate() {
            n_gt += gts.iter().filter(|g| g.class_id == class).count() as u64;
            let m = oracle_match(preds, gts, thr);
            for (p, pred) in preds.iter().enumerate() {
                if pred.class_id == class {
                    pooled.push((pred.clone(), im, p, m[p].is_some()));
                }
            }
        }
        pooled.sort_by(|a, b| {
            b.0.confidence
                .partial_cmp(&a.0.confidence)
                .unwrap()
                .then(b.0.mask.len().cmp(&a.0.mask.len()))
                .then((a.1, a.2).cmp(&(b.1, b.2)))
        });
        let hits: Vec<bool> = pooled.iter().map(|x| x.3).collect();
        ap_from_hits(&hits, n_gt)
    };
    let n_classes = classes.len() as u64;
    let n_thr = thresholds.len() as u64;
    let mut ap = Q::from_integer(0);
    let mut ap50 = Q::from_integer(0);
    for &c in &classes {
        let sum: Q = thresholds
            .iter()
            .map(|&t| class_ap(c, t))
            .fold(Q::from_integer(0), |a, b| a + b);
        ap += sum / Q::from_integer(n_thr) / Q::from_integer(n_classes);
        ap50 += class_ap(c, Q::new(1, 2)) / Q::from_integer(n_classes);
    }
    (ap, ap50)
}

pub fn default_thresholds_exact() -> Vec<Q> {
    (0..10).map(|i| Q::new(50 + 5 * i, 100)).collect()
}

pub fn to_f64(q: Q) -> f64 {
    *q.numer() as f64 / *q.denom() as f64
}
