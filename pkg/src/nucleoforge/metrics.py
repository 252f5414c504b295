"""Instance segmentation and classification metrics.

Aggregated Jaccard Index, panoptic quality, and detection/
classification F1 over paired instance label maps, in both binary
(class-blind) and per-class flavors, plus dataset-level aggregation
that pools raw counts across images instead of averaging per-image
ratios (so images empty of a class don't bias the mean with 0/0
artifacts).

Overlap bookkeeping runs on a sparse contingency table from np.unique,
and all IoU comparisons (the 0.5 match threshold, tie-breaks in the AJI
argmax) are done in exact integer arithmetic, so threshold-edge cases
like IoU == 0.5 behave as defined rather than at the mercy of float
rounding.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MatchResult:
    """Unique IoU > 0.5 pairing between two instance maps.

    pairs: (gt_id, pred_id, iou) sorted by gt_id; unmatched_gt and
    unmatched_pred: sorted leftover IDs. At this threshold each
    instance can overlap-majority at most one partner, so the pairing
    needs no assignment search.
    """

    pairs: tuple
    unmatched_gt: tuple
    unmatched_pred: tuple


def _inst_array(x):
    arr = getattr(x, "instance_ids", None)
    if arr is None:
        arr = np.asarray(x)
    if arr.ndim != 2:
        raise ValueError("instance map must be 2-D, got shape %s"
                         % (arr.shape,))
    return arr


def _paired(gt, pred):
    g = _inst_array(gt)
    p = _inst_array(pred)
    if g.shape != p.shape:
        raise ValueError("shape mismatch: gt %s vs pred %s"
                         % (g.shape, p.shape))
    return g, p


def _contingency(g, p):
    """Areas of each nonzero label and intersection counts of label pairs."""
    g = g.ravel().astype(np.int64)
    p = p.ravel().astype(np.int64)
    gi, gc = np.unique(g[g != 0], return_counts=True)
    pi, pc = np.unique(p[p != 0], return_counts=True)
    gt_areas = dict(zip(gi.tolist(), gc.tolist()))
    pred_areas = dict(zip(pi.tolist(), pc.tolist()))
    both = (g != 0) & (p != 0)
    inter = {}
    if both.any():
        keys, counts = np.unique(np.stack([g[both], p[both]], axis=1),
                                 axis=0, return_counts=True)
        for (gid, pid), n in zip(keys.tolist(), counts.tolist()):
            inter[(gid, pid)] = n
    return gt_areas, pred_areas, inter


def match_instances(gt, pred):
    """Pair instances whose IoU strictly exceeds 1/2."""
    g, p = _paired(gt, pred)
    gt_areas, pred_areas, inter = _contingency(g, p)
    pairs = []
    matched_g, matched_p = set(), set()
    for (gid, pid), i in sorted(inter.items()):
        union = gt_areas[gid] + pred_areas[pid] - i
        if 2 * i > union:
            pairs.append((gid, pid, i / union))
            matched_g.add(gid)
            matched_p.add(pid)
    return MatchResult(
        pairs=tuple(sorted(pairs)),
        unmatched_gt=tuple(sorted(set(gt_areas) - matched_g)),
        unmatched_pred=tuple(sorted(set(pred_areas) - matched_p)),
    )


def _aji_counts(g, p):
    """Aggregated-intersection numerator and aggregated-union denominator.

    Walks reference instances in ascending ID, each taking the
    prediction with the largest IoU among all predictions overlapping
    it (lower prediction ID on ties; predictions may be claimed by
    several references). References with no overlap at all contribute
    their own area to the denominator, and so does every prediction
    never claimed by anyone.
    """
    gt_areas, pred_areas, inter = _contingency(g, p)
    by_gt = {}
    for (gid, pid), i in inter.items():
        by_gt.setdefault(gid, []).append((pid, i))
    num = 0
    den = 0
    used = set()
    for gid in sorted(gt_areas):
        best = None  # (pid, inter, union)
        for pid, i in sorted(by_gt.get(gid, [])):
            union = gt_areas[gid] + pred_areas[pid] - i
            # i/union > best_i/best_union, exactly, without division
            if best is None or i * best[2] > best[1] * union:
                best = (pid, i, union)
        if best is None:
            den += gt_areas[gid]
        else:
            num += best[1]
            den += best[2]
            used.add(best[0])
    for pid, area in pred_areas.items():
        if pid not in used:
            den += area
    return num, den


def aji(gt, pred):
    """Aggregated Jaccard Index; 1.0 when both maps are empty."""
    g, p = _paired(gt, pred)
    num, den = _aji_counts(g, p)
    if den == 0:
        return 1.0
    return num / den


def _pq_counts(g, p):
    m = match_instances(g, p)
    tp = len(m.pairs)
    fp = len(m.unmatched_pred)
    fn = len(m.unmatched_gt)
    iou_sum = float(sum(iou for _, _, iou in m.pairs))
    return tp, fp, fn, iou_sum


def _pq_scores(tp, fp, fn, iou_sum):
    if tp + fp + fn == 0:
        return 1.0, 1.0, 1.0
    dq = tp / (tp + 0.5 * fp + 0.5 * fn)
    sq = iou_sum / tp if tp else 0.0
    return dq, sq, dq * sq


def panoptic_quality(gt, pred):
    """(detection quality, segmentation quality, their product)."""
    g, p = _paired(gt, pred)
    return _pq_scores(*_pq_counts(g, p))


def _class_of_instances(label):
    """instance id -> class id for every instance in the map."""
    inst = label.instance_ids
    cls = label.class_ids
    out = {}
    nz = inst != 0
    if not nz.any():
        return out
    ids = inst[nz]
    classes = cls[nz]
    order = np.argsort(ids, kind="stable")
    ids = ids[order]
    classes = classes[order]
    starts = np.flatnonzero(np.r_[True, ids[1:] != ids[:-1]])
    for s in starts:
        out[int(ids[s])] = int(classes[s])
    return out


def _restrict(label, class_id):
    """Instance array keeping only instances of one class."""
    return np.where(label.class_ids == class_id, label.instance_ids, 0)


def multiclass_scores(gt, pred):
    """Per-class AJI/PQ plus their unweighted means over classes in gt.

    Returns {"per_class": {c: {"aji", "dq", "sq", "pq"}}, "mAJI",
    "mPQ"}. Classes appearing only in pred get per-class entries (their
    scores are 0) but do not enter the means; classes absent from both
    maps are skipped entirely.
    """
    _paired(gt, pred)
    gt_classes = set(_class_of_instances(gt).values())
    pred_classes = set(_class_of_instances(pred).values())
    per_class = {}
    for c in sorted(gt_classes | pred_classes):
        g_c = _restrict(gt, c)
        p_c = _restrict(pred, c)
        dq, sq, pq = panoptic_quality(g_c, p_c)
        per_class[c] = {"aji": aji(g_c, p_c), "dq": dq, "sq": sq, "pq": pq}
    if gt_classes:
        maji = float(np.mean([per_class[c]["aji"] for c in gt_classes]))
        mpq = float(np.mean([per_class[c]["pq"] for c in gt_classes]))
    else:
        maji = mpq = 1.0 if not pred_classes else 0.0
    return {"per_class": per_class, "mAJI": maji, "mPQ": mpq}


def _classification_counts(gt, pred):
    """Per-class TP/FP/FN under class-agnostic matching, class-aware scoring."""
    gt_cls = _class_of_instances(gt)
    pred_cls = _class_of_instances(pred)
    m = match_instances(gt.instance_ids, pred.instance_ids)
    counts = {c: [0, 0, 0]
              for c in set(gt_cls.values()) | set(pred_cls.values())}
    matched_g = set()
    matched_p = set()
    for gid, pid, _ in m.pairs:
        matched_g.add(gid)
        matched_p.add(pid)
        cg = gt_cls[gid]
        cp = pred_cls[pid]
        if cg == cp:
            counts[cg][0] += 1
        else:
            counts[cg][2] += 1  # gt of class cg lost to a wrong label
            counts[cp][1] += 1  # pred of class cp is a spurious claim
    for gid, c in gt_cls.items():
        if gid not in matched_g:
            counts[c][2] += 1
    for pid, c in pred_cls.items():
        if pid not in matched_p:
            counts[c][1] += 1
    return counts, set(gt_cls.values()), set(pred_cls.values())


def classification_f1(gt, pred):
    """Per-class F1 and its unweighted mean over classes present in gt."""
    _paired(gt, pred)
    counts, gt_classes, pred_classes = _classification_counts(gt, pred)
    f1 = {}
    for c, (tp, fp, fn) in counts.items():
        denom = 2 * tp + fp + fn
        f1[c] = 2 * tp / denom if denom else 1.0
    if gt_classes:
        mf1 = float(np.mean([f1[c] for c in gt_classes]))
    else:
        mf1 = 1.0 if not pred_classes else 0.0
    return {"per_class": f1, "mF1": mf1}


def image_stats(gt, pred):
    """Raw per-image match counts, retained for dataset-level pooling.

    Everything needed to recompute any score later by summation:
    binary AJI numerator/denominator and TP/FP/FN/IoU-sum, the same
    quartet per class, and per-class classification confusion counts.
    """
    g, p = _paired(gt, pred)
    num, den = _aji_counts(g, p)
    tp, fp, fn, iou_sum = _pq_counts(g, p)
    stats = {
        "binary": {"aji_num": num, "aji_den": den, "tp": tp, "fp": fp,
                   "fn": fn, "iou_sum": iou_sum},
        "classes": {},
    }
    cls_counts, gt_classes, pred_classes = _classification_counts(gt, pred)
    for c in sorted(set(cls_counts)):
        g_c = _restrict(gt, c)
        p_c = _restrict(pred, c)
        c_num, c_den = _aji_counts(g_c, p_c)
        c_tp, c_fp, c_fn, c_iou = _pq_counts(g_c, p_c)
        ctp, cfp, cfn = cls_counts[c]
        stats["classes"][int(c)] = {
            "aji_num": c_num, "aji_den": c_den,
            "tp": c_tp, "fp": c_fp, "fn": c_fn, "iou_sum": c_iou,
            "cls_tp": ctp, "cls_fp": cfp, "cls_fn": cfn,
            "gt_present": c in gt_classes,
        }
    return stats


def aggregate_instancewise(per_image_stats):
    """Dataset scores from summed counts (never averages of ratios).

    Splitting the same pixels across more or fewer images cannot change
    the result, and images where a class is absent simply contribute
    nothing for it.
    """
    bin_tot = {"aji_num": 0, "aji_den": 0, "tp": 0, "fp": 0, "fn": 0,
               "iou_sum": 0.0}
    cls_tot = {}
    present = set()
    pred_seen = set()
    for stats in per_image_stats:
        for k in bin_tot:
            bin_tot[k] += stats["binary"][k]
        for c, rec in stats["classes"].items():
            c = int(c)
            tot = cls_tot.setdefault(c, {"aji_num": 0, "aji_den": 0,
                                         "tp": 0, "fp": 0, "fn": 0,
                                         "iou_sum": 0.0, "cls_tp": 0,
                                         "cls_fp": 0, "cls_fn": 0})
            for k in tot:
                tot[k] += rec[k]
            if rec["gt_present"]:
                present.add(c)
            else:
                pred_seen.add(c)
    b_dq, b_sq, b_pq = _pq_scores(bin_tot["tp"], bin_tot["fp"],
                                  bin_tot["fn"], bin_tot["iou_sum"])
    out = {
        "bAJI": (bin_tot["aji_num"] / bin_tot["aji_den"]
                 if bin_tot["aji_den"] else 1.0),
        "bDQ": b_dq, "bSQ": b_sq, "bPQ": b_pq,
        "per_class": {},
    }
    for c, tot in sorted(cls_tot.items()):
        dq, sq, pq = _pq_scores(tot["tp"], tot["fp"], tot["fn"],
                                tot["iou_sum"])
        denom = 2 * tot["cls_tp"] + tot["cls_fp"] + tot["cls_fn"]
        out["per_class"][c] = {
            "AJI": (tot["aji_num"] / tot["aji_den"]
                    if tot["aji_den"] else 1.0),
            "DQ": dq, "SQ": sq, "PQ": pq,
            "F1": 2 * tot["cls_tp"] / denom if denom else 1.0,
        }
    if present:
        out["mAJI"] = float(np.mean([out["per_class"][c]["AJI"]
                                     for c in present]))
        out["mPQ"] = float(np.mean([out["per_class"][c]["PQ"]
                                    for c in present]))
        out["mF1"] = float(np.mean([out["per_class"][c]["F1"]
                                    for c in present]))
    else:
        fallback = 1.0 if not pred_seen else 0.0
        out["mAJI"] = out["mPQ"] = out["mF1"] = fallback
    return out
