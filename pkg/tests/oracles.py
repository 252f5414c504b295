"""Independent reference implementations used to cross-check the package.

Everything here favors directness over speed: explicit pixel sets,
per-element scalar loops, exhaustive pairwise scans. None of it shares
code with the package internals beyond numpy itself.
"""

import math

import numpy as np

NBRS8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


# ---------------------------------------------------------------- growth

def chessboard_contact_oracle(inst, max_iters):
    """Contact sets from exact nearest-instance chessboard distances.

    For every background pixel the distance to each instance is the
    minimum Chebyshev distance to any of its pixels, computed by brute
    broadcasting. A pixel claimed at the minimal distance d <= max_iters
    by >= 2 instances is a contact pixel of them all; additionally, two
    8-adjacent claimed pixels at the same depth whose combined claimant
    set has >= 2 members are both contact pixels of the whole union.
    Returns (depth, contact_sets) where depth is -1 unreached /
    0 sources / d for claimed background.
    """
    inst = np.asarray(inst)
    h, w = inst.shape
    ids = np.unique(inst)
    ids = ids[ids != 0]
    contact = {int(i): set() for i in ids}
    depth = np.where(inst != 0, 0, -1).astype(np.int32)
    if len(ids) == 0:
        return depth, contact

    bg_r, bg_c = np.nonzero(inst == 0)
    dist = np.empty((len(ids), len(bg_r)), dtype=np.int64)
    for k, ident in enumerate(ids):
        ir, ic = np.nonzero(inst == ident)
        dr = np.abs(bg_r[:, None] - ir[None, :])
        dc = np.abs(bg_c[:, None] - ic[None, :])
        dist[k] = np.maximum(dr, dc).min(axis=1)
    dmin = dist.min(axis=0)

    claims = {}
    for j in range(len(bg_r)):
        if dmin[j] > max_iters:
            continue
        p = (int(bg_r[j]), int(bg_c[j]))
        claims[p] = {int(ids[k]) for k in range(len(ids))
                     if dist[k, j] == dmin[j]}
        depth[p] = dmin[j]

    for p, owners in claims.items():
        if len(owners) >= 2:
            for ident in owners:
                contact[ident].add(p)
    for p, owners in claims.items():
        for dr, dc in NBRS8:
            q = (p[0] + dr, p[1] + dc)
            if q not in claims or depth[q] != depth[p]:
                continue
            union = owners | claims[q]
            if len(union) >= 2:
                for ident in union:
                    contact[ident].add(p)
                    contact[ident].add(q)
    return depth, contact


def dilate3_oracle(mask, iterations):
    """Repeated 3x3 binary dilation by explicit neighborhood max."""
    out = np.asarray(mask, dtype=bool).copy()
    h, w = out.shape
    for _ in range(iterations):
        nxt = out.copy()
        for r in range(h):
            for c in range(w):
                if out[r, c]:
                    continue
                for dr, dc in NBRS8:
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < h and 0 <= cc < w and out[rr, cc]:
                        nxt[r, c] = True
                        break
        out = nxt
    return out


# ------------------------------------------------------------- rendering

def paint_oracle(nuclei, offsets, shape, priority):
    """Per-pixel painter's algorithm: the best-priority claimant wins.

    priority maps a nucleus to a sort key; larger keys overwrite
    smaller ones, matching paint order low-to-high.
    """
    h, w = shape
    inst = np.zeros((h, w), dtype=np.int32)
    cls = np.zeros((h, w), dtype=np.int32)
    best = {}
    for nuc, (dr, dc) in zip(nuclei, offsets):
        key = priority(nuc)
        for r, c in nuc.pixels:
            rr, cc = int(r) + int(dr), int(c) + int(dc)
            if not (0 <= rr < h and 0 <= cc < w):
                continue
            if (rr, cc) not in best or key > best[(rr, cc)][0]:
                best[(rr, cc)] = (key, nuc.id, nuc.class_id)
    for (rr, cc), (_, ident, class_id) in best.items():
        inst[rr, cc] = ident
        cls[rr, cc] = class_id
    return inst, cls


# ------------------------------------------------------------- diffusion

def q_sample_scalar(x0, t, eps, sched):
    abar = float(sched.alpha_bar[t - 1])
    flat_x = np.asarray(x0, dtype=np.float64).ravel()
    flat_e = np.asarray(eps, dtype=np.float64).ravel()
    out = np.empty_like(flat_x)
    for i in range(flat_x.size):
        out[i] = math.sqrt(abar) * flat_x[i] + math.sqrt(1.0 - abar) * flat_e[i]
    return out.reshape(np.shape(x0))


def masked_q_sample_scalar(x0, mask, t, eps, sched):
    noised = q_sample_scalar(x0, t, eps, sched)
    x0 = np.asarray(x0, dtype=np.float64)
    out = np.empty_like(noised)
    m = np.broadcast_to(np.asarray(mask, dtype=bool), x0.shape)
    flat_m = m.ravel()
    flat_n = noised.ravel()
    flat_x = x0.ravel()
    flat_o = out.ravel()
    for i in range(flat_x.size):
        flat_o[i] = flat_n[i] if flat_m[i] else flat_x[i]
    return out


def p_step_scalar(x_t, t, eps_hat, sched, z):
    beta = float(sched.beta[t - 1])
    alpha = float(sched.alpha[t - 1])
    abar = float(sched.alpha_bar[t - 1])
    sigma = math.sqrt(float(sched.sigma2[t - 1]))
    flat_x = np.asarray(x_t, dtype=np.float64).ravel()
    flat_e = np.asarray(eps_hat, dtype=np.float64).ravel()
    flat_z = (np.zeros_like(flat_x) if z is None
              else np.asarray(z, dtype=np.float64).ravel())
    out = np.empty_like(flat_x)
    for i in range(flat_x.size):
        mu = (flat_x[i] - beta / math.sqrt(1.0 - abar) * flat_e[i]) \
            / math.sqrt(alpha)
        out[i] = mu if t == 1 else mu + sigma * flat_z[i]
    return out.reshape(np.shape(x_t))


def repaint_scalar(x_prev, x0, mask):
    x_prev = np.asarray(x_prev, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    m = np.broadcast_to(np.asarray(mask, dtype=bool), x0.shape)
    out = np.empty_like(x0)
    flat_p, flat_x, flat_m, flat_o = (x_prev.ravel(), x0.ravel(),
                                      m.ravel(), out.ravel())
    for i in range(flat_x.size):
        flat_o[i] = flat_p[i] if flat_m[i] else flat_x[i]
    return out


def loss_scalar(eps, eps_hat, mask, complement_weight=0.0):
    eps = np.asarray(eps, dtype=np.float64)
    m = np.broadcast_to(np.asarray(mask, dtype=bool), eps.shape)
    flat_e = eps.ravel()
    flat_h = np.asarray(eps_hat, dtype=np.float64).ravel()
    flat_m = m.ravel()
    acc = 0.0
    for i in range(flat_e.size):
        w = 1.0 if flat_m[i] else complement_weight
        acc += (w * (flat_e[i] - flat_h[i])) ** 2
    return acc / flat_e.size


# --------------------------------------------------------------- metrics

def _pixel_sets(arr):
    arr = np.asarray(arr)
    out = {}
    for ident in np.unique(arr):
        if ident == 0:
            continue
        rs, cs = np.nonzero(arr == ident)
        out[int(ident)] = set(zip(rs.tolist(), cs.tolist()))
    return out


def aji_oracle(gt, pred):
    """Aggregated Jaccard Index straight from pixel sets.

    Each reference instance (ascending ID) claims the prediction with
    the highest IoU among those overlapping it — compared as exact
    fractions, lower prediction ID on ties, reuse permitted. Unclaimed
    predictions and overlap-free references pad the denominator.
    """
    gt_sets = _pixel_sets(gt)
    pred_sets = _pixel_sets(pred)
    if not gt_sets and not pred_sets:
        return 1.0
    num = 0
    den = 0
    used = set()
    for g in sorted(gt_sets):
        best = None  # (pred_id, inter, union)
        for p in sorted(pred_sets):
            inter = len(gt_sets[g] & pred_sets[p])
            if inter == 0:
                continue
            union = len(gt_sets[g] | pred_sets[p])
            if best is None or inter * best[2] > best[1] * union:
                best = (p, inter, union)
        if best is None:
            den += len(gt_sets[g])
        else:
            num += best[1]
            den += best[2]
            used.add(best[0])
    for p, pix in pred_sets.items():
        if p not in used:
            den += len(pix)
    return num / den if den else 1.0


def pq_oracle(gt, pred):
    """(DQ, SQ, PQ) by exhaustive IoU > 1/2 matching on pixel sets."""
    gt_sets = _pixel_sets(gt)
    pred_sets = _pixel_sets(pred)
    if not gt_sets and not pred_sets:
        return 1.0, 1.0, 1.0
    pairs = []
    for g, gs in gt_sets.items():
        for p, ps in pred_sets.items():
            inter = len(gs & ps)
            union = len(gs | ps)
            if union and 2 * inter > union:
                pairs.append((g, p, inter / union))
    tp = len(pairs)
    fp = len(pred_sets) - tp
    fn = len(gt_sets) - tp
    dq = tp / (tp + 0.5 * fp + 0.5 * fn)
    sq = sum(iou for _, _, iou in pairs) / tp if tp else 0.0
    return dq, sq, dq * sq


def matching_oracle(gt, pred):
    """All (gt_id, pred_id, iou) pairs with IoU > 1/2, exhaustively."""
    gt_sets = _pixel_sets(gt)
    pred_sets = _pixel_sets(pred)
    pairs = []
    for g, gs in sorted(gt_sets.items()):
        for p, ps in sorted(pred_sets.items()):
            inter = len(gs & ps)
            union = len(gs | ps)
            if union and 2 * inter > union:
                pairs.append((g, p, inter / union))
    return pairs


def f1_oracle(gt_label, pred_label):
    """Per-class F1 from exhaustive confusion counts.

    gt_label/pred_label are label map objects with instance_ids and
    class_ids; matching is class-agnostic at IoU > 1/2, then each match
    either confirms a class (TP) or miscredits both classes involved.
    """
    pairs = matching_oracle(gt_label.instance_ids, pred_label.instance_ids)

    def classes(label):
        out = {}
        inst = label.instance_ids
        for ident in np.unique(inst):
            if ident == 0:
                continue
            out[int(ident)] = int(label.class_ids[inst == ident][0])
        return out

    gt_cls = classes(gt_label)
    pred_cls = classes(pred_label)
    all_classes = set(gt_cls.values()) | set(pred_cls.values())
    tp = {c: 0 for c in all_classes}
    fp = {c: 0 for c in all_classes}
    fn = {c: 0 for c in all_classes}
    matched_g = {g for g, _, _ in pairs}
    matched_p = {p for _, p, _ in pairs}
    for g, p, _ in pairs:
        if gt_cls[g] == pred_cls[p]:
            tp[gt_cls[g]] += 1
        else:
            fn[gt_cls[g]] += 1
            fp[pred_cls[p]] += 1
    for g, c in gt_cls.items():
        if g not in matched_g:
            fn[c] += 1
    for p, c in pred_cls.items():
        if p not in matched_p:
            fp[c] += 1
    f1 = {}
    for c in all_classes:
        denom = 2 * tp[c] + fp[c] + fn[c]
        f1[c] = 2 * tp[c] / denom if denom else 1.0
    present = set(gt_cls.values())
    if present:
        mf1 = sum(f1[c] for c in present) / len(present)
    else:
        mf1 = 1.0 if not pred_cls else 0.0
    return f1, mf1


# ----------------------------------------------------------- map making

def random_label_arrays(rng, h, w, n_instances, n_classes=3, blob=3):
    """Random blobby instance/class arrays (instances may be split)."""
    inst = np.zeros((h, w), dtype=np.int32)
    cls = np.zeros((h, w), dtype=np.int32)
    for ident in range(1, n_instances + 1):
        k = int(rng.integers(1, blob + 1))
        class_id = int(rng.integers(1, n_classes + 1))
        for _ in range(k):
            r = int(rng.integers(0, h))
            c = int(rng.integers(0, w))
            rr = slice(max(0, r - 1), min(h, r + int(rng.integers(1, 3))))
            cc = slice(max(0, c - 1), min(w, c + int(rng.integers(1, 3))))
            inst[rr, cc] = ident
            cls[rr, cc] = class_id
    return inst, cls
