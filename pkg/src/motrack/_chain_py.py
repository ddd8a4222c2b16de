"""Reference sampling kernel in plain Python.

The compiled twin (``_chain_cy``) mirrors this file operation for operation
so both backends produce bit-identical chains from the same random values.
Keep the arithmetic order in the two files in sync when editing either.
"""

from math import exp, log

TWO_PI = 6.283185307179586


def run_chain_kernel(
    boxes,
    prev_pred,
    prev_log_w,
    prev_log_h,
    det_boxes,
    det_conf,
    det_log_w,
    det_log_h,
    det_ok,
    app_factor,
    pred_box,
    assoc,
    u,
    z,
    burn_in,
    lambda_motion,
    sigma_pos,
    sigma_size,
    sigma_data,
    sigma_data_size,
    gate_iou,
    det_floor,
    fuse_floor,
    inv_sigma_m_sq,
    w_det,
    w_app,
    w_mot,
    out_samples,
    out_lik,
):
    """Run burn_in + N one-object-at-a-time proposal/accept iterations.

    Boxes are (cx, cy, w, h) rows.  ``u`` columns: object pick, mixture
    branch, previous-sample pick, accept draw.  ``z`` columns: center x/y
    and log-size w/h perturbations.  Retained states and their per-object
    fused likelihoods are written to ``out_samples`` / ``out_lik``; returns
    the number of accepted moves.
    """
    n = boxes.shape[0]
    n_prev = prev_pred.shape[0]
    m = det_boxes.shape[0]
    iters = u.shape[0]

    bx = [list(row) for row in boxes.tolist()]
    pp = prev_pred.tolist()
    plw = prev_log_w.tolist()
    plh = prev_log_h.tolist()
    db = det_boxes.tolist()
    dc = det_conf.tolist()
    dlw = det_log_w.tolist()
    dlh = det_log_h.tolist()
    ok = det_ok.tolist()
    af = app_factor.tolist()
    pb = pred_box.tolist()
    ai = assoc.tolist()
    uu = u.tolist()
    zz = z.tolist()

    lambda_data = 1.0 - lambda_motion
    inv_sp = 1.0 / sigma_pos
    inv_ss = 1.0 / sigma_size
    inv_sd = 1.0 / sigma_data
    inv_sds = 1.0 / sigma_data_size
    norm_m = 1.0 / (TWO_PI * TWO_PI * sigma_pos * sigma_pos * sigma_size * sigma_size)
    norm_d = 1.0 / (
        TWO_PI * TWO_PI * sigma_data * sigma_data * sigma_data_size * sigma_data_size
    )
    mix_scale = norm_m / n_prev
    one_minus_floor = 1.0 - fuse_floor

    def iou_c(acx, acy, aw, ah, bcx, bcy, bw, bh):
        al = acx - 0.5 * aw
        at = acy - 0.5 * ah
        ar = al + aw
        ab = at + ah
        bl = bcx - 0.5 * bw
        bt = bcy - 0.5 * bh
        br = bl + bw
        bb = bt + bh
        ix = (ar if ar < br else br) - (al if al > bl else bl)
        if ix <= 0.0:
            return 0.0
        iy = (ab if ab < bb else bb) - (at if at > bt else bt)
        if iy <= 0.0:
            return 0.0
        inter = ix * iy
        return inter / (aw * ah + bw * bh - inter)

    def fused_at(i, cx, cy, w, h):
        ok_i = ok[i]
        af_i = af[i]
        best = 0.0
        best_j = -1
        for j in range(m):
            if ok_i[j] == 0:
                continue
            row = db[j]
            v = iou_c(cx, cy, w, h, row[0], row[1], row[2], row[3])
            if v >= gate_iou:
                sc = dc[j] * v
                if sc > best:
                    best = sc
                    best_j = j
        l_det = det_floor + (1.0 - det_floor) * best
        l_app = af_i[best_j] if best_j >= 0 else 1.0
        pb_i = pb[i]
        gap = 1.0 - iou_c(cx, cy, w, h, pb_i[0], pb_i[1], pb_i[2], pb_i[3])
        l_mot = exp(-(gap * gap) * inv_sigma_m_sq)
        return exp(
            w_det * log(fuse_floor + one_minus_floor * l_det)
            + w_app * log(fuse_floor + one_minus_floor * l_app)
            + w_mot * log(fuse_floor + one_minus_floor * l_mot)
        )

    def mix_at(i, cx, cy, lw, lh):
        acc = 0.0
        for s in range(n_prev):
            row = pp[s][i]
            dx = (cx - row[0]) * inv_sp
            dy = (cy - row[1]) * inv_sp
            dw = (lw - plw[s][i]) * inv_ss
            dh = (lh - plh[s][i]) * inv_ss
            acc += exp(-0.5 * (dx * dx + dy * dy + dw * dw + dh * dh))
        return acc * mix_scale

    def prior_at(i, cx, cy, lw, lh):
        pb_i = pb[i]
        dx = (cx - pb_i[0]) * inv_sp
        dy = (cy - pb_i[1]) * inv_sp
        dw = (lw - pb_lw[i]) * inv_ss
        dh = (lh - pb_lh[i]) * inv_ss
        return norm_m * exp(-0.5 * (dx * dx + dy * dy + dw * dw + dh * dh))

    def data_at(j, cx, cy, lw, lh):
        row = db[j]
        dx = (cx - row[0]) * inv_sd
        dy = (cy - row[1]) * inv_sd
        dw = (lw - dlw[j]) * inv_sds
        dh = (lh - dlh[j]) * inv_sds
        return norm_d * exp(-0.5 * (dx * dx + dy * dy + dw * dw + dh * dh))

    pb_lw = [log(row[2]) for row in pb]
    pb_lh = [log(row[3]) for row in pb]

    l_cur = [0.0] * n
    m_cur = [0.0] * n
    x_cur = [0.0] * n
    cur_lw = [0.0] * n
    cur_lh = [0.0] * n
    for i in range(n):
        row = bx[i]
        cur_lw[i] = log(row[2])
        cur_lh[i] = log(row[3])
        l_cur[i] = fused_at(i, row[0], row[1], row[2], row[3])
        m_cur[i] = prior_at(i, row[0], row[1], cur_lw[i], cur_lh[i])
        x_cur[i] = mix_at(i, row[0], row[1], cur_lw[i], cur_lh[i])

    samples_out = []
    lik_out = []
    accepted = 0
    for it in range(iters):
        u_it = uu[it]
        z_it = zz[it]
        i = int(u_it[0] * n)
        if i >= n:
            i = n - 1
        j = ai[i]
        if j >= 0 and u_it[1] >= lambda_motion:
            row = db[j]
            ccx = row[0] + z_it[0] * sigma_data
            ccy = row[1] + z_it[1] * sigma_data
            ccw = row[2] * exp(z_it[2] * sigma_data_size)
            cch = row[3] * exp(z_it[3] * sigma_data_size)
        else:
            s = int(u_it[2] * n_prev)
            if s >= n_prev:
                s = n_prev - 1
            row = pp[s][i]
            ccx = row[0] + z_it[0] * sigma_pos
            ccy = row[1] + z_it[1] * sigma_pos
            ccw = row[2] * exp(z_it[2] * sigma_size)
            cch = row[3] * exp(z_it[3] * sigma_size)
        c_lw = log(ccw)
        c_lh = log(cch)
        l_cand = fused_at(i, ccx, ccy, ccw, cch)
        m_cand = prior_at(i, ccx, ccy, c_lw, c_lh)
        x_cand = mix_at(i, ccx, ccy, c_lw, c_lh)
        if j >= 0:
            q_fwd = lambda_motion * x_cand + lambda_data * data_at(j, ccx, ccy, c_lw, c_lh)
            q_rev = lambda_motion * x_cur[i] + lambda_data * data_at(
                j, bx[i][0], bx[i][1], cur_lw[i], cur_lh[i]
            )
        else:
            q_fwd = x_cand
            q_rev = x_cur[i]
        num = l_cand * m_cand * q_rev
        den = l_cur[i] * m_cur[i] * q_fwd
        if u_it[3] * den < num:
            row = bx[i]
            row[0] = ccx
            row[1] = ccy
            row[2] = ccw
            row[3] = cch
            cur_lw[i] = c_lw
            cur_lh[i] = c_lh
            l_cur[i] = l_cand
            m_cur[i] = m_cand
            x_cur[i] = x_cand
            accepted += 1
        if it >= burn_in:
            samples_out.append([r[:] for r in bx])
            lik_out.append(l_cur[:])

    out_samples[...] = samples_out
    out_lik[...] = lik_out
    return accepted
