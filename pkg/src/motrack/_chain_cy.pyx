# cython: boundscheck=False, wraparound=False, initializedcheck=False, language_level=3
"""Compiled sampling kernel.

Mirrors ``_chain_py.run_chain_kernel`` operation for operation so the two
backends produce bit-identical chains from the same random values.  Keep the
arithmetic order in the two files in sync when editing either.
"""

from libc.math cimport exp, log
from libc.stdint cimport int64_t
from libc.stdlib cimport free, malloc

cdef double TWO_PI = 6.283185307179586


cdef inline double _iou_c(double acx, double acy, double aw, double ah,
                          double bcx, double bcy, double bw, double bh) noexcept nogil:
    cdef double al = acx - 0.5 * aw
    cdef double at = acy - 0.5 * ah
    cdef double ar = al + aw
    cdef double ab = at + ah
    cdef double bl = bcx - 0.5 * bw
    cdef double bt = bcy - 0.5 * bh
    cdef double br = bl + bw
    cdef double bb = bt + bh
    cdef double ix = (ar if ar < br else br) - (al if al > bl else bl)
    cdef double iy
    cdef double inter
    if ix <= 0.0:
        return 0.0
    iy = (ab if ab < bb else bb) - (at if at > bt else bt)
    if iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (aw * ah + bw * bh - inter)


cdef inline double _fused_at(int i, double cx, double cy, double w, double h,
                             int m,
                             double[:, ::1] db, double[::1] dc,
                             unsigned char[:, ::1] ok, double[:, ::1] af,
                             double[:, ::1] pb,
                             double gate_iou, double det_floor,
                             double fuse_floor, double one_minus_floor,
                             double inv_sigma_m_sq,
                             double w_det, double w_app, double w_mot) noexcept nogil:
    cdef double best = 0.0
    cdef int best_j = -1
    cdef int j
    cdef double v, sc, l_det, l_app, gap, l_mot
    for j in range(m):
        if ok[i, j] == 0:
            continue
        v = _iou_c(cx, cy, w, h, db[j, 0], db[j, 1], db[j, 2], db[j, 3])
        if v >= gate_iou:
            sc = dc[j] * v
            if sc > best:
                best = sc
                best_j = j
    l_det = det_floor + (1.0 - det_floor) * best
    l_app = af[i, best_j] if best_j >= 0 else 1.0
    gap = 1.0 - _iou_c(cx, cy, w, h, pb[i, 0], pb[i, 1], pb[i, 2], pb[i, 3])
    l_mot = exp(-(gap * gap) * inv_sigma_m_sq)
    return exp(
        w_det * log(fuse_floor + one_minus_floor * l_det)
        + w_app * log(fuse_floor + one_minus_floor * l_app)
        + w_mot * log(fuse_floor + one_minus_floor * l_mot)
    )


cdef inline double _mix_at(int i, double cx, double cy, double lw, double lh,
                           int n_prev,
                           double[:, :, ::1] pp,
                           double[:, ::1] plw, double[:, ::1] plh,
                           double inv_sp, double inv_ss,
                           double mix_scale) noexcept nogil:
    cdef double acc = 0.0
    cdef int s
    cdef double dx, dy, dw, dh
    for s in range(n_prev):
        dx = (cx - pp[s, i, 0]) * inv_sp
        dy = (cy - pp[s, i, 1]) * inv_sp
        dw = (lw - plw[s, i]) * inv_ss
        dh = (lh - plh[s, i]) * inv_ss
        acc += exp(-0.5 * (dx * dx + dy * dy + dw * dw + dh * dh))
    return acc * mix_scale


cdef inline double _prior_at(int i, double cx, double cy, double lw, double lh,
                             double[:, ::1] pb,
                             double *pb_lw, double *pb_lh,
                             double inv_sp, double inv_ss,
                             double norm_m) noexcept nogil:
    cdef double dx = (cx - pb[i, 0]) * inv_sp
    cdef double dy = (cy - pb[i, 1]) * inv_sp
    cdef double dw = (lw - pb_lw[i]) * inv_ss
    cdef double dh = (lh - pb_lh[i]) * inv_ss
    return norm_m * exp(-0.5 * (dx * dx + dy * dy + dw * dw + dh * dh))


cdef inline double _data_at(int j, double cx, double cy, double lw, double lh,
                            double[:, ::1] db,
                            double[::1] dlw, double[::1] dlh,
                            double inv_sd, double inv_sds,
                            double norm_d) noexcept nogil:
    cdef double dx = (cx - db[j, 0]) * inv_sd
    cdef double dy = (cy - db[j, 1]) * inv_sd
    cdef double dw = (lw - dlw[j]) * inv_sds
    cdef double dh = (lh - dlh[j]) * inv_sds
    return norm_d * exp(-0.5 * (dx * dx + dy * dy + dw * dw + dh * dh))


def run_chain_kernel(double[:, ::1] boxes,
                     double[:, :, ::1] prev_pred,
                     double[:, ::1] prev_log_w,
                     double[:, ::1] prev_log_h,
                     double[:, ::1] det_boxes,
                     double[::1] det_conf,
                     double[::1] det_log_w,
                     double[::1] det_log_h,
                     unsigned char[:, ::1] det_ok,
                     double[:, ::1] app_factor,
                     double[:, ::1] pred_box,
                     int64_t[::1] assoc,
                     double[:, ::1] u,
                     double[:, ::1] z,
                     int burn_in,
                     double lambda_motion,
                     double sigma_pos,
                     double sigma_size,
                     double sigma_data,
                     double sigma_data_size,
                     double gate_iou,
                     double det_floor,
                     double fuse_floor,
                     double inv_sigma_m_sq,
                     double w_det,
                     double w_app,
                     double w_mot,
                     double[:, :, ::1] out_samples,
                     double[:, ::1] out_lik):
    """See ``_chain_py.run_chain_kernel``; same contract, same arithmetic."""
    cdef int n = boxes.shape[0]
    cdef int n_prev = prev_pred.shape[0]
    cdef int m = det_boxes.shape[0]
    cdef int iters = u.shape[0]

    cdef double lambda_data = 1.0 - lambda_motion
    cdef double inv_sp = 1.0 / sigma_pos
    cdef double inv_ss = 1.0 / sigma_size
    cdef double inv_sd = 1.0 / sigma_data
    cdef double inv_sds = 1.0 / sigma_data_size
    cdef double norm_m = 1.0 / (TWO_PI * TWO_PI * sigma_pos * sigma_pos * sigma_size * sigma_size)
    cdef double norm_d = 1.0 / (
        TWO_PI * TWO_PI * sigma_data * sigma_data * sigma_data_size * sigma_data_size
    )
    cdef double mix_scale = norm_m / n_prev
    cdef double one_minus_floor = 1.0 - fuse_floor

    cdef double *bx = <double *> malloc(n * 4 * sizeof(double))
    cdef double *l_cur = <double *> malloc(n * sizeof(double))
    cdef double *m_cur = <double *> malloc(n * sizeof(double))
    cdef double *x_cur = <double *> malloc(n * sizeof(double))
    cdef double *cur_lw = <double *> malloc(n * sizeof(double))
    cdef double *cur_lh = <double *> malloc(n * sizeof(double))
    cdef double *pb_lw = <double *> malloc(n * sizeof(double))
    cdef double *pb_lh = <double *> malloc(n * sizeof(double))
    if (bx == NULL or l_cur == NULL or m_cur == NULL or x_cur == NULL
            or cur_lw == NULL or cur_lh == NULL or pb_lw == NULL or pb_lh == NULL):
        free(bx); free(l_cur); free(m_cur); free(x_cur)
        free(cur_lw); free(cur_lh); free(pb_lw); free(pb_lh)
        raise MemoryError()

    cdef int accepted = 0
    cdef int it, i, k, s, c
    cdef int64_t j
    cdef double ccx, ccy, ccw, cch, c_lw, c_lh
    cdef double l_cand, m_cand, x_cand, q_fwd, q_rev, num, den

    try:
        with nogil:
            for i in range(n):
                pb_lw[i] = log(pred_box[i, 2])
                pb_lh[i] = log(pred_box[i, 3])
            for i in range(n):
                bx[4 * i + 0] = boxes[i, 0]
                bx[4 * i + 1] = boxes[i, 1]
                bx[4 * i + 2] = boxes[i, 2]
                bx[4 * i + 3] = boxes[i, 3]
                cur_lw[i] = log(bx[4 * i + 2])
                cur_lh[i] = log(bx[4 * i + 3])
                l_cur[i] = _fused_at(i, bx[4 * i + 0], bx[4 * i + 1], bx[4 * i + 2], bx[4 * i + 3],
                                     m, det_boxes, det_conf, det_ok, app_factor, pred_box,
                                     gate_iou, det_floor, fuse_floor, one_minus_floor,
                                     inv_sigma_m_sq, w_det, w_app, w_mot)
                m_cur[i] = _prior_at(i, bx[4 * i + 0], bx[4 * i + 1], cur_lw[i], cur_lh[i],
                                     pred_box, pb_lw, pb_lh, inv_sp, inv_ss, norm_m)
                x_cur[i] = _mix_at(i, bx[4 * i + 0], bx[4 * i + 1], cur_lw[i], cur_lh[i],
                                   n_prev, prev_pred, prev_log_w, prev_log_h,
                                   inv_sp, inv_ss, mix_scale)

            for it in range(iters):
                i = <int> (u[it, 0] * n)
                if i >= n:
                    i = n - 1
                j = assoc[i]
                if j >= 0 and u[it, 1] >= lambda_motion:
                    ccx = det_boxes[j, 0] + z[it, 0] * sigma_data
                    ccy = det_boxes[j, 1] + z[it, 1] * sigma_data
                    ccw = det_boxes[j, 2] * exp(z[it, 2] * sigma_data_size)
                    cch = det_boxes[j, 3] * exp(z[it, 3] * sigma_data_size)
                else:
                    s = <int> (u[it, 2] * n_prev)
                    if s >= n_prev:
                        s = n_prev - 1
                    ccx = prev_pred[s, i, 0] + z[it, 0] * sigma_pos
                    ccy = prev_pred[s, i, 1] + z[it, 1] * sigma_pos
                    ccw = prev_pred[s, i, 2] * exp(z[it, 2] * sigma_size)
                    cch = prev_pred[s, i, 3] * exp(z[it, 3] * sigma_size)
                c_lw = log(ccw)
                c_lh = log(cch)
                l_cand = _fused_at(i, ccx, ccy, ccw, cch,
                                   m, det_boxes, det_conf, det_ok, app_factor, pred_box,
                                   gate_iou, det_floor, fuse_floor, one_minus_floor,
                                   inv_sigma_m_sq, w_det, w_app, w_mot)
                m_cand = _prior_at(i, ccx, ccy, c_lw, c_lh,
                                   pred_box, pb_lw, pb_lh, inv_sp, inv_ss, norm_m)
                x_cand = _mix_at(i, ccx, ccy, c_lw, c_lh,
                                 n_prev, prev_pred, prev_log_w, prev_log_h,
                                 inv_sp, inv_ss, mix_scale)
                if j >= 0:
                    q_fwd = lambda_motion * x_cand + lambda_data * _data_at(
                        <int> j, ccx, ccy, c_lw, c_lh,
                        det_boxes, det_log_w, det_log_h, inv_sd, inv_sds, norm_d)
                    q_rev = lambda_motion * x_cur[i] + lambda_data * _data_at(
                        <int> j, bx[4 * i + 0], bx[4 * i + 1], cur_lw[i], cur_lh[i],
                        det_boxes, det_log_w, det_log_h, inv_sd, inv_sds, norm_d)
                else:
                    q_fwd = x_cand
                    q_rev = x_cur[i]
                num = l_cand * m_cand * q_rev
                den = l_cur[i] * m_cur[i] * q_fwd
                if u[it, 3] * den < num:
                    bx[4 * i + 0] = ccx
                    bx[4 * i + 1] = ccy
                    bx[4 * i + 2] = ccw
                    bx[4 * i + 3] = cch
                    cur_lw[i] = c_lw
                    cur_lh[i] = c_lh
                    l_cur[i] = l_cand
                    m_cur[i] = m_cand
                    x_cur[i] = x_cand
                    accepted += 1
                if it >= burn_in:
                    k = it - burn_in
                    for c in range(n):
                        out_samples[k, c, 0] = bx[4 * c + 0]
                        out_samples[k, c, 1] = bx[4 * c + 1]
                        out_samples[k, c, 2] = bx[4 * c + 2]
                        out_samples[k, c, 3] = bx[4 * c + 3]
                        out_lik[k, c] = l_cur[c]
    finally:
        free(bx)
        free(l_cur)
        free(m_cur)
        free(x_cur)
        free(cur_lw)
        free(cur_lh)
        free(pb_lw)
        free(pb_lh)
    return accepted
